// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance [--only 1,2,...] [--quick]
//
// --quick shrinks the training budgets for a smoke run; its verdicts on the
// training criteria are not meaningful.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "routekg/cli/app.hpp"
#include "routekg/cli/checkpoint.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/eval/metrics.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/route/spanning.hpp"
#include "routekg/train/gradcheck.hpp"
#include "routekg/train/trainer.hpp"
#include "support.hpp"

using namespace routekg;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

// Synthetic corpus shared by the training criteria.
constexpr int kSide = 20;
constexpr double kJitter = 0.45;
constexpr std::size_t kRoutes = 5000;
constexpr double kSigma = 0.1;
constexpr std::uint64_t kDataSeed = 1;

struct Budget {
  std::size_t iterations = 2500;
  std::size_t ablation_iterations = 1500;
  std::size_t determinism_iterations = 60;
};

train::TrainConfig base_config(Scenario sc, std::uint64_t seed, const Budget& b) {
  train::TrainConfig c;
  c.scenario = sc;
  c.seed = seed;
  c.lr = 1e-2;
  c.batch_size = 128;
  c.max_iterations = b.iterations;
  c.eval_every = 100;
  c.val_limit = 300;
  c.patience = 1000;
  c.window_stride = 1;
  return c;
}

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void gradients() {
  const auto t0 = clk::now();
  train::GradCheckSettings s;
  s.instances = 5;
  s.seed = 1;
  const auto checks = train::check_all_gradients(s);
  std::set<std::string> losses;
  std::map<std::string, std::size_t> instances;
  double worst = 0;
  bool ok = true;
  for (const auto& c : checks) {
    losses.insert(c.loss);
    ++instances[c.loss];
    worst = std::max(worst, c.report.max_rel_error);
    ok = ok && c.report.ok() && c.report.max_rel_error < 1e-4 && c.report.checked > 0;
  }
  for (const auto& [name, n] : instances) ok = ok && n >= 5;
  const double secs = seconds_since(t0);
  ok = ok && losses.size() == 5 && secs < 120;
  report(1, ok, fmt("gradients: %zu losses x %zu instances, max rel error %.2e, %.1fs", losses.size(),
                    instances.empty() ? std::size_t{0} : instances.begin()->second, worst, secs));
}

void spanning() {
  const auto t0 = clk::now();
  Rng rng = make_stream(2, "acceptance-spanning");
  int compared = 0, mismatches = 0, candidates = 0;
  while (compared < 100) {
    const auto net = testing::random_network(rng, 4 + static_cast<int>(uniform_index(rng, 27)));
    if (net.num_edges() == 0) continue;
    const geo::NaeMatrix A(net);
    const int n = 1 + static_cast<int>(uniform_index(rng, 3));
    const int steps = 1 + static_cast<int>(uniform_index(rng, 5));
    int leaves = 1;
    for (int s = 0; s < steps; ++s) leaves *= n;
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::min(leaves, 10))));
    std::vector<kg::StepDistributions> ds;
    std::vector<NodeId> starts;
    std::vector<EdgeId> ins;
    std::vector<std::vector<Route>> expect;
    bool short_any = false;
    for (int b = 0; b < 16; ++b) {
      const auto in = static_cast<EdgeId>(uniform_index(rng, net.num_edges()));
      ds.push_back(testing::random_dists(rng, net.num_edges(), steps));
      starts.push_back(net.edge(in).end_node);
      ins.push_back(in);
      expect.push_back(oracle::spanning(ds.back(), net, starts.back(), in, n, k));
      short_any = short_any || expect.back().size() < static_cast<std::size_t>(k);
    }
    if (short_any) continue;  // fewer distinct leaves than K
    const auto batch = route::spanning_route_batch(ds, starts, ins, A, net, n, k);
    for (std::size_t b = 0; b < ds.size(); ++b) {
      const auto one = route::spanning_route(ds[b], starts[b], ins[b], A, net, n, k);
      if (one.routes != expect[b] || batch[b].routes != one.routes || batch[b].dead_end != one.dead_end) ++mismatches;
      candidates += static_cast<int>(one.routes.size());
    }
    ++compared;
  }
  const double secs = seconds_since(t0);
  report(2, mismatches == 0 && secs < 60,
         fmt("spanning: %d networks, %d candidates, %d mismatches, %.1fs", compared, candidates, mismatches, secs));
}

void metrics() {
  Rng rng = make_stream(3, "acceptance-metrics");
  int recall_mismatch = 0;
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 40);
    const std::size_t len = 1 + uniform_index(rng, 6);
    const std::size_t alphabet = 2 + uniform_index(rng, 3);
    std::vector<std::vector<Route>> preds(n);
    std::vector<Route> truths(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < len; ++s) truths[i].push_back(static_cast<EdgeId>(uniform_index(rng, alphabet)));
      for (int k = 0; k < 10; ++k) {
        Route r;
        for (std::size_t s = 0; s < len; ++s) r.push_back(static_cast<EdgeId>(uniform_index(rng, alphabet)));
        preds[i].push_back(uniform01(rng) < 0.15 ? truths[i] : r);
      }
    }
    const auto got = eval::compute_metrics(preds, truths);
    const auto want = oracle::metrics(preds, truths, {1, 5, 10});
    for (int k : {1, 5, 10}) {
      if (got.route_at(k) != want.route.at(k)) ++recall_mismatch;
      worst = std::max(worst, std::abs(got.link_at(k) - want.link.at(k)));
      worst = std::max(worst, std::abs(got.mrr_at(k) - want.mrr.at(k)));
    }
    std::vector<double> est(30), tru(30);
    for (std::size_t i = 0; i < 30; ++i) {
      est[i] = uniform01(rng) < 0.3 ? 0.0 : static_cast<double>(uniform_index(rng, 50));
      tru[i] = uniform01(rng) < 0.3 ? 0.0 : static_cast<double>(uniform_index(rng, 50));
    }
    const auto fg = eval::flow_metrics(est, tru);
    const auto fw = oracle::flow(est, tru);
    worst = std::max({worst, std::abs(fg.mae - fw.mae), std::abs(fg.rmse - fw.rmse), std::abs(fg.r2 - fw.r2)});
  }
  report(3, recall_mismatch == 0 && worst < 1e-9,
         fmt("metrics: 200 fixtures, %d route recall mismatches, max real-valued error %.1e", recall_mismatch, worst));
}

struct Corpus {
  geo::RoadNetwork net;
  geo::DirectionMatrix D;
  geo::NaeMatrix A;
  std::vector<Route> routes;

  Corpus()
      : net(testing::grid(kSide, kDataSeed, kJitter)), D(net, geo::kDefaultDirections), A(net) {
    corpus::RouteGenOptions g;
    g.count = kRoutes;
    g.sigma = kSigma;
    g.min_len = 15;
    g.seed = kDataSeed;
    routes = corpus::generate_routes(net, g);
  }

  corpus::RouteCorpus split(const train::TrainConfig& c) const {
    corpus::SplitOptions so;
    so.observed = c.observed;
    so.future = c.future;
    so.seed = c.seed;
    so.window_stride = c.window_stride;
    return corpus::split_corpus(routes, D, so).corpus;
  }
  train::Context ctx() const { return {net, D, A}; }
};

void triplets(const Corpus& data) {
  const auto c = base_config(Scenario::Goal, 1, {});
  const auto corpus = data.split(c);
  std::vector<Route> observed;
  for (std::size_t i : corpus.train) observed.push_back(corpus.samples[i].observed);
  const kg::TripletSampler sampler(data.net, data.D, observed, c.future);
  const oracle::Predicates truth{data.net, data.D, observed, c.future};
  Rng rng = make_stream(4, "acceptance-triplets");
  std::string detail = "triplets:";
  bool ok = true;
  for (kg::Family f : kg::kFamilies) {
    const auto batch = sampler.sample(f, 10000, rng);
    std::size_t bad_pos = 0, bad_neg = 0;
    for (const auto& t : batch.positives) bad_pos += !truth.holds(t);
    for (const auto& t : batch.negatives) bad_neg += truth.holds(t);
    ok = ok && bad_pos == 0 && bad_neg == 0 && batch.positives.size() == 10000 && batch.negatives.size() == 10000;
    detail += fmt(" %s %zu/%zu bad", std::string(kg::family_name(f)).c_str(), bad_pos, bad_neg);
  }
  report(4, ok, detail + " (positives/negatives of 10000 each)");
}

struct HyperplaneWatch {
  double worst = 0;
  std::size_t iterations = 0;

  train::Observer observer() {
    return [this](std::size_t, const train::Model& m) {
      ++iterations;
      for (const auto& h : m.kg.store.hyperplane) {
        for (std::size_t r = 0; r < h.rows; ++r) {
          double n2 = 0;
          for (double v : h.row(r)) n2 += v * v;
          worst = std::max(worst, std::abs(std::sqrt(n2) - 1.0));
        }
      }
    };
  }
};

struct Trained {
  train::Model model;
  corpus::RouteCorpus corpus;
  double seconds = 0;
};

Trained fit(const Corpus& data, const train::TrainConfig& c, HyperplaneWatch& watch) {
  const auto t0 = clk::now();
  Trained t;
  t.corpus = data.split(c);
  t.model = train::train(t.corpus, data.ctx(), c, watch.observer()).model;
  t.seconds = seconds_since(t0);
  return t;
}

eval::EvalReport test_report(const Corpus& data, const Trained& t, bool refine) {
  auto o = train::predict_options(t.model.config);
  o.refine = refine;
  return train::evaluate(t.model, data.ctx(), t.corpus, t.corpus.test, o);
}

void scenarios(const Corpus& data, const Budget& b, HyperplaneWatch& watch, std::map<Scenario, Trained>& out) {
  double secs = 0;
  std::map<Scenario, double> r10;
  for (Scenario sc : {Scenario::NoGoal, Scenario::GoalD, Scenario::Goal}) {
    const auto t0 = clk::now();
    out[sc] = fit(data, base_config(sc, 1, b), watch);
    r10[sc] = test_report(data, out[sc], true).route_at(10);
    secs += seconds_since(t0);
    std::printf("  %s: route R@10 %.3f (%.0fs)\n", std::string(scenario_name(sc)).c_str(), r10[sc],
                seconds_since(t0));
    std::fflush(stdout);
  }
  const double g = r10[Scenario::Goal], gd = r10[Scenario::GoalD], ng = r10[Scenario::NoGoal];
  report(6, g >= gd && gd >= ng && g >= 0.9 && secs <= 1800,
         fmt("scenarios: route R@10 Goal %.3f, GoalD %.3f, NoGoal %.3f (target Goal >= 0.9), %.0fs", g, gd, ng, secs));
}

void ablation(const Corpus& data, const Budget& b, HyperplaneWatch& watch) {
  // Paired per-sample R@1 hits with and without refinement.
  double diff_sum = 0;
  std::size_t discordant = 0, total = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = base_config(Scenario::Goal, seed, b);
    c.max_iterations = b.ablation_iterations;
    const auto t = fit(data, c, watch);
    const auto with = test_report(data, t, true);
    const auto without = test_report(data, t, false);
    for (std::size_t i = 0; i < with.records.size(); ++i) {
      const int a = with.records[i].first_hit == 1, z = without.records[i].first_hit == 1;
      discordant += a != z;
    }
    total += with.records.size();
    diff_sum += (with.route_at(1) - without.route_at(1)) * static_cast<double>(with.records.size());
    per_seed += fmt(" seed %d %.3f/%.3f", static_cast<int>(seed), with.route_at(1), without.route_at(1));
  }
  const double diff = diff_sum / static_cast<double>(total);
  // Standard error of a paired difference of proportions.
  const double se = std::sqrt(static_cast<double>(discordant)) / static_cast<double>(total);
  report(7, diff >= -2.0 * se,
         fmt("refinement: route R@1 refined/unrefined%s, mean diff %+.4f (noise 2se %.4f)", per_seed.c_str(), diff,
             2.0 * se));
}

void flows(const Corpus& data, std::map<Scenario, Trained>& models) {
  std::map<Scenario, double> r2;
  bool conserved = true;
  for (Scenario sc : {Scenario::Goal, Scenario::NoGoal}) {
    const auto& t = models.at(sc);
    const auto preds =
        train::predict_split(t.model, data.ctx(), t.corpus, t.corpus.test, train::predict_options(t.model.config));
    const auto rep = eval::estimate_flows(preds.routes, preds.scores, preds.truths, data.net.num_edges(), 0.1, 10, 5);
    const double expect = static_cast<double>(preds.truths.size() * static_cast<std::size_t>(t.model.config.future));
    for (const auto& est : rep.estimate) {
      double sum = 0;
      for (double v : est) sum += v;
      conserved = conserved && sum == expect;
    }
    conserved = conserved && rep.estimate.size() == 10;
    r2[sc] = rep.mean.r2;
  }
  report(8, conserved && r2[Scenario::Goal] >= r2[Scenario::NoGoal],
         fmt("flows: totals %s over 10 repeats, mean R2 Goal %.3f vs NoGoal %.3f", conserved ? "conserved" : "NOT conserved",
             r2[Scenario::Goal], r2[Scenario::NoGoal]));
}

int cli_call(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "  cli %s failed (%d): %s\n", args.front().c_str(), code, e.str().c_str());
  return code;
}

void throughput(const Corpus& data, const Trained* goal, const fs::path& dir) {
  const auto net = (dir / "net.json").string();
  cli::write_file_atomic(net, geo::network_to_json(data.net));
  cli::write_file_atomic(dir / "routes.jsonl", corpus::routes_to_jsonl(data.routes));
  std::vector<std::string> args{"bench", "--net", net, "--routes", (dir / "routes.jsonl").string(), "--requests",
                                "10000", "--topk", "10"};
  if (goal) {
    cli::save_checkpoint(dir / "goal.bin", goal->model, data.net);
    args.insert(args.end(), {"--model", (dir / "goal.bin").string()});
  }
  std::string out;
  const int code = cli_call(args, &out);
  double secs = -1;
  if (code == 0) secs = nlohmann::json::parse(out).at("seconds").get<double>();
  report(9, code == 0 && secs >= 0 && secs <= 5.0,
         fmt("throughput: 10000 top-10 predictions in %.2fs (%s model)", secs, goal ? "trained" : "untrained"));
}

void determinism(const Corpus& data, const Budget& b, const fs::path& dir) {
  const auto net = (dir / "net.json").string();
  const auto routes = (dir / "routes.jsonl").string();
  cli::write_file_atomic(net, geo::network_to_json(data.net));
  cli::write_file_atomic(routes, corpus::routes_to_jsonl(data.routes));
  std::vector<std::string> bytes, reports;
  bool ok = true;
  for (int run = 0; run < 2; ++run) {
    const auto model = (dir / ("det" + std::to_string(run) + ".bin")).string();
    ok = ok && cli_call({"train", "--net", net, "--routes", routes, "--scenario", "GoalD", "--seed", "7",
                         "--max-iterations", std::to_string(b.determinism_iterations), "--batch-size", "64", "--set",
                         "eval_every=20", "--out", model}) == 0;
    std::string rep;
    ok = ok && cli_call({"eval", "--net", net, "--routes", routes, "--model", model, "--split", "test", "--records"},
                        &rep) == 0;
    bytes.push_back(ok ? cli::read_file(model) : "");
    reports.push_back(rep);
  }
  const bool same_ckpt = ok && bytes[0] == bytes[1] && !bytes[0].empty();
  const bool same_eval = ok && reports[0] == reports[1] && !reports[0].empty();
  report(10, same_ckpt && same_eval,
         fmt("determinism: checkpoints %s (%zu bytes), eval reports %s", same_ckpt ? "identical" : "DIFFER",
             bytes[0].size(), same_eval ? "identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  bool quick = false;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--quick", quick, "tiny training budgets");
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  Budget budget;
  if (quick) budget = {60, 40, 10};
  const fs::path dir = fs::temp_directory_path() / "routekg_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto t0 = clk::now();

  try {
    if (want(1)) gradients();
    if (want(2)) spanning();
    if (want(3)) metrics();
    const bool need_data = want(4) || want(5) || want(6) || want(7) || want(8) || want(9) || want(10);
    if (need_data) {
      const Corpus data;
      if (want(4)) triplets(data);
      HyperplaneWatch watch;
      std::map<Scenario, Trained> models;
      if (want(6) || want(8) || want(5)) scenarios(data, budget, watch, models);
      if (want(7)) ablation(data, budget, watch);
      if (want(5)) {
        report(5, watch.iterations > 0 && watch.worst <= 1e-12,
               fmt("hyperplanes: max | ||p|| - 1 | = %.1e over %zu iterations", watch.worst, watch.iterations));
      }
      if (want(8)) flows(data, models);
      if (want(9)) throughput(data, models.count(Scenario::Goal) ? &models.at(Scenario::Goal) : nullptr, dir);
      if (want(10)) determinism(data, budget, dir);
    }
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 1;
  }
  fs::remove_all(dir);

  int failed = 0;
  for (const auto& v : verdicts) failed += !v.pass;
  std::printf("%zu criteria, %d failed, %.0fs\n", verdicts.size(), failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
