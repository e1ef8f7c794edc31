#include "routekg/cli/app.hpp"

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "routekg/cli/checkpoint.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/eval/metrics.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"
#include "routekg/train/gradcheck.hpp"
#include "routekg/train/trainer.hpp"

namespace routekg::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
  } else {
    write_file_atomic(path, text);
  }
}

json route_json(const Route& r) { return json(std::vector<EdgeId>(r.begin(), r.end())); }

struct Loaded {
  geo::RoadNetwork net;
  geo::DirectionMatrix D;
  geo::NaeMatrix A;
};

std::unique_ptr<Loaded> load_context(const std::string& net_path, int n_d) {
  auto l = std::make_unique<Loaded>();
  l->net = geo::load_network(net_path);
  l->D = geo::DirectionMatrix(l->net, n_d);
  l->A = geo::NaeMatrix(l->net);
  return l;
}

corpus::RouteCorpus split_for(const std::vector<Route>& routes, const geo::DirectionMatrix& D,
                              const train::TrainConfig& c) {
  corpus::SplitOptions so;
  so.observed = c.observed;
  so.future = c.future;
  so.seed = c.seed;
  so.window_stride = c.window_stride;
  return corpus::split_corpus(routes, D, so).corpus;
}

corpus::Split parse_split(const std::string& s) {
  if (s == "train") return corpus::Split::Train;
  if (s == "val") return corpus::Split::Val;
  if (s == "test") return corpus::Split::Test;
  throw UsageError("unknown split '" + s + "' (train, val or test)");
}

void apply_sets(train::TrainConfig& c, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    train::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

/// Query sample for `predict`: the observed history, or `edge` repeated to
/// the model's observed length.
corpus::RouteSample query_sample(const train::Model& m, const geo::DirectionMatrix& D, const geo::RoadNetwork& net,
                                 Route observed, std::optional<EdgeId> goal_edge, std::optional<int> dir,
                                 Scenario sc) {
  const auto len = static_cast<std::size_t>(m.config.observed);
  if (observed.empty()) throw UsageError("a query needs --edge or --observed");
  for (EdgeId e : observed) {
    if (e < 0 || static_cast<std::size_t>(e) >= net.num_edges()) throw UsageError("edge " + std::to_string(e) + " is not in the network");
  }
  if (observed.size() == 1 && len > 1) observed.assign(len, observed.front());
  if (observed.size() != len) {
    throw UsageError("--observed needs " + std::to_string(len) + " links, got " + std::to_string(observed.size()));
  }
  if (!is_connected_route(net, observed) && !std::all_of(observed.begin(), observed.end(),
                                                          [&](EdgeId e) { return e == observed.front(); })) {
    throw UsageError("--observed is not a connected route");
  }
  corpus::RouteSample s;
  s.observed = observed;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    s.observed_dirs.push_back(i == 0 ? D.intra(observed[0]) : D.label(observed[i - 1], observed[i]));
  }
  if (goal_edge) {
    if (*goal_edge < 0 || static_cast<std::size_t>(*goal_edge) >= net.num_edges()) throw UsageError("goal edge is not in the network");
    s.goal_edge = *goal_edge;
    s.goal_dir = D.label(observed.back(), *goal_edge);
  }
  if (dir) {
    if (*dir < 0 || *dir >= D.n_d()) throw UsageError("--dir must be in [0, " + std::to_string(D.n_d()) + ")");
    s.goal_dir = *dir;
  }
  if (sc == Scenario::Goal && !goal_edge) throw UsageError("the Goal scenario needs --goal-edge");
  if (sc == Scenario::GoalD && !goal_edge && !dir) throw UsageError("the GoalD scenario needs --dir or --goal-edge");
  return s;
}

json prediction_json(const train::Prediction& p) {
  json routes = json::array();
  for (const Route& r : p.routes) routes.push_back(route_json(r));
  return {{"routes", routes}, {"scores", p.scores}, {"dir", p.dir}};
}

std::vector<std::vector<Route>> baseline_predictions(const std::string& which, const Loaded& ctx,
                                                     const corpus::RouteCorpus& corpus,
                                                     const std::vector<std::size_t>& idx, const train::TrainConfig& c,
                                                     std::size_t& failures) {
  std::vector<std::vector<Route>> out;
  if (which == "markov") {
    eval::MarkovBaseline mb(ctx.net, corpus);
    for (std::size_t i : idx) out.push_back(mb.predict(corpus.samples[i], ctx.A, c.branching(), c.k));
  } else if (which == "dijkstra") {
    for (std::size_t i : idx) {
      const auto& s = corpus.samples[i];
      try {
        out.push_back({eval::dijkstra_baseline(ctx.net, s, c.future)});
      } catch (const DataError&) {
        ++failures;
        out.push_back({Route(static_cast<std::size_t>(c.future), s.last_observed())});
      }
    }
  } else {
    throw UsageError("unknown baseline '" + which + "' (markov or dijkstra)");
  }
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Route prediction over road-network knowledge graphs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "output file (default stdout)");
  };

  // gen-net
  geo::GridOptions grid;
  auto* gen_net = app.add_subcommand("gen-net", "generate a grid road network (JSON)");
  common(gen_net);
  gen_net->add_option("--side", grid.side, "nodes per side")->check(CLI::Range(2, 1000));
  gen_net->add_option("--spacing", grid.spacing, "meters between nodes")->check(CLI::PositiveNumber);
  gen_net->add_option("--jitter", grid.jitter, "node jitter as a fraction of spacing")->check(CLI::Range(0.0, 0.49));

  // gen-routes
  std::string net_path;
  corpus::RouteGenOptions rgo;
  rgo.count = 5000;
  rgo.min_len = 15;
  auto* gen_routes = app.add_subcommand("gen-routes", "generate synthetic routes (JSON Lines)");
  common(gen_routes);
  gen_routes->add_option("--net", net_path, "network file")->required();
  gen_routes->add_option("--count", rgo.count, "number of routes");
  gen_routes->add_option("--min-len", rgo.min_len, "minimum links per route");
  gen_routes->add_option("--sigma", rgo.sigma, "log-normal weight perturbation")->check(CLI::NonNegativeNumber);

  // precompute
  int n_d = geo::kDefaultDirections;
  auto* precompute = app.add_subcommand("precompute", "export the direction and NAE matrices (JSON)");
  common(precompute);
  precompute->add_option("--net", net_path, "network file")->required();
  precompute->add_option("--n-d", n_d, "direction classes")->check(CLI::Range(2, 255));

  // train
  std::string routes_path;
  std::string scenario;
  std::vector<std::string> sets;
  std::string history_path;
  std::optional<std::size_t> max_iter, batch;
  std::optional<double> lr;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  common(train_cmd);
  train_cmd->add_option("--net", net_path, "network file")->required();
  train_cmd->add_option("--routes", routes_path, "routes file")->required();
  train_cmd->add_option("--scenario", scenario, "NoGoal, GoalD or Goal");
  train_cmd->add_option("--max-iterations", max_iter);
  train_cmd->add_option("--batch-size", batch);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--set", sets, "override a config key (key=value), repeatable");
  train_cmd->add_option("--history", history_path, "write per-iteration losses and validations (JSON)");

  // predict
  std::string model_path;
  std::optional<EdgeId> edge, goal_edge;
  std::vector<EdgeId> observed;
  std::optional<int> dir;
  std::optional<int> topk;
  std::string batch_path;
  bool no_refine = false;
  auto* predict = app.add_subcommand("predict", "top-K future routes for one query or a batch file");
  common(predict);
  predict->add_option("--net", net_path, "network file")->required();
  predict->add_option("--model", model_path, "checkpoint")->required();
  predict->add_option("--edge", edge, "current link");
  predict->add_option("--observed", observed, "observed links, oldest first")->delimiter(',');
  predict->add_option("--dir", dir, "goal direction class");
  predict->add_option("--goal-edge", goal_edge, "goal link");
  predict->add_option("--topk", topk, "routes to return")->check(CLI::PositiveNumber);
  predict->add_option("--scenario", scenario, "override the model's scenario");
  predict->add_option("--batch", batch_path, "JSON Lines of {observed, dir?, goal_edge?}");
  predict->add_flag("--no-refine", no_refine, "skip rank refinement");

  // eval
  std::string split_name = "test";
  std::string baseline;
  bool records = false;
  auto* eval_cmd = app.add_subcommand("eval", "recall and MRR on a corpus split (JSON)");
  common(eval_cmd);
  eval_cmd->add_option("--net", net_path, "network file")->required();
  eval_cmd->add_option("--routes", routes_path, "routes file")->required();
  eval_cmd->add_option("--model", model_path, "checkpoint");
  eval_cmd->add_option("--split", split_name, "train, val or test");
  eval_cmd->add_option("--scenario", scenario, "override the model's scenario");
  eval_cmd->add_option("--baseline", baseline, "markov or dijkstra instead of a model");
  eval_cmd->add_flag("--no-refine", no_refine, "skip rank refinement");
  eval_cmd->add_flag("--records", records, "include per-sample records");

  // flow
  double tau = 0.1;
  int repeats = 10;
  std::string csv_path;
  auto* flow = app.add_subcommand("flow", "link flow estimation on the test split (JSON)");
  common(flow);
  flow->add_option("--net", net_path, "network file")->required();
  flow->add_option("--routes", routes_path, "routes file")->required();
  flow->add_option("--model", model_path, "checkpoint")->required();
  flow->add_option("--scenario", scenario, "override the model's scenario");
  flow->add_option("--tau", tau, "temperature")->check(CLI::PositiveNumber);
  flow->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
  flow->add_option("--csv", csv_path, "per-link truth and estimates (CSV)");

  // gradcheck
  train::GradCheckSettings gcs;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  common(gradcheck);
  gradcheck->add_option("--instances", gcs.instances)->check(CLI::PositiveNumber);
  gradcheck->add_option("--tol", gcs.check.tol)->check(CLI::PositiveNumber);

  // bench
  std::size_t requests = 10000;
  auto* bench = app.add_subcommand("bench", "prediction throughput (JSON)");
  common(bench);
  bench->add_option("--net", net_path, "network file")->required();
  bench->add_option("--model", model_path, "checkpoint (default: untrained model)");
  bench->add_option("--routes", routes_path, "routes to draw queries from (default: generated)");
  bench->add_option("--requests", requests)->check(CLI::PositiveNumber);
  bench->add_option("--topk", topk)->check(CLI::PositiveNumber);
  bench->add_flag("--no-refine", no_refine, "skip rank refinement");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto base_config = [&] {
    train::TrainConfig c;
    if (!config_path.empty()) train::apply_config_text(read_file(config_path), c);
    return c;
  };
  auto scenario_override = [&](train::Model& m) {
    if (!scenario.empty()) m.config.scenario = parse_scenario(scenario);
  };

  if (*gen_net) {
    grid.seed = seed;
    emit(out, out_path, geo::network_to_json(geo::generate_grid_network(grid)));
    return kExitOk;
  }
  if (*gen_routes) {
    rgo.seed = seed;
    const auto net = geo::load_network(net_path);
    emit(out, out_path, corpus::routes_to_jsonl(corpus::generate_routes(net, rgo)));
    return kExitOk;
  }
  if (*precompute) {
    const auto net = geo::load_network(net_path);
    const geo::DirectionMatrix D(net, n_d);
    const geo::NaeMatrix A(net);
    const auto fp = fingerprint_of(net);
    json dirs = json::array();
    for (std::size_t i = 0; i < net.num_edges(); ++i) {
      std::vector<int> row(net.num_edges());
      for (std::size_t j = 0; j < net.num_edges(); ++j) row[j] = D.label(static_cast<EdgeId>(i), static_cast<EdgeId>(j));
      dirs.push_back(std::move(row));
    }
    json nae = json::array();
    for (std::size_t v = 0; v < A.num_nodes(); ++v) {
      const auto r = A.row(static_cast<NodeId>(v));
      nae.push_back(std::vector<EdgeId>(r.begin(), r.end()));
    }
    json doc = {{"fingerprint", {{"nodes", fp.num_nodes}, {"edges", fp.num_edges}, {"hash", fp.hash}}},
                {"n_d", n_d},
                {"directions", std::move(dirs)},
                {"nae", {{"n_a", A.n_a()}, {"pad", A.pad()}, {"table", std::move(nae)}}}};
    emit(out, out_path, doc.dump());
    return kExitOk;
  }
  if (*train_cmd) {
    train::TrainConfig c = base_config();
    apply_sets(c, sets);
    if (train_cmd->count("--seed")) c.seed = seed;
    if (!scenario.empty()) c.scenario = parse_scenario(scenario);
    if (max_iter) c.max_iterations = *max_iter;
    if (batch) c.batch_size = *batch;
    if (lr) c.lr = *lr;
    if (out_path.empty() || out_path == "-") throw UsageError("train needs --out for the checkpoint");
    const auto ctx = load_context(net_path, c.n_d);
    const auto corpus = split_for(corpus::load_routes(routes_path), ctx->D, c);
    train::Context tctx{ctx->net, ctx->D, ctx->A};
    const auto result = train::train(corpus, tctx, c);
    for (const auto& v : result.history.validations) {
      err << "validation iteration " << v.iteration << " route R@1 " << v.route_r1 << '\n';
    }
    save_checkpoint(out_path, result.model, ctx->net);
    if (!history_path.empty()) {
      json its = json::array();
      for (const auto& l : result.history.iterations) {
        its.push_back({{"iteration", l.iteration}, {"rep", l.rep}, {"dir", l.dir}, {"pred", l.pred}, {"rank", l.rank},
                       {"refine", l.refine}, {"total", l.total}, {"rank_skipped", l.rank_skipped}});
      }
      json vals = json::array();
      for (const auto& v : result.history.validations) vals.push_back({{"iteration", v.iteration}, {"route_r1", v.route_r1}});
      json doc = {{"iterations", its}, {"validations", vals}, {"best_iteration", result.history.best_iteration},
                  {"stopped_early", result.history.stopped_early}};
      write_file_atomic(history_path, doc.dump());
    }
    return kExitOk;
  }
  if (*predict) {
    const auto net = geo::load_network(net_path);
    train::Model m = load_checkpoint(model_path, net);
    scenario_override(m);
    const geo::DirectionMatrix D(net, m.config.n_d);
    const geo::NaeMatrix A(net);
    train::Context ctx{net, D, A};
    auto opts = train::predict_options(m.config);
    if (topk) opts.k = *topk;
    opts.refine = !no_refine;
    auto run_one = [&](Route obs, std::optional<EdgeId> goal, std::optional<int> d) {
      const auto s = query_sample(m, D, net, std::move(obs), goal, d, m.config.scenario);
      auto o = opts;
      if (m.config.scenario != Scenario::NoGoal || d) o.dir = s.goal_dir;
      if (m.config.scenario == Scenario::NoGoal && !d) o.dir.reset();
      return prediction_json(train::predict(m, ctx, s, o));
    };
    if (!batch_path.empty()) {
      std::istringstream in(read_file(batch_path));
      std::string line, text;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json q;
        try {
          q = json::parse(line);
        } catch (const json::exception& e) {
          throw DataError("batch line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
          Route obs = q.at("observed").get<Route>();
          std::optional<EdgeId> g;
          std::optional<int> d;
          if (q.contains("goal_edge")) g = q["goal_edge"].get<EdgeId>();
          if (q.contains("dir")) d = q["dir"].get<int>();
          text += run_one(std::move(obs), g, d).dump() + '\n';
        } catch (const json::exception& e) {
          throw DataError("batch line " + std::to_string(line_no) + ": " + e.what());
        } catch (const UsageError& e) {
          throw DataError("batch line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      emit(out, out_path, text);
      return kExitOk;
    }
    Route obs(observed.begin(), observed.end());
    if (edge) {
      if (!obs.empty() && obs.back() != *edge) throw UsageError("--edge must equal the last --observed link");
      if (obs.empty()) obs.push_back(*edge);
    }
    emit(out, out_path, run_one(std::move(obs), goal_edge, dir).dump(2));
    return kExitOk;
  }
  if (*eval_cmd) {
    const auto net = geo::load_network(net_path);
    train::Model m;
    if (!model_path.empty()) {
      m = load_checkpoint(model_path, net);
    } else if (baseline.empty()) {
      throw UsageError("eval needs --model or --baseline");
    } else {
      m.config = base_config();
      if (eval_cmd->count("--seed")) m.config.seed = seed;
    }
    scenario_override(m);
    const geo::DirectionMatrix D(net, m.config.n_d);
    const geo::NaeMatrix A(net);
    const auto corpus = split_for(corpus::load_routes(routes_path), D, m.config);
    const auto& idx = corpus.indices(parse_split(split_name));
    json doc;
    if (!baseline.empty()) {
      Loaded l{net, D, A};
      std::size_t failures = 0;
      const auto preds = baseline_predictions(baseline, l, corpus, idx, m.config, failures);
      std::vector<Route> truths;
      for (std::size_t i : idx) truths.push_back(corpus.samples[i].future);
      std::vector<int> ks;
      const int avail = baseline == "dijkstra" ? 1 : m.config.k;
      for (int k : {1, 5, 10}) {
        if (k <= avail) ks.push_back(k);
      }
      doc = json::parse(eval::report_to_json(eval::compute_metrics(preds, truths, ks), records));
      doc["baseline"] = baseline;
      doc["failures"] = failures;
    } else {
      train::Context ctx{net, D, A};
      auto opts = train::predict_options(m.config);
      opts.refine = !no_refine;
      doc = json::parse(eval::report_to_json(train::evaluate(m, ctx, corpus, idx, opts), records));
      doc["scenario"] = std::string(scenario_name(m.config.scenario));
      doc["refine"] = opts.refine;
    }
    doc["split"] = split_name;
    emit(out, out_path, doc.dump(2));
    return kExitOk;
  }
  if (*flow) {
    const auto net = geo::load_network(net_path);
    train::Model m = load_checkpoint(model_path, net);
    scenario_override(m);
    const geo::DirectionMatrix D(net, m.config.n_d);
    const geo::NaeMatrix A(net);
    train::Context ctx{net, D, A};
    const auto corpus = split_for(corpus::load_routes(routes_path), D, m.config);
    const auto preds = train::predict_split(m, ctx, corpus, corpus.test, train::predict_options(m.config));
    const auto report = eval::estimate_flows(preds.routes, preds.scores, preds.truths, net.num_edges(), tau, repeats, seed);
    if (!csv_path.empty()) write_file_atomic(csv_path, eval::flow_to_csv(report));
    emit(out, out_path, eval::flow_to_json(report));
    return kExitOk;
  }
  if (*gradcheck) {
    gcs.seed = seed;
    const auto checks = train::check_all_gradients(gcs);
    emit(out, out_path, train::gradcheck_to_json(checks));
    for (const auto& c : checks) {
      if (!c.report.ok()) {
        err << "gradient check failed for " << c.loss << " (instance " << c.instance << ")\n";
        return kExitNumeric;
      }
    }
    return kExitOk;
  }
  if (*bench) {
    const auto net = geo::load_network(net_path);
    train::Model m;
    if (!model_path.empty()) {
      m = load_checkpoint(model_path, net);
    } else {
      train::TrainConfig c = base_config();
      if (bench->count("--seed")) c.seed = seed;
      m = train::init_model(c, net.num_edges());
    }
    const geo::DirectionMatrix D(net, m.config.n_d);
    const geo::NaeMatrix A(net);
    train::Context ctx{net, D, A};
    std::vector<Route> routes;
    if (!routes_path.empty()) {
      routes = corpus::load_routes(routes_path);
    } else {
      corpus::RouteGenOptions g;
      g.count = 500;
      g.min_len = static_cast<std::size_t>(m.config.observed + m.config.future);
      g.seed = seed;
      routes = corpus::generate_routes(net, g);
    }
    const auto corpus = split_for(routes, D, m.config);
    if (corpus.samples.empty()) throw DataError("no query samples available");
    auto opts = train::predict_options(m.config);
    if (topk) opts.k = *topk;
    opts.refine = !no_refine;
    std::size_t checksum = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < requests; ++i) {
      const auto p = train::predict(m, ctx, corpus.samples[i % corpus.samples.size()], opts);
      checksum += p.routes.size();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json doc = {{"requests", requests},
                {"topk", opts.k},
                {"refine", opts.refine},
                {"seconds", secs},
                {"ms_per_10k", secs * 1000.0 * 10000.0 / static_cast<double>(requests)},
                {"routes_returned", checksum}};
    emit(out, out_path, doc.dump(2));
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace routekg::cli
