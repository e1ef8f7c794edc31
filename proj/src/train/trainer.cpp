#include "routekg/train/trainer.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "routekg/kg/triplets.hpp"
#include "routekg/route/spanning.hpp"

namespace routekg::train {

int TrainConfig::branching() const { return n > 0 ? n : route::default_branching(k, future); }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw DataError("config key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw DataError("config key '" + std::string(key) + "': expected true or false, got '" + std::string(v) + "'");
}

std::string fmt(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  auto sz = [&] { return parse_number<std::size_t>(key, v); };
  auto in = [&] { return parse_number<int>(key, v); };
  auto dbl = [&] { return parse_number<double>(key, v); };
  if (key == "scenario") {
    try {
      c.scenario = parse_scenario(v);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
  } else if (key == "observed") c.observed = in();
  else if (key == "future") c.future = in();
  else if (key == "n_d") c.n_d = in();
  else if (key == "k") c.k = in();
  else if (key == "n") c.n = in();
  else if (key == "w_rep") c.w_rep = dbl();
  else if (key == "w_rank") c.w_rank = dbl();
  else if (key == "w_pred") c.w_pred = dbl();
  else if (key == "w_d") c.w_d = dbl();
  else if (key == "lr") c.lr = dbl();
  else if (key == "weight_decay") c.weight_decay = dbl();
  else if (key == "refine_lr") c.refine_lr = dbl();
  else if (key == "batch_size") c.batch_size = sz();
  else if (key == "triplet_batch") c.triplet_batch = sz();
  else if (key == "max_iterations") c.max_iterations = sz();
  else if (key == "patience") c.patience = sz();
  else if (key == "eval_every") c.eval_every = sz();
  else if (key == "val_limit") c.val_limit = sz();
  else if (key == "window_stride") c.window_stride = sz();
  else if (key == "margin") c.margin = dbl();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "dim") c.dim = sz();
  else if (key == "hidden") c.hidden = sz();
  else if (key == "teacher_forcing") c.teacher_forcing = parse_bool(key, v);
  else if (key == "refine_residual") c.refine_residual = parse_bool(key, v);
  else if (key == "norm") {
    if (v == "l1") c.norm = kg::ScoreNorm::L1;
    else if (v == "l2") c.norm = kg::ScoreNorm::L2;
    else throw DataError("config key 'norm': expected l1 or l2, got '" + v + "'");
  } else {
    throw DataError("unknown config key '" + std::string(key) + "'");
  }
  if (c.w_rep < 0 || c.w_rank < 0 || c.w_pred < 0 || c.w_d < 0) throw DataError("loss weights must be >= 0");
}

void apply_config_text(std::string_view text, TrainConfig& c) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(c, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "scenario = " << scenario_name(c.scenario) << '\n'
     << "observed = " << c.observed << '\n'
     << "future = " << c.future << '\n'
     << "n_d = " << c.n_d << '\n'
     << "k = " << c.k << '\n'
     << "n = " << c.n << '\n'
     << "w_rep = " << fmt(c.w_rep) << '\n'
     << "w_rank = " << fmt(c.w_rank) << '\n'
     << "w_pred = " << fmt(c.w_pred) << '\n'
     << "w_d = " << fmt(c.w_d) << '\n'
     << "lr = " << fmt(c.lr) << '\n'
     << "weight_decay = " << fmt(c.weight_decay) << '\n'
     << "refine_lr = " << fmt(c.refine_lr) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "triplet_batch = " << c.triplet_batch << '\n'
     << "max_iterations = " << c.max_iterations << '\n'
     << "patience = " << c.patience << '\n'
     << "eval_every = " << c.eval_every << '\n'
     << "val_limit = " << c.val_limit << '\n'
     << "window_stride = " << c.window_stride << '\n'
     << "margin = " << fmt(c.margin) << '\n'
     << "seed = " << c.seed << '\n'
     << "dim = " << c.dim << '\n'
     << "hidden = " << c.hidden << '\n'
     << "teacher_forcing = " << (c.teacher_forcing ? "true" : "false") << '\n'
     << "refine_residual = " << (c.refine_residual ? "true" : "false") << '\n'
     << "norm = " << (c.norm == kg::ScoreNorm::L1 ? "l1" : "l2") << '\n';
  return os.str();
}

Model init_model(const TrainConfig& config, std::size_t num_edges) {
  kg::ModelDims dims;
  dims.num_edges = num_edges;
  dims.observed_len = config.observed;
  dims.future_len = config.future;
  dims.n_d = config.n_d;
  dims.dim = config.dim;
  dims.hidden = config.hidden;
  Rng rng = make_stream(config.seed, "init");
  Model m;
  m.config = config;
  m.kg = kg::init_kg_params(dims, rng);
  m.refine = rank::init_refine_params(dims, rng, config.refine_residual);
  return m;
}

namespace {

bool finite(double v) { return std::isfinite(v); }

void zero(std::vector<nn::Block>& bs) {
  for (auto& b : bs) std::fill(b.values.begin(), b.values.end(), 0.0);
}

std::vector<std::size_t> validation_subset(const corpus::RouteCorpus& corpus, std::size_t limit) {
  std::vector<std::size_t> v = corpus.val;
  if (limit && v.size() > limit) v.resize(limit);
  return v;
}

}  // namespace

TrainResult train(const corpus::RouteCorpus& corpus, const Context& ctx, const TrainConfig& config,
                  const Observer& observer) {
  if (corpus.train.empty()) throw DataError("training split is empty");
  if (corpus.observed_len() != config.observed || corpus.future_len() != config.future) {
    throw DataError("corpus windows (" + std::to_string(corpus.observed_len()) + "+" +
                    std::to_string(corpus.future_len()) + ") do not match the configuration (" +
                    std::to_string(config.observed) + "+" + std::to_string(config.future) + ")");
  }
  if (ctx.D.n_d() != config.n_d) throw DataError("direction matrix class count differs from n_d");
  if (config.batch_size == 0) throw DataError("batch_size must be >= 1");

  TrainResult out;
  Model& model = out.model;
  model = init_model(config, ctx.net.num_edges());
  const Scenario sc = config.scenario;
  const int n = config.branching();
  const bool no_goal = sc == Scenario::NoGoal;
  const bool kg_active = config.w_rep > 0 || config.w_pred > 0 || (no_goal && config.w_d > 0);
  const bool r_active = config.w_rank > 0;

  std::vector<Route> observed;
  for (std::size_t i : corpus.train) observed.push_back(corpus.samples[i].observed);
  const kg::TripletSampler sampler(ctx.net, ctx.D, std::move(observed), config.future);

  kg::KgParams kg_grad = kg::zeros_like(model.kg);
  rank::RefineParams r_grad = rank::zeros_like(model.refine);
  auto kg_blocks = kg::blocks(model.kg);
  auto kg_gblocks = kg::blocks(kg_grad);
  auto r_blocks = rank::blocks(model.refine);
  auto r_gblocks = rank::blocks(r_grad);
  nn::AdamW kg_opt({config.lr, config.weight_decay});
  nn::AdamW r_opt({config.refine_lr > 0 ? config.refine_lr : config.lr, config.weight_decay});

  Rng norm_rng = make_stream(config.seed, "hyperplane");
  Rng trip_rng = make_stream(config.seed, "triplets");
  Rng batch_rng = make_stream(config.seed, "minibatch");
  std::vector<std::size_t> order = corpus.train;
  std::size_t cursor = order.size();
  const std::size_t B = std::min(config.batch_size, corpus.train.size());
  const std::size_t T = config.triplets_per_family();

  const auto val = validation_subset(corpus, config.val_limit);
  PredictOptions vopts = predict_options(config);
  double best = -1.0;
  Model best_model;
  std::size_t stale = 0;

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    kg::normalize_hyperplanes(model.kg, norm_rng);
    zero(kg_gblocks);
    zero(r_gblocks);
    IterationLog log;
    log.iteration = it;

    for (kg::Family f : kg::kFamilies) {
      const auto batch = sampler.sample(f, T, trip_rng);
      log.rep += kg::rep_loss(batch, model.kg, config.margin, &kg_grad, config.w_rep / static_cast<double>(T),
                              config.norm)
                     .loss /
                 static_cast<double>(T);
    }

    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(batch_rng, i)]);
        cursor = 0;
      }
      const auto& s = corpus.samples[order[cursor++]];
      if (no_goal) log.dir += kg::direction_loss(s, model.kg, &kg_grad, config.w_d * inv_b) * inv_b;
      std::optional<int> forced;
      if (no_goal && config.teacher_forcing) forced = s.goal_dir;
      kg::QueryTrace qt;
      const auto dists = kg::query_tail(s, model.kg, sc, forced, &qt);
      log.pred += kg::pred_loss(s, dists, qt, model.kg, &kg_grad, config.w_pred * inv_b) * inv_b;
      if (!r_active) continue;
      route::CandidateSet cands;
      try {
        cands = route::spanning_route(dists, ctx.net.edge(s.last_observed()).end_node, s.last_observed(), ctx.A,
                                      ctx.net, n, config.k);
      } catch (const DataError&) {
        ++log.rank_skipped;
        continue;
      }
      rank::RankTrace rt;
      rank::rank_candidates(cands, s, model.kg, model.refine, ctx.D, &rt);
      const auto rl = rank::rank_loss(rt, s, model.refine, &r_grad, config.w_rank * inv_b);
      if (rl.skipped) ++log.rank_skipped;
      log.rank += rl.loss * inv_b;
      rank::RefineTrace ft;
      rank::refine_logits(s, cands.routes.front(), qt.dir, model.kg, model.refine, ctx.D, &qt.logits, &ft);
      log.refine += rank::refine_loss(ft, s, model.kg, model.refine, ctx.net, &r_grad, config.w_rank * inv_b) * inv_b;
    }
    log.total = config.w_rep * log.rep + (no_goal ? config.w_d * log.dir : 0.0) + config.w_pred * log.pred +
                config.w_rank * (log.rank + log.refine);
    if (!finite(log.total)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it));
    }
    if (kg_active) kg_opt.step(kg_blocks, kg_gblocks);
    if (r_active) r_opt.step(r_blocks, r_gblocks);
    kg::normalize_hyperplanes(model.kg, norm_rng);
    out.history.iterations.push_back(log);
    if (observer) observer(it, model);

    const bool last = it == config.max_iterations;
    if (!val.empty() && config.eval_every && (it % config.eval_every == 0 || last)) {
      const auto rep = evaluate(model, ctx, corpus, val, vopts);
      const double r1 = rep.route_at(1);
      out.history.validations.push_back({it, r1});
      if (r1 > best) {
        best = r1;
        best_model = model;
        out.history.best_iteration = it;
        stale = 0;
      } else if (++stale >= config.patience) {
        out.history.stopped_early = true;
        break;
      }
    }
  }
  if (best >= 0.0) model = std::move(best_model);
  return out;
}

PredictOptions predict_options(const TrainConfig& c) {
  PredictOptions o;
  o.scenario = c.scenario;
  o.k = c.k;
  o.n = c.branching();
  return o;
}

Prediction predict(const Model& model, const Context& ctx, const corpus::RouteSample& sample,
                   const PredictOptions& opts) {
  kg::QueryTrace qt;
  const auto dists = kg::query_tail(sample, model.kg, opts.scenario, opts.dir, &qt);
  const auto cands = route::spanning_route(dists, ctx.net.edge(sample.last_observed()).end_node,
                                           sample.last_observed(), ctx.A, ctx.net, opts.n, opts.k);
  Prediction p;
  p.dir = qt.dir;
  if (!opts.refine) {
    p.routes = cands.routes;
    for (const Route& r : p.routes) {
      double lp = 0.0;
      for (std::size_t s = 0; s < r.size(); ++s) lp += std::log(dists.probs[s][static_cast<std::size_t>(r[s])]);
      p.scores.push_back(lp);
    }
    return p;
  }
  const auto ranked = rank::rank_candidates(cands, sample, model.kg, model.refine, ctx.D);
  const Route refined =
      rank::refine_route(sample, cands.routes.front(), qt.dir, model.kg, model.refine, ctx.D, &qt.logits, ctx.A, ctx.net);
  p.routes = rank::assemble_final_topk(ranked.routes, refined, static_cast<std::size_t>(opts.k));
  for (const Route& r : p.routes) {
    double score = std::log(ranked.rank_probs.front());
    if (r != refined) {
      const auto it = std::find(ranked.routes.begin(), ranked.routes.end(), r);
      score = std::log(ranked.rank_probs[static_cast<std::size_t>(it - ranked.routes.begin())]);
    }
    p.scores.push_back(score);
  }
  return p;
}

SplitPredictions predict_split(const Model& model, const Context& ctx, const corpus::RouteCorpus& corpus,
                               const std::vector<std::size_t>& indices, const PredictOptions& opts) {
  SplitPredictions out;
  for (std::size_t i : indices) {
    const auto& s = corpus.samples[i];
    auto p = predict(model, ctx, s, opts);
    out.routes.push_back(std::move(p.routes));
    out.scores.push_back(std::move(p.scores));
    out.truths.push_back(s.future);
  }
  return out;
}

eval::EvalReport evaluate(const Model& model, const Context& ctx, const corpus::RouteCorpus& corpus,
                          const std::vector<std::size_t>& indices, const PredictOptions& opts) {
  const auto preds = predict_split(model, ctx, corpus, indices, opts);
  std::vector<int> ks;
  for (int k : {1, 5, 10}) {
    if (k <= opts.k) ks.push_back(k);
  }
  return eval::compute_metrics(preds.routes, preds.truths, ks);
}

}  // namespace routekg::train
