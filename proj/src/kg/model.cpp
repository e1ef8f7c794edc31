#include "routekg/kg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "routekg/simd/kernels.hpp"

namespace routekg::kg {

namespace {

void fill_uniform(nn::Tensor2& m, double bound, Rng& rng) {
  for (double& v : m.data) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

double init_bound(std::size_t dim) { return 6.0 / std::sqrt(static_cast<double>(dim)); }

// Gradient of a TransH score with respect to (h, r, t, p).
struct ScoreGrad {
  std::vector<double> dh, dr, dp;  // dt = -dh
};

double score_with_grad(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                       std::span<const double> p, ScoreNorm norm, ScoreGrad* g) {
  const std::size_t n = h.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = h[i] - t[i];
  const double pd = simd::dot(p.data(), d.data(), n);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = d[i] - pd * p[i] + r[i];
  double s = 0.0;
  std::vector<double> sigma(n, 0.0);
  if (norm == ScoreNorm::L1) {
    for (std::size_t i = 0; i < n; ++i) {
      s += std::abs(u[i]);
      sigma[i] = u[i] > 0.0 ? 1.0 : (u[i] < 0.0 ? -1.0 : 0.0);
    }
  } else {
    s = std::sqrt(simd::dot(u.data(), u.data(), n));
    if (s > 0.0) {
      for (std::size_t i = 0; i < n; ++i) sigma[i] = u[i] / s;
    }
  }
  if (g) {
    const double ps = simd::dot(p.data(), sigma.data(), n);
    g->dh.resize(n);
    g->dp.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      g->dh[i] = sigma[i] - ps * p[i];
      g->dp[i] = -(pd * sigma[i] + ps * d[i]);
    }
    g->dr = std::move(sigma);
  }
  return s;
}

void add_scaled(std::span<double> dst, const std::vector<double>& src, double w) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += w * src[i];
}

// d/dx of x⊥ = x - (p·x)p given upstream g: returns dx and accumulates dp.
std::vector<double> project_backward(std::span<const double> x, std::span<const double> p, const std::vector<double>& g,
                                     std::span<double> dp) {
  const std::size_t n = x.size();
  const double pg = simd::dot(p.data(), g.data(), n);
  const double px = simd::dot(p.data(), x.data(), n);
  std::vector<double> dx(n);
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = g[i] - pg * p[i];
    dp[i] -= px * g[i] + pg * x[i];
  }
  return dx;
}

std::vector<double> direction_features(const corpus::RouteSample& s, const KgParams& params) {
  const std::size_t dim = params.dims.dim;
  std::vector<double> x;
  x.reserve(2 * s.observed.size() * dim);
  for (EdgeId e : s.observed) {
    const auto row = params.store.entity.row(static_cast<std::size_t>(e));
    x.insert(x.end(), row.begin(), row.end());
  }
  const auto& rd = params.store.rel(Family::DirectionTo);
  for (int c : s.observed_dirs) {
    const auto row = rd.row(static_cast<std::size_t>(c));
    x.insert(x.end(), row.begin(), row.end());
  }
  return x;
}

}  // namespace

KgParams init_kg_params(const ModelDims& dims, Rng& rng) {
  if (dims.num_edges == 0 || dims.dim == 0 || dims.future_len < 1 || dims.observed_len < 1 || dims.n_d < 1) {
    throw std::invalid_argument("invalid model dimensions");
  }
  KgParams p;
  p.dims = dims;
  const double bound = init_bound(dims.dim);
  p.store.entity = nn::Tensor2(dims.num_edges, dims.dim);
  fill_uniform(p.store.entity, bound, rng);
  for (Family f : kFamilies) {
    const auto rows = static_cast<std::size_t>(family_cardinality(f, dims.future_len, dims.n_d));
    p.store.rel(f) = nn::Tensor2(rows, dims.dim);
    p.store.hyper(f) = nn::Tensor2(rows, dims.dim);
    fill_uniform(p.store.rel(f), bound, rng);
    fill_uniform(p.store.hyper(f), bound, rng);
  }
  normalize_hyperplanes(p, rng);
  p.mlp_d = nn::make_mlp({2 * static_cast<std::size_t>(dims.observed_len) * dims.dim, dims.hidden,
                          static_cast<std::size_t>(dims.n_d)},
                         rng);
  return p;
}

KgParams zeros_like(const KgParams& p) {
  KgParams z;
  z.dims = p.dims;
  z.store.entity = nn::Tensor2(p.store.entity.rows, p.store.entity.cols);
  for (std::size_t f = 0; f < 4; ++f) {
    z.store.relation[f] = nn::Tensor2(p.store.relation[f].rows, p.store.relation[f].cols);
    z.store.hyperplane[f] = nn::Tensor2(p.store.hyperplane[f].rows, p.store.hyperplane[f].cols);
  }
  z.mlp_d = nn::zeros_like(p.mlp_d);
  return z;
}

std::vector<nn::Block> blocks(KgParams& p) {
  std::vector<nn::Block> out;
  const std::size_t d = p.dims.dim;
  out.push_back({"entity", p.store.entity.data, d});
  for (Family f : kFamilies) out.push_back({"relation." + std::string(family_name(f)), p.store.rel(f).data, d});
  for (Family f : kFamilies) out.push_back({"hyperplane." + std::string(family_name(f)), p.store.hyper(f).data, d});
  nn::append_blocks(out, "mlp_d", p.mlp_d);
  return out;
}

std::vector<double> hyperplane_project(std::span<const double> vec, std::span<const double> p) {
  const double c = simd::dot(p.data(), vec.data(), vec.size());
  std::vector<double> out(vec.begin(), vec.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c * p[i];
  return out;
}

double transh_score(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                    std::span<const double> p, ScoreNorm norm) {
  return score_with_grad(h, r, t, p, norm, nullptr);
}

RepLoss rep_loss(const TripletBatch& batch, const KgParams& params, double margin, KgParams* grads, double weight,
                 ScoreNorm norm) {
  if (batch.positives.size() != batch.negatives.size()) {
    throw std::invalid_argument("positive and negative triplets are not paired");
  }
  RepLoss out;
  ScoreGrad gp, gn;
  const auto& st = params.store;
  auto score = [&](const Triplet& t, ScoreGrad* g) {
    const auto rel = static_cast<std::size_t>(t.relation);
    return score_with_grad(st.entity.row(static_cast<std::size_t>(t.head)), st.rel(t.family).row(rel),
                           st.entity.row(static_cast<std::size_t>(t.tail)), st.hyper(t.family).row(rel), norm, g);
  };
  auto accumulate = [&](const Triplet& t, const ScoreGrad& g, double w) {
    const auto rel = static_cast<std::size_t>(t.relation);
    auto& gs = grads->store;
    add_scaled(gs.entity.row(static_cast<std::size_t>(t.head)), g.dh, w);
    add_scaled(gs.entity.row(static_cast<std::size_t>(t.tail)), g.dh, -w);
    add_scaled(gs.rel(t.family).row(rel), g.dr, w);
    add_scaled(gs.hyper(t.family).row(rel), g.dp, w);
  };
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triplet& pos = batch.positives[i];
    const Triplet& neg = batch.negatives[i];
    const double sp = score(pos, grads ? &gp : nullptr);
    const double sn = score(neg, grads ? &gn : nullptr);
    const double hinge = sp + margin - sn;
    if (hinge <= 0.0) continue;
    out.loss += hinge;
    ++out.active;
    if (grads) {
      accumulate(pos, gp, weight);
      accumulate(neg, gn, -weight);
    }
  }
  return out;
}

void normalize_hyperplanes(KgParams& params, Rng& rng) {
  const std::size_t dim = params.dims.dim;
  const double bound = init_bound(dim);
  for (auto& m : params.store.hyperplane) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      auto row = m.row(r);
      double n = std::sqrt(simd::dot(row.data(), row.data(), dim));
      while (n < 1e-12) {
        for (double& v : row) v = (2.0 * uniform01(rng) - 1.0) * bound;
        n = std::sqrt(simd::dot(row.data(), row.data(), dim));
      }
      if (std::abs(n - 1.0) <= 4 * std::numeric_limits<double>::epsilon()) continue;
      for (double& v : row) v /= n;
    }
  }
}

double hyperplane_norm_deviation(const KgParams& params) {
  double worst = 0.0;
  for (const auto& m : params.store.hyperplane) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      double s = 0.0;
      for (double v : m.row(r)) s += v * v;
      worst = std::max(worst, std::abs(std::sqrt(s) - 1.0));
    }
  }
  return worst;
}

DirectionPrediction predict_direction(const corpus::RouteSample& sample, const KgParams& params) {
  DirectionPrediction out;
  out.logits = nn::mlp_forward(params.mlp_d, direction_features(sample, params));
  out.cls = static_cast<int>(std::max_element(out.logits.begin(), out.logits.end()) - out.logits.begin());
  return out;
}

double direction_loss(const corpus::RouteSample& sample, const KgParams& params, KgParams* grads, double weight) {
  nn::MlpCache cache;
  const auto logits = nn::mlp_forward(params.mlp_d, direction_features(sample, params), grads ? &cache : nullptr);
  const auto ce = nn::softmax_cross_entropy(logits, static_cast<std::size_t>(sample.goal_dir));
  if (grads) {
    const auto gin = nn::mlp_backward(params.mlp_d, cache, ce.grad, grads->mlp_d, weight);
    const std::size_t dim = params.dims.dim;
    const std::size_t obs = sample.observed.size();
    for (std::size_t j = 0; j < obs; ++j) {
      auto row = grads->store.entity.row(static_cast<std::size_t>(sample.observed[j]));
      for (std::size_t i = 0; i < dim; ++i) row[i] += weight * gin[j * dim + i];
    }
    auto& rd = grads->store.rel(Family::DirectionTo);
    for (std::size_t j = 0; j < obs; ++j) {
      auto row = rd.row(static_cast<std::size_t>(sample.observed_dirs[j]));
      for (std::size_t i = 0; i < dim; ++i) row[i] += weight * gin[(obs + j) * dim + i];
    }
  }
  return ce.loss;
}

int query_direction(const corpus::RouteSample& sample, const KgParams& params, Scenario scenario,
                    std::optional<int> dir_override) {
  if (dir_override) {
    if (*dir_override < 0 || *dir_override >= params.dims.n_d) {
      throw std::out_of_range("direction class " + std::to_string(*dir_override) + " outside 0.." +
                              std::to_string(params.dims.n_d - 1));
    }
    return *dir_override;
  }
  if (scenario == Scenario::NoGoal) return predict_direction(sample, params).cls;
  return sample.goal_dir;
}

StepDistributions query_tail(const corpus::RouteSample& sample, const KgParams& params, Scenario scenario,
                             std::optional<int> dir_override, QueryTrace* trace) {
  const auto& st = params.store;
  const std::size_t dim = params.dims.dim;
  const std::size_t m = params.dims.num_edges;
  const int dir = query_direction(sample, params, scenario, dir_override);
  const auto p = st.hyper(Family::DirectionTo).row(static_cast<std::size_t>(dir));
  const auto rd = st.rel(Family::DirectionTo).row(static_cast<std::size_t>(dir));

  std::vector<double> base = hyperplane_project(st.entity.row(static_cast<std::size_t>(sample.last_observed())), p);
  for (std::size_t i = 0; i < dim; ++i) base[i] += rd[i];
  const bool with_goal = scenario == Scenario::Goal;
  if (with_goal) {
    const auto g = hyperplane_project(st.entity.row(static_cast<std::size_t>(sample.goal_edge)), p);
    for (std::size_t i = 0; i < dim; ++i) base[i] += g[i];
  }

  StepDistributions out;
  out.num_edges = m;
  const auto steps = static_cast<std::size_t>(params.dims.future_len);
  if (trace) {
    trace->dir = dir;
    trace->with_goal = with_goal;
    trace->q.assign(steps, {});
    trace->q_perp.assign(steps, {});
    trace->logits.assign(steps, {});
  }
  const auto& ra = st.rel(Family::DistanceTo);
  std::vector<double> q(dim);
  std::vector<double> logits(m);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto a = ra.row(static_cast<std::size_t>(distance_relation(static_cast<int>(s) + 1)));
    for (std::size_t i = 0; i < dim; ++i) q[i] = base[i] * a[i];
    // e_j⊥ · q equals e_j · q⊥, so the entity matrix need not be projected.
    std::vector<double> qp = hyperplane_project(q, p);
    simd::gemv(st.entity.data.data(), m, dim, qp.data(), logits.data());
    auto probs = nn::softmax(logits);
    probs.push_back(0.0);
    out.probs.push_back(std::move(probs));
    if (trace) {
      trace->q[s] = q;
      trace->q_perp[s] = std::move(qp);
      trace->logits[s] = logits;
    }
  }
  if (trace) trace->base = std::move(base);
  return out;
}

double pred_loss(const corpus::RouteSample& sample, const StepDistributions& dists, const QueryTrace& trace,
                 const KgParams& params, KgParams* grads, double weight) {
  const std::size_t steps = dists.steps();
  if (sample.future.size() != steps) throw std::invalid_argument("future length does not match the distributions");
  const std::size_t dim = params.dims.dim;
  const std::size_t m = params.dims.num_edges;
  const auto& st = params.store;
  double loss = 0.0;
  std::vector<double> dbase(dim, 0.0);
  std::vector<double> dp_acc(dim, 0.0);
  std::vector<double> g(m);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto target = static_cast<std::size_t>(sample.future[s]);
    const auto& logits = trace.logits[s];
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    loss += std::log(sum) - (logits[target] - mx);
    if (!grads) continue;

    for (std::size_t j = 0; j < m; ++j) g[j] = weight * dists.probs[s][j];
    g[target] -= weight;
    const auto& qp = trace.q_perp[s];
    const auto& q = trace.q[s];
    simd::ger(grads->store.entity.data.data(), m, dim, g.data(), qp.data());
    std::vector<double> dqp(dim, 0.0);
    simd::gemv_t_acc(st.entity.data.data(), m, dim, g.data(), dqp.data());
    const auto p = st.hyper(Family::DirectionTo).row(static_cast<std::size_t>(trace.dir));
    const auto dq = project_backward(q, p, dqp, dp_acc);
    const std::size_t arow = static_cast<std::size_t>(distance_relation(static_cast<int>(s) + 1));
    const auto a = st.rel(Family::DistanceTo).row(arow);
    auto da = grads->store.rel(Family::DistanceTo).row(arow);
    for (std::size_t i = 0; i < dim; ++i) {
      dbase[i] += dq[i] * a[i];
      da[i] += dq[i] * trace.base[i];
    }
  }
  if (grads) {
    const auto dir = static_cast<std::size_t>(trace.dir);
    const auto p = st.hyper(Family::DirectionTo).row(dir);
    add_scaled(grads->store.rel(Family::DirectionTo).row(dir), dbase, 1.0);
    const auto head = static_cast<std::size_t>(sample.last_observed());
    add_scaled(grads->store.entity.row(head), project_backward(st.entity.row(head), p, dbase, dp_acc), 1.0);
    if (trace.with_goal) {
      const auto goal = static_cast<std::size_t>(sample.goal_edge);
      add_scaled(grads->store.entity.row(goal), project_backward(st.entity.row(goal), p, dbase, dp_acc), 1.0);
    }
    add_scaled(grads->store.hyper(Family::DirectionTo).row(dir), dp_acc, 1.0);
  }
  return loss;
}

}  // namespace routekg::kg
