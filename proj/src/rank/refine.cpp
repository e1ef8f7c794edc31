#include "routekg/rank/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "routekg/simd/kernels.hpp"

namespace routekg::rank {

using kg::Family;

RefineParams init_refine_params(const kg::ModelDims& dims, Rng& rng, bool residual) {
  const std::size_t d = dims.dim;
  const std::size_t h = dims.hidden;
  const auto steps = static_cast<std::size_t>(dims.future_len);
  RefineParams p;
  p.mlp_r = nn::make_mlp({2 * d + h, h, 1}, rng);
  p.mlp_f = nn::make_mlp({2 * steps * d, h, h}, rng);
  p.mlp_k = nn::make_mlp({3 * d + h, h, steps * d}, rng);
  p.mlp_x = nn::make_mlp({2 * steps * d, h, h}, rng);
  p.residual = residual;
  if (residual) {
    p.mlp_k.layers.back().weight.fill(0.0);
  }
  return p;
}

RefineParams zeros_like(const RefineParams& p) {
  return {nn::zeros_like(p.mlp_r), nn::zeros_like(p.mlp_f), nn::zeros_like(p.mlp_k), nn::zeros_like(p.mlp_x),
          p.residual};
}

std::vector<nn::Block> blocks(RefineParams& p) {
  std::vector<nn::Block> out;
  nn::append_blocks(out, "mlp_r", p.mlp_r);
  nn::append_blocks(out, "mlp_f", p.mlp_f);
  nn::append_blocks(out, "mlp_k", p.mlp_k);
  nn::append_blocks(out, "mlp_x", p.mlp_x);
  return out;
}

std::vector<int> route_directions(const Route& route, EdgeId last_observed, const geo::DirectionMatrix& D) {
  std::vector<int> out(route.size());
  EdgeId prev = last_observed;
  for (std::size_t i = 0; i < route.size(); ++i) {
    out[i] = D.label(prev, route[i]);
    prev = route[i];
  }
  return out;
}

std::vector<double> route_margin(const Route& route, const kg::KgParams& kg, std::span<const double> p) {
  const std::size_t dim = kg.dims.dim;
  std::vector<double> m(dim, 0.0);
  if (route.size() < 2) return m;
  // The consecutive differences telescope to first minus last.
  const auto first = kg::hyperplane_project(kg.store.entity.row(static_cast<std::size_t>(route.front())), p);
  const auto last = kg::hyperplane_project(kg.store.entity.row(static_cast<std::size_t>(route.back())), p);
  const double inv = 1.0 / static_cast<double>(route.size() - 1);
  for (std::size_t i = 0; i < dim; ++i) m[i] = (first[i] - last[i]) * inv;
  return m;
}

namespace {

// Flattened [link embeddings ∥ direction embeddings] of a route.
std::vector<double> route_features(const Route& route, EdgeId last_observed, const kg::KgParams& kg,
                                   const geo::DirectionMatrix& D) {
  std::vector<double> x;
  x.reserve(2 * route.size() * kg.dims.dim);
  for (EdgeId e : route) {
    const auto row = kg.store.entity.row(static_cast<std::size_t>(e));
    x.insert(x.end(), row.begin(), row.end());
  }
  const auto& rd = kg.store.rel(Family::DirectionTo);
  for (int c : route_directions(route, last_observed, D)) {
    const auto row = rd.row(static_cast<std::size_t>(c));
    x.insert(x.end(), row.begin(), row.end());
  }
  return x;
}

}  // namespace

RankedCandidates rank_candidates(const route::CandidateSet& cands, const corpus::RouteSample& sample,
                                 const kg::KgParams& kg, const RefineParams& refine, const geo::DirectionMatrix& D,
                                 RankTrace* trace) {
  const std::size_t k = cands.routes.size();
  if (k == 0) throw std::invalid_argument("no candidates to rank");
  const auto pc = kg.store.hyper(Family::ConnectBy).row(0);
  const auto ps = kg.store.hyper(Family::ConsistentWith).row(0);
  std::vector<double> logits(k);
  if (trace) {
    trace->candidates = cands.routes;
    trace->f_cache.assign(k, {});
    trace->r_cache.assign(k, {});
  }
  for (std::size_t i = 0; i < k; ++i) {
    const Route& r = cands.routes[i];
    if (r.size() != static_cast<std::size_t>(kg.dims.future_len)) {
      throw std::invalid_argument("candidate length differs from the future length");
    }
    auto in = route_margin(r, kg, pc);
    const auto ms = route_margin(r, kg, ps);
    in.insert(in.end(), ms.begin(), ms.end());
    const auto f = nn::mlp_forward(refine.mlp_f, route_features(r, sample.last_observed(), kg, D),
                                   trace ? &trace->f_cache[i] : nullptr);
    in.insert(in.end(), f.begin(), f.end());
    logits[i] = nn::mlp_forward(refine.mlp_r, in, trace ? &trace->r_cache[i] : nullptr)[0];
  }
  const auto probs = nn::softmax(logits);
  RankedCandidates out;
  out.source.resize(k);
  std::iota(out.source.begin(), out.source.end(), std::size_t{0});
  std::stable_sort(out.source.begin(), out.source.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  for (std::size_t i : out.source) {
    out.routes.push_back(cands.routes[i]);
    out.rank_probs.push_back(probs[i]);
  }
  if (trace) {
    trace->logits = std::move(logits);
    trace->probs = probs;
  }
  return out;
}

RankLoss rank_loss(const RankTrace& trace, const corpus::RouteSample& sample, const RefineParams& refine,
                   RefineParams* grads, double weight) {
  RankLoss out;
  const auto it = std::find(trace.candidates.begin(), trace.candidates.end(), sample.future);
  if (it == trace.candidates.end()) {
    out.skipped = true;
    return out;
  }
  const auto target = static_cast<std::size_t>(it - trace.candidates.begin());
  const auto ce = nn::softmax_cross_entropy(trace.logits, target);
  out.loss = ce.loss;
  if (grads) {
    const std::size_t margin_dims = refine.mlp_r.in_dim() - refine.mlp_f.out_dim();
    for (std::size_t i = 0; i < trace.candidates.size(); ++i) {
      const double g = ce.grad[i];
      if (g == 0.0) continue;
      const auto gin = nn::mlp_backward(refine.mlp_r, trace.r_cache[i], std::span<const double>(&g, 1), grads->mlp_r,
                                        weight);
      nn::mlp_backward(refine.mlp_f, trace.f_cache[i],
                       std::span<const double>(gin.data() + margin_dims, gin.size() - margin_dims), grads->mlp_f,
                       weight);
    }
  }
  return out;
}

namespace {

// MLP_k input for a sample and its current top-1 route.
std::vector<double> refine_input(const corpus::RouteSample& sample, const Route& top1, int dir, const kg::KgParams& kg,
                                 const RefineParams& refine, const geo::DirectionMatrix& D, RefineTrace* trace) {
  nn::MlpCache xc;
  auto x_in = route_features(top1, sample.last_observed(), kg, D);
  const auto xo = nn::mlp_forward(refine.mlp_x, x_in, trace ? &xc : nullptr);
  const auto& rd = kg.store.rel(Family::DirectionTo);
  const auto head = kg.store.entity.row(static_cast<std::size_t>(sample.last_observed()));
  const auto hdir = rd.row(static_cast<std::size_t>(sample.observed_dirs.back()));
  const auto gdir = rd.row(static_cast<std::size_t>(dir));
  std::vector<double> in;
  in.reserve(refine.mlp_k.in_dim());
  in.insert(in.end(), head.begin(), head.end());
  in.insert(in.end(), hdir.begin(), hdir.end());
  in.insert(in.end(), gdir.begin(), gdir.end());
  in.insert(in.end(), xo.begin(), xo.end());
  if (trace) {
    trace->x_in = std::move(x_in);
    trace->x_cache = std::move(xc);
  }
  return in;
}

void check_residual(const RefineParams& refine, const std::vector<std::vector<double>>* base_logits,
                    std::size_t steps) {
  if (refine.residual && (!base_logits || base_logits->size() != steps)) {
    throw std::invalid_argument("residual refinement needs the query logits");
  }
}

}  // namespace

std::vector<std::vector<double>> refine_logits(const corpus::RouteSample& sample, const Route& top1, int dir,
                                               const kg::KgParams& kg, const RefineParams& refine,
                                               const geo::DirectionMatrix& D,
                                               const std::vector<std::vector<double>>* base_logits,
                                               RefineTrace* trace) {
  const std::size_t m = kg.dims.num_edges;
  const std::size_t dim = kg.dims.dim;
  const auto steps = static_cast<std::size_t>(kg.dims.future_len);
  check_residual(refine, base_logits, steps);
  nn::MlpCache kc;
  const auto in = refine_input(sample, top1, dir, kg, refine, D, trace);
  const auto flat = nn::mlp_forward(refine.mlp_k, in, trace ? &kc : nullptr);
  std::vector<std::vector<double>> out(steps, std::vector<double>(m));
  for (std::size_t s = 0; s < steps; ++s) {
    simd::gemv(kg.store.entity.data.data(), m, dim, flat.data() + s * dim, out[s].data());
    if (refine.residual) {
      for (std::size_t j = 0; j < m; ++j) out[s][j] += (*base_logits)[s][j];
    }
  }
  if (trace) {
    trace->k_cache = std::move(kc);
    trace->logits = out;
  }
  return out;
}

Route refine_route(const corpus::RouteSample& sample, const Route& top1, int dir, const kg::KgParams& kg,
                   const RefineParams& refine, const geo::DirectionMatrix& D,
                   const std::vector<std::vector<double>>* base_logits, const geo::NaeMatrix& A,
                   const geo::RoadNetwork& net) {
  const std::size_t dim = kg.dims.dim;
  const auto steps = static_cast<std::size_t>(kg.dims.future_len);
  check_residual(refine, base_logits, steps);
  const auto in = refine_input(sample, top1, dir, kg, refine, D, nullptr);
  const auto flat = nn::mlp_forward(refine.mlp_k, in);
  Route out;
  EdgeId incoming = sample.last_observed();
  NodeId v = net.edge(incoming).end_node;
  for (std::size_t s = 0; s < steps; ++s) {
    EdgeId best = -1;
    double best_logit = 0.0;
    for (EdgeId e : A.row(v)) {
      if (e == A.pad()) continue;
      double l = simd::dot(kg.store.entity.row(static_cast<std::size_t>(e)).data(), flat.data() + s * dim, dim);
      if (refine.residual) l += (*base_logits)[s][static_cast<std::size_t>(e)];
      if (best < 0 || l > best_logit || (l == best_logit && e < best)) {
        best = e;
        best_logit = l;
      }
    }
    if (best < 0) {
      out.push_back(incoming);
      continue;
    }
    out.push_back(best);
    incoming = best;
    v = net.edge(best).end_node;
  }
  return out;
}

Route refine_top1(const corpus::RouteSample& sample, const std::vector<std::vector<double>>& logits,
                  const geo::NaeMatrix& A, const geo::RoadNetwork& net) {
  kg::StepDistributions d;
  d.num_edges = net.num_edges();
  for (const auto& l : logits) {
    auto p = nn::softmax(l);
    p.push_back(0.0);
    d.probs.push_back(std::move(p));
  }
  const NodeId start = net.edge(sample.last_observed()).end_node;
  return route::spanning_route(d, start, sample.last_observed(), A, net, 1, 1).routes.front();
}

double refine_loss(const RefineTrace& trace, const corpus::RouteSample& sample, const kg::KgParams& kg,
                   const RefineParams& refine, const geo::RoadNetwork& net, RefineParams* grads, double weight) {
  const std::size_t steps = trace.logits.size();
  if (sample.future.size() != steps) throw std::invalid_argument("future length does not match the refiner");
  const std::size_t dim = kg.dims.dim;
  double loss = 0.0;
  std::vector<double> gflat(steps * dim, 0.0);
  std::vector<double> local;
  EdgeId prev = sample.last_observed();
  for (std::size_t s = 0; s < steps; ++s) {
    const auto exits = net.out_edges(net.edge(prev).end_node);
    const EdgeId truth = sample.future[s];
    const auto at = std::find(exits.begin(), exits.end(), truth);
    if (at == exits.end()) throw DataError("future link " + std::to_string(truth) + " does not follow link " + std::to_string(prev));
    local.clear();
    for (EdgeId e : exits) local.push_back(trace.logits[s][static_cast<std::size_t>(e)]);
    const auto ce = nn::softmax_cross_entropy(local, static_cast<std::size_t>(at - exits.begin()));
    loss += ce.loss;
    if (grads) {
      for (std::size_t j = 0; j < exits.size(); ++j) {
        simd::axpy(ce.grad[j], kg.store.entity.row(static_cast<std::size_t>(exits[j])).data(), gflat.data() + s * dim,
                   dim);
      }
    }
    prev = truth;
  }
  if (grads) {
    const auto gin = nn::mlp_backward(refine.mlp_k, trace.k_cache, gflat, grads->mlp_k, weight);
    const std::size_t tail = refine.mlp_x.out_dim();
    nn::mlp_backward(refine.mlp_x, trace.x_cache, std::span<const double>(gin.data() + gin.size() - tail, tail),
                     grads->mlp_x, weight);
  }
  return loss;
}

std::vector<Route> assemble_final_topk(const std::vector<Route>& ranked, const Route& refined, std::size_t k) {
  std::vector<Route> out;
  out.reserve(k);
  out.push_back(refined);
  for (const Route& r : ranked) {
    if (out.size() >= k) break;
    if (r != refined) out.push_back(r);
  }
  return out;
}

}  // namespace routekg::rank
