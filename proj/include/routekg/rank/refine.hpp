#pragma once

#include <vector>

#include "routekg/corpus/corpus.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/kg/model.hpp"
#include "routekg/nn/nn.hpp"
#include "routekg/route/spanning.hpp"

namespace routekg::rank {

/// Reranking and top-1 refinement networks.
///
/// The reranker scores each candidate with shared weights: MLP_f embeds the
/// candidate's links and direction labels, MLP_r maps [connectivity margin ∥
/// consistency margin ∥ MLP_f output] to one logit, and a softmax runs over
/// the K logits.  The refiner's MLP_k emits one dim-wide vector per step;
/// its Γ′ x |E| logits are the entity matrix times those vectors, plus the
/// query logits of the same sample when `residual` is set.
struct RefineParams {
  nn::MlpParams mlp_r;  // 2·dim + hidden -> hidden -> 1
  nn::MlpParams mlp_f;  // 2·Γ′·dim -> hidden -> hidden
  nn::MlpParams mlp_k;  // 3·dim + hidden -> hidden -> Γ′·dim
  nn::MlpParams mlp_x;  // 2·Γ′·dim -> hidden -> hidden
  bool residual = true;
};

/// Random weights; MLP_k's output layer starts at zero when `residual`.
RefineParams init_refine_params(const kg::ModelDims& dims, Rng& rng, bool residual = true);
RefineParams zeros_like(const RefineParams& p);
std::vector<nn::Block> blocks(RefineParams& p);

/// Direction labels along a route: D[prev][e] with prev starting at the last
/// observed link.
std::vector<int> route_directions(const Route& route, EdgeId last_observed, const geo::DirectionMatrix& D);

/// Mean consecutive difference of the route's link embeddings projected on
/// `p`; zero for routes shorter than two links.
std::vector<double> route_margin(const Route& route, const kg::KgParams& kg, std::span<const double> p);

struct RankedCandidates {
  std::vector<Route> routes;        // by descending rank_probs (stable)
  std::vector<double> rank_probs;   // aligned with routes
  std::vector<std::size_t> source;  // candidate index of each ranked route
};

struct RankTrace {
  std::vector<Route> candidates;  // input order
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<nn::MlpCache> f_cache, r_cache;
};

RankedCandidates rank_candidates(const route::CandidateSet& cands, const corpus::RouteSample& sample,
                                 const kg::KgParams& kg, const RefineParams& refine, const geo::DirectionMatrix& D,
                                 RankTrace* trace = nullptr);

struct RankLoss {
  double loss = 0.0;
  bool skipped = false;  // truth not among the candidates
};

/// Cross-entropy of the candidate softmax against the true route's index.
/// Gradients reach MLP_r and MLP_f only.
RankLoss rank_loss(const RankTrace& trace, const corpus::RouteSample& sample, const RefineParams& refine,
                   RefineParams* grads = nullptr, double weight = 1.0);

struct RefineTrace {
  std::vector<double> x_in;
  nn::MlpCache x_cache, k_cache;
  std::vector<std::vector<double>> logits;  // Γ′ rows of |E|
};

/// Γ′ x |E| refinement logits for the sample given its current top-1 route
/// and the direction class used by the query.  `base_logits` (the query
/// logits) is required when the parameters are residual.
std::vector<std::vector<double>> refine_logits(const corpus::RouteSample& sample, const Route& top1, int dir,
                                               const kg::KgParams& kg, const RefineParams& refine,
                                               const geo::DirectionMatrix& D,
                                               const std::vector<std::vector<double>>* base_logits,
                                               RefineTrace* trace = nullptr);

/// Greedy connected route through the refinement logits.
Route refine_top1(const corpus::RouteSample& sample, const std::vector<std::vector<double>>& logits,
                  const geo::NaeMatrix& A, const geo::RoadNetwork& net);

/// Greedy route through the refinement logits, evaluating only the logits
/// of each step's exits.  Agrees with refine_top1 on the full logits up to
/// rounding-level ties.
Route refine_route(const corpus::RouteSample& sample, const Route& top1, int dir, const kg::KgParams& kg,
                   const RefineParams& refine, const geo::DirectionMatrix& D,
                   const std::vector<std::vector<double>>* base_logits, const geo::NaeMatrix& A,
                   const geo::RoadNetwork& net);

/// Summed per-step cross-entropy of the refinement logits against the true
/// future, each step normalized over the exits of the true previous link's
/// end node.  Throws DataError if the future is not a connected continuation.
/// Gradients reach MLP_k and MLP_x only.
double refine_loss(const RefineTrace& trace, const corpus::RouteSample& sample, const kg::KgParams& kg,
                   const RefineParams& refine, const geo::RoadNetwork& net, RefineParams* grads = nullptr,
                   double weight = 1.0);

/// Refined route first, then the ranked routes without it, cut to K.
std::vector<Route> assemble_final_topk(const std::vector<Route>& ranked, const Route& refined, std::size_t k);

}  // namespace routekg::rank
