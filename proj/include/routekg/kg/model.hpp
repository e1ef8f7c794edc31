#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/kg/triplets.hpp"
#include "routekg/nn/nn.hpp"

namespace routekg::kg {

enum class ScoreNorm { L1, L2 };

struct ModelDims {
  std::size_t num_edges = 0;
  int observed_len = corpus::kDefaultObserved;
  int future_len = corpus::kDefaultFuture;
  int n_d = 8;
  std::size_t dim = 64;     // shared entity / relation embedding width
  std::size_t hidden = 64;  // MLP hidden width
};

/// Entity matrix plus one relation matrix and one hyperplane matrix per
/// family, all `dim` wide.
struct EmbeddingStore {
  nn::Tensor2 entity;
  std::array<nn::Tensor2, 4> relation;
  std::array<nn::Tensor2, 4> hyperplane;

  nn::Tensor2& rel(Family f) { return relation[static_cast<std::size_t>(f)]; }
  const nn::Tensor2& rel(Family f) const { return relation[static_cast<std::size_t>(f)]; }
  nn::Tensor2& hyper(Family f) { return hyperplane[static_cast<std::size_t>(f)]; }
  const nn::Tensor2& hyper(Family f) const { return hyperplane[static_cast<std::size_t>(f)]; }
};

struct KgParams {
  ModelDims dims;
  EmbeddingStore store;
  nn::MlpParams mlp_d;  // 2·Γ·dim -> hidden -> n_d
};

/// Embeddings uniform in ±6/sqrt(dim); hyperplanes normalized.
KgParams init_kg_params(const ModelDims& dims, Rng& rng);
KgParams zeros_like(const KgParams& p);
std::vector<nn::Block> blocks(KgParams& p);

std::vector<double> hyperplane_project(std::span<const double> vec, std::span<const double> p);

double transh_score(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                    std::span<const double> p, ScoreNorm norm = ScoreNorm::L1);

struct RepLoss {
  double loss = 0.0;
  std::size_t active = 0;  // pairs with a live hinge
};

/// Hinge sum over the batch pairs.  When `grads` is set, `weight` times the
/// gradient is accumulated into it.
RepLoss rep_loss(const TripletBatch& batch, const KgParams& params, double margin, KgParams* grads = nullptr,
                 double weight = 1.0, ScoreNorm norm = ScoreNorm::L1);

/// Rescales every hyperplane row to unit length.  Rows within a few ulp of
/// unit length are left untouched; rows with norm below 1e-12 are redrawn.
void normalize_hyperplanes(KgParams& params, Rng& rng);

/// max |‖row‖ - 1| over all hyperplane rows.
double hyperplane_norm_deviation(const KgParams& params);

struct DirectionPrediction {
  int cls = 0;
  std::vector<double> logits;
};

DirectionPrediction predict_direction(const corpus::RouteSample& sample, const KgParams& params);

/// Cross-entropy of the direction logits against `sample.goal_dir`.
double direction_loss(const corpus::RouteSample& sample, const KgParams& params, KgParams* grads = nullptr,
                      double weight = 1.0);

/// Per-step distributions over |E| + 1 slots; the last slot is PAD and has
/// probability 0.
struct StepDistributions {
  std::size_t num_edges = 0;
  std::vector<std::vector<double>> probs;

  std::size_t steps() const { return probs.size(); }
  EdgeId pad() const { return static_cast<EdgeId>(num_edges); }
};

/// Intermediates of one query, enough for the backward pass.
struct QueryTrace {
  int dir = 0;
  bool with_goal = false;
  std::vector<double> base;                 // h⊥ + r^d (+ g⊥)
  std::vector<std::vector<double>> q;       // base ⊙ r^{a,γ}
  std::vector<std::vector<double>> q_perp;  // q projected on p^d
  std::vector<std::vector<double>> logits;  // |E| per step
};

/// Direction class the query will use.  Throws std::out_of_range for an
/// invalid override.
int query_direction(const corpus::RouteSample& sample, const KgParams& params, Scenario scenario,
                    std::optional<int> dir_override = {});

StepDistributions query_tail(const corpus::RouteSample& sample, const KgParams& params, Scenario scenario,
                             std::optional<int> dir_override = {}, QueryTrace* trace = nullptr);

/// Summed per-step cross-entropy against the true future links.
double pred_loss(const corpus::RouteSample& sample, const StepDistributions& dists, const QueryTrace& trace,
                 const KgParams& params, KgParams* grads = nullptr, double weight = 1.0);

}  // namespace routekg::kg
