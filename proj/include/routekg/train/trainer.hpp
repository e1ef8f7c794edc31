#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/eval/metrics.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"
#include "routekg/kg/model.hpp"
#include "routekg/rank/refine.hpp"

namespace routekg::train {

struct TrainConfig {
  Scenario scenario = Scenario::Goal;
  int observed = corpus::kDefaultObserved;
  int future = corpus::kDefaultFuture;
  int n_d = geo::kDefaultDirections;
  int k = 10;
  int n = 0;  // 0 picks the smallest n with n^future >= k
  double w_rep = 1.0;
  double w_rank = 1.0;
  double w_pred = 1.0;
  double w_d = 2.4;  // NoGoal only
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double refine_lr = 0.0;          // rank and refine networks; 0 = lr
  std::size_t batch_size = 2048;   // routes per iteration
  std::size_t triplet_batch = 0;   // triplet pairs per family; 0 = batch_size
  std::size_t max_iterations = 10000;
  std::size_t patience = 100;      // in validations
  std::size_t eval_every = 50;     // iterations between validations
  std::size_t val_limit = 512;     // validation samples used; 0 = all
  std::size_t window_stride = 0;   // 0 = one sample per route
  double margin = 1.0;
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  std::size_t hidden = 64;
  bool teacher_forcing = true;     // NoGoal training queries with the true direction
  bool refine_residual = true;
  kg::ScoreNorm norm = kg::ScoreNorm::L1;

  int branching() const;
  std::size_t triplets_per_family() const { return triplet_batch ? triplet_batch : batch_size; }
};

/// Flat `key = value` text, one field per line; `#` starts a comment.
std::string config_to_text(const TrainConfig& c);
/// Applies the keys found in `text` on top of `c`.  Throws DataError on an
/// unknown key or a malformed value.
void apply_config_text(std::string_view text, TrainConfig& c);
/// Sets one field by name; same errors as apply_config_text.
void set_config_value(TrainConfig& c, std::string_view key, std::string_view value);

struct Model {
  TrainConfig config;
  kg::KgParams kg;
  rank::RefineParams refine;
};

Model init_model(const TrainConfig& config, std::size_t num_edges);

struct Context {
  const geo::RoadNetwork& net;
  const geo::DirectionMatrix& D;
  const geo::NaeMatrix& A;
};

struct IterationLog {
  std::size_t iteration = 0;
  double rep = 0.0, dir = 0.0, pred = 0.0, rank = 0.0, refine = 0.0, total = 0.0;
  std::size_t rank_skipped = 0;
};

struct ValidationLog {
  std::size_t iteration = 0;
  double route_r1 = 0.0;
};

struct TrainHistory {
  std::vector<IterationLog> iterations;
  std::vector<ValidationLog> validations;
  std::size_t best_iteration = 0;
  bool stopped_early = false;
};

/// Called after every iteration's parameter update and normalization.
using Observer = std::function<void(std::size_t iteration, const Model& model)>;

struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Runs the joint training loop and returns the parameters with the best
/// validation route R@1.  Throws NumericError on a non-finite loss and
/// DataError when the corpus cannot feed training.
TrainResult train(const corpus::RouteCorpus& corpus, const Context& ctx, const TrainConfig& config,
                  const Observer& observer = {});

struct PredictOptions {
  Scenario scenario = Scenario::Goal;
  int k = 10;
  int n = 2;
  bool refine = true;  // rerank and refine; off emits the raw tree order
  std::optional<int> dir;
};

PredictOptions predict_options(const TrainConfig& c);

struct Prediction {
  std::vector<Route> routes;
  std::vector<double> scores;  // one per route, higher is better
  int dir = 0;                 // direction class used by the query
};

Prediction predict(const Model& model, const Context& ctx, const corpus::RouteSample& sample,
                   const PredictOptions& opts);

struct SplitPredictions {
  std::vector<std::vector<Route>> routes;
  std::vector<std::vector<double>> scores;
  std::vector<Route> truths;
};

SplitPredictions predict_split(const Model& model, const Context& ctx, const corpus::RouteCorpus& corpus,
                               const std::vector<std::size_t>& indices, const PredictOptions& opts);

eval::EvalReport evaluate(const Model& model, const Context& ctx, const corpus::RouteCorpus& corpus,
                          const std::vector<std::size_t>& indices, const PredictOptions& opts);

}  // namespace routekg::train
