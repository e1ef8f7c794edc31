#pragma once

#include <string>
#include <vector>

#include "routekg/common.hpp"
#include "routekg/corpus/corpus.hpp"
#include "routekg/geo/matrices.hpp"
#include "routekg/geo/network.hpp"
#include "routekg/kg/model.hpp"

namespace routekg::eval {

struct SampleRecord {
  std::size_t sample = 0;
  int first_hit = 0;                // 1-based rank of the first exact match; 0 if none
  std::vector<double> link_recall;  // best matched-link fraction at each K
};

struct EvalReport {
  std::vector<int> ks;
  std::vector<double> link_recall;
  std::vector<double> route_recall;
  std::vector<double> mrr;
  std::vector<SampleRecord> records;
  std::size_t samples = 0;

  /// Value at K; throws std::out_of_range for a K not evaluated.
  double link_at(int k) const;
  double route_at(int k) const;
  double mrr_at(int k) const;
};

/// Link recall: mean over samples of the best positional match fraction
/// among the first K candidates.  Route recall: exact match within K.  MRR:
/// reciprocal rank of the first exact match within K.
/// Throws std::invalid_argument when a prediction list is shorter than the
/// largest K or a route length differs from its truth.
EvalReport compute_metrics(const std::vector<std::vector<Route>>& predictions, const std::vector<Route>& truths,
                           const std::vector<int>& ks = {1, 5, 10});

std::string report_to_json(const EvalReport& r, bool with_records = false);

struct FlowMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

/// Over links with a nonzero truth or estimate.  R² is 1 - SS_res/SS_tot;
/// with SS_tot = 0 it is 1 for a perfect fit and 0 otherwise.
FlowMetrics flow_metrics(const std::vector<double>& est, const std::vector<double>& truth);

struct FlowReport {
  std::vector<double> truth;                  // per link
  std::vector<std::vector<double>> estimate;  // per repeat, per link
  std::vector<FlowMetrics> runs;
  FlowMetrics mean, stddev;
};

/// Samples one candidate per prediction from softmax(score / tau) and
/// counts link traversals, `repeats` times.  Throws std::invalid_argument
/// for tau <= 0.
FlowReport estimate_flows(const std::vector<std::vector<Route>>& predictions,
                          const std::vector<std::vector<double>>& scores, const std::vector<Route>& truths,
                          std::size_t num_edges, double tau = 0.1, int repeats = 10, std::uint64_t seed = 0);

std::string flow_to_json(const FlowReport& r);
std::string flow_to_csv(const FlowReport& r);

/// First-order link transition model with add-one smoothing over each
/// link's successors.
class MarkovBaseline {
 public:
  MarkovBaseline(const geo::RoadNetwork& net, const corpus::RouteCorpus& corpus);

  /// Probability of moving from `from` to `to` (0 unless they connect).
  double transition(EdgeId from, EdgeId to) const;

  /// Step marginals propagated from the last observed link.
  kg::StepDistributions step_distributions(const corpus::RouteSample& sample, int steps) const;

  std::vector<Route> predict(const corpus::RouteSample& sample, const geo::NaeMatrix& A, int n, int k) const;

 private:
  const geo::RoadNetwork* net_;
  std::vector<std::vector<double>> counts_;  // per edge, aligned with out_edges(end_node)
};

/// Shortest path by length from the current node to the goal link's start,
/// then the goal link; cut or padded (repeating the goal link) to `steps`.
/// Throws DataError when the goal is unreachable.
Route dijkstra_baseline(const geo::RoadNetwork& net, const corpus::RouteSample& sample, int steps);

}  // namespace routekg::eval
