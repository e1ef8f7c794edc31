#include "routekg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "routekg/nn/nn.hpp"
#include "routekg/route/spanning.hpp"

namespace routekg::eval {

using nlohmann::json;

namespace {

std::size_t k_index(const std::vector<int>& ks, int k) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw std::out_of_range("K = " + std::to_string(k) + " was not evaluated");
  return static_cast<std::size_t>(it - ks.begin());
}

}  // namespace

double EvalReport::link_at(int k) const { return link_recall[k_index(ks, k)]; }
double EvalReport::route_at(int k) const { return route_recall[k_index(ks, k)]; }
double EvalReport::mrr_at(int k) const { return mrr[k_index(ks, k)]; }

EvalReport compute_metrics(const std::vector<std::vector<Route>>& predictions, const std::vector<Route>& truths,
                           const std::vector<int>& ks) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("predictions and truths differ in count");
  if (ks.empty()) throw std::invalid_argument("no K values");
  const int kmax = *std::max_element(ks.begin(), ks.end());
  EvalReport rep;
  rep.ks = ks;
  rep.samples = truths.size();
  rep.link_recall.assign(ks.size(), 0.0);
  rep.route_recall.assign(ks.size(), 0.0);
  rep.mrr.assign(ks.size(), 0.0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto& preds = predictions[i];
    const Route& truth = truths[i];
    if (preds.size() < static_cast<std::size_t>(kmax)) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has fewer than " + std::to_string(kmax) +
                                  " predictions");
    }
    SampleRecord rec;
    rec.sample = i;
    // running best link fraction over the first j candidates
    std::vector<double> best(static_cast<std::size_t>(kmax), 0.0);
    double running = 0.0;
    for (int j = 0; j < kmax; ++j) {
      const Route& p = preds[static_cast<std::size_t>(j)];
      if (p.size() != truth.size()) throw std::invalid_argument("prediction length differs from truth length");
      std::size_t hits = 0;
      for (std::size_t s = 0; s < p.size(); ++s) hits += p[s] == truth[s];
      const double frac = truth.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
      running = std::max(running, frac);
      best[static_cast<std::size_t>(j)] = running;
      if (rec.first_hit == 0 && p == truth) rec.first_hit = j + 1;
    }
    for (std::size_t q = 0; q < ks.size(); ++q) {
      const int k = ks[q];
      const double link = best[static_cast<std::size_t>(k - 1)];
      rec.link_recall.push_back(link);
      rep.link_recall[q] += link;
      if (rec.first_hit != 0 && rec.first_hit <= k) {
        rep.route_recall[q] += 1.0;
        rep.mrr[q] += 1.0 / rec.first_hit;
      }
    }
    rep.records.push_back(std::move(rec));
  }
  if (!truths.empty()) {
    const double n = static_cast<double>(truths.size());
    for (std::size_t q = 0; q < ks.size(); ++q) {
      rep.link_recall[q] /= n;
      rep.route_recall[q] /= n;
      rep.mrr[q] /= n;
    }
  }
  return rep;
}

std::string report_to_json(const EvalReport& r, bool with_records) {
  json j;
  j["samples"] = r.samples;
  for (std::size_t q = 0; q < r.ks.size(); ++q) {
    const std::string k = std::to_string(r.ks[q]);
    j["link_recall"][k] = r.link_recall[q];
    j["route_recall"][k] = r.route_recall[q];
    j["mrr"][k] = r.mrr[q];
  }
  if (with_records) {
    j["records"] = json::array();
    for (const auto& rec : r.records) {
      j["records"].push_back({{"sample", rec.sample}, {"first_hit", rec.first_hit}, {"link_recall", rec.link_recall}});
    }
  }
  return j.dump(2);
}

FlowMetrics flow_metrics(const std::vector<double>& est, const std::vector<double>& truth) {
  if (est.size() != truth.size()) throw std::invalid_argument("flow vectors differ in length");
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0.0 || est[i] != 0.0) used.push_back(i);
  }
  FlowMetrics m;
  if (used.empty()) {
    m.r2 = 1.0;
    return m;
  }
  const double n = static_cast<double>(used.size());
  double mean = 0.0;
  for (std::size_t i : used) mean += truth[i];
  mean /= n;
  double abs_sum = 0.0, res = 0.0, tot = 0.0;
  for (std::size_t i : used) {
    const double e = est[i] - truth[i];
    abs_sum += std::abs(e);
    res += e * e;
    tot += (truth[i] - mean) * (truth[i] - mean);
  }
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(res / n);
  m.r2 = tot > 0.0 ? 1.0 - res / tot : (res == 0.0 ? 1.0 : 0.0);
  return m;
}

FlowReport estimate_flows(const std::vector<std::vector<Route>>& predictions,
                          const std::vector<std::vector<double>>& scores, const std::vector<Route>& truths,
                          std::size_t num_edges, double tau, int repeats, std::uint64_t seed) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (predictions.size() != scores.size() || predictions.size() != truths.size()) {
    throw std::invalid_argument("predictions, scores and truths differ in count");
  }
  FlowReport rep;
  rep.truth.assign(num_edges, 0.0);
  for (const Route& r : truths) {
    for (EdgeId e : r) rep.truth[static_cast<std::size_t>(e)] += 1.0;
  }
  std::vector<std::vector<double>> probs(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (scores[i].size() != predictions[i].size() || predictions[i].empty()) {
      throw std::invalid_argument("sample " + std::to_string(i) + ": scores do not match candidates");
    }
    std::vector<double> scaled(scores[i].size());
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = scores[i][k] / tau;
    probs[i] = nn::softmax(scaled);
  }
  for (int rep_i = 0; rep_i < repeats; ++rep_i) {
    Rng rng = make_stream(seed, "flow", static_cast<std::uint64_t>(rep_i));
    std::vector<double> est(num_edges, 0.0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const double u = uniform01(rng);
      double acc = 0.0;
      std::size_t pick = 0;
      // Fall back to the most probable candidate if rounding leaves u uncovered.
      std::size_t top = 0;
      bool found = false;
      for (std::size_t k = 0; k < probs[i].size(); ++k) {
        if (probs[i][k] > probs[i][top]) top = k;
        acc += probs[i][k];
        if (!found && u < acc && probs[i][k] > 0.0) {
          pick = k;
          found = true;
        }
      }
      if (!found) pick = top;
      for (EdgeId e : predictions[i][pick]) est[static_cast<std::size_t>(e)] += 1.0;
    }
    rep.runs.push_back(flow_metrics(est, rep.truth));
    rep.estimate.push_back(std::move(est));
  }
  const double n = static_cast<double>(rep.runs.size());
  if (n > 0) {
    for (const auto& r : rep.runs) {
      rep.mean.mae += r.mae / n;
      rep.mean.rmse += r.rmse / n;
      rep.mean.r2 += r.r2 / n;
    }
    for (const auto& r : rep.runs) {
      rep.stddev.mae += (r.mae - rep.mean.mae) * (r.mae - rep.mean.mae) / n;
      rep.stddev.rmse += (r.rmse - rep.mean.rmse) * (r.rmse - rep.mean.rmse) / n;
      rep.stddev.r2 += (r.r2 - rep.mean.r2) * (r.r2 - rep.mean.r2) / n;
    }
    rep.stddev.mae = std::sqrt(rep.stddev.mae);
    rep.stddev.rmse = std::sqrt(rep.stddev.rmse);
    rep.stddev.r2 = std::sqrt(rep.stddev.r2);
  }
  return rep;
}

std::string flow_to_json(const FlowReport& r) {
  auto metrics = [](const FlowMetrics& m) { return json{{"mae", m.mae}, {"rmse", m.rmse}, {"r2", m.r2}}; };
  json j;
  j["repeats"] = r.runs.size();
  j["mean"] = metrics(r.mean);
  j["std"] = metrics(r.stddev);
  j["runs"] = json::array();
  for (const auto& m : r.runs) j["runs"].push_back(metrics(m));
  return j.dump(2);
}

std::string flow_to_csv(const FlowReport& r) {
  std::ostringstream os;
  os << "edge,truth,estimate\n";
  for (std::size_t e = 0; e < r.truth.size(); ++e) {
    double mean = 0.0;
    for (const auto& est : r.estimate) mean += est[e];
    if (!r.estimate.empty()) mean /= static_cast<double>(r.estimate.size());
    os << e << ',' << r.truth[e] << ',' << mean << '\n';
  }
  return os.str();
}

MarkovBaseline::MarkovBaseline(const geo::RoadNetwork& net, const corpus::RouteCorpus& corpus) : net_(&net) {
  if (corpus.train.empty()) throw DataError("the Markov baseline needs a nonempty training split");
  counts_.resize(net.num_edges());
  for (std::size_t e = 0; e < net.num_edges(); ++e) {
    counts_[e].assign(net.out_degree(net.edge(static_cast<EdgeId>(e)).end_node), 0.0);
  }
  auto count = [&](EdgeId a, EdgeId b) {
    const auto outs = net.out_edges(net.edge(a).end_node);
    const auto it = std::find(outs.begin(), outs.end(), b);
    if (it != outs.end()) counts_[static_cast<std::size_t>(a)][static_cast<std::size_t>(it - outs.begin())] += 1.0;
  };
  for (std::size_t i : corpus.train) {
    const auto& s = corpus.samples[i];
    Route full = s.observed;
    full.insert(full.end(), s.future.begin(), s.future.end());
    for (std::size_t j = 1; j < full.size(); ++j) count(full[j - 1], full[j]);
  }
}

double MarkovBaseline::transition(EdgeId from, EdgeId to) const {
  const auto outs = net_->out_edges(net_->edge(from).end_node);
  const auto it = std::find(outs.begin(), outs.end(), to);
  if (it == outs.end()) return 0.0;
  const auto& row = counts_[static_cast<std::size_t>(from)];
  double total = 0.0;
  for (double c : row) total += c + 1.0;
  return (row[static_cast<std::size_t>(it - outs.begin())] + 1.0) / total;
}

kg::StepDistributions MarkovBaseline::step_distributions(const corpus::RouteSample& sample, int steps) const {
  const std::size_t m = net_->num_edges();
  kg::StepDistributions d;
  d.num_edges = m;
  std::vector<double> cur(m, 0.0);
  cur[static_cast<std::size_t>(sample.last_observed())] = 1.0;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> next(m + 1, 0.0);
    double mass = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      if (cur[e] == 0.0) continue;
      const auto outs = net_->out_edges(net_->edge(static_cast<EdgeId>(e)).end_node);
      if (outs.empty()) continue;
      for (EdgeId t : outs) next[static_cast<std::size_t>(t)] += cur[e] * transition(static_cast<EdgeId>(e), t);
    }
    for (std::size_t e = 0; e < m; ++e) mass += next[e];
    if (mass > 0.0) {
      for (std::size_t e = 0; e < m; ++e) next[e] /= mass;
    } else {
      for (std::size_t e = 0; e < m; ++e) next[e] = 1.0 / static_cast<double>(m);
    }
    cur.assign(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(m));
    d.probs.push_back(std::move(next));
  }
  return d;
}

std::vector<Route> MarkovBaseline::predict(const corpus::RouteSample& sample, const geo::NaeMatrix& A, int n,
                                           int k) const {
  const auto d = step_distributions(sample, static_cast<int>(sample.future.size()));
  const NodeId start = net_->edge(sample.last_observed()).end_node;
  return route::spanning_route(d, start, sample.last_observed(), A, *net_, n, k).routes;
}

Route dijkstra_baseline(const geo::RoadNetwork& net, const corpus::RouteSample& sample, int steps) {
  const NodeId src = net.edge(sample.last_observed()).end_node;
  const NodeId dst = net.edge(sample.goal_edge).start_node;
  const std::size_t nv = net.num_nodes();
  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  std::vector<EdgeId> via(nv, -1);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(src)] = 0.0;
  heap.emplace(0.0, src);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    if (v == dst) break;
    for (EdgeId e : net.out_edges(v)) {
      const NodeId w = net.edge(e).end_node;
      const double nd = d + net.edge(e).length;
      if (nd < dist[static_cast<std::size_t>(w)]) {
        dist[static_cast<std::size_t>(w)] = nd;
        via[static_cast<std::size_t>(w)] = e;
        heap.emplace(nd, w);
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(dst)])) {
    throw DataError("goal link " + std::to_string(sample.goal_edge) + " is unreachable");
  }
  Route path;
  for (NodeId v = dst; v != src;) {
    const EdgeId e = via[static_cast<std::size_t>(v)];
    path.push_back(e);
    v = net.edge(e).start_node;
  }
  std::reverse(path.begin(), path.end());
  path.push_back(sample.goal_edge);
  path.resize(static_cast<std::size_t>(steps), sample.goal_edge);
  return path;
}

}  // namespace routekg::eval
