#include "routekg/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace routekg::corpus {

using nlohmann::json;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

// Node-based Dijkstra returning the edge sequence from `src` to `dst`, or
// empty when unreachable.  Ties resolve toward the lower node id.
Route shortest_path(const geo::RoadNetwork& net, NodeId src, NodeId dst, const std::vector<double>& weight) {
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
      const double nd = d + weight[static_cast<std::size_t>(e)];
      if (nd < dist[static_cast<std::size_t>(w)]) {
        dist[static_cast<std::size_t>(w)] = nd;
        via[static_cast<std::size_t>(w)] = e;
        heap.emplace(nd, w);
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(dst)])) return {};
  Route path;
  for (NodeId v = dst; v != src;) {
    const EdgeId e = via[static_cast<std::size_t>(v)];
    path.push_back(e);
    v = net.edge(e).start_node;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

bool revisits_edge(const Route& r) {
  Route sorted = r;
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

}  // namespace

std::vector<Route> generate_routes(const geo::RoadNetwork& net, const RouteGenOptions& opts) {
  if (net.num_nodes() < 2) throw DataError("route generation needs at least two nodes");
  std::vector<Route> routes;
  routes.reserve(opts.count);
  const std::size_t budget = std::max<std::size_t>(opts.count * opts.attempts_per_route, 100);
  std::vector<double> weight(net.num_edges());
  for (std::size_t attempt = 0; attempt < budget && routes.size() < opts.count; ++attempt) {
    // One stream per attempt keeps routes independent of rejection history.
    Rng rng = make_stream(opts.seed, "routes", attempt);
    const auto src = static_cast<NodeId>(uniform_index(rng, net.num_nodes()));
    const auto dst = static_cast<NodeId>(uniform_index(rng, net.num_nodes()));
    if (src == dst) continue;
    for (std::size_t e = 0; e < net.num_edges(); ++e) {
      const double noise = opts.sigma > 0.0 ? std::exp(opts.sigma * gaussian(rng)) : 1.0;
      weight[e] = net.edge(static_cast<EdgeId>(e)).length * noise;
    }
    Route path = shortest_path(net, src, dst, weight);
    if (path.size() < opts.min_len || revisits_edge(path)) continue;
    routes.push_back(std::move(path));
  }
  if (routes.size() < opts.count) {
    throw DataError("generated only " + std::to_string(routes.size()) + " of " + std::to_string(opts.count) +
                    " routes with at least " + std::to_string(opts.min_len) + " links");
  }
  return routes;
}

RouteSample make_sample(std::span<const EdgeId> window, int observed, const geo::DirectionMatrix& dirs,
                        ObservedDirMode mode) {
  RouteSample s;
  const auto obs = static_cast<std::size_t>(observed);
  s.observed.assign(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(obs));
  s.future.assign(window.begin() + static_cast<std::ptrdiff_t>(obs), window.end());
  s.observed_dirs.resize(obs);
  for (std::size_t j = 0; j < obs; ++j) {
    if (j == 0 || mode == ObservedDirMode::IntraEdge) {
      s.observed_dirs[j] = dirs.intra(s.observed[j]);
    } else {
      s.observed_dirs[j] = dirs.label(s.observed[j - 1], s.observed[j]);
    }
  }
  s.goal_edge = s.future.back();
  s.goal_dir = dirs.label(s.observed.back(), s.goal_edge);
  return s;
}

SplitResult split_corpus(const std::vector<Route>& routes, const geo::DirectionMatrix& dirs, const SplitOptions& opts) {
  if (opts.observed < 1 || opts.future < 1) throw std::invalid_argument("observed and future lengths must be >= 1");
  const double total = opts.ratios[0] + opts.ratios[1] + opts.ratios[2];
  if (!(total > 0.0) || opts.ratios[0] < 0 || opts.ratios[1] < 0 || opts.ratios[2] < 0) {
    throw std::invalid_argument("split ratios must be nonnegative with positive sum");
  }
  const auto window = static_cast<std::size_t>(opts.observed + opts.future);
  SplitResult out;
  // samples of one route stay in one split
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // [begin, end) into samples
  for (const Route& r : routes) {
    if (r.size() < window) {
      ++out.rejected;
      continue;
    }
    const std::size_t begin = out.corpus.samples.size();
    if (opts.window_stride == 0) {
      out.corpus.samples.push_back(make_sample({r.data(), window}, opts.observed, dirs, opts.dir_mode));
    } else {
      for (std::size_t off = 0; off + window <= r.size(); off += opts.window_stride) {
        out.corpus.samples.push_back(make_sample({r.data() + off, window}, opts.observed, dirs, opts.dir_mode));
      }
    }
    groups.emplace_back(begin, out.corpus.samples.size());
  }
  const std::size_t n = groups.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(opts.seed, "split");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  // The small epsilon keeps e.g. 0.6 * 10 from flooring to 5.
  const auto n_train = static_cast<std::size_t>(std::floor(n * opts.ratios[0] / total + 1e-9));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(n * opts.ratios[1] / total + 1e-9)));
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? out.corpus.train : (i < n_train + n_val ? out.corpus.val : out.corpus.test);
    for (std::size_t s = groups[order[i]].first; s < groups[order[i]].second; ++s) dst.push_back(s);
  }
  return out;
}

std::vector<Route> parse_routes(std::string_view text) {
  std::vector<Route> routes;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json rec = json::parse(line);
      routes.push_back(rec.at("edges").get<Route>());
    } catch (const json::exception& e) {
      throw DataError("routes line " + std::to_string(line_no) + ": malformed record (" + e.what() + ")");
    }
  }
  return routes;
}

std::vector<Route> load_routes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_routes(ss.str());
}

std::string routes_to_jsonl(const std::vector<Route>& routes) {
  std::string out;
  for (const Route& r : routes) {
    out += json{{"edges", r}}.dump();
    out += '\n';
  }
  return out;
}

std::string corpus_to_jsonl(const RouteCorpus& corpus) {
  std::vector<std::string_view> membership(corpus.samples.size(), "none");
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (std::size_t i : corpus.indices(s)) membership[i] = split_name(s);
  }
  std::string out;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    Route edges = corpus.samples[i].observed;
    edges.insert(edges.end(), corpus.samples[i].future.begin(), corpus.samples[i].future.end());
    out += json{{"edges", edges}, {"split", membership[i]}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace routekg::corpus
