#include "routekg/geo/network.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "routekg/geo/geometry.hpp"

namespace routekg::geo {

using nlohmann::json;

RoadNetwork::RoadNetwork(std::vector<Node> nodes, std::vector<DirectedEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.id != static_cast<NodeId>(i)) throw DataError("node ids must be dense 0..|V|-1");
    if (!std::isfinite(n.lat) || !std::isfinite(n.lon)) {
      throw DataError("node " + std::to_string(i) + ": non-finite coordinate");
    }
  }
  const auto nv = static_cast<NodeId>(nodes_.size());
  std::set<std::tuple<NodeId, NodeId, int>> seen;
  std::vector<std::size_t> degree(nodes_.size(), 0);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const DirectedEdge& e = edges_[i];
    if (e.id != static_cast<EdgeId>(i)) throw DataError("edge ids must be dense 0..|E|-1");
    if (e.start_node < 0 || e.start_node >= nv || e.end_node < 0 || e.end_node >= nv) {
      throw DataError("edge " + std::to_string(i) + ": dangling node reference");
    }
    if (!(e.length > 0.0) || !std::isfinite(e.length)) {
      throw DataError("edge " + std::to_string(i) + ": nonpositive length");
    }
    if (!seen.emplace(e.start_node, e.end_node, e.key).second) {
      throw DataError("edge " + std::to_string(i) + ": duplicate (u, v, key)");
    }
    ++degree[static_cast<std::size_t>(e.start_node)];
  }
  out_offsets_.assign(nodes_.size() + 1, 0);
  for (std::size_t v = 0; v < nodes_.size(); ++v) out_offsets_[v + 1] = out_offsets_[v] + degree[v];
  out_ids_.resize(edges_.size());
  std::vector<std::size_t> cursor(out_offsets_.begin(), out_offsets_.end() - 1);
  for (const DirectedEdge& e : edges_) out_ids_[cursor[static_cast<std::size_t>(e.start_node)]++] = e.id;
}

std::size_t RoadNetwork::max_out_degree() const {
  std::size_t best = 0;
  for (std::size_t v = 0; v < nodes_.size(); ++v) best = std::max(best, out_offsets_[v + 1] - out_offsets_[v]);
  return best;
}

std::uint64_t RoadNetwork::fingerprint() const {
  std::uint64_t h = fnv1a("routekg-network");
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(nodes_.size());
  mix(edges_.size());
  for (const DirectedEdge& e : edges_) {
    mix(static_cast<std::uint64_t>(e.start_node));
    mix(static_cast<std::uint64_t>(e.end_node));
    mix(static_cast<std::uint64_t>(e.key));
    mix(std::bit_cast<std::uint64_t>(e.length));
  }
  return h;
}

bool is_connected_route(const RoadNetwork& net, std::span<const EdgeId> route) {
  for (EdgeId e : route) {
    if (e < 0 || static_cast<std::size_t>(e) >= net.num_edges()) return false;
  }
  for (std::size_t i = 1; i < route.size(); ++i) {
    if (!net.connects(route[i - 1], route[i])) return false;
  }
  return true;
}

namespace {

struct RawNode {
  std::int64_t id;
  double lat, lon;
  std::string where;
};
struct RawEdge {
  std::int64_t id, u, v, key;
  double length;
  std::string where;
};

RoadNetwork reindex(std::vector<RawNode> raw_nodes, std::vector<RawEdge> raw_edges) {
  std::map<std::int64_t, NodeId> node_index;
  std::sort(raw_nodes.begin(), raw_nodes.end(), [](const RawNode& a, const RawNode& b) { return a.id < b.id; });
  std::vector<Node> nodes;
  for (const RawNode& n : raw_nodes) {
    if (n.id < 0) throw DataError(n.where + ": negative node id");
    if (!node_index.emplace(n.id, static_cast<NodeId>(nodes.size())).second) {
      throw DataError(n.where + ": duplicate node id " + std::to_string(n.id));
    }
    if (!std::isfinite(n.lat) || !std::isfinite(n.lon)) throw DataError(n.where + ": non-finite coordinate");
    nodes.push_back({static_cast<NodeId>(nodes.size()), n.lat, n.lon});
  }
  std::stable_sort(raw_edges.begin(), raw_edges.end(), [](const RawEdge& a, const RawEdge& b) { return a.id < b.id; });
  std::vector<DirectedEdge> edges;
  std::set<std::int64_t> edge_ids;
  for (const RawEdge& e : raw_edges) {
    if (e.id < 0) throw DataError(e.where + ": negative edge id");
    if (!edge_ids.insert(e.id).second) throw DataError(e.where + ": duplicate edge id " + std::to_string(e.id));
    const auto u = node_index.find(e.u);
    const auto v = node_index.find(e.v);
    if (u == node_index.end() || v == node_index.end()) {
      throw DataError(e.where + ": dangling node reference");
    }
    if (!(e.length > 0.0) || !std::isfinite(e.length)) throw DataError(e.where + ": nonpositive length");
    edges.push_back({static_cast<EdgeId>(edges.size()), u->second, v->second, static_cast<int>(e.key), e.length});
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits CSV text into rows of trimmed fields; first row is the header.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
      fields.emplace_back(f);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return rows;
}

template <class T>
T parse_number(const std::string& s, const std::string& where, const char* field) {
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || s.empty()) {
    throw DataError(where + ": malformed record (field '" + field + "' = '" + s + "')");
  }
  return value;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::initializer_list<const char*> required, const char* file) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  for (const char* r : required) {
    if (!idx.contains(r)) throw DataError(std::string(file) + " line 1: missing column '" + r + "'");
  }
  return idx;
}

}  // namespace

RoadNetwork parse_network_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed network JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges")) {
    throw DataError("network JSON must be an object with 'nodes' and 'edges'");
  }
  // nlohmann does not expose source positions per element, so records are
  // located by array index.
  std::vector<RawNode> nodes;
  std::size_t i = 0;
  for (const json& n : doc.at("nodes")) {
    const std::string where = "nodes[" + std::to_string(i++) + "]";
    try {
      nodes.push_back({n.at("id").get<std::int64_t>(), n.at("lat").get<double>(), n.at("lon").get<double>(), where});
    } catch (const json::exception& e) {
      throw DataError(where + ": malformed record (" + e.what() + ")");
    }
  }
  std::vector<RawEdge> edges;
  i = 0;
  for (const json& e : doc.at("edges")) {
    const std::string where = "edges[" + std::to_string(i++) + "]";
    try {
      edges.push_back({e.at("id").get<std::int64_t>(), e.at("u").get<std::int64_t>(), e.at("v").get<std::int64_t>(),
                       e.value("key", std::int64_t{0}), e.at("length").get<double>(), where});
    } catch (const json::exception& ex) {
      throw DataError(where + ": malformed record (" + ex.what() + ")");
    }
  }
  return reindex(std::move(nodes), std::move(edges));
}

RoadNetwork parse_network_csv(std::string_view nodes_csv, std::string_view edges_csv) {
  std::vector<RawNode> nodes;
  {
    const auto rows = split_csv(nodes_csv);
    if (rows.empty()) throw DataError("nodes.csv: empty");
    const auto col = header_index(rows[0], {"id", "lat", "lon"}, "nodes.csv");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() == 1 && rows[r][0].empty()) continue;
      const std::string where = "nodes.csv line " + std::to_string(r + 1);
      if (rows[r].size() != rows[0].size()) throw DataError(where + ": malformed record (wrong field count)");
      nodes.push_back({parse_number<std::int64_t>(rows[r][col.at("id")], where, "id"),
                       parse_number<double>(rows[r][col.at("lat")], where, "lat"),
                       parse_number<double>(rows[r][col.at("lon")], where, "lon"), where});
    }
  }
  std::vector<RawEdge> edges;
  {
    const auto rows = split_csv(edges_csv);
    if (rows.empty()) throw DataError("edges.csv: empty");
    const auto col = header_index(rows[0], {"id", "u", "v", "length"}, "edges.csv");
    const bool has_key = col.contains("key");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() == 1 && rows[r][0].empty()) continue;
      const std::string where = "edges.csv line " + std::to_string(r + 1);
      if (rows[r].size() != rows[0].size()) throw DataError(where + ": malformed record (wrong field count)");
      edges.push_back({parse_number<std::int64_t>(rows[r][col.at("id")], where, "id"),
                       parse_number<std::int64_t>(rows[r][col.at("u")], where, "u"),
                       parse_number<std::int64_t>(rows[r][col.at("v")], where, "v"),
                       has_key ? parse_number<std::int64_t>(rows[r][col.at("key")], where, "key") : 0,
                       parse_number<double>(rows[r][col.at("length")], where, "length"), where});
    }
  }
  return reindex(std::move(nodes), std::move(edges));
}

RoadNetwork load_network(const std::filesystem::path& path) {
  if (path.extension() == ".json") return parse_network_json(read_file(path));
  std::filesystem::path dir = path;
  if (!std::filesystem::is_directory(dir)) dir = path.parent_path();
  const auto nodes = dir / "nodes.csv";
  const auto edges = dir / "edges.csv";
  if (!std::filesystem::exists(nodes) || !std::filesystem::exists(edges)) {
    throw DataError("network path must be a .json file or a directory with nodes.csv and edges.csv: " + path.string());
  }
  return parse_network_csv(read_file(nodes), read_file(edges));
}

std::string network_to_json(const RoadNetwork& net) {
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : net.nodes()) doc["nodes"].push_back({{"id", n.id}, {"lat", n.lat}, {"lon", n.lon}});
  doc["edges"] = json::array();
  for (const DirectedEdge& e : net.edges()) {
    doc["edges"].push_back({{"id", e.id}, {"u", e.start_node}, {"v", e.end_node}, {"key", e.key}, {"length", e.length}});
  }
  return doc.dump();
}

RoadNetwork generate_grid_network(const GridOptions& opts) {
  if (opts.side < 2) throw std::invalid_argument("grid side must be >= 2");
  if (!(opts.spacing > 0.0)) throw std::invalid_argument("grid spacing must be > 0");
  const int n = opts.side;
  Rng rng = make_stream(opts.seed, "grid");
  const double lat_per_m = 1.0 / kMetersPerDegree;
  const double lon_per_m = 1.0 / (kMetersPerDegree * std::cos(opts.origin_lat * std::numbers::pi / 180.0));
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double east = c * opts.spacing;
      double north = r * opts.spacing;
      if (opts.jitter > 0.0) {
        east += (2.0 * uniform01(rng) - 1.0) * opts.jitter * opts.spacing;
        north += (2.0 * uniform01(rng) - 1.0) * opts.jitter * opts.spacing;
      }
      nodes.push_back({static_cast<NodeId>(nodes.size()), opts.origin_lat + north * lat_per_m,
                       opts.origin_lon + east * lon_per_m});
    }
  }
  std::vector<DirectedEdge> edges;
  auto add = [&](NodeId u, NodeId v) {
    const double len = planar_distance({nodes[u].lat, nodes[u].lon}, {nodes[v].lat, nodes[v].lon});
    edges.push_back({static_cast<EdgeId>(edges.size()), u, v, 0, len});
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const NodeId v = r * n + c;
      if (c + 1 < n) add(v, v + 1);  // east
      if (r + 1 < n) add(v, v + n);  // north
      if (c > 0) add(v, v - 1);      // west
      if (r > 0) add(v, v - n);      // south
    }
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

}  // namespace routekg::geo
