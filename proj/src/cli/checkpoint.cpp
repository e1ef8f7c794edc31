#include "routekg/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace routekg::cli {

namespace {

constexpr char kMagic[4] = {'R', 'K', 'G', 'C'};

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw DataError("checkpoint is truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > in_.size() - pos_) throw DataError("checkpoint is truncated");
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::vector<nn::Block> model_blocks(train::Model& m) {
  auto out = kg::blocks(m.kg);
  for (auto& b : rank::blocks(m.refine)) out.push_back(b);
  return out;
}

}  // namespace

NetworkFingerprint fingerprint_of(const geo::RoadNetwork& net) {
  return {net.num_nodes(), net.num_edges(), net.fingerprint()};
}

std::string encode_checkpoint(const train::Model& model, const NetworkFingerprint& fp) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u64(fp.num_nodes);
  w.u64(fp.num_edges);
  w.u64(fp.hash);
  w.str(train::config_to_text(model.config));
  train::Model m = model;
  const auto blocks = model_blocks(m);
  w.u64(blocks.size());
  for (const auto& b : blocks) {
    w.str(b.name);
    w.u64(b.rows());
    w.u64(b.cols);
    w.raw(b.values.data(), b.values.size() * sizeof(double));
  }
  const std::uint64_t sum = fnv1a(w.bytes());
  w.u64(sum);
  return std::move(w.bytes());
}

train::Model decode_checkpoint(std::string_view bytes, const NetworkFingerprint& expected) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a checkpoint file");
  }
  Reader r(bytes.substr(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof kMagic + 4 + 8) throw DataError("checkpoint is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  NetworkFingerprint fp;
  fp.num_nodes = r.u64();
  fp.num_edges = r.u64();
  fp.hash = r.u64();
  if (!(fp == expected)) {
    throw DataError("checkpoint was trained on a different network (" + std::to_string(fp.num_nodes) + " nodes, " +
                    std::to_string(fp.num_edges) + " edges)");
  }
  train::TrainConfig config;
  train::apply_config_text(r.str(), config);
  train::Model model = train::init_model(config, fp.num_edges);
  auto blocks = model_blocks(model);
  const std::uint64_t count = r.u64();
  if (count != blocks.size()) throw DataError("checkpoint has " + std::to_string(count) + " blocks, expected " +
                                              std::to_string(blocks.size()));
  for (auto& b : blocks) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (name != b.name || rows != b.rows() || cols != b.cols) {
      throw DataError("checkpoint block " + name + " does not match the configured model");
    }
    r.raw(b.values.data(), b.values.size() * sizeof(double));
  }
  if (fnv1a(body) != stored) throw DataError("checkpoint checksum mismatch (truncated or corrupted)");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const train::Model& model, const geo::RoadNetwork& net) {
  write_file_atomic(path, encode_checkpoint(model, fingerprint_of(net)));
}

train::Model load_checkpoint(const std::filesystem::path& path, const geo::RoadNetwork& net) {
  return decode_checkpoint(read_file(path), fingerprint_of(net));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move " + tmp.string() + " into place");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace routekg::cli
