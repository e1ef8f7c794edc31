#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "routekg/geo/network.hpp"
#include "routekg/train/trainer.hpp"

namespace routekg::cli {

inline constexpr std::uint32_t kCheckpointVersion = 2;

struct NetworkFingerprint {
  std::uint64_t num_nodes = 0;
  std::uint64_t num_edges = 0;
  std::uint64_t hash = 0;

  bool operator==(const NetworkFingerprint&) const = default;
};

NetworkFingerprint fingerprint_of(const geo::RoadNetwork& net);

/// Binary layout, little-endian: "RKGC", u32 version, fingerprint (3 x u64),
/// u64-length-prefixed config text, u64 block count, then per block its
/// name, rows, cols and raw doubles; a trailing FNV-1a of everything before it.
std::string encode_checkpoint(const train::Model& model, const NetworkFingerprint& fp);
train::Model decode_checkpoint(std::string_view bytes, const NetworkFingerprint& expected);

/// Written to a sibling temp file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const train::Model& model, const geo::RoadNetwork& net);
/// Throws DataError on a bad magic, unsupported version, fingerprint
/// mismatch, truncation or checksum failure.
train::Model load_checkpoint(const std::filesystem::path& path, const geo::RoadNetwork& net);

/// Atomic whole-file write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace routekg::cli
