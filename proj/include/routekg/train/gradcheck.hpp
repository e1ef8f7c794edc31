#pragma once

#include <string>
#include <vector>

#include "routekg/nn/nn.hpp"

namespace routekg::train {

struct LossGradCheck {
  std::string loss;  // rep, direction, pred, rank, refine
  std::size_t instance = 0;
  nn::GradCheckReport report;
};

struct GradCheckSettings {
  std::size_t instances = 5;
  std::uint64_t seed = 0;
  nn::GradCheckOptions check{1e-4, 1e-5, 1e-4, 24, 0};
};

/// Central-difference check of every training loss on small random
/// instances (a 4x4 grid, tiny embeddings).  One entry per loss and instance.
std::vector<LossGradCheck> check_all_gradients(const GradCheckSettings& settings);

std::string gradcheck_to_json(const std::vector<LossGradCheck>& checks);

}  // namespace routekg::train
