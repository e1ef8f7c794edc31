#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "routekg/common.hpp"

namespace routekg::nn {

struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

enum class Activation { Relu, Identity };

struct Layer {
  Tensor2 weight;  // out x in
  std::vector<double> bias;
  Activation act = Activation::Identity;

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }
};

struct MlpParams {
  std::vector<Layer> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

/// dims = {in, hidden..., out}; relu on hidden layers, identity on the last.
/// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero.
MlpParams make_mlp(const std::vector<std::size_t>& dims, Rng& rng);

/// Same architecture with every weight and bias zero (gradient buffers).
MlpParams zeros_like(const MlpParams& p);

/// Per-layer inputs and pre-activations of one forward pass.
struct MlpCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

/// Throws std::invalid_argument on input dimension mismatch.
std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input, MlpCache* cache = nullptr);

/// Output of the first `layers` layers only.
std::vector<double> mlp_forward_prefix(const MlpParams& p, std::span<const double> input, std::size_t layers);

/// Accumulates `scale` times the parameter gradient into `grads` and returns
/// the gradient with respect to the input.
std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache, std::span<const double> grad_out,
                                 MlpParams& grads, double scale = 1.0);

/// Max-shifted softmax; -inf entries get probability 0.  At least one entry
/// must be finite.
std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> prob;
  std::vector<double> grad;  // prob - onehot(target)
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target);

/// A named parameter tensor, row-major with `cols` columns.
struct Block {
  std::string name;
  std::span<double> values;
  std::size_t cols = 1;
  std::size_t rows() const { return cols ? values.size() / cols : 0; }
};

void append_blocks(std::vector<Block>& out, const std::string& prefix, MlpParams& p);

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay.  Moments are allocated on the first
/// step; later calls must present the same block shapes.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<Block>& params, const std::vector<Block>& grads);

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct GradCheckBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<std::string> failures;  // one line per offending block

  bool ok() const { return failures.empty(); }
};

struct GradCheckOptions {
  double tol = 1e-4;
  double step = 1e-4;
  double floor = 1e-5;               // denominator floor of the relative error
  std::size_t per_block = 32;        // coordinates sampled per block; 0 = all
  std::uint64_t seed = 0;
};

/// Central differences of `loss` on a random subsample of each block,
/// compared with the analytic gradient by |a - n| / max(|a|, |n|, floor).
/// `values` are perturbed in place and restored.
GradCheckReport grad_check(const std::function<double()>& loss, const std::vector<GradCheckBlock>& blocks,
                           const GradCheckOptions& opts = {});

}  // namespace routekg::nn
