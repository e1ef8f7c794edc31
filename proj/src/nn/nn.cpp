#include "routekg/nn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "routekg/simd/kernels.hpp"

namespace routekg::nn {

MlpParams make_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least input and output dims");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.weight = Tensor2(dims[i + 1], dims[i]);
    l.bias.assign(dims[i + 1], 0.0);
    l.act = i + 2 < dims.size() ? Activation::Relu : Activation::Identity;
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
    for (double& w : l.weight.data) w = (2.0 * uniform01(rng) - 1.0) * bound;
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (const Layer& l : p.layers) {
    Layer zl;
    zl.weight = Tensor2(l.weight.rows, l.weight.cols);
    zl.bias.assign(l.bias.size(), 0.0);
    zl.act = l.act;
    z.layers.push_back(std::move(zl));
  }
  return z;
}

namespace {

std::vector<double> forward_layers(const MlpParams& p, std::span<const double> input, std::size_t count,
                                   MlpCache* cache) {
  if (input.size() != p.in_dim()) {
    throw std::invalid_argument("mlp input has " + std::to_string(input.size()) + " values, expected " +
                                std::to_string(p.in_dim()));
  }
  if (cache) {
    cache->inputs.resize(count);
    cache->pre.resize(count);
  }
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t i = 0; i < count; ++i) {
    const Layer& l = p.layers[i];
    std::vector<double> y(l.out_dim());
    simd::gemv(l.weight.data.data(), l.out_dim(), l.in_dim(), x.data(), y.data());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] += l.bias[r];
    if (cache) {
      cache->inputs[i] = std::move(x);
      cache->pre[i] = y;
    }
    if (l.act == Activation::Relu) {
      for (double& v : y) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input, MlpCache* cache) {
  return forward_layers(p, input, p.layers.size(), cache);
}

std::vector<double> mlp_forward_prefix(const MlpParams& p, std::span<const double> input, std::size_t layers) {
  return forward_layers(p, input, std::min(layers, p.layers.size()), nullptr);
}

std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache, std::span<const double> grad_out,
                                 MlpParams& grads, double scale) {
  std::vector<double> g(grad_out.begin(), grad_out.end());
  for (std::size_t i = p.layers.size(); i-- > 0;) {
    const Layer& l = p.layers[i];
    Layer& gl = grads.layers[i];
    if (l.act == Activation::Relu) {
      for (std::size_t r = 0; r < g.size(); ++r) {
        if (!(cache.pre[i][r] > 0.0)) g[r] = 0.0;
      }
    }
    std::vector<double> scaled(g.size());
    for (std::size_t r = 0; r < g.size(); ++r) {
      scaled[r] = scale * g[r];
      gl.bias[r] += scaled[r];
    }
    simd::ger(gl.weight.data.data(), l.out_dim(), l.in_dim(), scaled.data(), cache.inputs[i].data());
    std::vector<double> gin(l.in_dim(), 0.0);
    simd::gemv_t_acc(l.weight.data.data(), l.out_dim(), l.in_dim(), g.data(), gin.data());
    g = std::move(gin);
  }
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size(), 0.0);
  if (!std::isfinite(mx)) {
    throw std::invalid_argument("softmax needs at least one finite logit");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] == -std::numeric_limits<double>::infinity()) continue;
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) throw std::out_of_range("cross-entropy target out of range");
  CrossEntropy ce;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  ce.prob = softmax(logits);
  // log-sum-exp form keeps the loss accurate when p[target] underflows
  double sum = 0.0;
  for (double v : logits) {
    if (v != -std::numeric_limits<double>::infinity()) sum += std::exp(v - mx);
  }
  ce.loss = std::max(0.0, std::log(sum) - (logits[target] - mx));
  ce.grad = ce.prob;
  ce.grad[target] -= 1.0;
  return ce;
}

void append_blocks(std::vector<Block>& out, const std::string& prefix, MlpParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i) + ".weight", p.layers[i].weight.data, p.layers[i].in_dim()});
    out.push_back({prefix + "." + std::to_string(i) + ".bias", p.layers[i].bias, 1});
  }
}

void AdamW::step(const std::vector<Block>& params, const std::vector<Block>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("parameter and gradient block counts differ");
  if (m_.empty()) {
    for (const Block& b : params) {
      m_.emplace_back(b.values.size(), 0.0);
      v_.emplace_back(b.values.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("optimizer state has a different block count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != grads[i].values.size() || params[i].values.size() != m_[i].size()) {
      throw std::invalid_argument("shape mismatch in block " + params[i].name);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i].values.data();
    const double* g = grads[i].values.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < m_[i].size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
      w[j] = w[j] * decay - cfg_.lr * update;
    }
  }
}

GradCheckReport grad_check(const std::function<double()>& loss, const std::vector<GradCheckBlock>& blocks,
                           const GradCheckOptions& opts) {
  GradCheckReport report;
  Rng rng = make_stream(opts.seed, "gradcheck");
  for (const GradCheckBlock& b : blocks) {
    if (b.values.size() != b.analytic.size()) {
      report.failures.push_back(b.name + ": analytic gradient has the wrong size");
      continue;
    }
    std::vector<std::size_t> coords;
    if (opts.per_block == 0 || opts.per_block >= b.values.size()) {
      for (std::size_t i = 0; i < b.values.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < opts.per_block; ++i) coords.push_back(uniform_index(rng, b.values.size()));
    }
    double worst = 0.0;
    std::size_t worst_at = 0;
    double worst_a = 0.0;
    double worst_n = 0.0;
    for (std::size_t i : coords) {
      const double saved = b.values[i];
      b.values[i] = saved + opts.step;
      const double up = loss();
      b.values[i] = saved - opts.step;
      const double down = loss();
      b.values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = b.analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      ++report.checked;
      if (!(rel <= worst)) {
        worst = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        worst_at = i;
        worst_a = a;
        worst_n = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, worst);
    if (worst > opts.tol) {
      std::ostringstream os;
      os << b.name << "[" << worst_at << "]: analytic " << worst_a << " numeric " << worst_n << " rel " << worst;
      report.failures.push_back(os.str());
    }
  }
  return report;
}

}  // namespace routekg::nn
