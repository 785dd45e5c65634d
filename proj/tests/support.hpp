#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ear/common/rng.hpp"
#include "ear/diff/tensor.hpp"
#include "ear/model/model.hpp"

namespace ear::test {

using TensorD = diff::Tensor<double>;
using TensorF = diff::Tensor<float>;

inline TensorD random_tensor(diff::Shape shape, Rng& rng, bool requires_grad = true,
                             double scale = 1.0) {
  std::vector<double> v(diff::shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return TensorD::from_vector(std::move(shape), std::move(v), requires_grad);
}

/// Central difference of f with respect to x[i]; x is restored afterwards.
inline double central_diff(TensorD& x, std::size_t i, const std::function<double()>& f,
                           double h = 1e-4) {
  auto v = x.mutable_data();
  const double keep = v[i];
  v[i] = keep + h;
  const double up = f();
  v[i] = keep - h;
  const double down = f();
  v[i] = keep;
  return (up - down) / (2.0 * h);
}

/// |a - b| relative to the larger magnitude; `floor` keeps coordinates whose
/// true gradient is ~0 from dividing by rounding noise.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Largest relative error between the analytic gradient stored on `x` and
/// central differences of `loss` at up to `samples` coordinates.
inline double grad_check(TensorD& x, const std::function<TensorD()>& loss, std::size_t samples,
                         Rng& rng, double h = 1e-4, double floor = 1e-8) {
  x.zero_grad();
  diff::backward(loss());
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());
  double worst = 0.0;
  const std::size_t n = x.numel();
  for (std::size_t s = 0; s < std::min(samples, n); ++s) {
    const std::size_t i = samples >= n ? s : rng.below(n);
    const double fd = central_diff(x, i, [&] { return loss().item(); }, h);
    worst = std::max(worst, rel_err(analytic[i], fd, floor));
  }
  return worst;
}

/// Adds N(0, scale^2) to every parameter so that zero-initialised modulation
/// layers stop hiding gradient paths.
template <class T>
void perturb(model::Model<T>& m, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& e : m.params().entries()) {
    for (auto& v : e.tensor.mutable_data()) v += T(scale * rng.normal());
  }
}

inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.d_token = 2;
  c.seq_len = 4;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_ratio = 2;
  c.d_mlp = 8;
  c.n_gen_blocks = 2;
  c.d_noise = 4;
  c.n_class_tokens = 1;
  c.n_classes = 3;
  c.dropout = 0.0;
  return c;
}

template <class T>
model::SequenceBatch<T> random_batch(const model::ModelConfig& c, std::size_t batch, Rng& rng,
                                     double mask_p = 0.5) {
  model::SequenceBatch<T> b;
  b.batch = batch;
  b.seq_len = c.seq_len;
  b.d_token = c.d_token;
  b.tokens.resize(batch * c.seq_len * c.d_token);
  for (auto& v : b.tokens) v = T(rng.normal());
  b.targets = b.tokens;
  b.mask.resize(batch * c.seq_len);
  for (auto& m : b.mask) m = rng.bernoulli(mask_p) ? 1 : 0;
  b.mask[0] = 1;
  for (std::size_t i = 0; i < batch; ++i) b.labels.push_back(rng.below(c.n_classes));
  return b;
}

}  // namespace ear::test
