#include "ear/sampling/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ear/common/errors.hpp"
#include "ear/common/rng.hpp"
#include "ear/diff/ops.hpp"

namespace ear::sampling {

using diff::Tensor;

std::string to_string(CfgSchedule kind) {
  return kind == CfgSchedule::constant ? "constant" : "linear";
}

CfgSchedule parse_cfg_schedule(const std::string& text) {
  if (text == "constant") return CfgSchedule::constant;
  if (text == "linear") return CfgSchedule::linear;
  throw ConfigError("unknown cfg schedule '" + text + "' (expected constant or linear)");
}

std::size_t SampleConfig::resolved_steps(std::size_t seq_len) const {
  return steps == 0 ? std::min<std::size_t>(seq_len, 16) : steps;
}

void SampleConfig::validate(std::size_t seq_len) const {
  const std::size_t k = resolved_steps(seq_len);
  if (k < 1 || k > seq_len) {
    throw ConfigError("steps must lie in [1, T] (T = " + std::to_string(seq_len) + ")");
  }
  if (!(cfg_scale >= 0.0) || !std::isfinite(cfg_scale)) {
    throw ConfigError("cfg scale must be finite and non-negative");
  }
  if (!(tau_infer > 0.0) || !std::isfinite(tau_infer)) {
    throw ConfigError("tau_infer must be positive");
  }
  if (!(head_sigma > 0.0)) throw ConfigError("head_sigma must be positive");
}

std::vector<std::size_t> cosine_plan(std::size_t seq_len, std::size_t steps) {
  if (steps < 1 || steps > seq_len) {
    throw ConfigError("cosine plan needs 1 <= K <= T, got K=" + std::to_string(steps) +
                      ", T=" + std::to_string(seq_len));
  }
  std::vector<std::size_t> m(steps + 1);
  m[0] = seq_len;
  m[steps] = 0;
  // The slack keeps exact products such as 16 * cos(pi/3) from rounding up.
  const double slack = 1e-9 * double(seq_len);
  for (std::size_t k = 1; k < steps; ++k) {
    const double v = double(seq_len) * std::cos(std::numbers::pi / 2.0 * double(k) / double(steps));
    m[k] = std::min(seq_len, static_cast<std::size_t>(std::ceil(v - slack)));
  }
  std::vector<std::size_t> reveals(steps);
  for (std::size_t k = 0; k < steps; ++k) reveals[k] = m[k] - m[k + 1];
  for (std::size_t k = 0; k < steps; ++k) {
    if (reveals[k] != 0) continue;
    auto donor = std::max_element(reveals.begin(), reveals.end());
    --*donor;
    reveals[k] = 1;
  }
  return reveals;
}

double cfg_schedule_scale(double base, std::size_t k, std::size_t steps, CfgSchedule kind) {
  if (k >= steps) throw ContractError("cfg schedule step out of range");
  if (kind == CfgSchedule::constant) return base;
  return 1.0 + (base - 1.0) * double(k + 1) / double(steps);
}

template <class T>
Tensor<T> cfg_combine(const Tensor<T>& h_c, const Tensor<T>& h_u, double scale) {
  if (h_c.shape() != h_u.shape()) {
    throw DimensionError("cfg_combine: " + diff::shape_string(h_c.shape()) + " vs " +
                         diff::shape_string(h_u.shape()));
  }
  const T s = T(scale);
  const T r = T(1.0 - scale);
  auto a = h_c.data();
  auto b = h_u.data();
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a[i] + r * b[i];
  return Tensor<T>::from_vector(h_c.shape(), std::move(out));
}

template <class T>
model::HiddenState<T> cfg_combine(const model::HiddenState<T>& h_c,
                                  const model::HiddenState<T>& h_u, double scale) {
  if (h_c.batch != h_u.batch || h_c.context_len != h_u.context_len ||
      h_c.n_class_tokens != h_u.n_class_tokens) {
    throw DimensionError("cfg_combine: hidden-state layouts differ");
  }
  return {cfg_combine(h_c.values, h_u.values, scale), h_c.batch, h_c.context_len,
          h_c.n_class_tokens};
}

template Tensor<float> cfg_combine(const Tensor<float>&, const Tensor<float>&, double);
template Tensor<double> cfg_combine(const Tensor<double>&, const Tensor<double>&, double);
template model::HiddenState<float> cfg_combine(const model::HiddenState<float>&,
                                               const model::HiddenState<float>&, double);
template model::HiddenState<double> cfg_combine(const model::HiddenState<double>&,
                                                const model::HiddenState<double>&, double);

Generation generate(const model::Model<float>& model, std::size_t label,
                    const SampleConfig& config) {
  return std::move(generate_batch(model, {label}, config).front());
}

std::vector<Generation> generate_batch(const model::Model<float>& model,
                                       const std::vector<std::size_t>& labels,
                                       const SampleConfig& config, std::uint64_t first_stream) {
  const auto& mc = model.config();
  const std::size_t T_ = mc.seq_len;
  const std::size_t d = mc.d_token;
  config.validate(T_);
  const std::size_t K = config.resolved_steps(T_);
  const std::size_t B = labels.size();
  for (auto l : labels) {
    if (l >= mc.n_classes) throw ConfigError("label " + std::to_string(l) + " out of range");
  }
  std::vector<Generation> out(B);
  if (B == 0) return out;

  const auto plan = cosine_plan(T_, K);
  const Rng order_root(config.order_seed);
  const Rng noise_root(config.seed);
  std::vector<std::vector<std::size_t>> order(B);
  std::vector<Rng> noise;
  noise.reserve(B);
  for (std::size_t i = 0; i < B; ++i) {
    order[i].resize(T_);
    std::iota(order[i].begin(), order[i].end(), std::size_t{0});
    // Causal attention only sees earlier positions, so it decodes in raster order.
    if (mc.attention_mode == diff::AttentionMode::bidirectional) {
      Rng r = order_root.stream(first_stream + i);
      for (std::size_t j = T_; j > 1; --j) std::swap(order[i][j - 1], order[i][r.below(j)]);
    }
    noise.push_back(noise_root.stream(first_stream + i));
    out[i].label = labels[i];
    out[i].tokens.assign(T_ * d, 0.0f);
  }

  model::SequenceBatch<float> batch;
  batch.batch = B;
  batch.seq_len = T_;
  batch.d_token = d;
  batch.tokens.assign(B * T_ * d, 0.0f);
  batch.mask.assign(B * T_, 1);
  batch.labels = labels;
  batch.targets = batch.tokens;

  std::size_t offset = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double scale = cfg_schedule_scale(config.cfg_scale, k, K, config.cfg_schedule);
    const bool guided = scale != 1.0 || config.force_dummy_pass;
    auto h_c = model.backbone_forward(model.embed_sequence(batch), B, false, nullptr);
    model::HiddenState<float> h_u;
    if (guided) {
      auto dummy = batch;
      std::fill(dummy.labels.begin(), dummy.labels.end(), mc.dummy_label());
      h_u = model.backbone_forward(model.embed_sequence(dummy), B, false, nullptr);
    }
    const std::size_t count = plan[k];
    for (std::size_t i = 0; i < B; ++i) {
      auto& g = out[i];
      g.trace.backbone_passes += guided ? 2 : 1;
      TraceStep step;
      step.cfg_scale = scale;
      std::vector<std::size_t> rows;
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t pos = order[i][offset + j];
        step.positions.push_back(pos);
        rows.push_back(h_c.row(i, pos));
      }
      auto hc_rows = diff::gather_rows(h_c.values, rows);
      auto h = guided ? cfg_combine(hc_rows, diff::gather_rows(h_u.values, rows), scale) : hc_rows;
      auto tokens = model.sample_tokens(h, noise[i], float(config.tau_infer),
                                        float(config.head_sigma));
      g.trace.generator_passes += count;
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t pos = step.positions[j];
        for (std::size_t c = 0; c < d; ++c) {
          const float v = tokens[j * d + c];
          g.tokens[pos * d + c] = v;
          batch.tokens[(i * T_ + pos) * d + c] = v;
        }
        batch.mask[i * T_ + pos] = 0;
      }
      step.tokens = std::move(tokens);
      g.trace.steps.push_back(std::move(step));
    }
    offset += count;
  }
  return out;
}

}  // namespace ear::sampling
