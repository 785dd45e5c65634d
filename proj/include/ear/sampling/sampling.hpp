#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ear/diff/tensor.hpp"
#include "ear/model/model.hpp"

namespace ear::sampling {

enum class CfgSchedule { constant, linear };

std::string to_string(CfgSchedule kind);
CfgSchedule parse_cfg_schedule(const std::string& text);

struct SampleConfig {
  /// Number of generation steps K, 1 <= K <= T. Zero means min(T, 16).
  std::size_t steps = 0;
  double cfg_scale = 1.0;
  CfgSchedule cfg_schedule = CfgSchedule::linear;
  double tau_infer = 0.7;
  /// Inference sigma of the gaussian baseline head; ignored by other heads.
  double head_sigma = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t order_seed = 0;
  /// Run the dummy-label pass even when the scheduled scale is exactly 1.
  bool force_dummy_pass = false;

  std::size_t resolved_steps(std::size_t seq_len) const;
  void validate(std::size_t seq_len) const;
};

/// Reveal counts per step. m_k = ceil(T cos(pi/2 * k/K)) with m_0 = T and
/// m_K = 0; count k is m_{k-1} - m_k. Any zero count then takes one from
/// the currently largest count (the earliest on ties) until all are >= 1.
std::vector<std::size_t> cosine_plan(std::size_t seq_len, std::size_t steps);

/// Guidance scale at step k in [0, K).
double cfg_schedule_scale(double base, std::size_t k, std::size_t steps, CfgSchedule kind);

/// cfg * h_c + (1 - cfg) * h_u elementwise.
template <class T>
diff::Tensor<T> cfg_combine(const diff::Tensor<T>& h_c, const diff::Tensor<T>& h_u, double scale);
template <class T>
model::HiddenState<T> cfg_combine(const model::HiddenState<T>& h_c,
                                  const model::HiddenState<T>& h_u, double scale);

struct TraceStep {
  std::vector<std::size_t> positions;  // revealed at this step, in reveal order
  double cfg_scale = 1.0;
  std::vector<float> tokens;  // positions.size() * d_token
};

struct GenerationTrace {
  std::vector<TraceStep> steps;
  /// Backbone passes this stream took part in (conditional plus dummy).
  std::size_t backbone_passes = 0;
  /// Generator (or baseline head) evaluations, counted per emitted token.
  std::size_t generator_passes = 0;
};

struct Generation {
  std::size_t label = 0;
  std::vector<float> tokens;  // seq_len * d_token
  GenerationTrace trace;
};

/// Masked iterative generation of one sequence.
Generation generate(const model::Model<float>& model, std::size_t label,
                    const SampleConfig& config);

/// Generates one stream per label, batched through the backbone. Stream i
/// draws its order from order_seed and its noise from seed, both via
/// stream id first_stream + i, so a single-label call matches generate().
std::vector<Generation> generate_batch(const model::Model<float>& model,
                                       const std::vector<std::size_t>& labels,
                                       const SampleConfig& config, std::uint64_t first_stream = 0);

}  // namespace ear::sampling
