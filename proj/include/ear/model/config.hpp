#pragma once

#include <cstddef>
#include <string>

#include "ear/diff/ops.hpp"

namespace ear::model {

enum class NoiseKind { uniform, gaussian };
enum class HeadKind { energy, gaussian, gmm };

std::string to_string(NoiseKind kind);
std::string to_string(HeadKind kind);
std::string to_string(diff::AttentionMode mode);
NoiseKind parse_noise_kind(const std::string& name);
HeadKind parse_head_kind(const std::string& name);
diff::AttentionMode parse_attention_mode(const std::string& name);

/// Architecture of the energy transformer and its baselines.
///
/// Defaults are the desk-scale configuration; paper-scale widths are valid
/// inputs too. The generator width d_mlp defaults to 96 so that the
/// generator is about 15% of all parameters at these backbone sizes.
struct ModelConfig {
  std::size_t d_token = 4;
  std::size_t seq_len = 16;
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t ffn_ratio = 4;
  std::size_t d_mlp = 96;
  std::size_t n_gen_blocks = 3;
  std::size_t d_noise = 16;
  NoiseKind noise_kind = NoiseKind::uniform;
  diff::AttentionMode attention_mode = diff::AttentionMode::bidirectional;
  std::size_t n_class_tokens = 4;
  std::size_t n_classes = 8;
  double dropout = 0.1;
  HeadKind head = HeadKind::energy;
  std::size_t gmm_components = 4;
  double ln_eps = 1e-6;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  std::size_t context_len() const { return n_class_tokens + seq_len; }
  /// Label id of the unconditional (CFG) token.
  std::size_t dummy_label() const { return n_classes; }
  std::size_t head_out_width() const;
};

}  // namespace ear::model
