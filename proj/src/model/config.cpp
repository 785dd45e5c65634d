#include "ear/model/config.hpp"

#include "ear/common/errors.hpp"

namespace ear::model {

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::uniform ? "uniform" : "gaussian";
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::energy:
      return "energy";
    case HeadKind::gaussian:
      return "gaussian";
    case HeadKind::gmm:
      return "gmm";
  }
  return "unknown";
}

std::string to_string(diff::AttentionMode mode) {
  return mode == diff::AttentionMode::causal ? "causal" : "bidirectional";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "uniform") return NoiseKind::uniform;
  if (name == "gaussian") return NoiseKind::gaussian;
  throw ConfigError("unknown noise_kind '" + name + "'");
}

HeadKind parse_head_kind(const std::string& name) {
  if (name == "energy") return HeadKind::energy;
  if (name == "gaussian") return HeadKind::gaussian;
  if (name == "gmm") return HeadKind::gmm;
  throw ConfigError("unknown head '" + name + "'");
}

diff::AttentionMode parse_attention_mode(const std::string& name) {
  if (name == "causal") return diff::AttentionMode::causal;
  if (name == "bidirectional") return diff::AttentionMode::bidirectional;
  throw ConfigError("unknown attention_mode '" + name + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(d_token, "d_token");
  positive(seq_len, "seq_len");
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(ffn_ratio, "ffn_ratio");
  positive(d_mlp, "d_mlp");
  positive(n_gen_blocks, "n_gen_blocks");
  positive(d_noise, "d_noise");
  positive(n_class_tokens, "n_class_tokens");
  positive(n_classes, "n_classes");
  positive(gmm_components, "gmm_components");
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
}

std::size_t ModelConfig::head_out_width() const {
  return head == HeadKind::gmm ? 3 * gmm_components * d_token : d_token;
}

}  // namespace ear::model
