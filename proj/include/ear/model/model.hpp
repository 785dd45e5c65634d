#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ear/common/rng.hpp"
#include "ear/diff/ops.hpp"
#include "ear/model/config.hpp"
#include "ear/model/params.hpp"
#include "ear/model/sequence.hpp"

namespace ear::model {

/// Backbone output, [batch * context_len, d_model]. Rows for batch item b
/// start at b * context_len; the first n_class_tokens of them are the
/// class-token slots.
template <class T>
struct HiddenState {
  diff::Tensor<T> values;
  std::size_t batch = 0;
  std::size_t context_len = 0;
  std::size_t n_class_tokens = 0;

  /// Row index of sequence position t of batch item b.
  std::size_t row(std::size_t b, std::size_t t) const {
    return b * context_len + n_class_tokens + t;
  }
};

/// Energy transformer: linear token embedding, class and mask tokens, a
/// pre-norm transformer backbone and one of three heads. The energy head
/// is the noise-driven MLP generator; the gaussian and gmm heads are the
/// explicit-likelihood baselines.
template <class T>
class Model {
 public:
  /// Fresh parameters drawn from `init_seed`.
  Model(ModelConfig config, std::uint64_t init_seed);
  /// Binds existing parameters; names and shapes must match the config.
  Model(ModelConfig config, ModelParams<T> params);

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  /// [batch * context_len, d_model]. Masked positions take the mask-token
  /// vector; class tokens are prepended; positional embeddings are added.
  diff::Tensor<T> embed_sequence(const SequenceBatch<T>& batch) const;

  /// Runs the transformer blocks and final norm. Dropout is active only in
  /// train_mode and then draws from `rng`.
  HiddenState<T> backbone_forward(const diff::Tensor<T>& embedded, std::size_t batch,
                                  bool train_mode, Rng* rng) const;

  /// [n, d_noise] i.i.d. noise of the configured kind.
  diff::Tensor<T> draw_noise(std::size_t n, Rng& rng) const;

  /// Energy head. h is [n, d_model], eps is [n, d_noise]. tau_infer scales
  /// only the shift modulation.
  diff::Tensor<T> generator_forward(const diff::Tensor<T>& h, const diff::Tensor<T>& eps,
                                    T tau_infer) const;

  /// Two generator samples sharing h with independent noise.
  std::pair<diff::Tensor<T>, diff::Tensor<T>> predict_pair(const diff::Tensor<T>& h,
                                                           Rng& rng) const;
  std::pair<diff::Tensor<T>, diff::Tensor<T>> predict_pair(const diff::Tensor<T>& h,
                                                           const diff::Tensor<T>& eps1,
                                                           const diff::Tensor<T>& eps2) const;

  /// Baseline heads: the Gaussian mean [n, d_token] or the GMM parameter
  /// block [n, 3 * k * d_token].
  diff::Tensor<T> head_forward(const diff::Tensor<T>& h) const;

  /// Draws one token per row of h from whichever head the model has.
  /// `head_sigma` is the inference standard deviation of the gaussian head.
  std::vector<T> sample_tokens(const diff::Tensor<T>& h, Rng& rng, T tau_infer,
                               T head_sigma) const;

 private:
  struct LinearRef {
    diff::Tensor<T> w, b;
  };
  struct NormRef {
    diff::Tensor<T> g, b;
  };
  struct BlockRef {
    NormRef ln1, ln2;
    LinearRef q, k, v, o, fc1, fc2;
  };
  struct GenBlockRef {
    NormRef ln;
    LinearRef shift, scale, gate, fc1, fc2;
  };

  void init_params(std::uint64_t seed);
  void bind();
  diff::Tensor<T> apply(const LinearRef& l, const diff::Tensor<T>& x) const;
  diff::Tensor<T> apply(const NormRef& n, const diff::Tensor<T>& x) const;

  ModelConfig config_;
  ModelParams<T> params_;

  LinearRef token_proj_;
  diff::Tensor<T> pos_, class_table_, mask_token_;
  std::vector<BlockRef> blocks_;
  NormRef final_ln_;
  // energy head
  LinearRef gen_hidden_, gen_noise_, gen_out_;
  std::vector<GenBlockRef> gen_blocks_;
  // gaussian / gmm heads
  LinearRef head_hidden_, head_out_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ear::model
