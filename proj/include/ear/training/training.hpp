#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ear/common/rng.hpp"
#include "ear/model/model.hpp"
#include "ear/model/params.hpp"
#include "ear/model/sequence.hpp"

namespace ear::training {

/// Optimisation and schedule settings. Defaults follow the reference
/// recipe with the epoch counts scaled to desk size.
struct TrainConfig {
  double alpha = 1.0;
  /// Diversity weight used in the final phase; the main phase uses 1.
  double tau_train = 0.99;
  std::size_t final_phase_epochs = 3;
  double mask_ratio_lo = 0.7;
  double mask_ratio_hi = 1.0;
  double cfg_dropout_p = 0.1;
  double lr = 8e-4;
  double lambda_gen = 0.25;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.02;
  double grad_clip = 3.0;
  double ema_momentum = 0.9999;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::size_t warmup_epochs = 3;
  std::uint64_t seed = 0;
  /// Fixed sigma of the gaussian-head likelihood during training.
  double gaussian_sigma = 1.0;
  /// A pre-clip gradient norm above this is logged as an instability event.
  double grad_alert = 1e4;
  /// Write a checkpoint every this many epochs (0 = only at the end).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

struct TrainReport {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::string phase;
  double loss = 0.0;
  /// Energy head only: mean |x_i - y|^a over both samples and mean
  /// |x1 - x2|^a. Zero for the likelihood heads.
  double fidelity_term = 0.0;
  double diversity_term = 0.0;
  double grad_norm = 0.0;
  double lr_effective = 0.0;
  bool instability = false;
};

/// r ~ U[lo, hi], then exactly mask_count(T, r) positions chosen uniformly
/// without replacement.
std::vector<std::uint8_t> sample_mask(std::size_t seq_len, double lo, double hi, Rng& rng);
/// round(r * T) clamped to [1, T].
std::size_t mask_count(std::size_t seq_len, double ratio);

/// Each label independently replaced by `dummy` with probability p.
std::vector<std::size_t> cfg_dropout(const std::vector<std::size_t>& labels, double p,
                                     std::size_t dummy, Rng& rng);

template <class T>
struct LossResult {
  diff::Tensor<T> loss;
  double fidelity_term = 0.0;
  double diversity_term = 0.0;
  std::size_t n_positions = 0;
};

/// Mean head loss over masked positions of `batch`. For the energy head
/// this is the two-sample energy loss against batch.targets; unmasked
/// positions contribute nothing. Dropout and generator noise draw from rng.
template <class T>
LossResult<T> masked_loss(const model::SequenceBatch<T>& batch, const model::Model<T>& model,
                          double alpha, double tau_train, double gaussian_sigma, bool train_mode,
                          Rng& rng);

/// The energy-head case of masked_loss.
template <class T>
LossResult<T> masked_energy_loss(const model::SequenceBatch<T>& batch,
                                 const model::Model<T>& model, double alpha, double tau_train,
                                 bool train_mode, Rng& rng);

struct StepStats {
  double grad_norm = 0.0;
  double clip_scale = 1.0;
};

/// AdamW step over the grads currently stored on `params`: global-norm
/// clipping, bias-corrected moments, decoupled weight decay on rank >= 2
/// tensors, lr * lambda_gen on the generator group. Throws NumericalAbort
/// on a non-finite gradient without touching any parameter.
template <class T>
StepStats optimizer_step(model::ModelParams<T>& params, OptimizerState& state,
                         const TrainConfig& config, double lr);

/// ema <- momentum * ema + (1 - momentum) * params, elementwise. Each
/// result is clamped into the interval spanned by its two inputs.
template <class T>
void ema_update(model::ModelParams<T>& ema, const model::ModelParams<T>& params, double momentum);

struct TrainHooks {
  std::function<void(const TrainReport&)> on_report;
  /// Called after every checkpoint_every-th epoch and after the last one.
  std::function<void(std::size_t epoch, const model::ModelParams<float>& params,
                     const model::ModelParams<float>& ema)>
      on_checkpoint;
};

struct TrainResult {
  model::ModelParams<float> ema;
  std::vector<TrainReport> reports;
  std::size_t instability_events = 0;
};

/// Runs the masked training loop in place on `model`. Linear warmup then a
/// constant rate; the last final_phase_epochs train at tau_train. Fully
/// determined by config.seed. A non-finite loss or gradient throws
/// NumericalAbort naming the step.
TrainResult train(const model::SequenceSet& data, model::Model<float>& model,
                  const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace ear::training
