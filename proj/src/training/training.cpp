#include "ear/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ear/common/errors.hpp"
#include "ear/diff/ops.hpp"
#include "ear/scoring/losses.hpp"

namespace ear::training {

using diff::Tensor;
using model::HeadKind;
using model::ModelParams;
using model::SequenceBatch;

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (!(alpha > 0.0 && alpha <= 2.0)) fail("alpha must lie in (0, 2]");
  if (!(tau_train > 0.0 && tau_train <= 1.0)) {
    fail("tau_train must lie in (0, 1]; the loss is unbounded above 1");
  }
  if (!(mask_ratio_lo >= 0.0 && mask_ratio_lo <= mask_ratio_hi && mask_ratio_hi <= 1.0)) {
    fail("mask ratio range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(cfg_dropout_p >= 0.0 && cfg_dropout_p <= 1.0)) fail("cfg_dropout_p must lie in [0, 1]");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and non-negative");
  if (!(lambda_gen > 0.0 && lambda_gen <= 1.0)) fail("lambda_gen must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!(ema_momentum >= 0.0 && ema_momentum < 1.0)) fail("ema_momentum must lie in [0, 1)");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(gaussian_sigma > 0.0)) fail("gaussian_sigma must be positive");
  if (!(grad_alert > 0.0)) fail("grad_alert must be positive");
}

std::size_t mask_count(std::size_t seq_len, double ratio) {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  const auto n = static_cast<std::size_t>(std::llround(ratio * double(seq_len)));
  return std::clamp<std::size_t>(n, 1, seq_len);
}

std::vector<std::uint8_t> sample_mask(std::size_t seq_len, double lo, double hi, Rng& rng) {
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
    throw ConfigError("mask ratio range must satisfy 0 <= lo <= hi <= 1");
  }
  const double r = lo == hi ? lo : rng.uniform(lo, hi);
  const std::size_t count = mask_count(seq_len, r);
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  std::vector<std::size_t> perm(seq_len);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::uint8_t> mask(seq_len, 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(perm[i], perm[i + rng.below(seq_len - i)]);
    mask[perm[i]] = 1;
  }
  return mask;
}

std::vector<std::size_t> cfg_dropout(const std::vector<std::size_t>& labels, double p,
                                     std::size_t dummy, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("cfg dropout probability must lie in [0, 1]");
  std::vector<std::size_t> out(labels);
  for (auto& l : out) {
    if (rng.bernoulli(p)) l = dummy;
  }
  return out;
}

namespace {

template <class T>
struct MaskedRows {
  Tensor<T> hidden;  // [n_masked, d_model]
  Tensor<T> target;  // [n_masked, d_token]
};

template <class T>
MaskedRows<T> masked_rows(const SequenceBatch<T>& batch, const model::Model<T>& model,
                          bool train_mode, Rng& rng) {
  const auto positions = batch.masked_positions();
  if (positions.empty()) throw ContractError("masked loss needs at least one masked position");
  if (batch.targets.size() != batch.tokens.size()) {
    throw DimensionError("batch targets and tokens differ in size");
  }
  auto embedded = model.embed_sequence(batch);
  auto hs = model.backbone_forward(embedded, batch.batch, train_mode, &rng);
  const std::size_t d = batch.d_token;
  std::vector<std::size_t> rows;
  std::vector<T> target;
  rows.reserve(positions.size());
  target.reserve(positions.size() * d);
  for (std::size_t flat : positions) {
    rows.push_back(hs.row(flat / batch.seq_len, flat % batch.seq_len));
    target.insert(target.end(), batch.targets.begin() + flat * d,
                  batch.targets.begin() + (flat + 1) * d);
  }
  return {diff::gather_rows(hs.values, rows),
          Tensor<T>::from_vector({positions.size(), d}, std::move(target))};
}

template <class T>
double mean_of(const Tensor<T>& t) {
  double s = 0.0;
  for (T v : t.data()) s += double(v);
  return s / double(t.numel());
}

}  // namespace

template <class T>
LossResult<T> masked_energy_loss(const SequenceBatch<T>& batch, const model::Model<T>& model,
                                 double alpha, double tau_train, bool train_mode, Rng& rng) {
  auto rows = masked_rows(batch, model, train_mode, rng);
  auto [x1, x2] = model.predict_pair(rows.hidden, rng);
  auto terms = scoring::energy_loss_rows(x1, x2, rows.target, T(alpha), T(tau_train));
  LossResult<T> out;
  out.loss = diff::mean(terms.loss);
  out.fidelity_term = 0.5 * (mean_of(terms.fidelity1) + mean_of(terms.fidelity2));
  out.diversity_term = mean_of(terms.diversity);
  out.n_positions = rows.hidden.rows();
  return out;
}

template <class T>
LossResult<T> masked_loss(const SequenceBatch<T>& batch, const model::Model<T>& model,
                          double alpha, double tau_train, double gaussian_sigma, bool train_mode,
                          Rng& rng) {
  const auto& cfg = model.config();
  if (cfg.head == HeadKind::energy) {
    return masked_energy_loss(batch, model, alpha, tau_train, train_mode, rng);
  }
  auto rows = masked_rows(batch, model, train_mode, rng);
  auto head = model.head_forward(rows.hidden);
  LossResult<T> out;
  out.n_positions = rows.hidden.rows();
  if (cfg.head == HeadKind::gaussian) {
    out.loss = diff::mean(scoring::gaussian_nll_rows(head, rows.target, T(gaussian_sigma)));
  } else {
    out.loss = diff::mean(
        scoring::gmm_nll_rows(head, rows.target, cfg.gmm_components, T(scoring::kGmmVarFloor)));
  }
  return out;
}

template <class T>
StepStats optimizer_step(ModelParams<T>& params, OptimizerState& state, const TrainConfig& config,
                         double lr) {
  if (!(config.lambda_gen >= 0.0 && config.lambda_gen <= 1.0)) {
    throw ConfigError("lambda_gen must lie in [0, 1]");
  }
  auto& entries = params.entries();
  if (state.m.empty()) {
    state.m.resize(entries.size());
    state.v.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      state.m[i].assign(entries[i].tensor.numel(), 0.0);
      state.v[i].assign(entries[i].tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != entries.size()) throw DimensionError("optimizer state does not match params");

  double sq = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = entries[i].tensor;
    if (state.m[i].size() != t.numel()) {
      throw DimensionError("optimizer buffer for '" + entries[i].name + "' has the wrong size");
    }
    if (!t.has_grad()) continue;
    for (T g : t.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalAbort("non-finite gradient in '" + entries[i].name + "'", state.step, -1,
                             -1);
      }
      sq += double(g) * double(g);
    }
  }
  StepStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (!std::isfinite(stats.grad_norm)) {
    throw NumericalAbort("gradient norm overflow", state.step, -1, -1);
  }
  if (stats.grad_norm > config.grad_clip) stats.clip_scale = config.grad_clip / stats.grad_norm;

  state.step += 1;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    const double group_lr =
        e.group == model::ParamGroup::generator ? lr * config.lambda_gen : lr;
    const double decay = e.tensor.rank() >= 2 ? config.weight_decay : 0.0;
    auto p = e.tensor.mutable_data();
    auto grad = e.tensor.has_grad() ? e.tensor.grad() : std::span<const T>{};
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grad.empty() ? 0.0 : double(grad[j]) * stats.clip_scale;
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      const double update = mhat / (std::sqrt(vhat) + config.adam_eps) + decay * double(p[j]);
      p[j] = T(double(p[j]) - group_lr * update);
    }
  }
  return stats;
}

template <class T>
void ema_update(ModelParams<T>& ema, const ModelParams<T>& params, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("EMA momentum must lie in [0, 1)");
  if (ema.size() != params.size()) throw DimensionError("EMA and params differ in tensor count");
  for (std::size_t i = 0; i < ema.size(); ++i) {
    auto& e = ema.entries()[i];
    const auto& p = params.entries()[i];
    if (e.name != p.name || e.tensor.shape() != p.tensor.shape()) {
      throw DimensionError("EMA tensor '" + e.name + "' does not match '" + p.name + "'");
    }
    auto ev = e.tensor.mutable_data();
    auto pv = p.tensor.data();
    for (std::size_t j = 0; j < ev.size(); ++j) {
      const double a = double(ev[j]);
      const double b = double(pv[j]);
      const double mixed = std::lerp(b, a, momentum);
      ev[j] = T(std::clamp(mixed, std::min(a, b), std::max(a, b)));
    }
  }
}

TrainResult train(const model::SequenceSet& data, model::Model<float>& model,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  const auto& mc = model.config();
  if (data.seq_len != mc.seq_len || data.d_token != mc.d_token) {
    throw DimensionError("dataset shape " + std::to_string(data.seq_len) + "x" +
                         std::to_string(data.d_token) + " does not match the model");
  }
  for (auto label : data.labels) {
    if (label >= mc.n_classes) throw ConfigError("dataset label exceeds the model's n_classes");
  }
  TrainResult result;
  result.ema = model.params().clone(false);
  OptimizerState state;

  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = n == 0 ? 0 : (n + config.batch_size - 1) / config.batch_size;
  const std::size_t warmup_steps = config.warmup_epochs * steps_per_epoch;
  const std::size_t final_start =
      config.epochs > config.final_phase_epochs ? config.epochs - config.final_phase_epochs : 0;

  Rng root(config.seed);
  Rng order_rng = root.stream(1);
  Rng step_rng = root.stream(2);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::int64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    const bool final_phase = epoch >= final_start;
    const double tau = final_phase ? config.tau_train : 1.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(n, lo + config.batch_size);
      auto batch = SequenceBatch<float>::from_set(
          data, std::span<const std::size_t>(order.data() + lo, hi - lo));
      for (std::size_t r = 0; r < batch.batch; ++r) {
        auto m = sample_mask(mc.seq_len, config.mask_ratio_lo, config.mask_ratio_hi, step_rng);
        std::copy(m.begin(), m.end(), batch.mask.begin() + r * mc.seq_len);
      }
      batch.labels = cfg_dropout(batch.labels, config.cfg_dropout_p, mc.dummy_label(), step_rng);

      const double lr = warmup_steps == 0
                            ? config.lr
                            : config.lr * std::min(1.0, double(step + 1) / double(warmup_steps));
      model.params().zero_grad();
      auto out = masked_loss(batch, model, config.alpha, tau, config.gaussian_sigma, true, step_rng);
      const double loss = double(out.loss.item());
      if (!std::isfinite(loss)) {
        throw NumericalAbort("non-finite loss", step, std::int64_t(epoch), std::int64_t(b));
      }
      diff::backward(out.loss);
      StepStats stats;
      try {
        stats = optimizer_step(model.params(), state, config, lr);
      } catch (const NumericalAbort& e) {
        throw NumericalAbort("non-finite gradient", step, std::int64_t(epoch), std::int64_t(b));
      }
      ema_update(result.ema, model.params(), config.ema_momentum);

      TrainReport report;
      report.step = step;
      report.epoch = std::int64_t(epoch);
      report.phase = final_phase ? "final" : "main";
      report.loss = loss;
      report.fidelity_term = out.fidelity_term;
      report.diversity_term = out.diversity_term;
      report.grad_norm = stats.grad_norm;
      report.lr_effective = lr;
      report.instability = stats.grad_norm > config.grad_alert;
      if (report.instability) ++result.instability_events;
      if (hooks.on_report) hooks.on_report(report);
      result.reports.push_back(std::move(report));
      ++step;
    }
    const bool last = epoch + 1 == config.epochs;
    if (hooks.on_checkpoint && !last && config.checkpoint_every != 0 &&
        (epoch + 1) % config.checkpoint_every == 0) {
      hooks.on_checkpoint(epoch + 1, model.params(), result.ema);
    }
  }
  model.params().zero_grad();
  if (hooks.on_checkpoint) hooks.on_checkpoint(config.epochs, model.params(), result.ema);
  return result;
}

#define EAR_INSTANTIATE_TRAINING(T)                                                              \
  template LossResult<T> masked_energy_loss(const SequenceBatch<T>&, const model::Model<T>&,     \
                                            double, double, bool, Rng&);                         \
  template LossResult<T> masked_loss(const SequenceBatch<T>&, const model::Model<T>&, double,    \
                                     double, double, bool, Rng&);                                \
  template StepStats optimizer_step(ModelParams<T>&, OptimizerState&, const TrainConfig&,        \
                                    double);                                                     \
  template void ema_update(ModelParams<T>&, const ModelParams<T>&, double);

EAR_INSTANTIATE_TRAINING(float)
EAR_INSTANTIATE_TRAINING(double)

}  // namespace ear::training
