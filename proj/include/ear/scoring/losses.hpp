#pragma once

#include <cstddef>

#include "ear/diff/tensor.hpp"

namespace ear::scoring {

/// Per-row pieces of the two-sample energy loss, kept separate so training
/// can report fidelity and diversity.
template <class T>
struct EnergyLossTerms {
  diff::Tensor<T> fidelity1;  // |x1 - y|^a
  diff::Tensor<T> fidelity2;  // |x2 - y|^a
  diff::Tensor<T> diversity;  // |x1 - x2|^a
  diff::Tensor<T> loss;       // fidelity1 + fidelity2 - tau * diversity
};

/// Differentiable energy loss over rows of [n, d] samples and targets.
template <class T>
EnergyLossTerms<T> energy_loss_rows(const diff::Tensor<T>& x1, const diff::Tensor<T>& x2,
                                    const diff::Tensor<T>& y, T alpha, T tau_train);

/// Negative log-likelihood of an isotropic Gaussian with fixed sigma:
/// |y - mu|^2 / (2 sigma^2) + d/2 log(2 pi sigma^2), per row.
template <class T>
diff::Tensor<T> gaussian_nll_rows(const diff::Tensor<T>& mu, const diff::Tensor<T>& y, T sigma);

/// Negative log-likelihood of a channel-independent Gaussian mixture, per
/// row. `head` is [n, 3*k*d] laid out as k*d logits, k*d means, k*d
/// log-variance pre-activations, each component-major (entry j*d + c).
/// Variances are var_floor + exp(pre-activation). Each channel has its own
/// mixture weights; channels sum.
template <class T>
diff::Tensor<T> gmm_nll_rows(const diff::Tensor<T>& head, const diff::Tensor<T>& y, std::size_t k,
                             T var_floor);

inline constexpr double kGmmVarFloor = 1e-4;

}  // namespace ear::scoring
