#include "ear/scoring/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ear/common/errors.hpp"
#include "ear/diff/ops.hpp"

namespace ear::scoring {

using diff::Tensor;

template <class T>
EnergyLossTerms<T> energy_loss_rows(const Tensor<T>& x1, const Tensor<T>& x2, const Tensor<T>& y,
                                    T alpha, T tau_train) {
  if (!(alpha > T(0) && alpha <= T(2))) throw ConfigError("energy loss alpha must lie in (0, 2]");
  if (!(tau_train > T(0) && tau_train <= T(1))) {
    throw ConfigError("tau_train must lie in (0, 1]; larger values make the loss unbounded");
  }
  EnergyLossTerms<T> terms;
  terms.fidelity1 = diff::row_norm_pow(diff::sub(x1, y), alpha);
  terms.fidelity2 = diff::row_norm_pow(diff::sub(x2, y), alpha);
  terms.diversity = diff::row_norm_pow(diff::sub(x1, x2), alpha);
  terms.loss = diff::sub(diff::add(terms.fidelity1, terms.fidelity2),
                         diff::scale(terms.diversity, tau_train));
  return terms;
}

template <class T>
Tensor<T> gaussian_nll_rows(const Tensor<T>& mu, const Tensor<T>& y, T sigma) {
  if (!(sigma > T(0))) throw ConfigError("Gaussian head sigma must be positive");
  const T d = T(y.cols());
  const T constant = T(0.5) * d * std::log(T(2) * std::numbers::pi_v<T> * sigma * sigma);
  auto sq = diff::row_norm_pow(diff::sub(y, mu), T(2));
  return diff::affine(sq, T(1) / (T(2) * sigma * sigma), constant);
}

template <class T>
Tensor<T> gmm_nll_rows(const Tensor<T>& head, const Tensor<T>& y, std::size_t k, T var_floor) {
  if (k == 0) throw ConfigError("GMM head needs at least one component");
  const std::size_t d = y.cols();
  const std::size_t n = y.rows();
  if (head.rows() != n || head.cols() != 3 * k * d) {
    throw DimensionError("gmm_nll_rows: head " + diff::shape_string(head.shape()) +
                         " does not match target " + diff::shape_string(y.shape()) + " with k=" +
                         std::to_string(k));
  }
  const T log_2pi = std::log(T(2) * std::numbers::pi_v<T>);
  const std::size_t kd = k * d;
  auto hv = head.data();
  auto yv = y.data();
  std::vector<T> out(n, T(0));
  // Saved per (row, channel, component): prior weight w and posterior r.
  std::vector<T> prior(n * kd), post(n * kd);
  std::vector<T> a(k), b(k);
  for (std::size_t r = 0; r < n; ++r) {
    const T* logits = hv.data() + r * 3 * kd;
    const T* means = logits + kd;
    const T* pre = means + kd;
    for (std::size_t c = 0; c < d; ++c) {
      const T t = yv[r * d + c];
      T ma = -std::numeric_limits<T>::infinity(), mb = ma;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t e = j * d + c;
        const T var = var_floor + std::exp(pre[e]);
        const T z = t - means[e];
        const T log_normal = -T(0.5) * (log_2pi + std::log(var)) - z * z / (T(2) * var);
        a[j] = logits[e];
        b[j] = logits[e] + log_normal;
        ma = std::max(ma, a[j]);
        mb = std::max(mb, b[j]);
      }
      T sa = 0, sb = 0;
      for (std::size_t j = 0; j < k; ++j) {
        a[j] = std::exp(a[j] - ma);
        b[j] = std::exp(b[j] - mb);
        sa += a[j];
        sb += b[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        prior[r * kd + j * d + c] = a[j] / sa;
        post[r * kd + j * d + c] = b[j] / sb;
      }
      // -log sum_j w_j N_j = lse(logits) - lse(logits + log N)
      out[r] += (ma + std::log(sa)) - (mb + std::log(sb));
    }
  }
  auto node = std::make_shared<diff::detail::Node<T>>();
  node->op = "gmm_nll_rows";
  node->shape = {n};
  node->value = std::move(out);
  if (head.requires_grad() || y.requires_grad()) {
    node->requires_grad = true;
    node->parents = {head.node_ptr(), y.node_ptr()};
    node->backward = [n, d, k, kd, var_floor, prior = std::move(prior),
                      post = std::move(post)](diff::detail::Node<T>& self) {
      auto& ph = *self.parents[0];
      auto& py = *self.parents[1];
      T* gh = ph.requires_grad ? ph.ensure_grad().data() : nullptr;
      T* gy = py.requires_grad ? py.ensure_grad().data() : nullptr;
      for (std::size_t r = 0; r < n; ++r) {
        const T up = self.grad[r];
        const T* means = ph.value.data() + r * 3 * kd + kd;
        const T* pre = means + kd;
        for (std::size_t c = 0; c < d; ++c) {
          const T t = py.value[r * d + c];
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t e = j * d + c;
            const T w = prior[r * kd + e];
            const T rho = post[r * kd + e];
            const T ex = std::exp(pre[e]);
            const T var = var_floor + ex;
            const T z = t - means[e];
            if (gh) {
              T* g = gh + r * 3 * kd;
              g[e] += up * (w - rho);
              g[kd + e] += up * (-rho * z / var);
              // d/dvar of log N = -1/(2 var) + z^2 / (2 var^2); dvar/dpre = exp(pre)
              g[2 * kd + e] += up * (-rho * ex * (-T(0.5) / var + z * z / (T(2) * var * var)));
            }
            if (gy) gy[r * d + c] += up * rho * z / var;
          }
        }
      }
    };
  }
  return Tensor<T>::wrap(std::move(node));
}

template EnergyLossTerms<float> energy_loss_rows(const Tensor<float>&, const Tensor<float>&,
                                                 const Tensor<float>&, float, float);
template EnergyLossTerms<double> energy_loss_rows(const Tensor<double>&, const Tensor<double>&,
                                                  const Tensor<double>&, double, double);
template Tensor<float> gaussian_nll_rows(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> gaussian_nll_rows(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> gmm_nll_rows(const Tensor<float>&, const Tensor<float>&, std::size_t,
                                    float);
template Tensor<double> gmm_nll_rows(const Tensor<double>&, const Tensor<double>&, std::size_t,
                                     double);

}  // namespace ear::scoring
