#include "ear/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "ear/common/errors.hpp"

namespace ear::diff {
namespace {

template <class T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

// Builds the result node. Graph edges and the closure are kept only when some
// input participates in differentiation.
template <class T, class Backward>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::vector<NodePtr<T>> parents, Backward&& backward_fn) {
  auto node = std::make_shared<detail::Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const NodePtr<T>& p) { return p->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::forward<Backward>(backward_fn);
  }
  return Tensor<T>::wrap(std::move(node));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

// Register-blocked kernels. Every output element is accumulated as
// c += a_p * b_p in increasing p no matter which block it falls in, and a
// partial block is zero-padded through the same code path, so a row's
// result never depends on how many rows share the call.
constexpr std::size_t kRowBlock = 4;

template <class T>
constexpr std::size_t col_block() {
  return 64 / sizeof(T);
}

// acc[r][0..JB) += sum_p a[r * a_row + p * a_col] * b[p * ldb + 0..JB), p in [0, k)
template <class T, std::size_t JB>
inline void block_4xJ(const T* a, std::size_t a_row, std::size_t a_col, const T* b,
                      std::size_t ldb, T* c, std::size_t ldc, std::size_t k) {
  T acc[kRowBlock][JB];
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t j = 0; j < JB; ++j) acc[r][j] = c[r * ldc + j];
  for (std::size_t p = 0; p < k; ++p) {
    const T* __restrict brow = b + p * ldb;
    const T a0 = a[p * a_col];
    const T a1 = a[a_row + p * a_col];
    const T a2 = a[2 * a_row + p * a_col];
    const T a3 = a[3 * a_row + p * a_col];
    for (std::size_t j = 0; j < JB; ++j) {
      const T bv = brow[j];
      acc[0][j] += a0 * bv;
      acc[1][j] += a1 * bv;
      acc[2][j] += a2 * bv;
      acc[3][j] += a3 * bv;
    }
  }
  for (std::size_t r = 0; r < kRowBlock; ++r)
    for (std::size_t j = 0; j < JB; ++j) c[r * ldc + j] = acc[r][j];
}

template <class T>
inline void block_4xtail(const T* a, std::size_t a_row, std::size_t a_col, const T* b,
                         std::size_t ldb, T* c, std::size_t ldc, std::size_t k, std::size_t width) {
  for (std::size_t r = 0; r < kRowBlock; ++r) {
    T* crow = c + r * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[r * a_row + p * a_col];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < width; ++j) crow[j] += av * brow[j];
    }
  }
}

// Runs one 4-row strip of c [4 x n] against b [k x n].
template <class T>
void strip(const T* a, std::size_t a_row, std::size_t a_col, const T* b, T* c, std::size_t k,
           std::size_t n) {
  constexpr std::size_t JB = col_block<T>();
  std::size_t j = 0;
  for (; j + JB <= n; j += JB) block_4xJ<T, JB>(a, a_row, a_col, b + j, n, c + j, n, k);
  if (j < n) block_4xtail(a, a_row, a_col, b + j, n, c + j, n, k, n - j);
}

// c[m x n] += a[m x k] . b[k x n]
template <class T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + kRowBlock <= m; i += kRowBlock) strip(a + i * k, k, 1, b, c + i * n, k, n);
  if (i == m) return;
  const std::size_t rest = m - i;
  std::vector<T> pa(kRowBlock * k, T(0)), pc(kRowBlock * n, T(0));
  std::copy(a + i * k, a + m * k, pa.begin());
  std::copy(c + i * n, c + m * n, pc.begin());
  strip(pa.data(), k, 1, b, pc.data(), k, n);
  std::copy(pc.begin(), pc.begin() + rest * n, c + i * n);
}

// c[k x n] += a^T . g with a [m x k], g [m x n]; the sum runs over rows of a.
template <class T>
void gemm_tn_acc(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t p = 0;
  // Output rows p..p+3 read column p of a: element (r, i) sits at a[i * k + p + r].
  for (; p + kRowBlock <= k; p += kRowBlock) strip(a + p, 1, k, g, c + p * n, m, n);
  if (p == k) return;
  const std::size_t rest = k - p;
  std::vector<T> pa(kRowBlock * m, T(0)), pc(kRowBlock * n, T(0));
  for (std::size_t r = 0; r < rest; ++r)
    for (std::size_t i = 0; i < m; ++i) pa[r * m + i] = a[i * k + p + r];
  std::copy(c + p * n, c + k * n, pc.begin());
  strip(pa.data(), m, 1, g, pc.data(), m, n);
  std::copy(pc.begin(), pc.begin() + rest * n, c + p * n);
}

template <class T>
std::vector<T> transpose(const T* b, std::size_t k, std::size_t n) {
  std::vector<T> out(k * n);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) out[j * k + p] = b[p * n + j];
  return out;
}

// Shared body of matmul and linear backward for the x / w operands.
template <class T>
void matmul_backward(detail::Node<T>& self, detail::Node<T>& a, detail::Node<T>& b, std::size_t m,
                     std::size_t k, std::size_t n) {
  const T* g = self.grad.data();
  if (a.requires_grad) {
    auto bt = transpose(b.value.data(), k, n);
    gemm_acc(g, bt.data(), a.ensure_grad().data(), m, n, k);
  }
  if (b.requires_grad) {
    gemm_tn_acc(a.value.data(), g, b.ensure_grad().data(), m, k, n);
  }
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2, got " +
                                              shape_string(a.shape()) + " and " +
                                              shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ, " + shape_string(a.shape()) + " . " +
                             shape_string(b.shape()));
  std::vector<T> out(m * n, T(0));
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result<T>("matmul", {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                        [m, k, n](detail::Node<T>& self) {
                          matmul_backward(self, *self.parents[0], *self.parents[1], m, k, n);
                        });
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require(w.rank() == 2, "linear: weight must be rank 2, got " + shape_string(w.shape()));
  const std::size_t k = w.dim(0), n = w.dim(1);
  require(x.rank() >= 1 && x.cols() == k, "linear: input " + shape_string(x.shape()) +
                                              " does not match weight " + shape_string(w.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.numel() == n, "linear: bias " + shape_string(bias.shape()) +
                                   " does not match weight " + shape_string(w.shape()));
  }
  const std::size_t m = x.rows();
  std::vector<T> out(m * n, T(0));
  gemm_acc(x.data().data(), w.data().data(), out.data(), m, k, n);
  if (has_bias) {
    const T* bv = bias.data().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  Shape shape = x.shape();
  shape.back() = n;
  std::vector<NodePtr<T>> parents{x.node_ptr(), w.node_ptr()};
  if (has_bias) parents.push_back(bias.node_ptr());
  return make_result<T>("linear", std::move(shape), std::move(out), std::move(parents),
                        [m, k, n](detail::Node<T>& self) {
                          matmul_backward(self, *self.parents[0], *self.parents[1], m, k, n);
                          if (self.parents.size() == 3 && self.parents[2]->requires_grad) {
                            auto gb = self.parents[2]->ensure_grad();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad[i * n + j];
                          }
                        });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>("add", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                        [](detail::Node<T>& self) {
                          for (auto& p : self.parents) {
                            if (!p->requires_grad) continue;
                            auto g = p->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                        });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                        [](detail::Node<T>& self) {
                          if (self.parents[0]->requires_grad) {
                            auto g = self.parents[0]->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                          if (self.parents[1]->requires_grad) {
                            auto g = self.parents[1]->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                          }
                        });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                        [](detail::Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          if (pa.requires_grad) {
                            auto g = pa.ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              g[i] += self.grad[i] * pb.value[i];
                          }
                          if (pb.requires_grad) {
                            auto g = pb.ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i)
                              g[i] += self.grad[i] * pa.value[i];
                          }
                        });
}

template <class T>
Tensor<T> affine(const Tensor<T>& x, T a, T b) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * xv[i] + b;
  return make_result<T>("affine", x.shape(), std::move(out), {x.node_ptr()},
                        [a](detail::Node<T>& self) {
                          auto g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += a * self.grad[i];
                        });
}

template <class T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale_t, const Tensor<T>& shift, T tau) {
  require_same_shape(x, scale_t, "modulate");
  require_same_shape(x, shift, "modulate");
  std::vector<T> out(x.numel());
  auto xv = x.data();
  auto sc = scale_t.data();
  auto sh = shift.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (T(1) + sc[i]) * xv[i] + tau * sh[i];
  return make_result<T>(
      "modulate", x.shape(), std::move(out), {x.node_ptr(), scale_t.node_ptr(), shift.node_ptr()},
      [tau](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& ps = *self.parents[1];
        auto& ph = *self.parents[2];
        const std::size_t n = self.grad.size();
        if (px.requires_grad) {
          auto g = px.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * (T(1) + ps.value[i]);
        }
        if (ps.requires_grad) {
          auto g = ps.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * px.value[i];
        }
        if (ph.requires_grad) {
          auto g = ph.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) g[i] += tau * self.grad[i];
        }
      });
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sigmoid(xv[i]);
  return make_result<T>("silu", x.shape(), std::move(out), {x.node_ptr()},
                        [](detail::Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto g = px.ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const T s = sigmoid(px.value[i]);
                            g[i] += self.grad[i] * s * (T(1) + px.value[i] * (T(1) - s));
                          }
                        });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xv[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  }
  return make_result<T>("gelu", x.shape(), std::move(out), {x.node_ptr()},
                        [](detail::Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto g = px.ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const T v = px.value[i];
                            const T t = std::tanh(kC * (v + kA * v * v * v));
                            const T du = kC * (T(1) + T(3) * kA * v * v);
                            g[i] += self.grad[i] *
                                    (T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * du);
                          }
                        });
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = x.cols();
  require(d >= 1, "layer_norm: trailing axis must be non-empty");
  require(gamma.numel() == d && beta.numel() == d,
          "layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  if (!(eps > T(0))) throw ContractError("layer_norm: eps must be positive");
  const std::size_t m = x.rows();
  std::vector<T> out(m * d);
  std::vector<T> xhat(m * d);
  std::vector<T> rstd(m);
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t r = 0; r < m; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
      [m, d, xhat = std::move(xhat), rstd = std::move(rstd)](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* g = self.grad.data();
        if (pg.requires_grad) {
          auto gg = pg.ensure_grad();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (pb.requires_grad) {
          auto gb = pb.ensure_grad();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
        if (px.requires_grad) {
          auto gx = px.ensure_grad();
          std::vector<T> dxhat(d);
          for (std::size_t r = 0; r < m; ++r) {
            T mean_dx = 0, mean_dxx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = g[r * d + j] * pg.value[j];
              mean_dx += dxhat[j];
              mean_dxx += dxhat[j] * xhat[r * d + j];
            }
            mean_dx /= T(d);
            mean_dxx /= T(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[r * d + j] += rstd[r] * (dxhat[j] - mean_dx - xhat[r * d + j] * mean_dxx);
            }
          }
        }
      });
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  std::vector<T> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? T(0) : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return make_result<T>("dropout", x.shape(), std::move(out), {x.node_ptr()},
                        [mask = std::move(mask)](detail::Node<T>& self) {
                          auto g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                        });
}

template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t batch,
                    std::size_t heads, AttentionMode mode) {
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const std::size_t d = q.cols();
  const std::size_t rows = q.rows();
  require(batch >= 1 && rows % batch == 0,
          "attention: " + std::to_string(rows) + " rows do not split into batch " +
              std::to_string(batch));
  require(heads >= 1 && d % heads == 0,
          "attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
              " heads");
  const std::size_t seq = rows / batch;
  const std::size_t dh = d / heads;
  const T inv_scale = T(1) / std::sqrt(T(dh));
  const bool causal = mode == AttentionMode::causal;

  auto qv = q.data();
  auto kv = k.data();
  auto vv = v.data();
  std::vector<T> out(rows * d, T(0));
  std::vector<T> probs(batch * heads * seq * seq, T(0));
  std::vector<T> scores(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      T* P = probs.data() + (b * heads + h) * seq * seq;
      for (std::size_t i = 0; i < seq; ++i) {
        const T* qi = qv.data() + (b * seq + i) * d + h * dh;
        const std::size_t limit = causal ? i + 1 : seq;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < limit; ++j) {
          const T* kj = kv.data() + (b * seq + j) * d + h * dh;
          T s = 0;
          for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
          scores[j] = s * inv_scale;
          mx = std::max(mx, scores[j]);
        }
        T z = 0;
        for (std::size_t j = 0; j < limit; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          z += scores[j];
        }
        T* oi = out.data() + (b * seq + i) * d + h * dh;
        for (std::size_t j = 0; j < limit; ++j) {
          const T pj = scores[j] / z;
          P[i * seq + j] = pj;
          const T* vj = vv.data() + (b * seq + j) * d + h * dh;
          for (std::size_t t = 0; t < dh; ++t) oi[t] += pj * vj[t];
        }
      }
    }
  }
  return make_result<T>(
      "attention", q.shape(), std::move(out), {q.node_ptr(), k.node_ptr(), v.node_ptr()},
      [batch, heads, seq, d, dh, inv_scale, causal, probs = std::move(probs)](detail::Node<T>& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        T* gq = pq.requires_grad ? pq.ensure_grad().data() : nullptr;
        T* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
        T* gv = pv.requires_grad ? pv.ensure_grad().data() : nullptr;
        const T* go = self.grad.data();
        std::vector<T> dp(seq);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const T* P = probs.data() + (b * heads + h) * seq * seq;
            for (std::size_t i = 0; i < seq; ++i) {
              const std::size_t limit = causal ? i + 1 : seq;
              const T* goi = go + (b * seq + i) * d + h * dh;
              T dot = 0;
              for (std::size_t j = 0; j < limit; ++j) {
                const T* vj = pv.value.data() + (b * seq + j) * d + h * dh;
                T s = 0;
                for (std::size_t t = 0; t < dh; ++t) s += goi[t] * vj[t];
                dp[j] = s;
                dot += P[i * seq + j] * s;
                if (gv) {
                  T* gvj = gv + (b * seq + j) * d + h * dh;
                  const T pij = P[i * seq + j];
                  for (std::size_t t = 0; t < dh; ++t) gvj[t] += pij * goi[t];
                }
              }
              const T* qi = pq.value.data() + (b * seq + i) * d + h * dh;
              T* gqi = gq ? gq + (b * seq + i) * d + h * dh : nullptr;
              for (std::size_t j = 0; j < limit; ++j) {
                const T ds = P[i * seq + j] * (dp[j] - dot) * inv_scale;
                const T* kj = pk.value.data() + (b * seq + j) * d + h * dh;
                if (gqi) {
                  for (std::size_t t = 0; t < dh; ++t) gqi[t] += ds * kj[t];
                }
                if (gk) {
                  T* gkj = gk + (b * seq + j) * d + h * dh;
                  for (std::size_t t = 0; t < dh; ++t) gkj[t] += ds * qi[t];
                }
              }
            }
          }
        }
      });
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& index) {
  const std::size_t c = x.cols();
  const std::size_t r = x.rows();
  for (std::size_t i : index) {
    require(i < r, "gather_rows: index " + std::to_string(i) + " out of range for " +
                       std::to_string(r) + " rows");
  }
  std::vector<T> out(index.size() * c);
  auto xv = x.data();
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(xv.data() + index[i] * c, c, out.data() + i * c);
  return make_result<T>("gather_rows", {index.size(), c}, std::move(out), {x.node_ptr()},
                        [index, c](detail::Node<T>& self) {
                          auto g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < index.size(); ++i) {
                            T* dst = g.data() + index[i] * c;
                            const T* src = self.grad.data() + i * c;
                            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                          }
                        });
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  std::vector<NodePtr<T>> parents;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(p.cols() == c, "concat_rows: column mismatch " + shape_string(p.shape()));
    offsets.push_back(total);
    total += p.rows();
    parents.push_back(p.node_ptr());
  }
  std::vector<T> out(total * c);
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i].data().begin(), parts[i].data().end(), out.begin() + offsets[i] * c);
  return make_result<T>("concat_rows", {total, c}, std::move(out), std::move(parents),
                        [offsets, c](detail::Node<T>& self) {
                          for (std::size_t i = 0; i < self.parents.size(); ++i) {
                            auto& p = *self.parents[i];
                            if (!p.requires_grad) continue;
                            auto g = p.ensure_grad();
                            const T* src = self.grad.data() + offsets[i] * c;
                            for (std::size_t j = 0; j < g.size(); ++j) g[j] += src[j];
                          }
                        });
}

template <class T>
Tensor<T> row_norm_pow(const Tensor<T>& x, T alpha) {
  const std::size_t c = x.cols();
  const std::size_t r = x.rows();
  std::vector<T> norms(r);
  std::vector<T> out(r);
  auto xv = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    norms[i] = std::sqrt(s);
    out[i] = std::pow(norms[i], alpha);
  }
  return make_result<T>("row_norm_pow", {r}, std::move(out), {x.node_ptr()},
                        [c, r, alpha, norms = std::move(norms)](detail::Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto g = px.ensure_grad();
                          for (std::size_t i = 0; i < r; ++i) {
                            if (norms[i] == T(0)) {
                              // No finite derivative exists here for a < 1.
                              if (alpha < T(1)) {
                                for (std::size_t j = 0; j < c; ++j)
                                  g[i * c + j] += std::numeric_limits<T>::quiet_NaN();
                              }
                              continue;
                            }
                            // d|x|^a/dx = a |x|^(a-2) x
                            const T coef = self.grad[i] * alpha * std::pow(norms[i], alpha - T(2));
                            for (std::size_t j = 0; j < c; ++j)
                              g[i * c + j] += coef * px.value[i * c + j];
                          }
                        });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return make_result<T>("sum", {}, {s}, {x.node_ptr()}, [](detail::Node<T>& self) {
    auto g = self.parents[0]->ensure_grad();
    const T up = self.grad[0];
    for (auto& gi : g) gi += up;
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw ContractError("mean of an empty tensor");
  T s = 0;
  for (T v : x.data()) s += v;
  return make_result<T>("mean", {}, {s / T(n)}, {x.node_ptr()}, [n](detail::Node<T>& self) {
    auto g = self.parents[0]->ensure_grad();
    const T up = self.grad[0] / T(n);
    for (auto& gi : g) gi += up;
  });
}

#define EAR_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> affine(const Tensor<T>&, T, T);                                             \
  template Tensor<T> modulate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);          \
  template Tensor<T> silu(const Tensor<T>&);                                                     \
  template Tensor<T> gelu(const Tensor<T>&);                                                     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                    \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                               std::size_t, std::size_t, AttentionMode);                         \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&);             \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                                 \
  template Tensor<T> row_norm_pow(const Tensor<T>&, T);                                          \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);

EAR_INSTANTIATE_OPS(float)
EAR_INSTANTIATE_OPS(double)

#undef EAR_INSTANTIATE_OPS

}  // namespace ear::diff
