#include "ear/model/model.hpp"

#include <cmath>
#include <string>

#include "ear/common/errors.hpp"
#include "ear/scoring/losses.hpp"

namespace ear::model {

using diff::Tensor;

namespace {

template <class T>
Tensor<T> xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / double(in + out));
  std::vector<T> v(in * out);
  for (auto& x : v) x = T(rng.uniform(-a, a));
  return Tensor<T>::from_vector({in, out}, std::move(v), true);
}

template <class T>
Tensor<T> normal_init(diff::Shape shape, double stddev, Rng& rng) {
  std::vector<T> v(diff::shape_numel(shape));
  for (auto& x : v) x = T(stddev * rng.normal());
  return Tensor<T>::from_vector(std::move(shape), std::move(v), true);
}

template <class T>
Tensor<T> zeros(diff::Shape shape) {
  return Tensor<T>::zeros(std::move(shape), true);
}

template <class T>
Tensor<T> ones(diff::Shape shape) {
  return Tensor<T>::full(std::move(shape), T(1), true);
}

}  // namespace

template <class T>
Model<T>::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  init_params(init_seed);
  bind();
}

template <class T>
Model<T>::Model(ModelConfig config, ModelParams<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  // Shape check against a reference layout.
  Model<T> reference(config_, 0);
  if (reference.params_.size() != params_.size()) {
    throw DimensionError("parameter set has " + std::to_string(params_.size()) +
                         " tensors, config expects " + std::to_string(reference.params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = reference.params_.entries()[i];
    const auto& have = params_.entries()[i];
    if (want.name != have.name || want.tensor.shape() != have.tensor.shape()) {
      throw DimensionError("parameter '" + have.name + "' " + diff::shape_string(have.tensor.shape()) +
                           " does not match expected '" + want.name + "' " +
                           diff::shape_string(want.tensor.shape()));
    }
    params_.entries()[i].group = want.group;
  }
  bind();
}

template <class T>
void Model<T>::init_params(std::uint64_t seed) {
  Rng rng(seed);
  const auto& c = config_;
  const std::size_t d = c.d_model;
  auto bb = ParamGroup::backbone;
  auto gen = ParamGroup::generator;
  auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out, ParamGroup g,
                        bool zero) {
    params_.add(name + ".w", zero ? zeros<T>({in, out}) : xavier<T>(in, out, rng), g);
    params_.add(name + ".b", zeros<T>({out}), g);
  };
  auto add_norm = [&](const std::string& name, std::size_t width, ParamGroup g) {
    params_.add(name + ".g", ones<T>({width}), g);
    params_.add(name + ".b", zeros<T>({width}), g);
  };

  add_linear("embed.token_proj", c.d_token, d, bb, false);
  params_.add("embed.pos", normal_init<T>({c.context_len(), d}, 0.02, rng), bb);
  params_.add("embed.class_table",
              normal_init<T>({(c.n_classes + 1) * c.n_class_tokens, d}, 0.02, rng), bb);
  params_.add("embed.mask_token", normal_init<T>({d}, 0.02, rng), bb);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    add_norm(p + ".ln1", d, bb);
    add_linear(p + ".attn.q", d, d, bb, false);
    add_linear(p + ".attn.k", d, d, bb, false);
    add_linear(p + ".attn.v", d, d, bb, false);
    add_linear(p + ".attn.o", d, d, bb, false);
    add_norm(p + ".ln2", d, bb);
    add_linear(p + ".ffn.fc1", d, c.ffn_ratio * d, bb, false);
    add_linear(p + ".ffn.fc2", c.ffn_ratio * d, d, bb, false);
  }
  add_norm("final_ln", d, bb);

  if (c.head == HeadKind::energy) {
    add_linear("gen.hidden", d, c.d_mlp, gen, false);
    add_linear("gen.noise", c.d_noise, c.d_mlp, gen, false);
    for (std::size_t i = 0; i < c.n_gen_blocks; ++i) {
      const std::string p = "gen.blocks." + std::to_string(i);
      add_norm(p + ".ln", c.d_mlp, gen);
      // Zero modulation makes every block the identity at init.
      add_linear(p + ".shift", c.d_mlp, c.d_mlp, gen, true);
      add_linear(p + ".scale", c.d_mlp, c.d_mlp, gen, true);
      add_linear(p + ".gate", c.d_mlp, c.d_mlp, gen, true);
      add_linear(p + ".fc1", c.d_mlp, c.d_mlp, gen, false);
      add_linear(p + ".fc2", c.d_mlp, c.d_mlp, gen, false);
    }
    add_linear("gen.out", c.d_mlp, c.d_token, gen, false);
  } else {
    add_linear("head.hidden", d, c.d_mlp, gen, false);
    add_linear("head.out", c.d_mlp, c.head_out_width(), gen, false);
  }
}

template <class T>
void Model<T>::bind() {
  auto lin = [&](const std::string& name) {
    return LinearRef{params_.get(name + ".w"), params_.get(name + ".b")};
  };
  auto norm = [&](const std::string& name) {
    return NormRef{params_.get(name + ".g"), params_.get(name + ".b")};
  };
  token_proj_ = lin("embed.token_proj");
  pos_ = params_.get("embed.pos");
  class_table_ = params_.get("embed.class_table");
  mask_token_ = params_.get("embed.mask_token");
  blocks_.clear();
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    blocks_.push_back({norm(p + ".ln1"), norm(p + ".ln2"), lin(p + ".attn.q"), lin(p + ".attn.k"),
                       lin(p + ".attn.v"), lin(p + ".attn.o"), lin(p + ".ffn.fc1"),
                       lin(p + ".ffn.fc2")});
  }
  final_ln_ = norm("final_ln");
  gen_blocks_.clear();
  if (config_.head == HeadKind::energy) {
    gen_hidden_ = lin("gen.hidden");
    gen_noise_ = lin("gen.noise");
    gen_out_ = lin("gen.out");
    for (std::size_t i = 0; i < config_.n_gen_blocks; ++i) {
      const std::string p = "gen.blocks." + std::to_string(i);
      gen_blocks_.push_back({norm(p + ".ln"), lin(p + ".shift"), lin(p + ".scale"),
                             lin(p + ".gate"), lin(p + ".fc1"), lin(p + ".fc2")});
    }
  } else {
    head_hidden_ = lin("head.hidden");
    head_out_ = lin("head.out");
  }
}

template <class T>
Tensor<T> Model<T>::apply(const LinearRef& l, const Tensor<T>& x) const {
  return diff::linear(x, l.w, l.b);
}

template <class T>
Tensor<T> Model<T>::apply(const NormRef& n, const Tensor<T>& x) const {
  return diff::layer_norm(x, n.g, n.b, T(config_.ln_eps));
}

template <class T>
Tensor<T> Model<T>::embed_sequence(const SequenceBatch<T>& batch) const {
  const auto& c = config_;
  const std::size_t B = batch.batch;
  if (batch.seq_len != c.seq_len || batch.d_token != c.d_token) {
    throw DimensionError("batch of " + std::to_string(batch.seq_len) + "x" +
                         std::to_string(batch.d_token) + " tokens, model expects " +
                         std::to_string(c.seq_len) + "x" + std::to_string(c.d_token));
  }
  if (batch.labels.size() != B || batch.mask.size() != B * c.seq_len ||
      batch.tokens.size() != B * c.seq_len * c.d_token) {
    throw DimensionError("inconsistent batch buffers");
  }
  for (std::size_t label : batch.labels) {
    if (label > c.n_classes) {
      throw ConfigError("label " + std::to_string(label) + " out of range (n_classes " +
                        std::to_string(c.n_classes) + ", dummy " + std::to_string(c.dummy_label()) +
                        ")");
    }
  }
  auto tokens = Tensor<T>::from_vector({B * c.seq_len, c.d_token}, batch.tokens);
  auto projected = apply(token_proj_, tokens);
  // Source rows: [class table | projected tokens | mask token].
  const std::size_t n_class_rows = class_table_.dim(0);
  const std::size_t mask_row = n_class_rows + B * c.seq_len;
  auto source = diff::concat_rows<T>({class_table_, projected, mask_token_.reshape({1, c.d_model})});

  const std::size_t L = c.context_len();
  std::vector<std::size_t> index;
  std::vector<std::size_t> pos_index;
  index.reserve(B * L);
  pos_index.reserve(B * L);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < c.n_class_tokens; ++j) {
      index.push_back(batch.labels[b] * c.n_class_tokens + j);
    }
    for (std::size_t t = 0; t < c.seq_len; ++t) {
      const std::size_t flat = b * c.seq_len + t;
      index.push_back(batch.mask[flat] ? mask_row : n_class_rows + flat);
    }
    for (std::size_t l = 0; l < L; ++l) pos_index.push_back(l);
  }
  return diff::add(diff::gather_rows(source, index), diff::gather_rows(pos_, pos_index));
}

template <class T>
HiddenState<T> Model<T>::backbone_forward(const Tensor<T>& embedded, std::size_t batch,
                                          bool train_mode, Rng* rng) const {
  const auto& c = config_;
  const bool drop = train_mode && c.dropout > 0.0;
  if (drop && rng == nullptr) throw ContractError("train-mode dropout needs an rng");
  if (embedded.rows() != batch * c.context_len() || embedded.cols() != c.d_model) {
    throw DimensionError("embedded sequence " + diff::shape_string(embedded.shape()) +
                         " does not match batch " + std::to_string(batch));
  }
  Tensor<T> x = embedded;
  for (const auto& blk : blocks_) {
    auto h = apply(blk.ln1, x);
    auto att = diff::attention(apply(blk.q, h), apply(blk.k, h), apply(blk.v, h), batch, c.n_heads,
                               c.attention_mode);
    att = apply(blk.o, att);
    if (drop) att = diff::dropout(att, c.dropout, *rng);
    x = diff::add(x, att);
    h = apply(blk.ln2, x);
    auto f = apply(blk.fc2, diff::gelu(apply(blk.fc1, h)));
    if (drop) f = diff::dropout(f, c.dropout, *rng);
    x = diff::add(x, f);
  }
  return {apply(final_ln_, x), batch, c.context_len(), c.n_class_tokens};
}

template <class T>
Tensor<T> Model<T>::draw_noise(std::size_t n, Rng& rng) const {
  std::vector<T> v(n * config_.d_noise);
  if (config_.noise_kind == NoiseKind::uniform) {
    for (auto& x : v) x = T(rng.uniform() - 0.5);
  } else {
    for (auto& x : v) x = T(rng.normal());
  }
  return Tensor<T>::from_vector({n, config_.d_noise}, std::move(v));
}

template <class T>
Tensor<T> Model<T>::generator_forward(const Tensor<T>& h, const Tensor<T>& eps,
                                      T tau_infer) const {
  if (config_.head != HeadKind::energy) throw ContractError("model has no energy generator");
  if (!(tau_infer > T(0))) throw ConfigError("tau_infer must be positive");
  if (h.cols() != config_.d_model || eps.cols() != config_.d_noise || h.rows() != eps.rows()) {
    throw DimensionError("generator inputs " + diff::shape_string(h.shape()) + " and " +
                         diff::shape_string(eps.shape()) + " do not match the config");
  }
  auto x = apply(gen_hidden_, h);
  auto e = diff::silu(apply(gen_noise_, eps));
  for (const auto& blk : gen_blocks_) {
    auto he = diff::modulate(apply(blk.ln, x), apply(blk.scale, e), apply(blk.shift, e), tau_infer);
    auto f = apply(blk.fc2, diff::silu(apply(blk.fc1, he)));
    x = diff::add(x, diff::mul(apply(blk.gate, e), f));
  }
  return apply(gen_out_, x);
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> Model<T>::predict_pair(const Tensor<T>& h, Rng& rng) const {
  auto eps1 = draw_noise(h.rows(), rng);
  auto eps2 = draw_noise(h.rows(), rng);
  return predict_pair(h, eps1, eps2);
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> Model<T>::predict_pair(const Tensor<T>& h, const Tensor<T>& eps1,
                                                       const Tensor<T>& eps2) const {
  // One stacked pass; rows are independent so each half equals a separate call.
  const std::size_t n = h.rows();
  auto both = generator_forward(diff::concat_rows<T>({h, h}), diff::concat_rows<T>({eps1, eps2}),
                                T(1));
  std::vector<std::size_t> first(n), second(n);
  for (std::size_t i = 0; i < n; ++i) {
    first[i] = i;
    second[i] = n + i;
  }
  return {diff::gather_rows(both, first), diff::gather_rows(both, second)};
}

template <class T>
Tensor<T> Model<T>::head_forward(const Tensor<T>& h) const {
  if (config_.head == HeadKind::energy) throw ContractError("energy model has no explicit head");
  return apply(head_out_, diff::silu(apply(head_hidden_, h)));
}

template <class T>
std::vector<T> Model<T>::sample_tokens(const Tensor<T>& h, Rng& rng, T tau_infer,
                                       T head_sigma) const {
  const std::size_t n = h.rows();
  const std::size_t d = config_.d_token;
  switch (config_.head) {
    case HeadKind::energy: {
      auto eps = draw_noise(n, rng);
      auto out = generator_forward(h, eps, tau_infer);
      return {out.data().begin(), out.data().end()};
    }
    case HeadKind::gaussian: {
      auto mu = head_forward(h);
      std::vector<T> out(mu.data().begin(), mu.data().end());
      for (auto& v : out) v += head_sigma * T(rng.normal());
      return out;
    }
    case HeadKind::gmm: {
      const std::size_t k = config_.gmm_components;
      const std::size_t kd = k * d;
      auto head = head_forward(h);
      auto hv = head.data();
      std::vector<T> out(n * d);
      std::vector<double> w(k);
      for (std::size_t r = 0; r < n; ++r) {
        const T* logits = hv.data() + r * 3 * kd;
        const T* means = logits + kd;
        const T* pre = means + kd;
        for (std::size_t ch = 0; ch < d; ++ch) {
          double mx = -1e300, z = 0;
          for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, double(logits[j * d + ch]));
          for (std::size_t j = 0; j < k; ++j) z += w[j] = std::exp(double(logits[j * d + ch]) - mx);
          const double u = rng.uniform() * z;
          std::size_t j = 0;
          double acc = w[0];
          while (u >= acc && j + 1 < k) acc += w[++j];
          const std::size_t e = j * d + ch;
          const double var = scoring::kGmmVarFloor + std::exp(double(pre[e]));
          out[r * d + ch] = T(double(means[e]) + std::sqrt(var) * rng.normal());
        }
      }
      return out;
    }
  }
  return {};
}

template class Model<float>;
template class Model<double>;

}  // namespace ear::model
