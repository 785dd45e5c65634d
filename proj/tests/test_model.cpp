#include <gtest/gtest.h>

#include <cmath>

#include "ear/common/errors.hpp"
#include "ear/diff/ops.hpp"
#include "ear/model/model.hpp"
#include "ear/scoring/losses.hpp"
#include "support.hpp"

namespace ear::model {
namespace {

using test::TensorD;
using Mat = std::vector<double>;  // row-major

Mat vec(const TensorD& t) { return {t.data().begin(), t.data().end()}; }

// Plain-loop reference pieces.
Mat ref_linear(const Mat& x, std::size_t rows, const TensorD& w, const TensorD& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Mat y(rows * out);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out; ++j) {
      double s = b.data()[j];
      for (std::size_t p = 0; p < in; ++p) s += x[r * in + p] * w.data()[p * out + j];
      y[r * out + j] = s;
    }
  return y;
}

Mat ref_ln(const Mat& x, std::size_t rows, const TensorD& g, const TensorD& b, double eps) {
  const std::size_t d = g.numel();
  Mat y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < d; ++j) mu += x[r * d + j] / double(d);
    for (std::size_t j = 0; j < d; ++j) var += (x[r * d + j] - mu) * (x[r * d + j] - mu) / double(d);
    for (std::size_t j = 0; j < d; ++j)
      y[r * d + j] = (x[r * d + j] - mu) / std::sqrt(var + eps) * g.data()[j] + b.data()[j];
  }
  return y;
}

double ref_gelu(double v) {
  return 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
}
double ref_silu(double v) { return v / (1.0 + std::exp(-v)); }

ModelConfig small_config() {
  auto c = test::tiny_config();
  return c;
}

TEST(Config, ValidatesShapes) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.d_noise = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, EnumNamesRoundTrip) {
  for (auto k : {NoiseKind::uniform, NoiseKind::gaussian}) EXPECT_EQ(parse_noise_kind(to_string(k)), k);
  for (auto k : {HeadKind::energy, HeadKind::gaussian, HeadKind::gmm})
    EXPECT_EQ(parse_head_kind(to_string(k)), k);
  for (auto m : {diff::AttentionMode::causal, diff::AttentionMode::bidirectional})
    EXPECT_EQ(parse_attention_mode(to_string(m)), m);
  EXPECT_THROW(parse_head_kind("flow"), ConfigError);
}

TEST(Params, GroupsPartitionTheModel) {
  Model<float> m(ModelConfig{}, 1);
  const auto& p = m.params();
  EXPECT_EQ(p.numel(ParamGroup::backbone) + p.numel(ParamGroup::generator), p.numel());
  for (const auto& e : p.entries()) {
    const bool gen = e.name.rfind("gen.", 0) == 0;
    EXPECT_EQ(e.group == ParamGroup::generator, gen) << e.name;
  }
}

TEST(Params, DefaultGeneratorShareIsAboutFifteenPercent) {
  Model<float> m(ModelConfig{}, 1);
  const double share =
      double(m.params().numel(ParamGroup::generator)) / double(m.params().numel());
  EXPECT_GE(share, 0.10);
  EXPECT_LE(share, 0.20);
}

TEST(Params, ModulationStartsAtZero) {
  Model<float> m(small_config(), 3);
  std::size_t seen = 0;
  for (const auto& e : m.params().entries()) {
    const auto& n = e.name;
    if (n.find(".shift.") == std::string::npos && n.find(".scale.") == std::string::npos &&
        n.find(".gate.") == std::string::npos)
      continue;
    ++seen;
    for (float v : e.tensor.data()) EXPECT_EQ(v, 0.0f) << n;
  }
  EXPECT_EQ(seen, 2u * 3u * small_config().n_gen_blocks);
}

TEST(Params, CloneAndAssignAreDeep) {
  Model<double> m(small_config(), 4);
  auto copy = m.params().clone(false);
  EXPECT_TRUE(copy.same_values(m.params()));
  copy.entries()[0].tensor.mutable_data()[0] += 1.0;
  EXPECT_FALSE(copy.same_values(m.params()));
  m.params().assign_values(copy);
  EXPECT_TRUE(copy.same_values(m.params()));
}

TEST(Model, RejectsMismatchedParameters) {
  Model<float> a(small_config(), 1);
  auto c = small_config();
  c.d_mlp = 12;
  EXPECT_THROW(Model<float>(c, a.params().clone(true)), DimensionError);
}

TEST(Model, InitIsSeedDeterministic) {
  Model<float> a(small_config(), 9), b(small_config(), 9), c(small_config(), 10);
  EXPECT_TRUE(a.params().same_values(b.params()));
  EXPECT_FALSE(a.params().same_values(c.params()));
}

TEST(Embed, FullyMaskedBodyIgnoresTokens) {
  Model<double> m(small_config(), 2);
  Rng rng(1);
  auto b = test::random_batch<double>(small_config(), 3, rng, 1.0);
  std::fill(b.mask.begin(), b.mask.end(), 1);
  auto e1 = m.embed_sequence(b);
  for (auto& v : b.tokens) v = 100.0 * rng.normal();
  auto e2 = m.embed_sequence(b);
  EXPECT_EQ(vec(e1), vec(e2));
}

TEST(Embed, ZeroTokenBodyIsPositionalEmbedding) {
  const auto c = small_config();
  Model<double> m(c, 2);
  Rng rng(2);
  auto b = test::random_batch<double>(c, 1, rng, 0.0);
  std::fill(b.mask.begin(), b.mask.end(), 0);
  std::fill(b.tokens.begin(), b.tokens.end(), 0.0);
  auto e = m.embed_sequence(b);
  const auto& pos = m.params().get("embed.pos");
  for (std::size_t t = c.n_class_tokens; t < c.context_len(); ++t)
    for (std::size_t j = 0; j < c.d_model; ++j)
      EXPECT_EQ(e.data()[t * c.d_model + j], pos.data()[t * c.d_model + j]);
}

TEST(Embed, LabelsOnlyTouchClassRows) {
  const auto c = small_config();
  Model<double> m(c, 2);
  Rng rng(3);
  auto b = test::random_batch<double>(c, 2, rng);
  auto other = b;
  other.labels = {c.dummy_label(), (b.labels[1] + 1) % c.n_classes};
  auto e1 = m.embed_sequence(b);
  auto e2 = m.embed_sequence(other);
  for (std::size_t r = 0; r < 2 * c.context_len(); ++r) {
    const bool class_row = r % c.context_len() < c.n_class_tokens;
    bool same = true;
    for (std::size_t j = 0; j < c.d_model; ++j)
      same = same && e1.data()[r * c.d_model + j] == e2.data()[r * c.d_model + j];
    EXPECT_EQ(same, !class_row) << r;
  }
}

TEST(Embed, LabelOutOfRangeIsRejected) {
  const auto c = small_config();
  Model<double> m(c, 2);
  Rng rng(4);
  auto b = test::random_batch<double>(c, 1, rng);
  b.labels[0] = c.n_classes + 1;
  EXPECT_THROW(m.embed_sequence(b), ConfigError);
}

TEST(Backbone, EvalModeIsDeterministic) {
  auto c = small_config();
  c.dropout = 0.3;
  Model<float> m(c, 5);
  Rng rng(5);
  auto b = test::random_batch<float>(c, 4, rng);
  auto h1 = m.backbone_forward(m.embed_sequence(b), 4, false, nullptr);
  auto h2 = m.backbone_forward(m.embed_sequence(b), 4, false, nullptr);
  EXPECT_TRUE(std::equal(h1.values.data().begin(), h1.values.data().end(),
                         h2.values.data().begin()));
  EXPECT_THROW(m.backbone_forward(m.embed_sequence(b), 4, true, nullptr), ContractError);
}

TEST(Backbone, CausalModeHasNoLeakage) {
  auto c = small_config();
  c.attention_mode = diff::AttentionMode::causal;
  c.seq_len = 6;
  Model<double> m(c, 6);
  Rng rng(6);
  auto b = test::random_batch<double>(c, 1, rng, 0.0);
  auto base = m.backbone_forward(m.embed_sequence(b), 1, false, nullptr);
  for (std::size_t t = 0; t + 1 < c.seq_len; ++t) {
    auto moved = b;
    for (std::size_t u = t + 1; u < c.seq_len; ++u)
      for (std::size_t ch = 0; ch < c.d_token; ++ch) moved.tokens[u * c.d_token + ch] += 5.0;
    auto h = m.backbone_forward(m.embed_sequence(moved), 1, false, nullptr);
    for (std::size_t r = 0; r <= base.row(0, t); ++r)
      for (std::size_t j = 0; j < c.d_model; ++j)
        EXPECT_EQ(h.values.data()[r * c.d_model + j], base.values.data()[r * c.d_model + j]);
  }
}

TEST(Backbone, SingleLayerMatchesHandComposition) {
  auto c = small_config();
  c.n_layers = 1;
  c.n_heads = 1;
  Model<double> m(c, 7);
  test::perturb(m, 0.1, 70);
  Rng rng(7);
  auto b = test::random_batch<double>(c, 1, rng);
  auto e = m.embed_sequence(b);
  auto h = m.backbone_forward(e, 1, false, nullptr);

  const auto& P = m.params();
  const std::size_t L = c.context_len(), d = c.d_model;
  Mat x = vec(e);
  Mat a = ref_ln(x, L, P.get("blocks.0.ln1.g"), P.get("blocks.0.ln1.b"), c.ln_eps);
  Mat q = ref_linear(a, L, P.get("blocks.0.attn.q.w"), P.get("blocks.0.attn.q.b"));
  Mat k = ref_linear(a, L, P.get("blocks.0.attn.k.w"), P.get("blocks.0.attn.k.b"));
  Mat v = ref_linear(a, L, P.get("blocks.0.attn.v.w"), P.get("blocks.0.attn.v.b"));
  Mat att(L * d, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<double> w(L);
    double z = 0;
    for (std::size_t j = 0; j < L; ++j) {
      double s = 0;
      for (std::size_t u = 0; u < d; ++u) s += q[i * d + u] * k[j * d + u];
      w[j] = std::exp(s / std::sqrt(double(d)));
      z += w[j];
    }
    for (std::size_t j = 0; j < L; ++j)
      for (std::size_t u = 0; u < d; ++u) att[i * d + u] += w[j] / z * v[j * d + u];
  }
  Mat o = ref_linear(att, L, P.get("blocks.0.attn.o.w"), P.get("blocks.0.attn.o.b"));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += o[i];
  Mat f = ref_linear(ref_ln(x, L, P.get("blocks.0.ln2.g"), P.get("blocks.0.ln2.b"), c.ln_eps), L,
                     P.get("blocks.0.ffn.fc1.w"), P.get("blocks.0.ffn.fc1.b"));
  for (auto& u : f) u = ref_gelu(u);
  f = ref_linear(f, L, P.get("blocks.0.ffn.fc2.w"), P.get("blocks.0.ffn.fc2.b"));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += f[i];
  Mat want = ref_ln(x, L, P.get("final_ln.g"), P.get("final_ln.b"), c.ln_eps);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(h.values.data()[i], want[i], 1e-5);
}

TEST(Noise, UniformSupportAndMean) {
  auto c = small_config();
  c.d_noise = 10;
  Model<double> m(c, 1);
  Rng rng(8);
  auto eps = m.draw_noise(100000, rng);
  double s = 0;
  for (double v : eps.data()) {
    ASSERT_GE(v, -0.5);
    ASSERT_LE(v, 0.5);
    s += v;
  }
  EXPECT_LT(std::abs(s / double(eps.numel())), 0.005);
  EXPECT_EQ(eps.numel(), 1000000u);
}

TEST(Noise, SeedDeterminesDraw) {
  Model<float> m(small_config(), 1);
  Rng a(9), b(9);
  auto x = m.draw_noise(16, a);
  auto y = m.draw_noise(16, b);
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST(Noise, GaussianKindHasUnitVariance) {
  auto c = small_config();
  c.noise_kind = NoiseKind::gaussian;
  Model<double> m(c, 1);
  Rng rng(10);
  auto eps = m.draw_noise(50000, rng);
  double s = 0, ss = 0;
  for (double v : eps.data()) {
    s += v;
    ss += v * v;
  }
  const double n = double(eps.numel());
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(Generator, InitOutputIgnoresNoise) {
  Model<double> m(small_config(), 11);
  Rng rng(11);
  auto h = test::random_tensor({5, small_config().d_model}, rng, false);
  auto base = vec(m.generator_forward(h, m.draw_noise(5, rng), 1.0));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(vec(m.generator_forward(h, m.draw_noise(5, rng), 0.7)), base);
  const auto& P = m.params();
  auto want = ref_linear(ref_linear(vec(h), 5, P.get("gen.hidden.w"), P.get("gen.hidden.b")), 5,
                         P.get("gen.out.w"), P.get("gen.out.b"));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(base[i], want[i], 1e-12);
}

TEST(Generator, ForcedBlockMatchesHandComposition) {
  auto c = small_config();
  c.n_gen_blocks = 1;
  Model<double> m(c, 12);
  test::perturb(m, 0.1, 120);
  auto& P = m.params();
  for (const char* name : {"gen.blocks.0.shift.w", "gen.blocks.0.shift.b", "gen.blocks.0.scale.w",
                           "gen.blocks.0.scale.b", "gen.blocks.0.gate.w"}) {
    for (auto& v : P.get(name).mutable_data()) v = 0.0;
  }
  for (auto& v : P.get("gen.blocks.0.gate.b").mutable_data()) v = 1.0;
  Rng rng(12);
  const std::size_t n = 3;
  auto h = test::random_tensor({n, c.d_model}, rng, false);
  auto out = vec(m.generator_forward(h, m.draw_noise(n, rng), 0.7));

  Mat h0 = ref_linear(vec(h), n, P.get("gen.hidden.w"), P.get("gen.hidden.b"));
  Mat f = ref_linear(ref_ln(h0, n, P.get("gen.blocks.0.ln.g"), P.get("gen.blocks.0.ln.b"), c.ln_eps),
                     n, P.get("gen.blocks.0.fc1.w"), P.get("gen.blocks.0.fc1.b"));
  for (auto& u : f) u = ref_silu(u);
  f = ref_linear(f, n, P.get("gen.blocks.0.fc2.w"), P.get("gen.blocks.0.fc2.b"));
  for (std::size_t i = 0; i < h0.size(); ++i) h0[i] += f[i];
  Mat want = ref_linear(h0, n, P.get("gen.out.w"), P.get("gen.out.b"));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(out[i], want[i], 1e-5);
}

// Shift is the only place tau_infer enters.
TEST(Generator, TemperatureScalesOnlyShift) {
  auto c = small_config();
  Model<double> m(c, 13);
  test::perturb(m, 0.2, 130);
  Rng rng(13);
  auto h = test::random_tensor({4, c.d_model}, rng, false);
  auto eps = m.draw_noise(4, rng);
  const auto hot = vec(m.generator_forward(h, eps, 1.0));
  EXPECT_NE(vec(m.generator_forward(h, eps, 0.5)), hot);
  for (std::size_t i = 0; i < c.n_gen_blocks; ++i) {
    for (const char* part : {".shift.w", ".shift.b"}) {
      for (auto& v : m.params().get("gen.blocks." + std::to_string(i) + part).mutable_data()) v = 0;
    }
  }
  EXPECT_EQ(vec(m.generator_forward(h, eps, 0.5)), vec(m.generator_forward(h, eps, 1.0)));
}

TEST(Generator, UnitTemperatureMatchesTrainingPair) {
  auto c = small_config();
  Model<float> m(c, 14);
  test::perturb(m, 0.2, 140);
  Rng rng(14);
  std::vector<float> hv(5 * c.d_model);
  for (auto& v : hv) v = float(rng.normal());
  auto h = diff::Tensor<float>::from_vector({5, c.d_model}, hv);
  auto e1 = m.draw_noise(5, rng);
  auto e2 = m.draw_noise(5, rng);
  auto [x1, x2] = m.predict_pair(h, e1, e2);
  auto s1 = m.generator_forward(h, e1, 1.0f);
  auto s2 = m.generator_forward(h, e2, 1.0f);
  EXPECT_TRUE(std::equal(x1.data().begin(), x1.data().end(), s1.data().begin()));
  EXPECT_TRUE(std::equal(x2.data().begin(), x2.data().end(), s2.data().begin()));
}

TEST(PredictPair, IndependentNoiseGivesDistinctSamples) {
  auto c = small_config();
  Model<double> m(c, 15);
  test::perturb(m, 0.2, 150);
  Rng rng(15);
  auto h = test::random_tensor({32, c.d_model}, rng, false);
  auto [x1, x2] = m.predict_pair(h, rng);
  double gap = 0;
  for (std::size_t r = 0; r < 32; ++r) {
    double d2 = 0;
    for (std::size_t j = 0; j < c.d_token; ++j) {
      const double u = x1.data()[r * c.d_token + j] - x2.data()[r * c.d_token + j];
      d2 += u * u;
    }
    EXPECT_GT(d2, 0.0) << r;
    gap += std::sqrt(d2) / 32.0;
  }
  EXPECT_GT(gap, 0.0);
  auto eps = m.draw_noise(32, rng);
  auto [y1, y2] = m.predict_pair(h, eps, eps);
  EXPECT_EQ(vec(y1), vec(y2));
}

TEST(Heads, BaselineShapesAndSampling) {
  for (auto head : {HeadKind::gaussian, HeadKind::gmm}) {
    auto c = small_config();
    c.head = head;
    Model<float> m(c, 16);
    Rng rng(16);
    std::vector<float> hv(6 * c.d_model);
    for (auto& v : hv) v = float(rng.normal());
    auto h = diff::Tensor<float>::from_vector({6, c.d_model}, hv);
    auto out = m.head_forward(h);
    EXPECT_EQ(out.shape(), (diff::Shape{6, c.head_out_width()}));
    auto tokens = m.sample_tokens(h, rng, 1.0f, 0.5f);
    EXPECT_EQ(tokens.size(), 6 * c.d_token);
    for (float v : tokens) EXPECT_TRUE(std::isfinite(v));
    EXPECT_THROW(m.generator_forward(h, m.draw_noise(6, rng), 1.0f), ContractError);
  }
  EXPECT_EQ([] { auto c = small_config(); c.head = HeadKind::gmm; return c.head_out_width(); }(),
            3u * 4u * 2u);
}

// Full forward and energy loss on the two-layer, width-16 model in double.
TEST(Gradients, FullModelMatchesFiniteDifferences) {
  const auto c = small_config();
  Model<double> m(c, 17);
  test::perturb(m, 0.05, 170);
  Rng rng(17);
  auto batch = test::random_batch<double>(c, 2, rng);
  const std::size_t masked = batch.masked_count();
  auto eps1 = m.draw_noise(masked, rng);
  auto eps2 = m.draw_noise(masked, rng);
  auto loss = [&] {
    auto hs = m.backbone_forward(m.embed_sequence(batch), batch.batch, false, nullptr);
    std::vector<std::size_t> rows;
    std::vector<double> target;
    for (std::size_t flat : batch.masked_positions()) {
      rows.push_back(hs.row(flat / c.seq_len, flat % c.seq_len));
      for (std::size_t j = 0; j < c.d_token; ++j) target.push_back(batch.targets[flat * c.d_token + j]);
    }
    auto [x1, x2] = m.predict_pair(diff::gather_rows(hs.values, rows), eps1, eps2);
    auto y = TensorD::from_vector({rows.size(), c.d_token}, target);
    return diff::mean(scoring::energy_loss_rows(x1, x2, y, 1.0, 0.99).loss);
  };
  // Key biases shift every score of a query equally, so their true gradient
  // is zero; the floor keeps finite-difference rounding from counting there.
  for (auto& e : m.params().entries()) {
    EXPECT_LT(test::grad_check(e.tensor, loss, 10, rng, 1e-4, 1e-6), 1e-4) << e.name;
  }
}

}  // namespace
}  // namespace ear::model
