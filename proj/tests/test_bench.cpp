#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ear/bench/cli.hpp"
#include "ear/bench/config.hpp"
#include "ear/bench/evaluate.hpp"
#include "ear/bench/harness.hpp"
#include "ear/bench/io.hpp"
#include "ear/bench/render.hpp"
#include "ear/bench/task.hpp"
#include "ear/common/errors.hpp"
#include "ear/scoring/losses.hpp"
#include "support.hpp"

namespace ear::bench {
namespace {

namespace fs = std::filesystem;
using test::TensorD;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("ear_bench_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  return rc;
}

TEST(Task, ShapeInvariants) {
  EXPECT_NO_THROW(TaskSpec::gmm_chain().validate());
  EXPECT_NO_THROW(TaskSpec::blobs8().validate());
  auto s = TaskSpec::gmm_chain();
  s.d_token = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = TaskSpec::blobs8();
  s.seq_len = 8;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(parse_task_kind(to_string(TaskKind::blobs8)), TaskKind::blobs8);
  EXPECT_THROW(gen_synthetic(TaskSpec::gmm_chain(), 0), ConfigError);
}

TEST(Task, NoiselessFirstTokenIsAClassCentre) {
  const auto spec = TaskSpec::gmm_chain(8, 6, 0.0, 3);
  Rng rng(1);
  std::vector<double> seq(spec.sequence_width());
  for (int i = 0; i < 200; ++i) {
    const std::size_t c = i % 6;
    sample_sequence(spec, c, rng, seq);
    const double th = 2.0 * std::numbers::pi * double(c) / 6.0;
    const double s = seq[0] * std::cos(th) > 0 ? 1.0 : -1.0;
    EXPECT_EQ(seq[0], s * std::cos(th));
    EXPECT_EQ(seq[1], s * std::sin(th));
  }
}

TEST(Task, FirstTokenMeanIsZero) {
  const auto spec = TaskSpec::gmm_chain(8, 4, 0.2, 5);
  auto set = gen_synthetic(spec, 100000);
  double m0 = 0, m1 = 0, s0 = 0, s1 = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    m0 += set.token(i, 0)[0];
    m1 += set.token(i, 0)[1];
    s0 += set.token(i, 0)[0] * set.token(i, 0)[0];
    s1 += set.token(i, 0)[1] * set.token(i, 0)[1];
  }
  const double n = double(set.size());
  EXPECT_LT(std::abs(m0 / n), 3.0 * std::sqrt(s0 / n / n));
  EXPECT_LT(std::abs(m1 / n), 3.0 * std::sqrt(s1 / n / n));
}

TEST(Task, ChainConditionalMatchesGenerator) {
  const auto spec = TaskSpec::gmm_chain(8, 4, 0.2, 0);
  const std::vector<double> prev{0.4, -1.0};
  auto cond = chain_conditional(spec, 1, std::span<const double>(prev));
  // Mean of 0.5 * prev + symmetric mixture is 0.5 * prev.
  Rng rng(2);
  double m0 = 0, m1 = 0;
  for (int i = 0; i < 40000; ++i) {
    auto x = cond->sample(rng);
    m0 += x[0] / 40000;
    m1 += x[1] / 40000;
  }
  EXPECT_NEAR(m0, 0.2, 0.02);
  EXPECT_NEAR(m1, -0.5, 0.02);
  // Density at a mode of the shifted mixture beats a far point.
  EXPECT_GT(cond->log_density(std::vector<double>{0.2 + 0.0, -0.5 + 1.0}),
            cond->log_density(std::vector<double>{3.0, 3.0}));
  EXPECT_THROW(chain_conditional(TaskSpec::blobs8(), 0, std::nullopt), UnsupportedOracleError);
}

TEST(Task, NoiselessBlobPeaksInItsCell) {
  for (std::size_t C : {4u, 9u}) {
    const auto spec = TaskSpec::blobs8(C, 0.0, 4);
    Rng rng(3);
    std::vector<double> seq(spec.sequence_width());
    for (int i = 0; i < 300; ++i) {
      const std::size_t c = i % C;
      sample_sequence(spec, c, rng, seq);
      std::vector<float> tokens(seq.begin(), seq.end());
      const auto img = patches_to_image(tokens);
      const auto best = std::size_t(std::max_element(img.begin(), img.end()) - img.begin());
      const auto cell = blob_cell(spec, c);
      const double r = double(best / 8) + 0.5, col = double(best % 8) + 0.5;
      // Jitter moves the centre at most half a pixel past the cell.
      EXPECT_GE(r, cell.row * cell.side - 0.5) << c;
      EXPECT_LE(r, (cell.row + 1) * cell.side + 0.5) << c;
      EXPECT_GE(col, cell.col * cell.side - 0.5) << c;
      EXPECT_LE(col, (cell.col + 1) * cell.side + 0.5) << c;
    }
  }
}

TEST(HeadLoss, GaussianAtTheMean) {
  auto mu = TensorD::from_vector({1, 2}, {0.3, -0.7});
  EXPECT_NEAR(gaussian_head_loss(mu, mu.detach(), 1.0).item(), std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gaussian_head_loss(mu, mu.detach(), 1.0).item(), 1.8379, 5e-5);
}

TEST(HeadLoss, UnitSigmaGradientIsHalfMse) {
  Rng rng(4);
  auto mu = test::random_tensor({5, 3}, rng);
  auto y = test::random_tensor({5, 3}, rng, false);
  diff::backward(gaussian_head_loss(mu, y, 1.0));
  for (std::size_t i = 0; i < mu.numel(); ++i) {
    EXPECT_NEAR(mu.grad()[i], (mu.data()[i] - y.data()[i]) / 5.0, 1e-15);
  }
}

TEST(HeadLoss, GaussianFiniteDifferences) {
  Rng rng(5);
  auto mu = test::random_tensor({4, 2}, rng);
  auto y = test::random_tensor({4, 2}, rng, false);
  EXPECT_LT(test::grad_check(mu, [&] { return gaussian_head_loss(mu, y, 0.4); }, 8, rng, 1e-4, 1e-6),
            1e-4);
}

TEST(HeadLoss, SingleComponentGmmIsLearnedSigmaGaussian) {
  Rng rng(6);
  const double pre = -0.8;
  const double sigma = std::sqrt(scoring::kGmmVarFloor + std::exp(pre));
  auto mu = test::random_tensor({3, 2}, rng, false);
  auto y = test::random_tensor({3, 2}, rng, false);
  std::vector<double> head;
  for (std::size_t r = 0; r < 3; ++r) {
    head.insert(head.end(), {0.7, -0.2});
    head.insert(head.end(), {mu.data()[2 * r], mu.data()[2 * r + 1]});
    head.insert(head.end(), {pre, pre});
  }
  auto h = TensorD::from_vector({3, 6}, head);
  EXPECT_NEAR(gmm_head_loss(h, y, 1).item(), gaussian_head_loss(mu, y, sigma).item(), 1e-12);
}

TEST(HeadLoss, GmmDominantComponentAddsLogK) {
  const std::size_t k = 4;
  const double pre = std::log(1e-3);
  const double var = scoring::kGmmVarFloor + std::exp(pre);
  std::vector<double> head(3 * k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    head[k + j] = 5.0 * double(j);
    head[2 * k + j] = pre;
  }
  auto h = TensorD::from_vector({1, 3 * k}, head);
  auto y = TensorD::from_vector({1, 1}, {0.0});
  const double single = 0.5 * std::log(2 * std::numbers::pi * var);
  EXPECT_NEAR(gmm_head_loss(h, y, k).item(), single + std::log(double(k)), 1e-9);
}

TEST(HeadLoss, GmmFiniteDifferences) {
  Rng rng(7);
  auto h = test::random_tensor({3, 3 * 3 * 2}, rng, true, 0.5);
  auto y = test::random_tensor({3, 2}, rng, false);
  EXPECT_LT(test::grad_check(h, [&] { return gmm_head_loss(h, y, 3); }, 54, rng, 1e-5, 1e-6), 1e-4);
}

Dataset oracle_dataset(const TaskSpec& spec, std::size_t n, std::uint64_t seed,
                       std::vector<double> shift = {}) {
  Dataset ds{spec, model::SequenceSet(spec.seq_len, spec.d_token)};
  Rng rng(seed);
  std::vector<double> seq(spec.sequence_width());
  std::vector<float> f(seq.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.n_classes;
    sample_sequence(spec, c, rng, seq);
    for (std::size_t j = 0; j < seq.size(); ++j)
      f[j] = float(seq[j] + (shift.empty() ? 0.0 : shift[j % spec.d_token]));
    ds.data.push_back(std::uint16_t(c), f);
  }
  return ds;
}

TEST(Evaluate, FreshOracleSamplesScoreNearZero) {
  const auto spec = TaskSpec::gmm_chain();
  auto rep = evaluate(oracle_dataset(spec, 10000, 11), 10000, 12);
  EXPECT_LT(std::abs(rep.global.value), 0.02);
  EXPECT_LT(std::abs(rep.position_mean.value), 0.02);
  EXPECT_EQ(rep.n_generated, 10000u);
  EXPECT_EQ(rep.n_reference, 10000u);
  EXPECT_EQ(rep.per_position.size(), spec.seq_len);
}

TEST(Evaluate, ShiftedCopyMatchesMonteCarlo) {
  const auto spec = TaskSpec::gmm_chain();
  const std::vector<double> shift{1.0, 1.0};
  auto rep = evaluate(oracle_dataset(spec, 2000, 13, shift), 2000, 14);
  // Independent estimate: class by class, fresh sets, then class-average.
  double mc = 0, var = 0;
  Rng rng(15);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    SequenceOracle o(spec, c);
    auto p = scoring::PointSet::draw(o, 1500, rng);
    auto q = scoring::PointSet::draw(o, 1500, rng);
    for (std::size_t i = 0; i < q.values.size(); ++i) q.values[i] += shift[i % 2];
    auto e = scoring::energy_distance(q, p, 1.0);
    mc += e.value / double(spec.n_classes);
    var += e.std_error * e.std_error / double(spec.n_classes * spec.n_classes);
  }
  EXPECT_GT(rep.global.value, 0.3);
  EXPECT_LT(std::abs(rep.global.value - mc),
            4.0 * std::sqrt(var + rep.global.std_error * rep.global.std_error));
}

TEST(Evaluate, FirstPositionIsTheMarginalDistance) {
  auto spec = TaskSpec::gmm_chain(8, 1, 0.2, 0);
  const auto ds = oracle_dataset(spec, 300, 16, {0.3, 0.0});
  auto rep = evaluate(ds, 400, 17);
  Rng ref_rng = Rng(17).stream(0);
  auto ref = scoring::PointSet::draw(SequenceOracle(spec, 0), 400, ref_rng);
  scoring::PointSet gen1(2), ref1(2);
  for (std::size_t i = 0; i < ds.data.size(); ++i) {
    const auto t = ds.data.token(i, 0);
    gen1.push_back(std::vector<double>{t[0], t[1]});
  }
  for (std::size_t i = 0; i < ref.size(); ++i) ref1.push_back(ref[i].subspan(0, 2));
  auto want = scoring::energy_distance(gen1, ref1, 1.0);
  EXPECT_NEAR(rep.per_position[0].value, want.value, 1e-12);
  EXPECT_NEAR(rep.per_position[0].std_error, want.std_error, 1e-12);
}

TEST(Evaluate, NeedsAHundredSequences) {
  EXPECT_THROW(evaluate(oracle_dataset(TaskSpec::gmm_chain(), 99, 1), 100, 2), ConfigError);
}

TEST(Evaluate, CsvHasDocumentedColumns) {
  auto rep = evaluate(oracle_dataset(TaskSpec::gmm_chain(), 200, 3), 200, 4, 0.5);
  const auto csv = eval_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,position,value,std_error,n_generated,n_reference");
  for (const char* m : {"energy_distance,0,", "energy_distance_position_mean,all,",
                        "energy_distance_global,all,", "mean_discrepancy,all,",
                        "cov_discrepancy,all,", "seconds_per_sequence,all,0.5,"})
    EXPECT_NE(csv.find(m), std::string::npos) << m;
}

TEST(Render, ZeroTokensGiveAUniformImage) {
  const std::vector<float> zeros(64, 0.0f);
  auto px = render(zeros);
  ASSERT_EQ(px.size(), 64u);
  for (auto p : px) EXPECT_EQ(p, px[0]);
  EXPECT_THROW(render(std::vector<float>(60, 0.0f)), DimensionError);
}

TEST(Render, PatchLayoutRoundTrips) {
  std::vector<float> tokens(64);
  std::iota(tokens.begin(), tokens.end(), 0.0f);
  const auto img = patches_to_image(tokens);
  for (std::size_t j = 0; j < 16; ++j) {
    for (std::size_t ch = 0; ch < 4; ++ch) {
      const std::size_t r = 2 * (j / 4) + ch / 2, c = 2 * (j % 4) + ch % 2;
      EXPECT_EQ(img[r * 8 + c], tokens[j * 4 + ch]);
    }
  }
  EXPECT_EQ(image_to_patches(img), tokens);
  auto px = render(tokens);
  EXPECT_EQ(*std::min_element(px.begin(), px.end()), 0);
  EXPECT_EQ(*std::max_element(px.begin(), px.end()), 255);
}

TEST(Render, BrightestPixelSitsInTheClassCell) {
  const auto spec = TaskSpec::blobs8(4, 0.0, 9);
  Rng rng(9);
  std::vector<double> seq(spec.sequence_width());
  for (std::size_t c = 0; c < 4; ++c) {
    sample_sequence(spec, c, rng, seq);
    const auto px = render(std::vector<float>(seq.begin(), seq.end()));
    const auto best = std::size_t(std::max_element(px.begin(), px.end()) - px.begin());
    const auto cell = blob_cell(spec, c);
    // Four classes use a 2x2 grid of 4-pixel quadrants.
    EXPECT_EQ((best / 8) / 4, cell.row);
    EXPECT_EQ((best % 8) / 4, cell.col);
  }
}

TEST(Render, PgmHeader) {
  std::vector<std::uint8_t> px(64, 7);
  auto bytes = encode_pgm(px, 8, 8);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(head, "P5\n8 8\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 64u);
  EXPECT_THROW(encode_pgm(px, 8, 7), DimensionError);
}

TEST(Io, DatasetBytesRoundTrip) {
  TempDir dir;
  const auto ds = oracle_dataset(TaskSpec::blobs8(4, 0.05, 3), 37, 5);
  const auto bytes = encode_dataset(ds);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EARD");
  write_dataset(dir / "a.eard", ds);
  const auto back = read_dataset(dir / "a.eard");
  write_dataset(dir / "b.eard", back);
  EXPECT_EQ(read_file(dir / "a.eard"), read_file(dir / "b.eard"));
  EXPECT_EQ(back.data.tokens, ds.data.tokens);
  EXPECT_EQ(back.data.labels, ds.data.labels);
  EXPECT_EQ(back.spec.kind, TaskKind::blobs8);
  auto broken = bytes;
  broken[0] = 'X';
  EXPECT_THROW(decode_dataset(broken), ConfigError);
  broken = bytes;
  broken.resize(bytes.size() - 3);
  EXPECT_THROW(decode_dataset(broken), ConfigError);
}

TEST(Io, CheckpointPreservesEveryTensor) {
  TempDir dir;
  auto mc = test::tiny_config();
  model::Model<float> m(mc, 3);
  test::perturb(m, 0.1, 4);
  Checkpoint ck{mc, training::TrainConfig{}, TaskSpec::gmm_chain(), m.params().clone(false),
                m.params().clone(false)};
  for (auto& e : ck.ema.entries())
    for (auto& v : e.tensor.mutable_data()) v *= 0.5f;
  write_checkpoint(dir / "c.earc", ck);
  auto back = read_checkpoint(dir / "c.earc");
  EXPECT_TRUE(back.params.same_values(ck.params));
  EXPECT_TRUE(back.ema.same_values(ck.ema));
  EXPECT_EQ(back.model.d_model, mc.d_model);
  EXPECT_EQ(back.train.lambda_gen, 0.25);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ck));
  // The file carries no groups; binding to a model restores them.
  model::Model<float> bound(back.model, std::move(back.params));
  for (std::size_t i = 0; i < bound.params().size(); ++i)
    EXPECT_EQ(bound.params().entries()[i].group, ck.params.entries()[i].group);
}

TEST(Config, UnknownKeysAreRejected) {
  auto r = ConfigReader::from_string(R"({"task": "gmm-chain", "seq_len": 6, "noise_sigmaa": 0.1})");
  TaskSpec s;
  read_task(r, s);
  EXPECT_EQ(s.seq_len, 6u);
  EXPECT_THROW(r.finish(), ConfigError);
  EXPECT_THROW(ConfigReader::from_string("{not json"), ConfigError);
  auto bad_type = ConfigReader::from_string(R"({"seq_len": "six"})");
  EXPECT_THROW(read_task(bad_type, s), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  auto mc = test::tiny_config();
  mc.head = model::HeadKind::gmm;
  mc.attention_mode = diff::AttentionMode::causal;
  const auto back = model_from_json(to_json(mc));
  EXPECT_EQ(to_json(back), to_json(mc));
  training::TrainConfig tc;
  tc.alpha = 1.5;
  EXPECT_EQ(to_json(train_from_json(to_json(tc))), to_json(tc));
  const auto task = TaskSpec::blobs8(9, 0.1, 77);
  EXPECT_EQ(to_json(task_from_json(to_json(task))), to_json(task));
}

TEST(Cli, GenDataRejectsEmptyDataset) {
  TempDir dir;
  write_text(dir / "zero.json", R"({"task": "gmm-chain", "n": 0})");
  EXPECT_EQ(cli({"gen-data", "--config", dir / "zero.json", "--out", dir / "d.eard"}), 1);
  EXPECT_FALSE(fs::exists(dir / "d.eard"));
  EXPECT_EQ(cli({"gen-data", "--n", "0", "--out", dir / "d.eard"}), 1);
  EXPECT_FALSE(fs::exists(dir / "d.eard"));
}

TEST(Cli, UsageErrorsAndHelp) {
  EXPECT_EQ(cli({"gen-data", "--bogus", "1", "--out", "x"}), 1);
  EXPECT_EQ(cli({"teleport"}), 1);
  EXPECT_EQ(cli({}), 1);
  std::string text;
  EXPECT_EQ(cli({"--help"}, &text), 0);
  TempDir dir;
  write_text(dir / "typo.json", R"({"task": "gmm-chain", "n_clases": 3})");
  EXPECT_EQ(cli({"gen-data", "--config", dir / "typo.json", "--out", dir / "d.eard"}), 1);
}

TEST(Cli, TrainSampleEvalRoundTrip) {
  TempDir dir;
  write_text(dir / "task.json", R"({"task": "gmm-chain", "seq_len": 4, "n": 256, "task_seed": 3})");
  ASSERT_EQ(cli({"gen-data", "--config", dir / "task.json", "--out", dir / "train.eard"}), 0);
  write_text(dir / "train.json", R"({"d_model": 16, "n_layers": 1, "n_heads": 2, "d_mlp": 16,
    "n_gen_blocks": 1, "n_class_tokens": 1, "epochs": 2, "final_phase_epochs": 1,
    "warmup_epochs": 1, "batch_size": 32, "seed": 4})");
  ASSERT_EQ(cli({"train", "--config", dir / "train.json", "--data", dir / "train.eard", "--out",
                 dir / "m.earc", "--metrics", dir / "metrics.csv"}),
            0);
  const auto metrics = slurp(dir / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')),
            "step,epoch,phase,loss,fidelity_term,diversity_term,grad_norm,lr_effective");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + 2 * 8);

  ASSERT_EQ(cli({"sample", "--checkpoint", dir / "m.earc", "--n", "120", "--steps", "2", "--cfg",
                 "1.5", "--seed", "5", "--out", dir / "gen.eard"}),
            0);
  const auto gen = read_dataset(dir / "gen.eard");
  EXPECT_EQ(gen.data.size(), 120u);
  EXPECT_EQ(gen.data.labels[5], 1u);
  ASSERT_EQ(cli({"eval", "--data", dir / "gen.eard", "--n-ref", "200", "--out", dir / "eval.csv"}), 0);
  const auto csv = slurp(dir / "eval.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,position,value,std_error,n_generated,n_reference");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 + 5);
  EXPECT_EQ(cli({"sample", "--checkpoint", dir / "m.earc", "--label", "9", "--out", dir / "x.eard"}), 1);
}

TEST(Cli, SampleRendersBlobImages) {
  TempDir dir;
  write_text(dir / "task.json", R"({"task": "blobs8", "n": 64})");
  ASSERT_EQ(cli({"gen-data", "--config", dir / "task.json", "--out", dir / "b.eard"}), 0);
  write_text(dir / "train.json", R"({"d_model": 16, "n_layers": 1, "n_heads": 2, "d_mlp": 16,
    "n_gen_blocks": 1, "n_class_tokens": 1, "epochs": 1, "final_phase_epochs": 0,
    "warmup_epochs": 0, "batch_size": 32})");
  ASSERT_EQ(cli({"train", "--config", dir / "train.json", "--data", dir / "b.eard", "--out",
                 dir / "m.earc"}),
            0);
  ASSERT_EQ(cli({"sample", "--checkpoint", dir / "m.earc", "--out", dir / "s.eard", "--image",
                 dir / "s.pgm"}),
            0);
  const auto img = read_file(dir / "s.pgm");
  EXPECT_EQ(img.size(), 11u + 64u);
}

TEST(Cli, ScoreMatchesTheModule) {
  TempDir dir;
  write_text(dir / "score.json", R"({"rule": "energy", "alpha": 1.0, "mus": [-0.5, 0.0, 0.5],
    "sigmas": [0.5, 1.0, 2.0], "q_mu": 0.0, "q_sigma": 1.0, "n": 20000, "seed": 8})");
  std::string text;
  ASSERT_EQ(cli({"score", "--config", dir / "score.json", "--out", dir / "p.csv"}, &text), 0);
  scoring::ScoringRuleSpec rule{scoring::RuleKind::energy, 1.0};
  const auto direct = gaussian_grid_probe(rule, {-0.5, 0.0, 0.5}, {0.5, 1.0, 2.0}, 0.0, 1.0, 20000, 8);
  EXPECT_EQ(text, probe_csv(direct));
  EXPECT_EQ(slurp(dir / "p.csv"), text);
  EXPECT_TRUE(direct.truth_is_max);
}

TEST(Cli, NaNAbortExitsWithTwo) {
  TempDir dir;
  write_text(dir / "task.json", R"({"task": "gmm-chain", "seq_len": 4, "n": 64})");
  ASSERT_EQ(cli({"gen-data", "--config", dir / "task.json", "--out", dir / "t.eard"}), 0);
  write_text(dir / "train.json", R"({"d_model": 16, "n_layers": 1, "n_heads": 2, "d_mlp": 16,
    "n_gen_blocks": 1, "n_class_tokens": 1, "epochs": 1, "alpha": 0.5, "batch_size": 32})");
  EXPECT_EQ(cli({"train", "--config", dir / "train.json", "--data", dir / "t.eard", "--out",
                 dir / "m.earc"}),
            2);
  EXPECT_FALSE(fs::exists(dir / "m.earc"));
}

}  // namespace
}  // namespace ear::bench
