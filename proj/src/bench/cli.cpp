#include "ear/bench/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ear/bench/config.hpp"
#include "ear/bench/evaluate.hpp"
#include "ear/bench/harness.hpp"
#include "ear/bench/io.hpp"
#include "ear/bench/render.hpp"
#include "ear/common/errors.hpp"

namespace ear::bench {

namespace {

void write_text(const std::string& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

ConfigReader load(const std::string& path) {
  return path.empty() ? ConfigReader() : ConfigReader::from_file(path);
}

int cmd_gen_data(const std::string& config, const std::string& out_path,
                 std::optional<std::size_t> n_flag, std::ostream& out) {
  auto r = load(config);
  TaskSpec spec;
  read_task(r, spec);
  std::size_t n = 1000;
  r.read("n", n);
  r.finish();
  if (n_flag) n = *n_flag;
  Dataset ds{spec, gen_synthetic(spec, n)};
  write_dataset(out_path, ds);
  out << "wrote " << n << " " << to_string(spec.kind) << " sequences to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_path, const std::string& out_path,
              const std::string& metrics_path, std::ostream& out) {
  auto r = load(config);
  model::ModelConfig mc;
  training::TrainConfig tc;
  std::size_t init_seed = 1;
  read_model(r, mc);
  read_train(r, tc);
  r.read("init_seed", init_seed);
  r.finish();
  tc.validate();
  const Dataset ds = read_dataset(data_path);
  mc.seq_len = ds.spec.seq_len;
  mc.d_token = ds.spec.d_token;
  mc.n_classes = ds.spec.n_classes;
  model::Model<float> net(mc, init_seed);

  std::optional<std::ofstream> metrics;
  if (!metrics_path.empty()) {
    metrics.emplace(metrics_path);
    if (!*metrics) throw ConfigError("cannot write metrics file '" + metrics_path + "'");
    *metrics << "step,epoch,phase,loss,fidelity_term,diversity_term,grad_norm,lr_effective\n";
    metrics->precision(10);
  }
  training::TrainHooks hooks;
  hooks.on_report = [&](const training::TrainReport& rep) {
    if (!metrics) return;
    *metrics << rep.step << ',' << rep.epoch << ',' << rep.phase << ',' << rep.loss << ','
             << rep.fidelity_term << ',' << rep.diversity_term << ',' << rep.grad_norm << ','
             << rep.lr_effective << '\n';
  };
  hooks.on_checkpoint = [&](std::size_t epoch, const model::ModelParams<float>& params,
                            const model::ModelParams<float>& ema) {
    Checkpoint ck{mc, tc, ds.spec, params.clone(false), ema.clone(false)};
    const bool last = epoch == tc.epochs;
    write_checkpoint(last ? out_path : out_path + ".epoch" + std::to_string(epoch), ck);
  };
  auto result = training::train(ds.data, net, tc, hooks);
  out << "trained " << result.reports.size() << " steps; " << result.instability_events
      << " instability events; checkpoint " << out_path << "\n";
  return 0;
}

struct SampleFlags {
  std::string checkpoint, out, image, config;
  std::optional<std::size_t> label, steps;
  std::optional<double> cfg, tau_infer, head_sigma;
  std::optional<std::string> cfg_schedule;
  std::optional<std::size_t> seed, order_seed;
  std::size_t n = 1;
  bool raw = false;
};

int cmd_sample(const SampleFlags& f, std::ostream& out) {
  auto r = load(f.config);
  sampling::SampleConfig sc;
  read_sample(r, sc);
  r.finish();
  if (f.steps) sc.steps = *f.steps;
  if (f.cfg) sc.cfg_scale = *f.cfg;
  if (f.cfg_schedule) sc.cfg_schedule = sampling::parse_cfg_schedule(*f.cfg_schedule);
  if (f.tau_infer) sc.tau_infer = *f.tau_infer;
  if (f.head_sigma) sc.head_sigma = *f.head_sigma;
  if (f.seed) sc.seed = *f.seed;
  if (f.order_seed) sc.order_seed = *f.order_seed;
  if (f.n == 0) throw ConfigError("--n must be positive");

  Checkpoint ck = read_checkpoint(f.checkpoint);
  const bool use_ema = !f.raw && ck.ema.size() != 0;
  model::Model<float> net(ck.model, use_ema ? std::move(ck.ema) : std::move(ck.params));
  sc.validate(ck.model.seq_len);
  if (f.label && *f.label >= ck.model.n_classes) {
    throw ConfigError("--label " + std::to_string(*f.label) + " out of range");
  }
  std::vector<std::size_t> labels(f.n);
  for (std::size_t i = 0; i < f.n; ++i) labels[i] = f.label ? *f.label : i % ck.model.n_classes;
  Dataset ds{ck.task, model::SequenceSet(ck.task.seq_len, ck.task.d_token)};
  for (std::size_t lo = 0; lo < f.n; lo += 256) {
    const std::size_t hi = std::min(f.n, lo + 256);
    std::vector<std::size_t> part(labels.begin() + lo, labels.begin() + hi);
    for (auto& g : sampling::generate_batch(net, part, sc, lo)) {
      ds.data.push_back(static_cast<std::uint16_t>(g.label), g.tokens);
    }
  }
  write_dataset(f.out, ds);
  if (!f.image.empty()) {
    if (ck.task.kind != TaskKind::blobs8) throw ConfigError("--image needs a blobs8 checkpoint");
    const auto pixels = render(ds.data.sequence(0));
    write_pgm(f.image, pixels, 8, 8);
  }
  out << "wrote " << f.n << " sequences to " << f.out << "\n";
  return 0;
}

int cmd_eval(const std::string& data_path, std::size_t n_ref, std::size_t seed,
             const std::string& out_path, std::ostream& out) {
  const Dataset ds = read_dataset(data_path);
  const auto report = evaluate(ds, n_ref, seed);
  const std::string csv = eval_csv(report);
  if (!out_path.empty()) write_text(out_path, csv);
  out << csv;
  return 0;
}

int cmd_score(const std::string& config, const std::string& out_path, std::ostream& out) {
  auto r = load(config);
  std::string rule_name = "energy";
  double alpha = 1.0, q_mu = 0.0, q_sigma = 1.0;
  std::vector<double> mus{-1.0, -0.5, 0.0, 0.5, 1.0}, sigmas{0.5, 1.0, 2.0};
  std::size_t n = 100000, seed = 0;
  r.read("rule", rule_name);
  r.read("alpha", alpha);
  r.read("mus", mus);
  r.read("sigmas", sigmas);
  r.read("q_mu", q_mu);
  r.read("q_sigma", q_sigma);
  r.read("n", n);
  r.read("seed", seed);
  r.finish();
  scoring::ScoringRuleSpec rule{scoring::parse_rule_kind(rule_name), alpha};
  rule.validate();
  const auto result = gaussian_grid_probe(rule, mus, sigmas, q_mu, q_sigma, n, seed);
  const std::string csv = probe_csv(result);
  if (!out_path.empty()) write_text(out_path, csv);
  out << csv;
  return 0;
}

void read_run(ConfigReader& r, RunSpec& run) {
  read_task(r, run.task);
  read_model(r, run.model);
  read_train(r, run.train);
  read_sample(r, run.sample);
  r.read("n_train", run.n_train);
  r.read("init_seed", run.init_seed);
  r.read("n_eval", run.n_eval);
  r.read("n_ref", run.n_ref);
  r.read("eval_seed", run.eval_seed);
}

RunSpec default_run() {
  RunSpec run;
  run.sample.cfg_scale = 1.0;
  run.sample.tau_infer = 1.0;
  return run;
}

int cmd_alpha_sweep(const std::string& config, const std::string& out_path, std::ostream& out) {
  auto r = load(config);
  AlphaSweepSpec spec;
  spec.base = default_run();
  read_run(r, spec.base);
  r.read("alphas", spec.alphas);
  r.read("probe_epochs", spec.probe_epochs);
  r.finish();
  spec.base.train.validate();
  const auto rows = alpha_sweep(spec, {});
  const std::string csv = alpha_sweep_csv(rows);
  if (!out_path.empty()) write_text(out_path, csv);
  out << csv;
  return 0;
}

int cmd_head_bakeoff(const std::string& config, const std::string& out_path, std::ostream& out) {
  auto r = load(config);
  BakeoffSpec spec;
  spec.base = default_run();
  read_run(r, spec.base);
  r.read("sigmas", spec.sigmas);
  r.read("include_gmm", spec.include_gmm);
  r.finish();
  spec.base.train.validate();
  const auto result = head_bakeoff(spec, {});
  const std::string csv = bakeoff_csv(result);
  if (!out_path.empty()) write_text(out_path, csv);
  out << csv;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-loss autoregressive sequence modelling toolkit", "ear"};
  app.require_subcommand(1);

  std::string config, out_path, data_path, metrics_path;
  std::optional<std::size_t> n_flag;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen->add_option("--config", config, "JSON config (task keys and n)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output dataset file")->required();
  gen->add_option("--n", n_flag, "Number of sequences (overrides config)");

  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->add_option("--config", config, "JSON config (model and train keys)")
      ->check(CLI::ExistingFile);
  tr->add_option("--data", data_path, "Training dataset")->required();
  tr->add_option("--out", out_path, "Output checkpoint")->required();
  tr->add_option("--metrics", metrics_path, "Per-step metrics CSV");

  SampleFlags sf;
  auto* sa = app.add_subcommand("sample", "Generate sequences from a checkpoint");
  sa->add_option("--config", sf.config, "JSON config (sample keys)")->check(CLI::ExistingFile);
  sa->add_option("--checkpoint", sf.checkpoint, "Checkpoint file")->required();
  sa->add_option("--label", sf.label, "Class label (default: cycle over classes)");
  sa->add_option("--n", sf.n, "Number of sequences");
  sa->add_option("--steps", sf.steps, "Generation steps K");
  sa->add_option("--cfg", sf.cfg, "Guidance scale");
  sa->add_option("--cfg-schedule", sf.cfg_schedule, "constant or linear");
  sa->add_option("--tau-infer", sf.tau_infer, "Inference temperature");
  sa->add_option("--head-sigma", sf.head_sigma, "Gaussian head inference sigma");
  sa->add_option("--seed", sf.seed, "Noise seed");
  sa->add_option("--order-seed", sf.order_seed, "Generation order seed");
  sa->add_option("--out", sf.out, "Output dataset file")->required();
  sa->add_option("--image", sf.image, "Render the first sequence as a P5 image (blobs8)");
  sa->add_flag("--raw", sf.raw, "Use raw instead of EMA parameters");

  std::size_t n_ref = 1000, seed = 0;
  auto* ev = app.add_subcommand("eval", "Evaluate generated sequences against the task oracle");
  ev->add_option("--data", data_path, "Generated dataset")->required();
  ev->add_option("--n-ref", n_ref, "Reference sequences drawn from the oracle");
  ev->add_option("--seed", seed, "Reference seed");
  ev->add_option("--out", out_path, "Output CSV");

  auto* sc = app.add_subcommand("score", "Propriety probe over a Gaussian candidate grid");
  sc->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  sc->add_option("--out", out_path, "Output CSV");

  auto* as = app.add_subcommand("alpha-sweep", "Train and evaluate across energy exponents");
  as->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  as->add_option("--out", out_path, "Output CSV");

  auto* hb = app.add_subcommand("head-bakeoff", "Energy head against the Gaussian baseline");
  hb->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  hb->add_option("--out", out_path, "Output CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(config, out_path, n_flag, out);
    if (*tr) return cmd_train(config, data_path, out_path, metrics_path, out);
    if (*sa) return cmd_sample(sf, out);
    if (*ev) return cmd_eval(data_path, n_ref, seed, out_path, out);
    if (*sc) return cmd_score(config, out_path, out);
    if (*as) return cmd_alpha_sweep(config, out_path, out);
    if (*hb) return cmd_head_bakeoff(config, out_path, out);
  } catch (const NumericalAbort& e) {
    err << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ear::bench
