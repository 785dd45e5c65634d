#include "ear/bench/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ear/common/errors.hpp"

namespace ear::bench {

Dataset generate_dataset(const model::Model<float>& model, const TaskSpec& task, std::size_t n,
                         const sampling::SampleConfig& config, std::size_t batch,
                         double* seconds_per_sequence) {
  const auto& mc = model.config();
  if (mc.seq_len != task.seq_len || mc.d_token != task.d_token || mc.n_classes != task.n_classes) {
    throw ConfigError("model shape does not match the task");
  }
  if (batch == 0) throw ConfigError("generation batch must be positive");
  Dataset ds{task, model::SequenceSet(task.seq_len, task.d_token)};
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t lo = 0; lo < n; lo += batch) {
    const std::size_t hi = std::min(n, lo + batch);
    std::vector<std::size_t> labels;
    for (std::size_t i = lo; i < hi; ++i) labels.push_back(i % task.n_classes);
    for (auto& g : sampling::generate_batch(model, labels, config, lo)) {
      ds.data.push_back(static_cast<std::uint16_t>(g.label), g.tokens);
    }
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (seconds_per_sequence) *seconds_per_sequence = n ? elapsed.count() / double(n) : 0.0;
  return ds;
}

model::ModelConfig RunSpec::resolved_model() const {
  model::ModelConfig c = model;
  c.seq_len = task.seq_len;
  c.d_token = task.d_token;
  c.n_classes = task.n_classes;
  return c;
}

bool RunOutcome::unstable_in_first_epoch() const {
  if (aborted && abort_epoch == 0) return true;
  for (const auto& r : reports) {
    if (r.epoch == 0 && r.instability) return true;
  }
  return false;
}

double RunOutcome::max_grad_norm(std::int64_t epoch) const {
  double m = 0.0;
  for (const auto& r : reports) {
    if (r.epoch == epoch) m = std::max(m, r.grad_norm);
  }
  return m;
}

RunOutcome run_experiment(const RunSpec& spec, const model::SequenceSet& data,
                          bool evaluate_after) {
  const model::ModelConfig mc = spec.resolved_model();
  const model::SequenceSet drawn =
      data.size() == 0 ? gen_synthetic(spec.task, spec.n_train) : model::SequenceSet{};
  const model::SequenceSet& train_set = data.size() == 0 ? drawn : data;

  RunOutcome out;
  model::Model<float> net(mc, spec.init_seed);
  training::TrainHooks hooks;
  hooks.on_report = [&](const training::TrainReport& r) { out.reports.push_back(r); };
  try {
    auto result = training::train(train_set, net, spec.train, hooks);
    out.instability_events = result.instability_events;
    out.ema = std::move(result.ema);
  } catch (const NumericalAbort& e) {
    out.aborted = true;
    out.abort_message = e.what();
    out.abort_step = e.step();
    out.abort_epoch = e.epoch();
    for (const auto& r : out.reports) out.instability_events += r.instability ? 1 : 0;
    return out;
  }
  if (evaluate_after) {
    model::Model<float> ema_model(mc, out.ema->clone(false));
    double sps = 0.0;
    const Dataset gen = generate_dataset(ema_model, spec.task, spec.n_eval, spec.sample, 256, &sps);
    out.eval = evaluate(gen, spec.n_ref, spec.eval_seed, sps);
  }
  return out;
}

std::vector<AlphaSweepRow> alpha_sweep(const AlphaSweepSpec& spec,
                                       const model::SequenceSet& data) {
  const model::SequenceSet drawn =
      data.size() == 0 ? gen_synthetic(spec.base.task, spec.base.n_train) : model::SequenceSet{};
  const model::SequenceSet& train_set = data.size() == 0 ? drawn : data;
  std::vector<AlphaSweepRow> rows;
  for (double alpha : spec.alphas) {
    RunSpec run = spec.base;
    run.train.alpha = alpha;
    const bool probe = scoring::stability_warning(alpha).has_value();
    if (probe) {
      run.train.epochs = spec.probe_epochs;
      run.train.final_phase_epochs = 0;
    }
    rows.push_back({alpha, run_experiment(run, train_set, !probe)});
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows) {
  std::string out =
      "alpha,status,epochs,instability_events,first_epoch_unstable,max_grad_norm_epoch0,"
      "final_loss,position_distance,position_se,global_distance,global_se\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows) {
    const auto& o = row.outcome;
    const std::int64_t epochs = o.reports.empty() ? 0 : o.reports.back().epoch + 1;
    const double loss = o.reports.empty() ? nan : o.reports.back().loss;
    const auto* e = o.eval ? &*o.eval : nullptr;
    out += fmt(row.alpha) + "," + (o.aborted ? "aborted" : "completed") + "," +
           std::to_string(epochs) + "," + std::to_string(o.instability_events) + "," +
           (o.unstable_in_first_epoch() ? "1" : "0") + "," + fmt(o.max_grad_norm(0)) + "," +
           fmt(loss) + "," + fmt(e ? e->position_mean.value : nan) + "," +
           fmt(e ? e->position_mean.std_error : nan) + "," + fmt(e ? e->global.value : nan) + "," +
           fmt(e ? e->global.std_error : nan) + "\n";
  }
  return out;
}

BakeoffResult head_bakeoff(const BakeoffSpec& spec, const model::SequenceSet& data,
                           const RunOutcome* energy) {
  if (spec.sigmas.empty()) throw ConfigError("head bake-off needs at least one sigma");
  const model::SequenceSet drawn =
      data.size() == 0 ? gen_synthetic(spec.base.task, spec.base.n_train) : model::SequenceSet{};
  const model::SequenceSet& train_set = data.size() == 0 ? drawn : data;

  BakeoffResult result;
  RunOutcome own;
  if (energy == nullptr) {
    RunSpec run = spec.base;
    run.model.head = model::HeadKind::energy;
    own = run_experiment(run, train_set, true);
    energy = &own;
  }
  if (energy->aborted || !energy->eval) {
    throw NumericalAbort("energy-head run did not finish: " + energy->abort_message,
                         energy->abort_step, energy->abort_epoch, -1);
  }
  result.energy_row = 0;
  result.rows.push_back({"energy", 0.0, *energy->eval});

  auto train_baseline = [&](model::HeadKind head) {
    RunSpec run = spec.base;
    run.model.head = head;
    auto outcome = run_experiment(run, train_set, false);
    if (outcome.aborted) {
      throw NumericalAbort(model::to_string(head) + " head training aborted: " +
                               outcome.abort_message,
                           outcome.abort_step, outcome.abort_epoch, -1);
    }
    return std::pair{run, std::move(outcome)};
  };

  auto [grun, gout] = train_baseline(model::HeadKind::gaussian);
  const auto gmc = grun.resolved_model();
  model::Model<float> gauss(gmc, gout.ema->clone(false));
  double best = std::numeric_limits<double>::infinity();
  for (double sigma : spec.sigmas) {
    auto sc = spec.base.sample;
    sc.head_sigma = sigma;
    double sps = 0.0;
    const auto gen = generate_dataset(gauss, spec.base.task, spec.base.n_eval, sc, 256, &sps);
    result.rows.push_back({"gaussian", sigma, evaluate(gen, spec.base.n_ref, spec.base.eval_seed, sps)});
    if (result.rows.back().eval.global.value < best) {
      best = result.rows.back().eval.global.value;
      result.best_gaussian_row = result.rows.size() - 1;
    }
  }
  if (spec.include_gmm) {
    auto [mrun, mout] = train_baseline(model::HeadKind::gmm);
    model::Model<float> gmm(mrun.resolved_model(), mout.ema->clone(false));
    double sps = 0.0;
    const auto gen =
        generate_dataset(gmm, spec.base.task, spec.base.n_eval, spec.base.sample, 256, &sps);
    result.rows.push_back({"gmm", 0.0, evaluate(gen, spec.base.n_ref, spec.base.eval_seed, sps)});
  }
  return result;
}

std::string bakeoff_csv(const BakeoffResult& result) {
  std::string out = "head,sigma,global_distance,global_se,position_distance,position_se\n";
  for (const auto& r : result.rows) {
    out += r.head + "," + fmt(r.sigma) + "," + fmt(r.eval.global.value) + "," +
           fmt(r.eval.global.std_error) + "," + fmt(r.eval.position_mean.value) + "," +
           fmt(r.eval.position_mean.std_error) + "\n";
  }
  return out;
}

scoring::ProbeResult gaussian_grid_probe(const scoring::ScoringRuleSpec& rule,
                                         const std::vector<double>& mus,
                                         const std::vector<double>& sigmas, double q_mu,
                                         double q_sigma, std::size_t n, std::uint64_t seed) {
  std::vector<scoring::OraclePtr> candidates;
  for (double mu : mus) {
    for (double s : sigmas) {
      candidates.push_back(std::make_shared<scoring::DiagGaussian>(scoring::Point{mu},
                                                                  scoring::Point{s}));
    }
  }
  const scoring::DiagGaussian q(scoring::Point{q_mu}, scoring::Point{q_sigma});
  Rng rng(seed);
  return scoring::propriety_probe(rule, q, candidates, n, rng);
}

std::string probe_csv(const scoring::ProbeResult& result) {
  std::string out = "candidate_id,score,std_error,is_truth,is_max\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.candidate_id) + "," + fmt(r.score.value) + "," +
           fmt(r.score.std_error) + "," + (r.is_truth ? "1" : "0") + "," + (r.is_max ? "1" : "0") +
           "\n";
  }
  return out;
}

}  // namespace ear::bench
