#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ear/bench/evaluate.hpp"
#include "ear/bench/io.hpp"
#include "ear/bench/task.hpp"
#include "ear/model/model.hpp"
#include "ear/sampling/sampling.hpp"
#include "ear/scoring/rules.hpp"
#include "ear/training/training.hpp"

namespace ear::bench {

/// Generates n sequences with labels cycling over the task's classes, in
/// backbone batches of `batch`. Stream ids run 0..n-1.
Dataset generate_dataset(const model::Model<float>& model, const TaskSpec& task, std::size_t n,
                         const sampling::SampleConfig& config, std::size_t batch = 256,
                         double* seconds_per_sequence = nullptr);

/// One train-then-evaluate experiment on a synthetic task.
struct RunSpec {
  TaskSpec task;
  std::size_t n_train = 20000;
  model::ModelConfig model;
  std::uint64_t init_seed = 1;
  training::TrainConfig train;
  /// Evaluation sampling; the sweeps use cfg 1 and tau_infer 1 so the
  /// comparison isolates the training objective.
  sampling::SampleConfig sample;
  std::size_t n_eval = 1000;
  std::size_t n_ref = 1000;
  std::uint64_t eval_seed = 7;

  /// Copies task shape into the model config.
  model::ModelConfig resolved_model() const;
};

struct RunOutcome {
  bool aborted = false;
  std::string abort_message;
  std::int64_t abort_step = -1;
  std::int64_t abort_epoch = -1;
  std::vector<training::TrainReport> reports;
  std::size_t instability_events = 0;
  /// EMA parameters at the end of training (absent after an abort).
  std::optional<model::ModelParams<float>> ema;
  std::optional<EvalReport> eval;

  /// A NaN abort or a grad-norm alert during the first epoch.
  bool unstable_in_first_epoch() const;
  double max_grad_norm(std::int64_t epoch) const;
};

/// Trains on `data` (drawn from spec.task when empty) and, if `evaluate_after`
/// and training finished, evaluates n_eval generated sequences.
RunOutcome run_experiment(const RunSpec& spec, const model::SequenceSet& data,
                          bool evaluate_after = true);

struct AlphaSweepSpec {
  RunSpec base;
  std::vector<double> alphas{0.5, 1.0, 1.25, 1.5, 1.75, 2.0};
  /// Alphas with a stability warning only probe for the collapse, so they
  /// train this many epochs and are not evaluated.
  std::size_t probe_epochs = 1;
};

struct AlphaSweepRow {
  double alpha = 0.0;
  RunOutcome outcome;
};

std::vector<AlphaSweepRow> alpha_sweep(const AlphaSweepSpec& spec,
                                       const model::SequenceSet& data);

/// Rows: alpha, status, epochs, instability_events, first_epoch_unstable,
/// max_grad_norm_epoch0, final_loss, position_distance, position_se,
/// global_distance, global_se.
std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows);

struct BakeoffSpec {
  RunSpec base;
  std::vector<double> sigmas{0.1, 0.2, 0.4, 0.8};
  bool include_gmm = false;
};

struct BakeoffRow {
  std::string head;
  double sigma = 0.0;  // inference sigma, gaussian head only
  EvalReport eval;
};

struct BakeoffResult {
  std::vector<BakeoffRow> rows;
  /// Index into rows of the energy head and of the best gaussian sigma.
  std::size_t energy_row = 0;
  std::size_t best_gaussian_row = 0;
};

/// Trains the energy head (unless `energy` supplies a finished run) and a
/// gaussian head of the same backbone, then evaluates the gaussian head at
/// every inference sigma.
BakeoffResult head_bakeoff(const BakeoffSpec& spec, const model::SequenceSet& data,
                           const RunOutcome* energy = nullptr);

/// Rows: head, sigma, global_distance, global_se, position_distance, position_se.
std::string bakeoff_csv(const BakeoffResult& result);

/// Propriety probe of a rule over the Gaussian family N(mu, s^2) in one
/// dimension, truth N(q_mu, q_sigma^2), which must be on the grid.
scoring::ProbeResult gaussian_grid_probe(const scoring::ScoringRuleSpec& rule,
                                         const std::vector<double>& mus,
                                         const std::vector<double>& sigmas, double q_mu,
                                         double q_sigma, std::size_t n, std::uint64_t seed);

/// Rows: candidate_id, score, std_error, is_truth, is_max.
std::string probe_csv(const scoring::ProbeResult& result);

}  // namespace ear::bench
