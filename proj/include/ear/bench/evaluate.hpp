#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ear/bench/io.hpp"
#include "ear/diff/tensor.hpp"
#include "ear/scoring/rules.hpp"

namespace ear::bench {

/// Mean Gaussian-head NLL over rows, |y - mu|^2 / (2 s^2) + d/2 log(2 pi s^2).
template <class T>
diff::Tensor<T> gaussian_head_loss(const diff::Tensor<T>& mu, const diff::Tensor<T>& target,
                                   T sigma);

/// Mean channel-independent GMM NLL over rows; see scoring::gmm_nll_rows for
/// the head layout. Variances are floored at 1e-4.
template <class T>
diff::Tensor<T> gmm_head_loss(const diff::Tensor<T>& head, const diff::Tensor<T>& target,
                              std::size_t k);

struct EvalReport {
  /// Energy distance (alpha = 1) at each position between generated tokens
  /// and oracle tokens of the same class, class-count weighted.
  std::vector<scoring::ScoreEstimate> per_position;
  /// Unweighted mean of per_position; its error assumes independence.
  scoring::ScoreEstimate position_mean;
  /// Energy distance between flattened sequences.
  scoring::ScoreEstimate global;
  /// Frobenius norms of the mean and covariance differences of flattened
  /// sequences, with delete-group jackknife errors.
  scoring::ScoreEstimate mean_discrepancy;
  scoring::ScoreEstimate cov_discrepancy;
  std::size_t n_generated = 0;
  std::size_t n_reference = 0;
  /// Generation wall-clock per sequence as supplied by the caller; NaN if
  /// unknown.
  double seconds_per_sequence = 0.0;
};

/// Compares generated sequences against n_ref fresh oracle sequences drawn
/// from Rng(seed), split across classes in proportion to the generated
/// labels. Classes with fewer than two generated sequences are skipped.
EvalReport evaluate(const Dataset& generated, std::size_t n_ref, std::uint64_t seed,
                    double seconds_per_sequence = std::numeric_limits<double>::quiet_NaN());

/// Rows: metric, position, value, std_error, n_generated, n_reference.
std::string eval_csv(const EvalReport& report);

}  // namespace ear::bench
