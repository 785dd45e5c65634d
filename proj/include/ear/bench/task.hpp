#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "ear/common/rng.hpp"
#include "ear/model/sequence.hpp"
#include "ear/scoring/oracle.hpp"

namespace ear::bench {

enum class TaskKind { gmm_chain, blobs8 };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

/// Synthetic conditional sequence task with a known generating law.
///
/// gmm-chain: token_1 ~ 1/2 N(+a_c, s^2 I) + 1/2 N(-a_c, s^2 I) with
/// a_c = (cos 2pi c/C, sin 2pi c/C); token_t = token_{t-1} / 2 plus a fresh
/// draw from the same mixture.
///
/// blobs8: an 8x8 image holding one Gaussian bump of width one pixel. Its
/// centre is the class cell centre (cells of a ceil(sqrt C) grid) plus
/// U[-1/2, 1/2] jitter per axis, amplitude U[1/2, 1], pixel noise N(0, s^2).
/// Tokens are the 16 2x2 patches in raster order.
struct TaskSpec {
  TaskKind kind = TaskKind::gmm_chain;
  std::size_t seq_len = 8;
  std::size_t d_token = 2;
  std::size_t n_classes = 4;
  double noise_sigma = 0.2;
  std::uint64_t seed = 0;

  static TaskSpec gmm_chain(std::size_t seq_len = 8, std::size_t n_classes = 4,
                            double noise_sigma = 0.2, std::uint64_t seed = 0);
  static TaskSpec blobs8(std::size_t n_classes = 4, double noise_sigma = 0.05,
                         std::uint64_t seed = 0);

  /// Throws ConfigError on violated shape invariants.
  void validate() const;
  std::size_t sequence_width() const { return seq_len * d_token; }
};

/// Writes one class-conditional sequence into `out` (sequence_width values).
void sample_sequence(const TaskSpec& spec, std::size_t label, Rng& rng, std::span<double> out);

/// n labelled sequences from Rng(spec.seed); labels are uniform over classes.
model::SequenceSet gen_synthetic(const TaskSpec& spec, std::size_t n);

/// Full class-conditional law of a flattened sequence. Sampling only.
class SequenceOracle final : public scoring::DistributionOracle {
 public:
  SequenceOracle(TaskSpec spec, std::size_t label);

  std::size_t dim() const override { return spec_.sequence_width(); }
  scoring::Point sample(Rng& rng) const override;
  std::string describe() const override;

 private:
  TaskSpec spec_;
  std::size_t label_;
};

/// Exact gmm-chain conditional of the next token given the previous one
/// (nullopt for the first position). The chain is Markov, so earlier
/// tokens do not matter. Throws UnsupportedOracleError for other tasks.
scoring::OraclePtr chain_conditional(const TaskSpec& spec, std::size_t label,
                                     std::optional<std::span<const double>> previous);

/// Bump-centre cell of a blobs8 class: (row, col) in the class grid and the
/// cell side in pixels.
struct BlobCell {
  std::size_t grid = 0;
  double side = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};
BlobCell blob_cell(const TaskSpec& spec, std::size_t label);

}  // namespace ear::bench
