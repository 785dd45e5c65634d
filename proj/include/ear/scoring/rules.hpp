#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ear/common/rng.hpp"
#include "ear/scoring/oracle.hpp"

namespace ear::scoring {

enum class RuleKind { energy, logarithmic, hyvarinen };

std::string to_string(RuleKind kind);
RuleKind parse_rule_kind(const std::string& name);

struct ScoringRuleSpec {
  RuleKind kind = RuleKind::energy;
  double alpha = 1.0;  // energy only

  static ScoringRuleSpec energy(double alpha);
  static ScoringRuleSpec logarithmic() { return {RuleKind::logarithmic, 1.0}; }
  static ScoringRuleSpec hyvarinen() { return {RuleKind::hyvarinen, 1.0}; }

  /// Throws ConfigError for alpha outside (0, 2].
  void validate() const;
  /// False only for the energy score at alpha = 2, which is proper but not
  /// strictly proper.
  bool strictly_proper() const;
  std::string propriety_label() const;
};

/// Non-empty for alpha <= 0.99: the gradient of |x1 - x2|^alpha diverges as
/// the two samples coincide.
std::optional<std::string> stability_warning(double alpha);

/// A Monte-Carlo estimate with its standard error.
struct ScoreEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Mean and standard error of per-draw contributions.
ScoreEstimate summarize(std::span<const double> contributions);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// |x1 - y|^a + |x2 - y|^a - tau |x1 - x2|^a. Rejects tau outside (0, 1].
double energy_loss(std::span<const double> x1, std::span<const double> x2,
                   std::span<const double> y, double alpha, double tau_train);

/// Opt-in variant over m >= 2 model samples:
/// 2 mean_i |x_i - y|^a - tau mean_{i<j} |x_i - x_j|^a.
/// Same expectation as energy_loss, and identical to it for m = 2.
double energy_loss_multi(std::span<const std::vector<double>> samples, std::span<const double> y,
                         double alpha, double tau_train);

/// E|x1 - x2|^a - 2 E|x - y|^a for x ~ p, from n paired draws.
ScoreEstimate energy_score_mc(const DistributionOracle& p, std::span<const double> y, double alpha,
                              std::size_t n, Rng& rng);

/// Flat row-major point cloud.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> values;

  PointSet() = default;
  explicit PointSet(std::size_t d) : dim(d) {}
  static PointSet from_points(const std::vector<Point>& points);
  static PointSet draw(const DistributionOracle& oracle, std::size_t n, Rng& rng);

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> operator[](std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  void push_back(std::span<const double> x);
};

/// U-statistic estimate of 2E|x-y|^a - E|x1-x2|^a - E|y1-y2|^a with
/// self-pairs excluded from the within-set terms. The standard error is the
/// two-sample delete-one jackknife. Each set needs at least two points.
ScoreEstimate energy_distance(const PointSet& p, const PointSet& q, double alpha);

/// log p(x). Throws UnsupportedOracleError when p has no density.
double log_score(const DistributionOracle& p, std::span<const double> x);

/// -(2 tr(hess log p(x)) + |grad log p(x)|^2). Throws UnsupportedOracleError
/// when p lacks either derivative.
double hyvarinen_score(const DistributionOracle& p, std::span<const double> x);

/// S(p, q) = E_{y~q} S(p, y) for the given rule, from n draws of y.
ScoreEstimate expected_score(const ScoringRuleSpec& rule, const DistributionOracle& p,
                             const DistributionOracle& q, std::size_t n, Rng& rng);

struct ProbeRow {
  std::size_t candidate_id = 0;
  std::string description;
  ScoreEstimate score;
  bool is_truth = false;
  bool is_max = false;
};

struct ProbeResult {
  std::vector<ProbeRow> rows;
  std::size_t truth_index = 0;
  bool truth_is_max = false;
};

/// Expected score of every candidate under truth q. Candidate i draws from
/// an independent stream, so rows can be computed in any order. q must be
/// one of the candidates.
ProbeResult propriety_probe(const ScoringRuleSpec& rule, const DistributionOracle& q,
                            const std::vector<OraclePtr>& candidates, std::size_t n, Rng& rng);

}  // namespace ear::scoring
