#include "ear/scoring/rules.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ear/common/errors.hpp"

namespace ear::scoring {
namespace {

double pow_alpha(double r, double alpha) {
  if (alpha == 1.0) return r;
  if (alpha == 2.0) return r * r;
  return std::pow(r, alpha);
}

// |a - b|^alpha without materialising the difference.
double dist_pow(const double* a, const double* b, std::size_t d, double alpha) {
  double s = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  if (alpha == 2.0) return s;
  return pow_alpha(std::sqrt(s), alpha);
}

void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("points of dimension " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw ConfigError("energy score alpha must lie in (0, 2], got " + std::to_string(alpha));
  }
}

}  // namespace

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::energy:
      return "energy";
    case RuleKind::logarithmic:
      return "logarithmic";
    case RuleKind::hyvarinen:
      return "hyvarinen";
  }
  return "unknown";
}

RuleKind parse_rule_kind(const std::string& name) {
  if (name == "energy") return RuleKind::energy;
  if (name == "logarithmic" || name == "log") return RuleKind::logarithmic;
  if (name == "hyvarinen") return RuleKind::hyvarinen;
  throw ConfigError("unknown scoring rule '" + name + "'");
}

ScoringRuleSpec ScoringRuleSpec::energy(double alpha) {
  ScoringRuleSpec spec{RuleKind::energy, alpha};
  spec.validate();
  return spec;
}

void ScoringRuleSpec::validate() const {
  if (kind == RuleKind::energy) check_alpha(alpha);
}

bool ScoringRuleSpec::strictly_proper() const {
  return !(kind == RuleKind::energy && alpha == 2.0);
}

std::string ScoringRuleSpec::propriety_label() const {
  return strictly_proper() ? "strictly proper" : "proper, not strict";
}

std::optional<std::string> stability_warning(double alpha) {
  if (alpha > 0.99) return std::nullopt;
  std::ostringstream os;
  os << "warning: energy loss with alpha=" << alpha
     << " has unbounded gradients as model samples coincide; expect unstable training";
  return os.str();
}

ScoreEstimate summarize(std::span<const double> contributions) {
  ScoreEstimate est;
  est.n_samples = contributions.size();
  if (contributions.empty()) return est;
  double m = 0;
  for (double c : contributions) m += c;
  m /= double(contributions.size());
  est.value = m;
  if (contributions.size() > 1) {
    double ss = 0;
    for (double c : contributions) ss += (c - m) * (c - m);
    const double var = ss / double(contributions.size() - 1);
    est.std_error = std::sqrt(var / double(contributions.size()));
  }
  return est;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a, b);
  return dist_pow(a.data(), b.data(), a.size(), 1.0);
}

double energy_loss(std::span<const double> x1, std::span<const double> x2,
                   std::span<const double> y, double alpha, double tau_train) {
  check_same_dim(x1, y);
  check_same_dim(x2, y);
  check_alpha(alpha);
  if (!(tau_train > 0.0 && tau_train <= 1.0)) {
    throw ConfigError("tau_train must lie in (0, 1]; larger values make the loss unbounded");
  }
  const std::size_t d = y.size();
  return dist_pow(x1.data(), y.data(), d, alpha) + dist_pow(x2.data(), y.data(), d, alpha) -
         tau_train * dist_pow(x1.data(), x2.data(), d, alpha);
}

double energy_loss_multi(std::span<const std::vector<double>> samples, std::span<const double> y,
                         double alpha, double tau_train) {
  if (samples.size() < 2) throw ContractError("energy_loss_multi needs at least two samples");
  if (samples.size() == 2) return energy_loss(samples[0], samples[1], y, alpha, tau_train);
  check_alpha(alpha);
  if (!(tau_train > 0.0 && tau_train <= 1.0)) {
    throw ConfigError("tau_train must lie in (0, 1]; larger values make the loss unbounded");
  }
  const std::size_t m = samples.size();
  double fidelity = 0;
  for (const auto& x : samples) {
    check_same_dim(x, y);
    fidelity += dist_pow(x.data(), y.data(), y.size(), alpha);
  }
  double diversity = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      diversity += dist_pow(samples[i].data(), samples[j].data(), y.size(), alpha);
  return 2.0 * fidelity / double(m) - tau_train * diversity / double(m * (m - 1) / 2);
}

ScoreEstimate energy_score_mc(const DistributionOracle& p, std::span<const double> y, double alpha,
                              std::size_t n, Rng& rng) {
  if (n < 2) throw ContractError("energy_score_mc needs n >= 2");
  check_alpha(alpha);
  if (y.size() != p.dim()) throw DimensionError("target dimension does not match oracle");
  std::vector<double> contrib(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point x1 = p.sample(rng);
    const Point x2 = p.sample(rng);
    const std::size_t d = y.size();
    contrib[i] = dist_pow(x1.data(), x2.data(), d, alpha) - dist_pow(x1.data(), y.data(), d, alpha) -
                 dist_pow(x2.data(), y.data(), d, alpha);
  }
  return summarize(contrib);
}

PointSet PointSet::from_points(const std::vector<Point>& points) {
  PointSet set(points.empty() ? 0 : points.front().size());
  for (const auto& p : points) set.push_back(p);
  return set;
}

PointSet PointSet::draw(const DistributionOracle& oracle, std::size_t n, Rng& rng) {
  PointSet set(oracle.dim());
  set.values.reserve(n * oracle.dim());
  for (std::size_t i = 0; i < n; ++i) set.push_back(oracle.sample(rng));
  return set;
}

void PointSet::push_back(std::span<const double> x) {
  if (dim == 0) dim = x.size();
  if (x.size() != dim) throw DimensionError("PointSet: point dimension mismatch");
  values.insert(values.end(), x.begin(), x.end());
}

ScoreEstimate energy_distance(const PointSet& p, const PointSet& q, double alpha) {
  check_alpha(alpha);
  const std::size_t n = p.size();
  const std::size_t m = q.size();
  if (n < 2 || m < 2) throw ContractError("energy_distance needs at least two points per set");
  if (p.dim != q.dim) throw DimensionError("energy_distance: point sets differ in dimension");
  const std::size_t d = p.dim;
  const double* xs = p.values.data();
  const double* ys = q.values.data();

  // Row sums of the cross and within kernels; the jackknife needs them.
  std::vector<double> cross_x(n, 0.0), cross_y(m, 0.0), within_x(n, 0.0), within_y(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double k = dist_pow(xs + i * d, ys + j * d, d, alpha);
      cross_x[i] += k;
      cross_y[j] += k;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = i + 1; l < n; ++l) {
      const double k = dist_pow(xs + i * d, xs + l * d, d, alpha);
      within_x[i] += k;
      within_x[l] += k;
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = j + 1; l < m; ++l) {
      const double k = dist_pow(ys + j * d, ys + l * d, d, alpha);
      within_y[j] += k;
      within_y[l] += k;
    }
  }
  double sa = 0, sb = 0, sc = 0;
  for (double v : cross_x) sa += v;
  for (double v : within_x) sb += v;
  for (double v : within_y) sc += v;
  const double dn = double(n), dm = double(m);

  ScoreEstimate est;
  est.n_samples = std::min(n, m);
  est.value = 2.0 * sa / (dn * dm) - sb / (dn * (dn - 1)) - sc / (dm * (dm - 1));

  double var = 0;
  if (n >= 3) {
    std::vector<double> loo(n);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
      loo[i] = 2.0 * (sa - cross_x[i]) / ((dn - 1) * dm) -
               (sb - 2.0 * within_x[i]) / ((dn - 1) * (dn - 2)) - sc / (dm * (dm - 1));
      mean += loo[i];
    }
    mean /= dn;
    double ss = 0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    var += (dn - 1) / dn * ss;
  }
  if (m >= 3) {
    std::vector<double> loo(m);
    double mean = 0;
    for (std::size_t j = 0; j < m; ++j) {
      loo[j] = 2.0 * (sa - cross_y[j]) / (dn * (dm - 1)) - sb / (dn * (dn - 1)) -
               (sc - 2.0 * within_y[j]) / ((dm - 1) * (dm - 2));
      mean += loo[j];
    }
    mean /= dm;
    double ss = 0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    var += (dm - 1) / dm * ss;
  }
  est.std_error = std::sqrt(var);
  return est;
}

double log_score(const DistributionOracle& p, std::span<const double> x) {
  auto lp = p.log_density(x);
  if (!lp) throw UnsupportedOracleError("logarithmic score needs a density: " + p.describe());
  return *lp;
}

double hyvarinen_score(const DistributionOracle& p, std::span<const double> x) {
  auto grad = p.score_fn(x);
  auto trace = p.hessian_trace(x);
  if (!grad || !trace) {
    throw UnsupportedOracleError("Hyvarinen score needs grad and Hessian trace of log p: " +
                                 p.describe());
  }
  double sq = 0;
  for (double g : *grad) sq += g * g;
  return -(2.0 * *trace + sq);
}

ScoreEstimate expected_score(const ScoringRuleSpec& rule, const DistributionOracle& p,
                             const DistributionOracle& q, std::size_t n, Rng& rng) {
  rule.validate();
  if (p.dim() != q.dim()) throw DimensionError("expected_score: p and q differ in dimension");
  if (n < 2) throw ContractError("expected_score needs n >= 2");
  std::vector<double> contrib(n);
  const std::size_t d = q.dim();
  switch (rule.kind) {
    case RuleKind::energy:
      for (std::size_t i = 0; i < n; ++i) {
        const Point y = q.sample(rng);
        const Point x1 = p.sample(rng);
        const Point x2 = p.sample(rng);
        contrib[i] = dist_pow(x1.data(), x2.data(), d, rule.alpha) -
                     dist_pow(x1.data(), y.data(), d, rule.alpha) -
                     dist_pow(x2.data(), y.data(), d, rule.alpha);
      }
      break;
    case RuleKind::logarithmic:
      for (std::size_t i = 0; i < n; ++i) contrib[i] = log_score(p, q.sample(rng));
      break;
    case RuleKind::hyvarinen:
      for (std::size_t i = 0; i < n; ++i) contrib[i] = hyvarinen_score(p, q.sample(rng));
      break;
  }
  return summarize(contrib);
}

ProbeResult propriety_probe(const ScoringRuleSpec& rule, const DistributionOracle& q,
                            const std::vector<OraclePtr>& candidates, std::size_t n, Rng& rng) {
  rule.validate();
  ProbeResult result;
  bool found = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!found && candidates[i]->same_as(q)) {
      result.truth_index = i;
      found = true;
    }
  }
  if (!found) throw ContractError("propriety_probe: the truth must be among the candidates");

  const Rng base = rng.fork();
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Rng stream = base.stream(i);
    ProbeRow row;
    row.candidate_id = i;
    row.description = candidates[i]->describe();
    row.score = expected_score(rule, *candidates[i], q, n, stream);
    row.is_truth = i == result.truth_index;
    result.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (result.rows[i].score.value > result.rows[best].score.value) best = i;
  }
  result.rows[best].is_max = true;
  result.truth_is_max = best == result.truth_index;
  return result;
}

}  // namespace ear::scoring
