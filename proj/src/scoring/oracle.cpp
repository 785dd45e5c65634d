#include "ear/scoring/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "ear/common/errors.hpp"

namespace ear::scoring {
namespace {

std::string format_vector(const Point& v) {
  std::string s = "[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    if (i) s += ",";
    s += buf;
  }
  return s + "]";
}

void check_dim(std::span<const double> x, std::size_t dim) {
  if (x.size() != dim) {
    throw DimensionError("point has dimension " + std::to_string(x.size()) + ", oracle expects " +
                         std::to_string(dim));
  }
}

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0;
  for (double e : v) s += std::exp(e - mx);
  return mx + std::log(s);
}

// -[ 1/2 (x-mu)^T S^-1 (x-mu) + n/2 log 2pi + 1/2 log|S| ] for diagonal S.
// Shared by both Gaussian oracles so a one-component mixture is bit-identical
// to the plain Gaussian.
double diag_log_density(std::span<const double> x, const Point& mean, const Point& stddev) {
  double quad = 0, logdet = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) / stddev[i];
    quad += z * z;
    logdet += 2.0 * std::log(stddev[i]);
  }
  return -(0.5 * quad + 0.5 * double(x.size()) * std::log(2.0 * std::numbers::pi) + 0.5 * logdet);
}

}  // namespace

std::optional<double> DistributionOracle::log_density(std::span<const double>) const {
  return std::nullopt;
}
std::optional<Point> DistributionOracle::score_fn(std::span<const double>) const {
  return std::nullopt;
}
std::optional<double> DistributionOracle::hessian_trace(std::span<const double>) const {
  return std::nullopt;
}

DiagGaussian::DiagGaussian(Point mean, Point stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.empty() || mean_.size() != stddev_.size()) {
    throw DimensionError("DiagGaussian: mean and stddev must be non-empty and of equal length");
  }
  for (double s : stddev_) {
    if (!(s > 0)) throw ConfigError("DiagGaussian: stddev must be positive");
  }
}

DiagGaussian DiagGaussian::isotropic(std::size_t dim, double mean, double stddev) {
  return DiagGaussian(Point(dim, mean), Point(dim, stddev));
}

Point DiagGaussian::sample(Rng& rng) const {
  Point x(dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = mean_[i] + stddev_[i] * rng.normal();
  return x;
}

std::optional<double> DiagGaussian::log_density(std::span<const double> x) const {
  check_dim(x, dim());
  return diag_log_density(x, mean_, stddev_);
}

std::optional<Point> DiagGaussian::score_fn(std::span<const double> x) const {
  check_dim(x, dim());
  Point g(dim());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -(x[i] - mean_[i]) / (stddev_[i] * stddev_[i]);
  return g;
}

std::optional<double> DiagGaussian::hessian_trace(std::span<const double> x) const {
  check_dim(x, dim());
  double tr = 0;
  for (double s : stddev_) tr -= 1.0 / (s * s);
  return tr;
}

std::string DiagGaussian::describe() const {
  return "gaussian(mean=" + format_vector(mean_) + ",std=" + format_vector(stddev_) + ")";
}

DiagGmm::DiagGmm(std::vector<double> weights, std::vector<Point> means, std::vector<Point> stddevs)
    : weights_(std::move(weights)), means_(std::move(means)), stddevs_(std::move(stddevs)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != stddevs_.size()) {
    throw DimensionError("DiagGmm: weights, means and stddevs must have one entry per component");
  }
  const std::size_t d = means_.front().size();
  if (d == 0) throw DimensionError("DiagGmm: zero-dimensional components");
  double total = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (means_[k].size() != d || stddevs_[k].size() != d) {
      throw DimensionError("DiagGmm: component " + std::to_string(k) + " has the wrong dimension");
    }
    if (!(weights_[k] >= 0)) throw ConfigError("DiagGmm: negative weight");
    for (double s : stddevs_[k]) {
      if (!(s > 0)) throw ConfigError("DiagGmm: stddev must be positive");
    }
    total += weights_[k];
  }
  if (!(total > 0)) throw ConfigError("DiagGmm: weights sum to zero");
  for (double& w : weights_) w /= total;
}

Point DiagGmm::sample(Rng& rng) const {
  const double u = rng.uniform();
  std::size_t k = 0;
  double c = weights_[0];
  while (u >= c && k + 1 < weights_.size()) c += weights_[++k];
  Point x(dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = means_[k][i] + stddevs_[k][i] * rng.normal();
  return x;
}

std::vector<double> DiagGmm::joint_log_terms(std::span<const double> x) const {
  check_dim(x, dim());
  std::vector<double> terms(components());
  for (std::size_t k = 0; k < components(); ++k) {
    terms[k] = weights_[k] > 0 ? std::log(weights_[k]) + diag_log_density(x, means_[k], stddevs_[k])
                               : -std::numeric_limits<double>::infinity();
  }
  return terms;
}

std::optional<double> DiagGmm::log_density(std::span<const double> x) const {
  return log_sum_exp(joint_log_terms(x));
}

std::optional<Point> DiagGmm::score_fn(std::span<const double> x) const {
  auto terms = joint_log_terms(x);
  const double lse = log_sum_exp(terms);
  Point g(dim(), 0.0);
  for (std::size_t k = 0; k < components(); ++k) {
    const double r = std::exp(terms[k] - lse);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] -= r * (x[i] - means_[k][i]) / (stddevs_[k][i] * stddevs_[k][i]);
    }
  }
  return g;
}

std::optional<double> DiagGmm::hessian_trace(std::span<const double> x) const {
  // hess log p = sum_k r_k (H_k + g_k g_k^T) - s s^T with s = sum_k r_k g_k.
  auto terms = joint_log_terms(x);
  const double lse = log_sum_exp(terms);
  Point s(dim(), 0.0);
  double tr = 0;
  for (std::size_t k = 0; k < components(); ++k) {
    const double r = std::exp(terms[k] - lse);
    double part = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double var = stddevs_[k][i] * stddevs_[k][i];
      const double gk = -(x[i] - means_[k][i]) / var;
      part += gk * gk - 1.0 / var;
      s[i] += r * gk;
    }
    tr += r * part;
  }
  for (double v : s) tr -= v * v;
  return tr;
}

std::string DiagGmm::describe() const {
  std::string s = "gmm(";
  for (std::size_t k = 0; k < components(); ++k) {
    if (k) s += ";";
    s += "w=" + format_vector({weights_[k]}) + ",mean=" + format_vector(means_[k]) +
         ",std=" + format_vector(stddevs_[k]);
  }
  return s + ")";
}

PointMass::PointMass(Point location) : location_(std::move(location)) {
  if (location_.empty()) throw DimensionError("PointMass: zero-dimensional location");
}

std::string PointMass::describe() const { return "point(" + format_vector(location_) + ")"; }

UniformBox::UniformBox(Point lo, Point hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.empty() || lo_.size() != hi_.size()) {
    throw DimensionError("UniformBox: bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    if (!(hi_[i] > lo_[i])) throw ConfigError("UniformBox: hi must exceed lo on every axis");
  }
}

Point UniformBox::sample(Rng& rng) const {
  Point x(dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo_[i], hi_[i]);
  return x;
}

std::optional<double> UniformBox::log_density(std::span<const double> x) const {
  check_dim(x, dim());
  double log_volume = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo_[i] || x[i] > hi_[i]) return -std::numeric_limits<double>::infinity();
    log_volume += std::log(hi_[i] - lo_[i]);
  }
  return -log_volume;
}

std::string UniformBox::describe() const {
  return "uniform(lo=" + format_vector(lo_) + ",hi=" + format_vector(hi_) + ")";
}

}  // namespace ear::scoring
