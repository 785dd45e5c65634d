#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ear/common/rng.hpp"

namespace ear::scoring {

using Point = std::vector<double>;

/// Reference distribution used as ground truth q or as a candidate p.
/// Sampling is mandatory; density and derivatives are optional and return
/// nullopt where the distribution does not provide them.
class DistributionOracle {
 public:
  virtual ~DistributionOracle() = default;

  virtual std::size_t dim() const = 0;
  virtual Point sample(Rng& rng) const = 0;

  /// log p(x)
  virtual std::optional<double> log_density(std::span<const double> x) const;
  /// grad_x log p(x)
  virtual std::optional<Point> score_fn(std::span<const double> x) const;
  /// tr(hess_x log p(x))
  virtual std::optional<double> hessian_trace(std::span<const double> x) const;

  /// Canonical text form; two oracles with the same description are the same
  /// distribution.
  virtual std::string describe() const = 0;
  bool same_as(const DistributionOracle& other) const { return describe() == other.describe(); }
};

using OraclePtr = std::shared_ptr<const DistributionOracle>;

class DiagGaussian final : public DistributionOracle {
 public:
  DiagGaussian(Point mean, Point stddev);
  static DiagGaussian isotropic(std::size_t dim, double mean = 0.0, double stddev = 1.0);

  std::size_t dim() const override { return mean_.size(); }
  Point sample(Rng& rng) const override;
  std::optional<double> log_density(std::span<const double> x) const override;
  std::optional<Point> score_fn(std::span<const double> x) const override;
  std::optional<double> hessian_trace(std::span<const double> x) const override;
  std::string describe() const override;

  const Point& mean() const { return mean_; }
  const Point& stddev() const { return stddev_; }

 private:
  Point mean_;
  Point stddev_;
};

/// K-component mixture of diagonal Gaussians.
class DiagGmm final : public DistributionOracle {
 public:
  DiagGmm(std::vector<double> weights, std::vector<Point> means, std::vector<Point> stddevs);

  std::size_t dim() const override { return means_.front().size(); }
  std::size_t components() const { return weights_.size(); }
  Point sample(Rng& rng) const override;
  std::optional<double> log_density(std::span<const double> x) const override;
  std::optional<Point> score_fn(std::span<const double> x) const override;
  std::optional<double> hessian_trace(std::span<const double> x) const override;
  std::string describe() const override;

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Point>& means() const { return means_; }
  const std::vector<Point>& stddevs() const { return stddevs_; }

 private:
  // Per-component log N(x; mu_k, diag) + log w_k.
  std::vector<double> joint_log_terms(std::span<const double> x) const;

  std::vector<double> weights_;
  std::vector<Point> means_;
  std::vector<Point> stddevs_;
};

class PointMass final : public DistributionOracle {
 public:
  explicit PointMass(Point location);

  std::size_t dim() const override { return location_.size(); }
  Point sample(Rng&) const override { return location_; }
  std::string describe() const override;

 private:
  Point location_;
};

/// Uniform on the axis-aligned box [lo, hi]. Has a density but no smooth
/// derivatives, so the Hyvarinen rule rejects it.
class UniformBox final : public DistributionOracle {
 public:
  UniformBox(Point lo, Point hi);

  std::size_t dim() const override { return lo_.size(); }
  Point sample(Rng& rng) const override;
  std::optional<double> log_density(std::span<const double> x) const override;
  std::string describe() const override;

 private:
  Point lo_;
  Point hi_;
};

}  // namespace ear::scoring
