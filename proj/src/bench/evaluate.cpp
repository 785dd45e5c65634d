#include "ear/bench/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "ear/common/errors.hpp"
#include "ear/diff/ops.hpp"
#include "ear/scoring/losses.hpp"

namespace ear::bench {

using diff::Tensor;
using scoring::PointSet;
using scoring::ScoreEstimate;

template <class T>
Tensor<T> gaussian_head_loss(const Tensor<T>& mu, const Tensor<T>& target, T sigma) {
  return diff::mean(scoring::gaussian_nll_rows(mu, target, sigma));
}

template <class T>
Tensor<T> gmm_head_loss(const Tensor<T>& head, const Tensor<T>& target, std::size_t k) {
  return diff::mean(scoring::gmm_nll_rows(head, target, k, T(scoring::kGmmVarFloor)));
}

template Tensor<float> gaussian_head_loss(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> gaussian_head_loss(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> gmm_head_loss(const Tensor<float>&, const Tensor<float>&, std::size_t);
template Tensor<double> gmm_head_loss(const Tensor<double>&, const Tensor<double>&, std::size_t);

namespace {

constexpr std::size_t kJackknifeGroups = 10;

struct ClassSets {
  PointSet gen;  // flattened sequences
  PointSet ref;
};

// First and second moment sums of flattened sequences, per jackknife group.
struct MomentSums {
  std::size_t dim = 0;
  std::vector<double> n, s, ss;  // [G], [G * dim], [G * dim * dim]

  explicit MomentSums(std::size_t d)
      : dim(d), n(kJackknifeGroups, 0.0), s(kJackknifeGroups * d, 0.0),
        ss(kJackknifeGroups * d * d, 0.0) {}

  void add(const PointSet& set) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      const std::size_t g = i % kJackknifeGroups;
      auto x = set[i];
      n[g] += 1.0;
      for (std::size_t a = 0; a < dim; ++a) {
        s[g * dim + a] += x[a];
        for (std::size_t b = 0; b < dim; ++b) ss[(g * dim + a) * dim + b] += x[a] * x[b];
      }
    }
  }

  // Mean and unbiased covariance with group `skip` removed (none if >= G).
  void moments(std::size_t skip, std::vector<double>& mean, std::vector<double>& cov) const {
    double cnt = 0.0;
    mean.assign(dim, 0.0);
    cov.assign(dim * dim, 0.0);
    for (std::size_t g = 0; g < kJackknifeGroups; ++g) {
      if (g == skip) continue;
      cnt += n[g];
      for (std::size_t a = 0; a < dim; ++a) mean[a] += s[g * dim + a];
      for (std::size_t e = 0; e < dim * dim; ++e) cov[e] += ss[g * dim * dim + e];
    }
    for (auto& v : mean) v /= cnt;
    const double denom = cnt > 1.0 ? cnt - 1.0 : 1.0;
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) {
        cov[a * dim + b] = (cov[a * dim + b] - cnt * mean[a] * mean[b]) / denom;
      }
    }
  }
};

double frobenius_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

PointSet column(const PointSet& flat, std::size_t t, std::size_t d) {
  PointSet out(d);
  out.values.reserve(flat.size() * d);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto x = flat[i];
    out.values.insert(out.values.end(), x.begin() + t * d, x.begin() + (t + 1) * d);
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Dataset& generated, std::size_t n_ref, std::uint64_t seed,
                    double seconds_per_sequence) {
  const auto& spec = generated.spec;
  const auto& data = generated.data;
  spec.validate();
  if (data.size() < 100) {
    throw ConfigError("evaluation needs at least 100 generated sequences, got " +
                      std::to_string(data.size()));
  }
  if (data.seq_len != spec.seq_len || data.d_token != spec.d_token) {
    throw DimensionError("generated sequences do not match the task shape");
  }
  const std::size_t T = spec.seq_len;
  const std::size_t d = spec.d_token;
  const std::size_t width = spec.sequence_width();

  std::map<std::size_t, ClassSets> classes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t c = data.labels[i];
    if (c >= spec.n_classes) throw ConfigError("generated label out of range for the task");
    auto& cs = classes[c];
    cs.gen.dim = width;
    auto seq = data.sequence(i);
    for (float v : seq) cs.gen.values.push_back(double(v));
  }
  std::erase_if(classes, [](const auto& kv) { return kv.second.gen.size() < 2; });
  if (classes.empty()) throw ConfigError("no class has two or more generated sequences");
  std::size_t total = 0;
  for (const auto& [c, cs] : classes) total += cs.gen.size();

  EvalReport rep;
  rep.n_generated = total;
  rep.seconds_per_sequence = seconds_per_sequence;
  Rng rng(seed);
  std::map<std::size_t, double> weight;
  for (auto& [c, cs] : classes) {
    weight[c] = double(cs.gen.size()) / double(total);
    const auto share = static_cast<std::size_t>(
        std::llround(double(n_ref) * double(cs.gen.size()) / double(total)));
    const std::size_t m = std::max<std::size_t>(2, share);
    Rng stream = rng.stream(c);
    cs.ref = PointSet::draw(SequenceOracle(spec, c), m, stream);
    rep.n_reference += m;
  }

  auto combine = [&](auto&& per_class) {
    ScoreEstimate est;
    double var = 0.0;
    for (const auto& [c, cs] : classes) {
      const ScoreEstimate e = per_class(cs);
      est.value += weight[c] * e.value;
      var += weight[c] * weight[c] * e.std_error * e.std_error;
      est.n_samples += e.n_samples;
    }
    est.std_error = std::sqrt(var);
    return est;
  };

  rep.per_position.resize(T);
  double pos_var = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    rep.per_position[t] = combine([&](const ClassSets& cs) {
      return scoring::energy_distance(column(cs.gen, t, d), column(cs.ref, t, d), 1.0);
    });
    rep.position_mean.value += rep.per_position[t].value / double(T);
    pos_var += rep.per_position[t].std_error * rep.per_position[t].std_error;
  }
  rep.position_mean.std_error = std::sqrt(pos_var) / double(T);
  rep.position_mean.n_samples = rep.per_position.front().n_samples;
  rep.global = combine(
      [&](const ClassSets& cs) { return scoring::energy_distance(cs.gen, cs.ref, 1.0); });

  // Moment discrepancies: delete-group jackknife over aligned groups of
  // generated and reference sequences.
  std::vector<double> mean_theta(kJackknifeGroups + 1, 0.0), cov_theta(kJackknifeGroups + 1, 0.0);
  for (const auto& [c, cs] : classes) {
    MomentSums g(width), r(width);
    g.add(cs.gen);
    r.add(cs.ref);
    std::vector<double> mg, cg, mr, cr;
    for (std::size_t k = 0; k <= kJackknifeGroups; ++k) {
      g.moments(k, mg, cg);
      r.moments(k, mr, cr);
      mean_theta[k] += weight[c] * frobenius_diff(mg, mr);
      cov_theta[k] += weight[c] * frobenius_diff(cg, cr);
    }
  }
  auto jackknife = [](const std::vector<double>& theta, std::size_t n) {
    const double G = double(kJackknifeGroups);
    double avg = 0.0;
    for (std::size_t k = 0; k < kJackknifeGroups; ++k) avg += theta[k] / G;
    double ss = 0.0;
    for (std::size_t k = 0; k < kJackknifeGroups; ++k) ss += (theta[k] - avg) * (theta[k] - avg);
    return ScoreEstimate{theta[kJackknifeGroups], std::sqrt((G - 1.0) / G * ss), n};
  };
  rep.mean_discrepancy = jackknife(mean_theta, total);
  rep.cov_discrepancy = jackknife(cov_theta, total);
  return rep;
}

std::string eval_csv(const EvalReport& r) {
  std::string out = "metric,position,value,std_error,n_generated,n_reference\n";
  char buf[256];
  auto row = [&](const char* metric, const std::string& pos, double v, double se) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%zu,%zu\n", metric, pos.c_str(), v, se,
                  r.n_generated, r.n_reference);
    out += buf;
  };
  for (std::size_t t = 0; t < r.per_position.size(); ++t) {
    row("energy_distance", std::to_string(t), r.per_position[t].value, r.per_position[t].std_error);
  }
  row("energy_distance_position_mean", "all", r.position_mean.value, r.position_mean.std_error);
  row("energy_distance_global", "all", r.global.value, r.global.std_error);
  row("mean_discrepancy", "all", r.mean_discrepancy.value, r.mean_discrepancy.std_error);
  row("cov_discrepancy", "all", r.cov_discrepancy.value, r.cov_discrepancy.std_error);
  row("seconds_per_sequence", "all", r.seconds_per_sequence, 0.0);
  return out;
}

}  // namespace ear::bench
