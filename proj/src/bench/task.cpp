#include "ear/bench/task.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "ear/common/errors.hpp"

namespace ear::bench {

std::string to_string(TaskKind kind) { return kind == TaskKind::gmm_chain ? "gmm-chain" : "blobs8"; }

TaskKind parse_task_kind(const std::string& name) {
  if (name == "gmm-chain") return TaskKind::gmm_chain;
  if (name == "blobs8") return TaskKind::blobs8;
  throw ConfigError("unknown task kind '" + name + "' (expected gmm-chain or blobs8)");
}

TaskSpec TaskSpec::gmm_chain(std::size_t seq_len, std::size_t n_classes, double noise_sigma,
                             std::uint64_t seed) {
  return {TaskKind::gmm_chain, seq_len, 2, n_classes, noise_sigma, seed};
}

TaskSpec TaskSpec::blobs8(std::size_t n_classes, double noise_sigma, std::uint64_t seed) {
  return {TaskKind::blobs8, 16, 4, n_classes, noise_sigma, seed};
}

void TaskSpec::validate() const {
  if (n_classes < 1) throw ConfigError("task needs at least one class");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
  if (kind == TaskKind::gmm_chain) {
    if (d_token != 2) throw ConfigError("gmm-chain tokens are 2-dimensional");
    if (seq_len < 1) throw ConfigError("gmm-chain needs seq_len >= 1");
  } else {
    if (seq_len != 16 || d_token != 4) throw ConfigError("blobs8 is 16 tokens of 4 channels");
    if (n_classes > 16) throw ConfigError("blobs8 supports at most 16 classes");
  }
}

BlobCell blob_cell(const TaskSpec& spec, std::size_t label) {
  BlobCell cell;
  cell.grid = static_cast<std::size_t>(std::ceil(std::sqrt(double(spec.n_classes))));
  cell.side = 8.0 / double(cell.grid);
  cell.row = label / cell.grid;
  cell.col = label % cell.grid;
  return cell;
}

namespace {

void check_label(const TaskSpec& spec, std::size_t label) {
  if (label >= spec.n_classes) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(spec.n_classes) + " classes");
  }
}

std::pair<double, double> class_axis(const TaskSpec& spec, std::size_t label) {
  const double theta = 2.0 * std::numbers::pi * double(label) / double(spec.n_classes);
  return {std::cos(theta), std::sin(theta)};
}

}  // namespace

void sample_sequence(const TaskSpec& spec, std::size_t label, Rng& rng, std::span<double> out) {
  check_label(spec, label);
  if (out.size() != spec.sequence_width()) throw DimensionError("sample_sequence: wrong width");
  const double s = spec.noise_sigma;
  if (spec.kind == TaskKind::gmm_chain) {
    const auto [ax, ay] = class_axis(spec, label);
    double px = 0.0, py = 0.0;
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double zx = rng.normal();
      const double zy = rng.normal();
      px = 0.5 * px + sign * ax + s * zx;
      py = 0.5 * py + sign * ay + s * zy;
      out[2 * t] = px;
      out[2 * t + 1] = py;
    }
    return;
  }
  const BlobCell cell = blob_cell(spec, label);
  const double cy = (double(cell.row) + 0.5) * cell.side - 0.5 + rng.uniform(-0.5, 0.5);
  const double cx = (double(cell.col) + 0.5) * cell.side - 0.5 + rng.uniform(-0.5, 0.5);
  const double amp = rng.uniform(0.5, 1.0);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      const double dy = double(y) - cy;
      const double dx = double(x) - cx;
      const double v = amp * std::exp(-0.5 * (dx * dx + dy * dy)) + s * rng.normal();
      // Patch j = (y/2)*4 + x/2, channel (y%2)*2 + x%2.
      const std::size_t j = (y / 2) * 4 + x / 2;
      const std::size_t c = (y % 2) * 2 + x % 2;
      out[j * 4 + c] = v;
    }
  }
}

model::SequenceSet gen_synthetic(const TaskSpec& spec, std::size_t n) {
  spec.validate();
  if (n < 1) throw ConfigError("gen_synthetic needs n >= 1");
  model::SequenceSet set(spec.seq_len, spec.d_token);
  set.labels.reserve(n);
  set.tokens.reserve(n * spec.sequence_width());
  Rng rng(spec.seed);
  std::vector<double> buf(spec.sequence_width());
  std::vector<float> f(buf.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = rng.below(spec.n_classes);
    sample_sequence(spec, label, rng, buf);
    for (std::size_t j = 0; j < buf.size(); ++j) f[j] = float(buf[j]);
    set.push_back(static_cast<std::uint16_t>(label), f);
  }
  return set;
}

SequenceOracle::SequenceOracle(TaskSpec spec, std::size_t label)
    : spec_(std::move(spec)), label_(label) {
  spec_.validate();
  check_label(spec_, label_);
}

scoring::Point SequenceOracle::sample(Rng& rng) const {
  scoring::Point p(dim());
  sample_sequence(spec_, label_, rng, p);
  return p;
}

std::string SequenceOracle::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s(T=%zu,d=%zu,C=%zu,sigma=%.17g,label=%zu)",
                to_string(spec_.kind).c_str(), spec_.seq_len, spec_.d_token, spec_.n_classes,
                spec_.noise_sigma, label_);
  return buf;
}

scoring::OraclePtr chain_conditional(const TaskSpec& spec, std::size_t label,
                                     std::optional<std::span<const double>> previous) {
  if (spec.kind != TaskKind::gmm_chain) {
    throw UnsupportedOracleError("per-token conditionals exist only for gmm-chain");
  }
  check_label(spec, label);
  const auto [ax, ay] = class_axis(spec, label);
  double bx = 0.0, by = 0.0;
  if (previous) {
    if (previous->size() != 2) throw DimensionError("gmm-chain tokens are 2-dimensional");
    bx = 0.5 * (*previous)[0];
    by = 0.5 * (*previous)[1];
  }
  const scoring::Point sd{spec.noise_sigma, spec.noise_sigma};
  return std::make_shared<scoring::DiagGmm>(
      std::vector<double>{0.5, 0.5},
      std::vector<scoring::Point>{{bx + ax, by + ay}, {bx - ax, by - ay}},
      std::vector<scoring::Point>{sd, sd});
}

}  // namespace ear::bench
