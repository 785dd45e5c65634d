#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ear::model {

/// Labelled continuous-token sequences, stored flat as 32-bit floats.
struct SequenceSet {
  std::size_t seq_len = 0;
  std::size_t d_token = 0;
  std::vector<std::uint16_t> labels;
  std::vector<float> tokens;  // size() * seq_len * d_token

  SequenceSet() = default;
  SequenceSet(std::size_t t, std::size_t d) : seq_len(t), d_token(d) {}

  std::size_t size() const { return labels.size(); }
  std::size_t sequence_width() const { return seq_len * d_token; }
  std::span<const float> sequence(std::size_t i) const {
    return {tokens.data() + i * sequence_width(), sequence_width()};
  }
  std::span<const float> token(std::size_t i, std::size_t t) const {
    return {tokens.data() + i * sequence_width() + t * d_token, d_token};
  }
  void push_back(std::uint16_t label, std::span<const float> sequence);
};

/// One training or evaluation batch. `tokens` feed the backbone at visible
/// positions; `targets` are the ground truth scored at masked positions.
/// They coincide for ordinary training.
template <class T>
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t d_token = 0;
  std::vector<T> tokens;           // batch * seq_len * d_token
  std::vector<T> targets;          // same layout as tokens
  std::vector<std::uint8_t> mask;  // batch * seq_len, 1 = masked
  std::vector<std::size_t> labels; // batch

  std::size_t masked_count() const;
  /// Flat (b * seq_len + t) indices of masked positions in row-major order.
  std::vector<std::size_t> masked_positions() const;

  /// Gathers sequences `indices` from a set. Mask is all zero and
  /// targets equal tokens.
  static SequenceBatch from_set(const SequenceSet& set, std::span<const std::size_t> indices);
};

extern template struct SequenceBatch<float>;
extern template struct SequenceBatch<double>;

}  // namespace ear::model
