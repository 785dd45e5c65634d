#include "ear/model/sequence.hpp"

#include "ear/common/errors.hpp"

namespace ear::model {

void SequenceSet::push_back(std::uint16_t label, std::span<const float> sequence) {
  if (sequence.size() != sequence_width()) {
    throw DimensionError("sequence has " + std::to_string(sequence.size()) + " values, expected " +
                         std::to_string(sequence_width()));
  }
  labels.push_back(label);
  tokens.insert(tokens.end(), sequence.begin(), sequence.end());
}

template <class T>
std::size_t SequenceBatch<T>::masked_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

template <class T>
std::vector<std::size_t> SequenceBatch<T>::masked_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

template <class T>
SequenceBatch<T> SequenceBatch<T>::from_set(const SequenceSet& set,
                                            std::span<const std::size_t> indices) {
  SequenceBatch<T> batch;
  batch.batch = indices.size();
  batch.seq_len = set.seq_len;
  batch.d_token = set.d_token;
  batch.tokens.reserve(indices.size() * set.sequence_width());
  for (std::size_t i : indices) {
    if (i >= set.size()) throw ContractError("sequence index out of range");
    for (float v : set.sequence(i)) batch.tokens.push_back(T(v));
    batch.labels.push_back(set.labels[i]);
  }
  batch.targets = batch.tokens;
  batch.mask.assign(indices.size() * set.seq_len, 0);
  return batch;
}

template struct SequenceBatch<float>;
template struct SequenceBatch<double>;

}  // namespace ear::model
