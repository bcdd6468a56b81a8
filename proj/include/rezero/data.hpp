#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rezero/rng.hpp"
#include "rezero/tensor.hpp"

namespace rezero {

struct Dataset {
  RowMatrix inputs;         // [n, features]
  std::vector<int> labels;  // n entries in [0, classes)
  int classes = 0;
};

enum class DatasetKind { Blobs, Spirals };

DatasetKind parse_dataset(std::string_view name);
std::string_view to_string(DatasetKind kind);

/// Gaussian clouds with centers evenly spaced on a circle of radius
/// `separation`.
Dataset make_blobs(Index samples, int classes, double separation, double noise, SeededRng& rng);

/// Interleaved arms of an Archimedean spiral, `turns` revolutions each.
Dataset make_spirals(Index samples, int classes, double turns, double noise, SeededRng& rng);

/// Rows `rows` of the dataset as a minibatch.
Dataset select_rows(const Dataset& d, const std::vector<Index>& rows);

/// FNV-1a over the raw bytes of inputs and labels.
std::uint64_t dataset_hash(const Dataset& d);

/// Character-level corpus: vocabulary = sorted distinct bytes.
class Corpus {
 public:
  explicit Corpus(std::string text);
  static Corpus load(const std::string& path);

  const std::string& text() const { return text_; }
  const std::vector<int>& tokens() const { return tokens_; }
  int vocab_size() const { return static_cast<int>(alphabet_.size()); }
  int encode(char c) const;
  char decode(int token) const { return alphabet_.at(static_cast<std::size_t>(token)); }
  std::uint64_t hash() const;

  /// Random window of `length + 1` tokens: inputs are the first `length`,
  /// targets the last `length`.
  void sample(Index length, SeededRng& rng, std::vector<int>& inputs,
              std::vector<int>& targets) const;

 private:
  std::string text_;
  std::string alphabet_;
  std::vector<int> index_;  // byte -> token or -1
  std::vector<int> tokens_;
};

/// Path of the bundled corpus.
std::string default_corpus_path();

}  // namespace rezero
