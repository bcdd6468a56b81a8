#include "rezero/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rezero/error.hpp"

namespace rezero {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

void check_counts(Index samples, int classes) {
  if (samples < 1) throw ConfigError("dataset needs at least one sample");
  if (classes < 2) throw ConfigError("dataset needs at least two classes");
}

}  // namespace

DatasetKind parse_dataset(std::string_view name) {
  if (name == "blobs") return DatasetKind::Blobs;
  if (name == "spirals") return DatasetKind::Spirals;
  throw ConfigError("unknown dataset '" + std::string(name) + "'");
}

std::string_view to_string(DatasetKind kind) {
  return kind == DatasetKind::Blobs ? "blobs" : "spirals";
}

Dataset make_blobs(Index samples, int classes, double separation, double noise, SeededRng& rng) {
  check_counts(samples, classes);
  Dataset d;
  d.classes = classes;
  d.inputs.resize(samples, 2);
  d.labels.resize(static_cast<std::size_t>(samples));
  for (Index i = 0; i < samples; ++i) {
    const int c = static_cast<int>(i % classes);
    const double angle = 2.0 * std::numbers::pi * c / classes;
    d.inputs(i, 0) = separation * std::cos(angle) + rng.normal(0.0, noise);
    d.inputs(i, 1) = separation * std::sin(angle) + rng.normal(0.0, noise);
    d.labels[static_cast<std::size_t>(i)] = c;
  }
  return d;
}

Dataset make_spirals(Index samples, int classes, double turns, double noise, SeededRng& rng) {
  check_counts(samples, classes);
  Dataset d;
  d.classes = classes;
  d.inputs.resize(samples, 2);
  d.labels.resize(static_cast<std::size_t>(samples));
  const Index per_class = (samples + classes - 1) / classes;
  for (Index i = 0; i < samples; ++i) {
    const int c = static_cast<int>(i % classes);
    const double r = static_cast<double>(i / classes + 1) / static_cast<double>(per_class);
    const double angle =
        2.0 * std::numbers::pi * (turns * r + static_cast<double>(c) / classes);
    d.inputs(i, 0) = r * std::cos(angle) + rng.normal(0.0, noise);
    d.inputs(i, 1) = r * std::sin(angle) + rng.normal(0.0, noise);
    d.labels[static_cast<std::size_t>(i)] = c;
  }
  return d;
}

Dataset select_rows(const Dataset& d, const std::vector<Index>& rows) {
  Dataset out;
  out.classes = d.classes;
  out.inputs.resize(static_cast<Index>(rows.size()), d.inputs.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Index>(i)) = d.inputs.row(rows[i]);
    out.labels[i] = d.labels.at(static_cast<std::size_t>(rows[i]));
  }
  return out;
}

std::uint64_t dataset_hash(const Dataset& d) {
  std::uint64_t h = fnv1a(d.inputs.data(), sizeof(double) * static_cast<std::size_t>(d.inputs.size()),
                          kFnvOffset);
  return fnv1a(d.labels.data(), sizeof(int) * d.labels.size(), h);
}

Corpus::Corpus(std::string text) : text_(std::move(text)), index_(256, -1) {
  if (text_.size() < 2) throw ConfigError("corpus needs at least two characters");
  alphabet_ = text_;
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    index_[static_cast<unsigned char>(alphabet_[i])] = static_cast<int>(i);
  }
  tokens_.reserve(text_.size());
  for (char c : text_) tokens_.push_back(encode(c));
}

Corpus Corpus::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return Corpus(buf.str());
}

int Corpus::encode(char c) const {
  const int t = index_[static_cast<unsigned char>(c)];
  if (t < 0) throw DomainError("character outside the corpus vocabulary");
  return t;
}

std::uint64_t Corpus::hash() const { return fnv1a(text_.data(), text_.size(), kFnvOffset); }

void Corpus::sample(Index length, SeededRng& rng, std::vector<int>& inputs,
                    std::vector<int>& targets) const {
  const auto n = static_cast<std::size_t>(length);
  if (length < 1 || n + 1 > tokens_.size()) throw ConfigError("sequence length exceeds corpus");
  const std::size_t start = rng.uniform_index(tokens_.size() - n);
  inputs.assign(tokens_.begin() + static_cast<std::ptrdiff_t>(start),
                tokens_.begin() + static_cast<std::ptrdiff_t>(start + n));
  targets.assign(tokens_.begin() + static_cast<std::ptrdiff_t>(start + 1),
                 tokens_.begin() + static_cast<std::ptrdiff_t>(start + n + 1));
}

std::string default_corpus_path() { return std::string(REZERO_DATA_DIR) + "/sonnets.txt"; }

}  // namespace rezero
