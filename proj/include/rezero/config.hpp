#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rezero/data.hpp"
#include "rezero/models.hpp"
#include "rezero/optim.hpp"
#include "rezero/schedule.hpp"

namespace rezero {

struct DataConfig {
  DatasetKind kind = DatasetKind::Spirals;
  Index samples = 512;
  int classes = 2;
  double noise = 0.05;
  double separation = 3.0;  // blobs
  double turns = 1.5;       // spirals
  std::string corpus;       // empty: bundled corpus (language models only)
};

struct TrainConfig {
  ModelConfig model;
  DataConfig data;
  Index batch = 64;  // rows for fc, sequences for the language model
  OptimizerConfig optimizer;
  double lr = 0.01;
  long warmup = 0;                  // > 0: linear warm-up to lr over this many iterations
  std::optional<Schedule> schedule; // overrides lr / warmup when set
  long iterations = 500;
  long epoch_iterations = 0;  // 0: samples / batch for fc, 50 for the language model
  std::uint64_t seed = 0;
  double threshold = 0.1;
};

Schedule effective_schedule(const TrainConfig& c);
long effective_epoch_iterations(const TrainConfig& c);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::string& path);

/// Sets one field; unknown keys and malformed values raise ConfigError.
void apply_setting(TrainConfig& c, std::string_view key, std::string_view value);
void apply_settings(TrainConfig& c, const KeyValues& kv);

/// Every key with its current value, in a fixed order. Applying the result to
/// a default TrainConfig reproduces `c`.
KeyValues to_key_values(const TrainConfig& c);

inline constexpr const char* kSeedEnv = "REZERO_LAB_SEED";

/// Replaces the seed with $REZERO_LAB_SEED when that is set.
void apply_seed_env(TrainConfig& c);
std::optional<std::uint64_t> seed_from_env();

}  // namespace rezero
