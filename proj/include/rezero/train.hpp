#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rezero/config.hpp"

namespace rezero {

inline constexpr double kDivergedLoss = 1e6;
inline constexpr int kThresholdWindow = 10;

struct RunLog {
  std::vector<double> loss;  // one entry per completed iteration
  std::vector<double> lr;
  /// |alpha_i| per gate: the initial row, then one row per completed epoch.
  std::vector<std::vector<double>> alpha;
  KeyValues config;
  std::vector<std::pair<std::string, double>> metrics;
  bool diverged = false;

  std::optional<double> metric(const std::string& name) const;
};

/// Deterministic training run. Divergence (NaN or loss above kDivergedLoss,
/// or a non-finite gradient) stops the loop with the flag raised.
RunLog train(const TrainConfig& config);

/// First index i whose trailing mean over loss[i-window+1 .. i] is at or
/// below `threshold` (the window is truncated at the start of the trace).
std::optional<long> iterations_to_threshold(const std::vector<double>& loss, double threshold,
                                            int window = kThresholdWindow);
std::optional<long> iterations_to_threshold(const RunLog& log, double threshold,
                                            int window = kThresholdWindow);

}  // namespace rezero
