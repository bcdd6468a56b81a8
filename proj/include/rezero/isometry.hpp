#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rezero/nn.hpp"
#include "rezero/svd.hpp"
#include "rezero/tensor.hpp"

namespace rezero {

inline constexpr double kVanishingThreshold = 1e-6;
inline constexpr double kLogFloor = 1e-12;
inline constexpr int kHistogramBins = 50;

using ModelFn = std::function<Tensor(const Tensor&)>;

enum class JacobianSource { Vjp, FiniteDifference };

/// d vec(f(x)) / d vec(x), row-major flattening on both sides.
struct JacobianMatrix {
  Eigen::MatrixXd values;
  JacobianSource source = JacobianSource::Vjp;
};

/// One reverse sweep per output element on a single recorded graph.
JacobianMatrix jacobian(const ModelFn& f, const Tensor& x);
/// Runs `model` in eval mode.
JacobianMatrix jacobian(Module& model, const Tensor& x);

/// Central differences, one column per input element.
JacobianMatrix jacobian_fd(const ModelFn& f, const Tensor& x, double h = 1e-6);

struct HistogramConfig {
  int bins = kHistogramBins;
  double lo = -12.0;
  double hi = 2.0;
};

/// Histogram of log10(max(sigma, kLogFloor)). Values below lo go to
/// `underflow`; values at or above hi land in the last bin.
struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<long> counts;
  long underflow = 0;
};

Histogram log_histogram(const Eigen::VectorXd& sigma, const HistogramConfig& config = {});

struct SpectrumResult {
  Eigen::VectorXd singular_values;  // descending
  double chi = 0.0;
  long vanishing_count = 0;
  double threshold = kVanishingThreshold;
  Eigen::VectorXd log10_values;
  Histogram histogram;
};

SpectrumResult spectrum_stats(const Eigen::VectorXd& sigma, double tau = kVanishingThreshold,
                              const HistogramConfig& config = {});

/// SVD of the Jacobian followed by spectrum_stats.
SpectrumResult analyze(const JacobianMatrix& j, double tau = kVanishingThreshold,
                       const HistogramConfig& config = {});

/// Cosine similarity of two signals after each block. An entry is empty when
/// either propagated signal has zero norm.
std::vector<std::optional<double>> cosine_propagation(const std::vector<Module*>& blocks,
                                                      const Tensor& x, const Tensor& x2);

std::optional<double> cosine_similarity(const Tensor& a, const Tensor& b);

}  // namespace rezero
