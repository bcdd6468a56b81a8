#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "rezero/tensor.hpp"

namespace rezero {

enum class OptimizerKind { Sgd, Adagrad };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adagrad;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double eps = 1e-10;
  /// Fixed learning rate for ParamGroup::ResidualWeight parameters.
  std::optional<double> residual_lr;
};

/// sgd:     v <- mu v + g + wd theta;  theta <- theta - lr v
/// adagrad: G <- G + g^2;             theta <- theta - lr g / (sqrt(G) + eps)
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Parameter*> params);

  /// Applies one update from the gradients currently stored in the
  /// parameters. If any gradient is not finite nothing moves, the divergence
  /// flag is raised and false is returned. `momentum` overrides the
  /// configured SGD momentum for this step.
  bool step(double lr, std::optional<double> momentum = std::nullopt);
  void zero_grad();

  bool diverged() const { return diverged_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Parameter*>& params() const { return params_; }
  const Vector& accumulator(std::size_t i) const { return state_.at(i); }

 private:
  OptimizerConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Vector> state_;
  bool diverged_ = false;
};

}  // namespace rezero
