#include "rezero/optim.hpp"

#include <string>

#include "rezero/error.hpp"

namespace rezero {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adagrad") return OptimizerKind::Adagrad;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Sgd ? "sgd" : "adagrad";
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
  if (config_.momentum < 0.0 || config_.momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (config_.weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (!(config_.eps > 0.0)) throw ConfigError("adagrad eps must be positive");
  if (config_.residual_lr && !(*config_.residual_lr > 0.0)) {
    throw ConfigError("residual-weight learning rate must be positive");
  }
  state_.reserve(params_.size());
  for (Parameter* p : params_) state_.push_back(Vector::Zero(p->value().size()));
}

bool Optimizer::step(double lr, std::optional<double> momentum) {
  for (Parameter* p : params_) {
    if (!p->grad().allFinite()) {
      diverged_ = true;
      return false;
    }
  }
  const double mu = momentum.value_or(config_.momentum);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    const double rate =
        (p.group() == ParamGroup::ResidualWeight && config_.residual_lr) ? *config_.residual_lr : lr;
    const Vector& g = p.grad();
    Vector& s = state_[i];
    Vector theta = p.value().data();
    if (config_.kind == OptimizerKind::Sgd) {
      s = mu * s + g + config_.weight_decay * theta;
      theta -= rate * s;
    } else {
      s.array() += g.array().square();
      theta.array() -= rate * g.array() / (s.array().sqrt() + config_.eps);
    }
    p.set_value(theta);
  }
  return true;
}

void Optimizer::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace rezero
