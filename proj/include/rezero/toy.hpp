#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rezero/error.hpp"

// Scalar depth-L toy network x_{i+1} = x_i + alpha * w * x_i with one shared
// weight w and one shared residual weight alpha, so x_L = (1 + alpha w)^L x_0.
// Loss: mean over the inputs of 0.5 (x_L - t x_0)^2.

namespace rezero::toy {

inline constexpr double kDivergence = 1e15;
inline constexpr double kLogFloor = -12.0;

template <typename Scalar = double>
struct State {
  Scalar w = 0;
  Scalar alpha = 0;
};

template <typename Scalar = double>
std::vector<Scalar> default_inputs() {
  return {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8};
}

template <typename Scalar = double>
struct Config {
  int depth = 5;
  std::vector<Scalar> inputs = default_inputs<Scalar>();
  Scalar target = 50;
  Scalar lr = 1e-5;
  long steps = 10000;
  State<Scalar> init{};
  bool freeze_alpha = false;

  void validate() const {
    if (depth < 1) throw ConfigError("toy depth must be >= 1");
    if (inputs.empty()) throw ConfigError("toy training set is empty");
    if (!(lr > 0)) throw ConfigError("toy learning rate must be positive");
    if (steps < 0) throw ConfigError("toy step count must be >= 0");
  }
};

template <typename Scalar>
Scalar forward(const State<Scalar>& s, int depth, Scalar x0) {
  return std::pow(1 + s.alpha * s.w, depth) * x0;
}

template <typename Scalar>
Scalar loss(const State<Scalar>& s, const Config<Scalar>& c) {
  Scalar total = 0;
  for (Scalar x0 : c.inputs) {
    const Scalar r = forward(s, c.depth, x0) - c.target * x0;
    total += Scalar(0.5) * r * r;
  }
  return total / static_cast<Scalar>(c.inputs.size());
}

template <typename Scalar>
struct Grads {
  Scalar w = 0;
  Scalar alpha = 0;
};

/// dC/dw = L alpha x0 (1 + alpha w)^(L-1) C'(x_L), dC/dalpha the same with w
/// in place of alpha, both averaged over the inputs.
template <typename Scalar>
Grads<Scalar> grads(const State<Scalar>& s, const Config<Scalar>& c) {
  const Scalar base = 1 + s.alpha * s.w;
  const Scalar lead = static_cast<Scalar>(c.depth) * std::pow(base, c.depth - 1);
  Scalar acc = 0;
  for (Scalar x0 : c.inputs) {
    const Scalar xl = std::pow(base, c.depth) * x0;
    acc += x0 * (xl - c.target * x0);
  }
  acc /= static_cast<Scalar>(c.inputs.size());
  return {s.alpha * lead * acc, s.w * lead * acc};
}

template <typename Scalar>
struct Step {
  long step = 0;
  Scalar w = 0;
  Scalar alpha = 0;
  Scalar loss = 0;
};

template <typename Scalar>
struct Trajectory {
  std::vector<Step<Scalar>> steps;
  bool diverged = false;
};

template <typename Scalar>
bool diverges(const State<Scalar>& s, const Config<Scalar>& c) {
  for (Scalar x0 : c.inputs) {
    const Scalar xl = forward(s, c.depth, x0);
    if (!std::isfinite(xl) || std::abs(xl) > kDivergence) return true;
  }
  return false;
}

/// Simultaneous gradient descent on (w, alpha). On divergence the trajectory
/// stops at the last state that stayed bounded.
template <typename Scalar>
Trajectory<Scalar> gd(const Config<Scalar>& c) {
  c.validate();
  Trajectory<Scalar> t;
  State<Scalar> s = c.init;
  if (diverges(s, c)) {
    t.diverged = true;
    return t;
  }
  t.steps.push_back({0, s.w, s.alpha, loss(s, c)});
  for (long k = 1; k <= c.steps; ++k) {
    const Grads<Scalar> g = grads(s, c);
    s.w -= c.lr * g.w;
    if (!c.freeze_alpha) s.alpha -= c.lr * g.alpha;
    if (diverges(s, c)) {
      t.diverged = true;
      break;
    }
    t.steps.push_back({k, s.w, s.alpha, loss(s, c)});
  }
  return t;
}

/// First step whose loss is below `threshold`.
template <typename Scalar>
std::optional<long> steps_to_loss(const Trajectory<Scalar>& t, Scalar threshold) {
  for (const auto& st : t.steps) {
    if (st.loss < threshold) return st.step;
  }
  return std::nullopt;
}

template <typename Scalar = double>
struct ContourGrid {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::vector<Scalar> w_axis;
  std::vector<Scalar> alpha_axis;
  Matrix log_grad_norm;  // rows follow w_axis, columns alpha_axis
  long floored = 0;      // zero gradient, clamped to kLogFloor
  long overflowed = 0;   // non-finite norm, clamped to the largest finite log10
};

template <typename Scalar>
std::vector<Scalar> linspace(Scalar lo, Scalar hi, int samples) {
  std::vector<Scalar> out(static_cast<std::size_t>(samples));
  // weighted integer numerators keep points such as 0 in [-1, 2] exact
  const Scalar n = static_cast<Scalar>(samples - 1);
  for (int i = 0; i < samples; ++i) {
    const Scalar k = static_cast<Scalar>(i);
    out[static_cast<std::size_t>(i)] = (lo * (n - k) + hi * k) / n;
  }
  return out;
}

template <typename Scalar>
ContourGrid<Scalar> grad_norm_grid(std::pair<Scalar, Scalar> w_range,
                                   std::pair<Scalar, Scalar> alpha_range, int samples,
                                   const Config<Scalar>& c) {
  if (samples < 2) throw ContractError("contour grid needs at least 2 samples per axis");
  if (!std::isfinite(w_range.first) || !std::isfinite(w_range.second) ||
      !std::isfinite(alpha_range.first) || !std::isfinite(alpha_range.second)) {
    throw ContractError("contour ranges must be finite");
  }
  ContourGrid<Scalar> grid;
  grid.w_axis = linspace(w_range.first, w_range.second, samples);
  grid.alpha_axis = linspace(alpha_range.first, alpha_range.second, samples);
  grid.log_grad_norm.resize(samples, samples);
  const Scalar ceiling = std::log10(std::numeric_limits<Scalar>::max());
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < samples; ++j) {
      const auto g = grads(State<Scalar>{grid.w_axis[static_cast<std::size_t>(i)],
                                         grid.alpha_axis[static_cast<std::size_t>(j)]},
                           c);
      const Scalar n = std::hypot(g.w, g.alpha);
      Scalar v;
      if (!std::isfinite(n)) {
        v = ceiling;
        ++grid.overflowed;
      } else if (n == 0 || std::log10(n) < kLogFloor) {
        v = static_cast<Scalar>(kLogFloor);
        ++grid.floored;
      } else {
        v = std::log10(n);
      }
      grid.log_grad_norm(i, j) = v;
    }
  }
  return grid;
}

}  // namespace rezero::toy
