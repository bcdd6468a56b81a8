#pragma once

#include <functional>
#include <vector>

#include "rezero/tensor.hpp"

namespace rezero {

using TensorFn = std::function<Tensor(const Tensor&)>;

/// u^T (df/dx), shaped like x.
Tensor vjp(const TensorFn& f, const Tensor& x, const Tensor& u);

/// Largest elementwise relative error between the backward gradient of a
/// scalar-valued `f` at `x` and central differences with step `h`. The
/// denominator is max(|a|, |b|, 1e-8).
double grad_check(const TensorFn& f, const Tensor& x, double h = 1e-6);

/// Same comparison for parameter gradients. `loss` builds the scalar loss on
/// the given graph (or evaluates it plainly when passed nullptr).
double grad_check(const std::function<Tensor(Graph*)>& loss, const std::vector<Parameter*>& params,
                  double h = 1e-6);

double relative_error(double a, double b);

}  // namespace rezero
