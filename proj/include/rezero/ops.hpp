#pragma once

#include <span>
#include <vector>

#include "rezero/tensor.hpp"

// Differentiable operations. Each one evaluates eagerly; when any operand
// lives on a graph the result is recorded there together with its backward
// rule, otherwise the result is a plain value.
namespace rezero {

/// Sentinel for reductions over every element.
inline constexpr Index kAllAxes = -1;

Tensor matmul(const Tensor& a, const Tensor& b);

// Binary elementwise kinds accept equal shapes or a single-element `b`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor relu(const Tensor& a);
/// Tanh approximation 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& a);

double gelu_value(double x);
double gelu_derivative(double x);

enum class Elementwise { Add, Sub, Mul, Scale, Relu, Gelu, Exp, Log };
/// Kind-dispatched entry point; `c` is only read by Scale, `b` only by the
/// binary kinds.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b = nullptr, double c = 0.0);

/// Max-shifted softmax along `axis`.
Tensor softmax(const Tensor& a, Index axis);

// Reductions drop the reduced axis; a fully reduced tensor has shape [1].
// `var` is the population variance.
Tensor sum(const Tensor& a, Index axis = kAllAxes);
Tensor mean(const Tensor& a, Index axis = kAllAxes);
Tensor var(const Tensor& a, Index axis = kAllAxes);

Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& a, Index begin, Index end);
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Adds / multiplies a length-cols vector onto every row of a rank-2 tensor.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);

/// Per row: (x - mean) / sqrt(var + eps).
Tensor normalize_rows(const Tensor& a, double eps);

/// Sets entries above the diagonal to -infinity, ahead of a row softmax.
Tensor causal_mask(const Tensor& scores);

/// Rows `indices` of `table`, stacked.
Tensor gather_rows(const Tensor& table, std::span<const int> indices);

/// Mean over rows of -log softmax(logits)[row, target[row]].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

}  // namespace rezero
