#pragma once

#include <cmath>

#include "rezero/rng.hpp"
#include "rezero/tensor.hpp"

namespace rezero::testing {

inline Tensor randn(const Shape& shape, SeededRng& rng, double sd = 1.0) {
  return Tensor::create(shape, init::Normal{0.0, sd, &rng});
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

inline Tensor from_rows(const RowMatrix& m) { return Tensor::from_matrix(m); }

}  // namespace rezero::testing
