#include "rezero/tensor.hpp"

#include <sstream>

namespace rezero {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one extent");
  for (Index e : shape) {
    if (e < 1) throw ShapeError("shape extents must be >= 1, got " + shape_string(shape));
  }
}

Tensor::Tensor() : shape_{1}, data_(std::make_shared<const Vector>(Vector::Zero(1))) {}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (shape_size(shape_) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_string(shape_));
  }
  data_ = std::make_shared<const Vector>(std::move(data));
}

Tensor Tensor::create(const Shape& shape, const Init& how) {
  check_shape(shape);
  const Index n = shape_size(shape);
  Vector v(n);
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, init::Zeros>) {
          v.setZero();
        } else if constexpr (std::is_same_v<T, init::Ones>) {
          v.setOnes();
        } else if constexpr (std::is_same_v<T, init::Constant>) {
          v.setConstant(spec.value);
        } else if constexpr (std::is_same_v<T, init::Normal>) {
          if (spec.stddev < 0) throw DomainError("normal init needs stddev >= 0");
          for (Index i = 0; i < n; ++i) v[i] = spec.rng->normal(spec.mean, spec.stddev);
        } else {
          if (spec.hi < spec.lo) throw DomainError("uniform init needs lo <= hi");
          for (Index i = 0; i < n; ++i) v[i] = spec.rng->uniform(spec.lo, spec.hi);
        }
      },
      how);
  return Tensor(shape, std::move(v));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Vector v(m.size());
  Eigen::Map<RowMatrix>(v.data(), m.rows(), m.cols()) = m;
  return Tensor({m.rows(), m.cols()}, std::move(v));
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return (*data_)[0];
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() != 2) throw ShapeError("matrix view needs rank 2, got " + shape_string(shape_));
  return Eigen::Map<const RowMatrix>(data_->data(), shape_[0], shape_[1]);
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.graph_ = nullptr;
  t.node_ = kNoNode;
  return t;
}

Parameter::Parameter(std::string name, Tensor value, ParamGroup group)
    : name_(std::move(name)), group_(group), value_(value.detached()),
      grad_(Vector::Zero(value.size())) {}

void Parameter::set_value(Tensor value) {
  if (value.shape() != value_.shape()) {
    throw ShapeError("parameter " + name_ + " expects shape " + shape_string(value_.shape()) +
                     ", got " + shape_string(value.shape()));
  }
  value_ = value.detached();
}

}  // namespace rezero
