#include "rezero/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rezero {

namespace {

Tensor finish(OpKind kind, Tensor value, const std::vector<Tensor>& inputs,
              Graph::Backward backward) {
  Graph* g = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.on_graph()) continue;
    if (g && g != t.graph()) throw ContractError("operands belong to different graphs");
    g = t.graph();
  }
  if (!g) return value;
  return g->record(kind, std::move(value), inputs, std::move(backward));
}

void check_binary(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape() && !b.is_scalar()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " are incompatible");
  }
}

struct AxisSplit {
  Index outer;
  Index n;
  Index inner;
};

AxisSplit split_axis(const Shape& shape, Index axis) {
  if (axis < 0 || axis >= static_cast<Index>(shape.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (Index i = 0; i < axis; ++i) s.outer *= shape[i];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, Index axis) {
  Shape out;
  for (Index i = 0; i < static_cast<Index>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <class F>
Tensor unary(OpKind kind, const Tensor& a, F value_fn, Graph::Backward backward) {
  Vector out = a.data().unaryExpr(value_fn);
  return finish(kind, Tensor(a.shape(), std::move(out)), {a}, std::move(backward));
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.data().allFinite()) throw NumericError(std::string(what) + " produced non-finite values");
}

constexpr double kGeluC = 0.044715;

}  // namespace

double gelu_value(double x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(k * (x + kGeluC * x * x * x)));
}

double gelu_derivative(double x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const double t = std::tanh(k * (x + kGeluC * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * kGeluC * x * x);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul needs rank-2 operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  RowMatrix out = a.matrix() * b.matrix();
  auto sa = a.shared_data();
  auto sb = b.shared_data();
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  return finish(OpKind::MatMul, Tensor::from_matrix(out), {a, b},
                [sa, sb, m, k, n](const Vector& g, GradSink& sink) {
                  Eigen::Map<const RowMatrix> G(g.data(), m, n);
                  Eigen::Map<const RowMatrix> A(sa->data(), m, k);
                  Eigen::Map<const RowMatrix> B(sb->data(), k, n);
                  if (sink.wants(0)) {
                    Vector ga(m * k);
                    Eigen::Map<RowMatrix>(ga.data(), m, k).noalias() = G * B.transpose();
                    sink.add(0, ga);
                  }
                  if (sink.wants(1)) {
                    Vector gb(k * n);
                    Eigen::Map<RowMatrix>(gb.data(), k, n).noalias() = A.transpose() * G;
                    sink.add(1, gb);
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "add");
  const bool broadcast = a.shape() != b.shape();
  Vector out = broadcast ? Vector(a.data().array() + b[0]) : Vector(a.data() + b.data());
  return finish(OpKind::Add, Tensor(a.shape(), std::move(out)), {a, b},
                [broadcast](const Vector& g, GradSink& sink) {
                  sink.add(0, g);
                  if (sink.wants(1)) sink.add(1, broadcast ? Vector::Constant(1, g.sum()) : g);
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "sub");
  const bool broadcast = a.shape() != b.shape();
  Vector out = broadcast ? Vector(a.data().array() - b[0]) : Vector(a.data() - b.data());
  return finish(OpKind::Sub, Tensor(a.shape(), std::move(out)), {a, b},
                [broadcast](const Vector& g, GradSink& sink) {
                  sink.add(0, g);
                  if (sink.wants(1)) sink.add(1, broadcast ? Vector::Constant(1, -g.sum()) : Vector(-g));
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "mul");
  const bool broadcast = a.shape() != b.shape();
  Vector out = broadcast ? Vector(a.data() * b[0]) : Vector(a.data().cwiseProduct(b.data()));
  auto sa = a.shared_data();
  auto sb = b.shared_data();
  return finish(OpKind::Mul, Tensor(a.shape(), std::move(out)), {a, b},
                [sa, sb, broadcast](const Vector& g, GradSink& sink) {
                  if (broadcast) {
                    if (sink.wants(0)) sink.add(0, g * (*sb)[0]);
                    if (sink.wants(1)) sink.add(1, Vector::Constant(1, g.dot(*sa)));
                  } else {
                    if (sink.wants(0)) sink.add(0, g.cwiseProduct(*sb));
                    if (sink.wants(1)) sink.add(1, g.cwiseProduct(*sa));
                  }
                });
}

Tensor scale(const Tensor& a, double c) {
  return finish(OpKind::Scale, Tensor(a.shape(), a.data() * c), {a},
                [c](const Vector& g, GradSink& sink) { sink.add(0, g * c); });
}

Tensor add_scalar(const Tensor& a, double c) {
  return finish(OpKind::AddScalar, Tensor(a.shape(), Vector(a.data().array() + c)), {a},
                [](const Vector& g, GradSink& sink) { sink.add(0, g); });
}

// The derivative at exactly zero is taken as 0.
Tensor relu(const Tensor& a) {
  auto sa = a.shared_data();
  return unary(OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
               [sa](const Vector& g, GradSink& sink) {
                 sink.add(0, g.cwiseProduct(
                                 sa->unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; })));
               });
}

Tensor gelu(const Tensor& a) {
  auto sa = a.shared_data();
  return unary(OpKind::Gelu, a, gelu_value, [sa](const Vector& g, GradSink& sink) {
    sink.add(0, g.cwiseProduct(sa->unaryExpr(&gelu_derivative)));
  });
}

Tensor sigmoid(const Tensor& a) {
  Vector out = a.data().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  auto so = std::make_shared<const Vector>(out);
  return finish(OpKind::Sigmoid, Tensor(a.shape(), std::move(out)), {a},
                [so](const Vector& g, GradSink& sink) {
                  sink.add(0, g.cwiseProduct(
                                  so->unaryExpr([](double y) { return y * (1.0 - y); })));
                });
}

Tensor exp(const Tensor& a) {
  Vector out = a.data().array().exp();
  auto so = std::make_shared<const Vector>(out);
  Tensor result(a.shape(), std::move(out));
  check_finite(result, "exp");
  return finish(OpKind::Exp, std::move(result), {a},
                [so](const Vector& g, GradSink& sink) { sink.add(0, g.cwiseProduct(*so)); });
}

Tensor log(const Tensor& a) {
  if ((a.data().array() <= 0.0).any()) throw DomainError("log of non-positive value");
  auto sa = a.shared_data();
  return unary(OpKind::Log, a, [](double x) { return std::log(x); },
               [sa](const Vector& g, GradSink& sink) { sink.add(0, g.cwiseQuotient(*sa)); });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b, double c) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw ContractError("binary elementwise kind needs a second operand");
    return *b;
  };
  switch (kind) {
    case Elementwise::Add:
      return add(a, need_b());
    case Elementwise::Sub:
      return sub(a, need_b());
    case Elementwise::Mul:
      return mul(a, need_b());
    case Elementwise::Scale:
      return scale(a, c);
    case Elementwise::Relu:
      return relu(a);
    case Elementwise::Gelu:
      return gelu(a);
    case Elementwise::Exp:
      return exp(a);
    case Elementwise::Log:
      return log(a);
  }
  throw ContractError("unknown elementwise kind");
}

Tensor softmax(const Tensor& a, Index axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  const Vector& x = a.data();
  Vector y(x.size());
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.n * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (Index k = 0; k < s.n; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double z = 0.0;
      for (Index k = 0; k < s.n; ++k) {
        const double e = std::exp(x[base + k * s.inner] - mx);
        y[base + k * s.inner] = e;
        z += e;
      }
      for (Index k = 0; k < s.n; ++k) y[base + k * s.inner] /= z;
    }
  }
  auto sy = std::make_shared<const Vector>(y);
  return finish(OpKind::Softmax, Tensor(a.shape(), std::move(y)), {a},
                [sy, s](const Vector& g, GradSink& sink) {
                  const Vector& y = *sy;
                  Vector gx(y.size());
                  for (Index o = 0; o < s.outer; ++o) {
                    for (Index i = 0; i < s.inner; ++i) {
                      const Index base = o * s.n * s.inner + i;
                      double dot = 0.0;
                      for (Index k = 0; k < s.n; ++k) {
                        dot += g[base + k * s.inner] * y[base + k * s.inner];
                      }
                      for (Index k = 0; k < s.n; ++k) {
                        const Index j = base + k * s.inner;
                        gx[j] = y[j] * (g[j] - dot);
                      }
                    }
                  }
                  sink.add(0, gx);
                });
}

namespace {

enum class ReduceKind { Sum, Mean, Var };

Tensor reduce(const Tensor& a, Index axis, ReduceKind kind) {
  AxisSplit s{1, a.size(), 1};
  Shape out_shape{1};
  if (axis != kAllAxes) {
    s = split_axis(a.shape(), axis);
    out_shape = drop_axis(a.shape(), axis);
  }
  const Vector& x = a.data();
  Vector out = Vector::Zero(s.outer * s.inner);
  Vector means = Vector::Zero(s.outer * s.inner);
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.n * s.inner + i;
      double total = 0.0;
      for (Index k = 0; k < s.n; ++k) total += x[base + k * s.inner];
      const double mu = total / static_cast<double>(s.n);
      means[o * s.inner + i] = mu;
      if (kind == ReduceKind::Sum) {
        out[o * s.inner + i] = total;
      } else if (kind == ReduceKind::Mean) {
        out[o * s.inner + i] = mu;
      } else {
        double acc = 0.0;
        for (Index k = 0; k < s.n; ++k) {
          const double d = x[base + k * s.inner] - mu;
          acc += d * d;
        }
        out[o * s.inner + i] = acc / static_cast<double>(s.n);
      }
    }
  }
  const OpKind op = kind == ReduceKind::Sum    ? OpKind::Sum
                    : kind == ReduceKind::Mean ? OpKind::Mean
                                               : OpKind::Var;
  auto sx = a.shared_data();
  auto smu = std::make_shared<const Vector>(std::move(means));
  return finish(op, Tensor(out_shape, std::move(out)), {a},
                [sx, smu, s, kind](const Vector& g, GradSink& sink) {
                  Vector gx(sx->size());
                  const double inv_n = 1.0 / static_cast<double>(s.n);
                  for (Index o = 0; o < s.outer; ++o) {
                    for (Index i = 0; i < s.inner; ++i) {
                      const Index r = o * s.inner + i;
                      const Index base = o * s.n * s.inner + i;
                      for (Index k = 0; k < s.n; ++k) {
                        const Index j = base + k * s.inner;
                        switch (kind) {
                          case ReduceKind::Sum:
                            gx[j] = g[r];
                            break;
                          case ReduceKind::Mean:
                            gx[j] = g[r] * inv_n;
                            break;
                          case ReduceKind::Var:
                            gx[j] = g[r] * 2.0 * ((*sx)[j] - (*smu)[r]) * inv_n;
                            break;
                        }
                      }
                    }
                  }
                  sink.add(0, gx);
                });
}

}  // namespace

Tensor sum(const Tensor& a, Index axis) { return reduce(a, axis, ReduceKind::Sum); }
Tensor mean(const Tensor& a, Index axis) { return reduce(a, axis, ReduceKind::Mean); }
Tensor var(const Tensor& a, Index axis) { return reduce(a, axis, ReduceKind::Var); }

Tensor transpose(const Tensor& a) {
  const Index m = a.dim(0), n = a.dim(1);
  RowMatrix t = a.matrix().transpose();
  return finish(OpKind::Transpose, Tensor::from_matrix(t), {a},
                [m, n](const Vector& g, GradSink& sink) {
                  Vector gx(m * n);
                  Eigen::Map<RowMatrix>(gx.data(), m, n) =
                      Eigen::Map<const RowMatrix>(g.data(), n, m).transpose();
                  sink.add(0, gx);
                });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  check_shape(shape);
  if (shape_size(shape) != a.size()) {
    throw ShapeError("cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  return finish(OpKind::Reshape, Tensor(shape, a.data()), {a},
                [](const Vector& g, GradSink& sink) { sink.add(0, g); });
}

Tensor slice_cols(const Tensor& a, Index begin, Index end) {
  if (a.rank() != 2) throw ShapeError("slice_cols needs rank 2");
  if (begin < 0 || end > a.dim(1) || begin >= end) {
    throw ShapeError("column range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(a.shape()));
  }
  const Index m = a.dim(0), n = a.dim(1), w = end - begin;
  RowMatrix out = a.matrix().middleCols(begin, w);
  return finish(OpKind::SliceCols, Tensor::from_matrix(out), {a},
                [m, n, w, begin](const Vector& g, GradSink& sink) {
                  Vector gx = Vector::Zero(m * n);
                  Eigen::Map<RowMatrix>(gx.data(), m, n).middleCols(begin, w) =
                      Eigen::Map<const RowMatrix>(g.data(), m, w);
                  sink.add(0, gx);
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols needs at least one part");
  const Index m = parts.front().dim(0);
  Index total = 0;
  std::vector<Index> widths;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != m) throw ShapeError("concat_cols parts need equal row counts");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  RowMatrix out(m, total);
  Index col = 0;
  for (const Tensor& p : parts) {
    out.middleCols(col, p.dim(1)) = p.matrix();
    col += p.dim(1);
  }
  return finish(OpKind::ConcatCols, Tensor::from_matrix(out), parts,
                [m, total, widths](const Vector& g, GradSink& sink) {
                  Eigen::Map<const RowMatrix> G(g.data(), m, total);
                  Index c = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    if (sink.wants(k)) {
                      Vector part(m * widths[k]);
                      Eigen::Map<RowMatrix>(part.data(), m, widths[k]) = G.middleCols(c, widths[k]);
                      sink.add(k, part);
                    }
                    c += widths[k];
                  }
                });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (a.rank() != 2 || row.size() != a.dim(1)) {
    throw ShapeError("add_row: row of " + shape_string(row.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  const Index m = a.dim(0), n = a.dim(1);
  RowMatrix out = a.matrix().rowwise() + row.data().transpose();
  return finish(OpKind::AddRow, Tensor::from_matrix(out), {a, row},
                [m, n](const Vector& g, GradSink& sink) {
                  sink.add(0, g);
                  if (sink.wants(1)) {
                    sink.add(1, Eigen::Map<const RowMatrix>(g.data(), m, n).colwise().sum().transpose());
                  }
                });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  if (a.rank() != 2 || row.size() != a.dim(1)) {
    throw ShapeError("mul_row: row of " + shape_string(row.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  const Index m = a.dim(0), n = a.dim(1);
  RowMatrix out = a.matrix().array().rowwise() * row.data().transpose().array();
  auto sa = a.shared_data();
  auto sr = row.shared_data();
  return finish(OpKind::MulRow, Tensor::from_matrix(out), {a, row},
                [m, n, sa, sr](const Vector& g, GradSink& sink) {
                  Eigen::Map<const RowMatrix> G(g.data(), m, n);
                  if (sink.wants(0)) {
                    Vector ga(m * n);
                    Eigen::Map<RowMatrix>(ga.data(), m, n) =
                        G.array().rowwise() * sr->transpose().array();
                    sink.add(0, ga);
                  }
                  if (sink.wants(1)) {
                    Eigen::Map<const RowMatrix> A(sa->data(), m, n);
                    sink.add(1, G.cwiseProduct(A).colwise().sum().transpose());
                  }
                });
}

Tensor normalize_rows(const Tensor& a, double eps) {
  if (a.rank() != 2) throw ShapeError("normalize_rows needs rank 2");
  if (!(eps > 0.0)) throw DomainError("normalize_rows needs eps > 0");
  const Index m = a.dim(0), n = a.dim(1);
  auto X = a.matrix();
  RowMatrix y(m, n);
  Vector inv_std(m);
  for (Index r = 0; r < m; ++r) {
    const double mu = X.row(r).mean();
    const double v = (X.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    y.row(r) = (X.row(r).array() - mu) * inv_std[r];
  }
  Tensor out = Tensor::from_matrix(y);
  auto sy = out.shared_data();
  return finish(OpKind::NormalizeRows, out, {a},
                [m, n, sy, inv_std](const Vector& g, GradSink& sink) {
                  Eigen::Map<const RowMatrix> G(g.data(), m, n);
                  Eigen::Map<const RowMatrix> Y(sy->data(), m, n);
                  Vector gx(m * n);
                  Eigen::Map<RowMatrix> GX(gx.data(), m, n);
                  for (Index r = 0; r < m; ++r) {
                    const double gm = G.row(r).mean();
                    const double gy = G.row(r).dot(Y.row(r)) / static_cast<double>(n);
                    GX.row(r) = (G.row(r).array() - gm - Y.row(r).array() * gy) * inv_std[r];
                  }
                  sink.add(0, gx);
                });
}

Tensor causal_mask(const Tensor& scores) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) {
    throw ShapeError("causal_mask needs a square score matrix");
  }
  const Index n = scores.dim(0);
  RowMatrix out = scores.matrix();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out(i, j) = -std::numeric_limits<double>::infinity();
  }
  return finish(OpKind::CausalMask, Tensor::from_matrix(out), {scores},
                [n](const Vector& g, GradSink& sink) {
                  Vector gx = g;
                  Eigen::Map<RowMatrix> G(gx.data(), n, n);
                  for (Index i = 0; i < n; ++i) {
                    for (Index j = i + 1; j < n; ++j) G(i, j) = 0.0;
                  }
                  sink.add(0, gx);
                });
}

Tensor gather_rows(const Tensor& table, std::span<const int> indices) {
  if (table.rank() != 2) throw ShapeError("gather_rows needs a rank-2 table");
  const Index rows = table.dim(0), cols = table.dim(1);
  const Index m = static_cast<Index>(indices.size());
  if (m == 0) throw ShapeError("gather_rows needs at least one index");
  std::vector<int> idx(indices.begin(), indices.end());
  RowMatrix out(m, cols);
  for (Index r = 0; r < m; ++r) {
    if (idx[r] < 0 || idx[r] >= rows) {
      throw ShapeError("index " + std::to_string(idx[r]) + " out of range for table of " +
                       std::to_string(rows) + " rows");
    }
    out.row(r) = table.matrix().row(idx[r]);
  }
  return finish(OpKind::GatherRows, Tensor::from_matrix(out), {table},
                [idx, rows, cols, m](const Vector& g, GradSink& sink) {
                  Vector gt = Vector::Zero(rows * cols);
                  Eigen::Map<RowMatrix> GT(gt.data(), rows, cols);
                  Eigen::Map<const RowMatrix> G(g.data(), m, cols);
                  for (Index r = 0; r < m; ++r) GT.row(idx[r]) += G.row(r);
                  sink.add(0, gt);
                });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy needs rank-2 logits");
  const Index m = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(targets.size()) != m) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(m) + " rows");
  }
  auto Z = logits.matrix();
  RowMatrix probs(m, k);
  double loss = 0.0;
  std::vector<int> tgt(targets.begin(), targets.end());
  for (Index r = 0; r < m; ++r) {
    if (tgt[r] < 0 || tgt[r] >= k) throw ShapeError("cross_entropy target out of range");
    const double mx = Z.row(r).maxCoeff();
    const double lse = mx + std::log((Z.row(r).array() - mx).exp().sum());
    probs.row(r) = (Z.row(r).array() - lse).exp();
    loss += lse - Z(r, tgt[r]);
  }
  loss /= static_cast<double>(m);
  return finish(OpKind::CrossEntropy, Tensor::scalar(loss), {logits},
                [probs = std::move(probs), tgt, m, k](const Vector& g, GradSink& sink) {
                  Vector gz(m * k);
                  Eigen::Map<RowMatrix> GZ(gz.data(), m, k);
                  GZ = probs;
                  for (Index r = 0; r < m; ++r) GZ(r, tgt[r]) -= 1.0;
                  GZ *= g[0] / static_cast<double>(m);
                  sink.add(0, gz);
                });
}

}  // namespace rezero
