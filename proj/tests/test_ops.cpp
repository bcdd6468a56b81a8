#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "rezero/autodiff.hpp"
#include "rezero/error.hpp"
#include "rezero/ops.hpp"

using namespace rezero;
using testing::max_abs_diff;
using testing::randn;

namespace {

RowMatrix loop_matmul(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix c = RowMatrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Tensor vec(std::initializer_list<double> v) {
  Vector d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d[i++] = x;
  return Tensor({static_cast<Index>(v.size())}, d);
}

}  // namespace

TEST_CASE("matmul") {
  RowMatrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Tensor c = matmul(Tensor::from_matrix(a), Tensor::from_matrix(b));
  CHECK(c.matrix()(0, 0) == 19);
  CHECK(c.matrix()(0, 1) == 22);
  CHECK(c.matrix()(1, 0) == 43);
  CHECK(c.matrix()(1, 1) == 50);

  Tensor eye = Tensor::from_matrix(RowMatrix::Identity(2, 2));
  CHECK(max_abs_diff(matmul(eye, Tensor::from_matrix(b)), Tensor::from_matrix(b)) == 0.0);

  SeededRng rng(2);
  Tensor x = randn({4, 5}, rng), y = randn({5, 3}, rng);
  CHECK(max_abs_diff(matmul(x, y), Tensor::from_matrix(loop_matmul(x.matrix(), y.matrix()))) <
        1e-12);
  CHECK_THROWS_AS(matmul(x, x), ShapeError);
}

TEST_CASE("gradient of sum(A B) w.r.t. A is the row sums of B replicated") {
  SeededRng rng(4);
  Tensor a = randn({3, 4}, rng), b = randn({4, 2}, rng);
  Tensor g = vjp([&](const Tensor& x) { return sum(matmul(x, b)); }, a, Tensor::ones({1}));
  const Vector row_sums = b.matrix().rowwise().sum();
  for (Index i = 0; i < 3; ++i)
    for (Index k = 0; k < 4; ++k) CHECK(g.matrix()(i, k) == doctest::Approx(row_sums[k]).epsilon(1e-12));
  CHECK(grad_check([&](const Tensor& x) { return sum(matmul(x, b)); }, a) < 1e-8);
}

TEST_CASE("elementwise kinds") {
  Tensor r = relu(vec({-1, 0, 2}));
  CHECK(r[0] == 0);
  CHECK(r[1] == 0);
  CHECK(r[2] == 2);
  CHECK(gelu_value(0.0) == 0.0);
  CHECK(gelu_value(1.0) == doctest::Approx(0.841192).epsilon(1e-6));
  // tanh form evaluated independently
  const double k = std::sqrt(2.0 / M_PI);
  CHECK(gelu_value(-0.7) == doctest::Approx(0.5 * -0.7 * (1 + std::tanh(k * (-0.7 + 0.044715 * -0.343)))));

  Tensor a = vec({1, 2, 3}), b = vec({4, 5, 6});
  CHECK(add(a, b)[2] == 9);
  CHECK(sub(a, b)[0] == -3);
  CHECK(mul(a, b)[1] == 10);
  CHECK(mul(a, Tensor::scalar(2.0))[2] == 6);
  CHECK(scale(a, -2.0)[0] == -2);
  CHECK(elementwise(Elementwise::Scale, a, nullptr, 3.0)[1] == 6);
  CHECK(elementwise(Elementwise::Add, a, &b)[0] == 5);
  CHECK(exp(vec({0.0}))[0] == 1.0);
  CHECK(log(vec({1.0}))[0] == 0.0);
  CHECK(sigmoid(vec({0.0}))[0] == 0.5);

  CHECK_THROWS_AS(add(a, Tensor::ones({2})), ShapeError);
  CHECK_THROWS_AS(log(vec({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(log(vec({-1.0})), DomainError);
}

TEST_CASE("relu has zero derivative at zero and is idempotent") {
  Tensor g = vjp([](const Tensor& x) { return relu(x); }, vec({-1, 0, 2}), Tensor::ones({3}));
  CHECK(g[0] == 0);
  CHECK(g[1] == 0);
  CHECK(g[2] == 1);
  SeededRng rng(9);
  Tensor x = randn({100}, rng);
  CHECK(max_abs_diff(relu(relu(x)), relu(x)) == 0.0);
}

TEST_CASE("softmax") {
  Tensor u = softmax(Tensor::zeros({1, 3}), 1);
  for (Index i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3.0));
  Tensor big = softmax(Tensor::constant({1, 2}, 1000.0), 1);
  CHECK(big[0] == 0.5);
  CHECK(big[1] == 0.5);

  Tensor s = softmax(Tensor({1, 3}, Vector::LinSpaced(3, 1, 3)), 1);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(s[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(0.090031).epsilon(1e-5));
  CHECK(s[1] == doctest::Approx(0.244728).epsilon(1e-5));
  CHECK(s[2] == doctest::Approx(0.665241).epsilon(1e-5));

  CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2}), 2), ShapeError);
}

TEST_CASE("softmax rows sum to one and ignore a shift") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = randn({4, 7}, rng, 5.0);
    Tensor s = softmax(x, 1);
    for (Index r = 0; r < 4; ++r) CHECK(std::abs(s.matrix().row(r).sum() - 1.0) < 1e-12);
    Tensor shifted = softmax(add_scalar(x, rng.uniform(-50, 50)), 1);
    CHECK(max_abs_diff(s, shifted) < 1e-10);
    Tensor cols = softmax(x, 0);
    for (Index c = 0; c < 7; ++c) CHECK(std::abs(cols.matrix().col(c).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("reductions") {
  CHECK(mean(vec({1, 2, 3})).item() == 2.0);
  CHECK(var(vec({1, 2, 3})).item() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  RowMatrix m(2, 2);
  m << 1, 2, 3, 4;
  Tensor s0 = sum(Tensor::from_matrix(m), 0);
  CHECK(s0.shape() == Shape{2});
  CHECK(s0[0] == 4);
  CHECK(s0[1] == 6);
  Tensor s1 = sum(Tensor::from_matrix(m), 1);
  CHECK(s1[0] == 3);
  CHECK(s1[1] == 7);
  CHECK(sum(Tensor::from_matrix(m)).shape() == Shape{1});
  CHECK_THROWS_AS(sum(Tensor::from_matrix(m), 2), ShapeError);
}

TEST_CASE("shape operations") {
  SeededRng rng(5);
  Tensor x = randn({3, 4}, rng);
  CHECK(transpose(x).matrix() == x.matrix().transpose());
  CHECK(reshape(x, {4, 3}).data() == x.data());
  CHECK_THROWS_AS(reshape(x, {5, 3}), ShapeError);
  Tensor left = slice_cols(x, 0, 1), right = slice_cols(x, 1, 4);
  CHECK(max_abs_diff(concat_cols({left, right}), x) == 0.0);
  CHECK_THROWS_AS(slice_cols(x, 2, 5), ShapeError);

  Tensor row = vec({1, 2, 3, 4});
  CHECK(add_row(x, row).matrix()(2, 3) == x.matrix()(2, 3) + 4);
  CHECK(mul_row(x, row).matrix()(1, 1) == x.matrix()(1, 1) * 2);
}

TEST_CASE("causal mask and gather") {
  Tensor m = causal_mask(Tensor::ones({3, 3}));
  CHECK(std::isinf(m.matrix()(0, 1)));
  CHECK(m.matrix()(1, 0) == 1.0);
  CHECK(m.matrix()(2, 2) == 1.0);
  RowMatrix t(3, 2);
  t << 1, 2, 3, 4, 5, 6;
  std::vector<int> idx{2, 0, 2};
  Tensor g = gather_rows(Tensor::from_matrix(t), idx);
  CHECK(g.matrix()(0, 1) == 6);
  CHECK(g.matrix()(1, 0) == 1);
  std::vector<int> bad{3};
  CHECK_THROWS(gather_rows(Tensor::from_matrix(t), bad));
}

TEST_CASE("cross entropy against a direct oracle") {
  SeededRng rng(8);
  Tensor logits = randn({5, 4}, rng);
  std::vector<int> y{0, 3, 1, 1, 2};
  double expect = 0;
  for (Index r = 0; r < 5; ++r) {
    const auto row = logits.matrix().row(r);
    expect += std::log(row.array().exp().sum()) - row[y[static_cast<std::size_t>(r)]];
  }
  CHECK(cross_entropy(logits, y).item() == doctest::Approx(expect / 5).epsilon(1e-13));
}

TEST_CASE("squared norm gradient is x, sum gradient is ones") {
  SeededRng rng(3);
  Tensor x = randn({2, 3}, rng);
  Tensor g = vjp([](const Tensor& t) { return scale(sum(mul(t, t)), 0.5); }, x, Tensor::ones({1}));
  CHECK(max_abs_diff(g, x) < 1e-15);
  Tensor ones = vjp([](const Tensor& t) { return sum(t); }, x, Tensor::ones({1}));
  CHECK(ones.data().isOnes(0.0));
}

// Every differentiable op against central differences: 100 seeded trials
// each, scalarized through a random projection of the output.
TEST_CASE("every op passes grad_check over 100 seeded trials") {
  using Op = std::function<Tensor(const Tensor&, SeededRng&)>;
  struct Case {
    std::string name;
    Shape in;
    Op op;
  };
  const std::vector<Case> cases = {
      {"matmul", {3, 4}, [](const Tensor& x, SeededRng& r) { return matmul(x, randn({4, 2}, r)); }},
      {"matmul_rhs", {4, 2}, [](const Tensor& x, SeededRng& r) { return matmul(randn({3, 4}, r), x); }},
      {"add", {6}, [](const Tensor& x, SeededRng& r) { return add(x, randn({6}, r)); }},
      {"sub", {6}, [](const Tensor& x, SeededRng& r) { return sub(randn({6}, r), x); }},
      {"mul", {6}, [](const Tensor& x, SeededRng& r) { return mul(x, randn({6}, r)); }},
      {"mul_self", {6}, [](const Tensor& x, SeededRng&) { return mul(x, x); }},
      {"mul_scalar_operand", {1}, [](const Tensor& x, SeededRng& r) { return mul(randn({5}, r), x); }},
      {"scale", {6}, [](const Tensor& x, SeededRng&) { return scale(x, -1.7); }},
      {"add_scalar", {6}, [](const Tensor& x, SeededRng&) { return add_scalar(x, 0.3); }},
      {"relu", {8}, [](const Tensor& x, SeededRng&) { return relu(x); }},
      {"gelu", {8}, [](const Tensor& x, SeededRng&) { return gelu(gelu(x)); }},
      {"sigmoid", {8}, [](const Tensor& x, SeededRng&) { return sigmoid(x); }},
      {"exp", {8}, [](const Tensor& x, SeededRng&) { return exp(x); }},
      {"log", {8}, [](const Tensor& x, SeededRng&) { return log(add_scalar(mul(x, x), 0.5)); }},
      {"softmax_rows", {3, 5}, [](const Tensor& x, SeededRng&) { return softmax(x, 1); }},
      {"softmax_cols", {3, 5}, [](const Tensor& x, SeededRng&) { return softmax(x, 0); }},
      {"sum_axis", {3, 4}, [](const Tensor& x, SeededRng&) { return sum(x, 0); }},
      {"mean_axis", {3, 4}, [](const Tensor& x, SeededRng&) { return mean(x, 1); }},
      {"var_axis", {3, 4}, [](const Tensor& x, SeededRng&) { return var(x, 1); }},
      {"var_all", {3, 4}, [](const Tensor& x, SeededRng&) { return var(x); }},
      {"transpose", {3, 4}, [](const Tensor& x, SeededRng&) { return transpose(x); }},
      {"reshape", {3, 4}, [](const Tensor& x, SeededRng&) { return reshape(x, {2, 6}); }},
      {"slice_concat", {3, 4}, [](const Tensor& x, SeededRng&) {
         return concat_cols({slice_cols(x, 2, 4), slice_cols(x, 0, 2), slice_cols(x, 1, 3)});
       }},
      {"add_row", {4}, [](const Tensor& x, SeededRng& r) { return add_row(randn({3, 4}, r), x); }},
      {"mul_row", {4}, [](const Tensor& x, SeededRng& r) { return mul_row(randn({3, 4}, r), x); }},
      {"mul_row_lhs", {3, 4}, [](const Tensor& x, SeededRng& r) { return mul_row(x, randn({4}, r)); }},
      {"normalize_rows", {3, 5}, [](const Tensor& x, SeededRng&) { return normalize_rows(x, 1e-5); }},
      {"causal_softmax", {4, 4}, [](const Tensor& x, SeededRng&) { return softmax(causal_mask(x), 1); }},
      {"gather_rows", {4, 3}, [](const Tensor& x, SeededRng&) {
         static const std::vector<int> idx{3, 1, 3, 0};
         return gather_rows(x, idx);
       }},
      {"cross_entropy", {4, 5}, [](const Tensor& x, SeededRng&) {
         static const std::vector<int> y{4, 0, 2, 2};
         return cross_entropy(x, y);
       }},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      SeededRng rng(1000 + static_cast<std::uint64_t>(trial));
      Tensor x = randn(c.in, rng);
      const std::uint64_t op_seed = rng.uniform_index(1u << 30);
      SeededRng probe_rng(op_seed);
      Tensor probe_shape = c.op(x, probe_rng);
      Tensor proj = randn(probe_shape.shape(), rng);
      auto f = [&](const Tensor& t) {
        SeededRng r(op_seed);
        return sum(mul(c.op(t, r), proj));
      };
      worst = std::max(worst, grad_check(f, x));
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}
