#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rezero/autodiff.hpp"
#include "rezero/error.hpp"
#include "rezero/nn.hpp"

using namespace rezero;
using testing::max_abs_diff;
using testing::randn;

namespace {

RowMatrix softmax_rows(RowMatrix s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
  return s;
}

// Q, K, V built explicitly and combined row by row.
RowMatrix attention_oracle(const RowMatrix& x, const RowMatrix& wq, const RowMatrix& wk,
                           const RowMatrix& wv, bool causal) {
  const RowMatrix q = x * wq, k = x * wk, v = x * wv;
  RowMatrix s = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
  if (causal)
    for (Index i = 0; i < s.rows(); ++i)
      for (Index j = i + 1; j < s.cols(); ++j) s(i, j) = -INFINITY;
  return softmax_rows(s) * v;
}

double sample_variance(const Vector& v) {
  const double m = v.mean();
  return (v.array() - m).square().mean();
}

void set(Parameter& p, const RowMatrix& m) { p.set_value(Tensor::from_matrix(m)); }

}  // namespace

TEST_CASE("linear") {
  Linear id("id", 3, 3);
  set(id.weight(), RowMatrix::Identity(3, 3));
  SeededRng rng(1);
  Tensor x = randn({4, 3}, rng);
  CHECK(max_abs_diff(id.forward(x), x) == 0.0);

  Linear z("z", 3, 2);
  z.bias()->set_value(Tensor({2}, Vector::LinSpaced(2, 1, 2)));
  Tensor y = z.forward(x);
  for (Index r = 0; r < 4; ++r) {
    CHECK(y.matrix()(r, 0) == 1.0);
    CHECK(y.matrix()(r, 1) == 2.0);
  }

  Linear l("l", 5, 3);
  init_weights(l, InitScheme::He, rng);
  l.bias()->set_value(randn({3}, rng));
  Tensor in = randn({6, 5}, rng);
  const RowMatrix w = l.weight().value().matrix();
  RowMatrix expect(6, 3);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) {
      double acc = l.bias()->value()[j];
      for (Index k = 0; k < 5; ++k) acc += in.matrix()(i, k) * w(k, j);
      expect(i, j) = acc;
    }
  CHECK(max_abs_diff(l.forward(in), Tensor::from_matrix(expect)) < 1e-12);
  CHECK_THROWS_AS(l.forward(randn({2, 4}, rng)), ShapeError);
  CHECK(Linear("nb", 2, 2, false).bias() == nullptr);
}

TEST_CASE("layer norm examples") {
  LayerNorm ln("ln", 4);
  Tensor c = ln.forward(Tensor::constant({2, 4}, 3.7));
  CHECK(c.data().cwiseAbs().maxCoeff() == 0.0);

  LayerNorm tiny("tiny", 3, 1e-15);
  Tensor y = tiny.forward(Tensor({1, 3}, Vector::LinSpaced(3, 1, 3)));
  CHECK(y[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(std::abs(y[1]) < 1e-12);
  CHECK(y[2] == doctest::Approx(1.224745).epsilon(1e-6));

  SeededRng rng(2);
  LayerNorm wide("w", 16);
  Tensor out = wide.forward(randn({8, 16}, rng, 10.0));
  for (Index r = 0; r < 8; ++r) {
    Vector row = out.matrix().row(r).transpose();
    CHECK(std::abs(row.mean()) < 1e-10);
    CHECK(std::abs(sample_variance(row) - 1.0) < 1e-6);
  }
  CHECK_THROWS_AS(LayerNorm("bad", 1), ConfigError);
  CHECK_THROWS_AS(LayerNorm("bad", 4, 0.0), ConfigError);
}

TEST_CASE("layer norm ignores row shifts and positive scalings") {
  SeededRng rng(3);
  LayerNorm ln("ln", 8);
  ln.gamma().set_value(randn({8}, rng));
  ln.beta().set_value(randn({8}, rng));
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = randn({3, 8}, rng, 10.0);
    Tensor base = ln.forward(x);
    CHECK(max_abs_diff(ln.forward(add_scalar(x, rng.uniform(-20, 20))), base) < 1e-10);
    // eps / var must be far below the tolerance for the scaling check
    Tensor wide = randn({3, 8}, rng, 1e3);
    CHECK(max_abs_diff(ln.forward(scale(wide, rng.uniform(0.5, 4.0))), ln.forward(wide)) < 1e-10);
  }
}

TEST_CASE("attention examples") {
  SeededRng rng(4);
  const Tensor zero = Tensor::zeros({4, 4});
  const Tensor eye = Tensor::from_matrix(RowMatrix::Identity(4, 4));
  Tensor x = randn({5, 4}, rng);
  Tensor uniform = attention_forward(zero, zero, eye, x, false);
  const RowMatrix colmean = x.matrix().colwise().mean();
  for (Index r = 0; r < 5; ++r) CHECK((uniform.matrix().row(r) - colmean).cwiseAbs().maxCoeff() < 1e-12);

  Tensor wq = randn({4, 4}, rng), wk = randn({4, 4}, rng), wv = randn({4, 4}, rng);
  Tensor one = randn({1, 4}, rng);
  CHECK(max_abs_diff(attention_forward(wq, wk, wv, one, false), matmul(one, wv)) < 1e-12);

  Tensor x3 = randn({3, 4}, rng);
  for (bool causal : {false, true}) {
    RowMatrix oracle =
        attention_oracle(x3.matrix(), wq.matrix(), wk.matrix(), wv.matrix(), causal);
    CHECK(max_abs_diff(attention_forward(wq, wk, wv, x3, causal), Tensor::from_matrix(oracle)) <
          1e-12);
  }
  CHECK_THROWS_AS(attention_forward(randn({3, 4}, rng), wk, wv, x3, false), ShapeError);
}

TEST_CASE("softmax attention rows sum to one") {
  SeededRng rng(5);
  Tensor q = randn({6, 4}, rng, 3.0), k = randn({6, 4}, rng, 3.0);
  for (bool causal : {false, true}) {
    Tensor s = matmul(q, transpose(k));
    if (causal) s = causal_mask(s);
    Tensor p = softmax(s, 1);
    for (Index r = 0; r < 6; ++r) CHECK(std::abs(p.matrix().row(r).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("multi-head attention") {
  SeededRng rng(6);
  MultiHeadAttention one("one", 4, 1);
  init_weights(one, InitScheme::XavierUniform, rng);
  set(one.wo(), RowMatrix::Identity(4, 4));
  Tensor x = randn({3, 4}, rng);
  CHECK(max_abs_diff(one.forward(x), attention_forward(one.wq().value(), one.wk().value(),
                                                       one.wv().value(), x, false)) < 1e-12);

  MultiHeadAttention zero("zero", 4, 2);
  CHECK(zero.forward(x).data().cwiseAbs().maxCoeff() == 0.0);

  MultiHeadAttention two("two", 4, 2);
  init_weights(two, InitScheme::XavierUniform, rng);
  const RowMatrix q = x.matrix() * two.wq().value().matrix();
  const RowMatrix k = x.matrix() * two.wk().value().matrix();
  const RowMatrix v = x.matrix() * two.wv().value().matrix();
  RowMatrix mixed(3, 4);
  for (Index h = 0; h < 2; ++h) {
    const RowMatrix qh = q.middleCols(2 * h, 2), kh = k.middleCols(2 * h, 2),
                    vh = v.middleCols(2 * h, 2);
    mixed.middleCols(2 * h, 2) = softmax_rows(qh * kh.transpose() / std::sqrt(2.0)) * vh;
  }
  const RowMatrix expect = mixed * two.wo().value().matrix();
  CHECK(max_abs_diff(two.forward(x), Tensor::from_matrix(expect)) < 1e-12);

  CHECK_THROWS_AS(MultiHeadAttention("bad", 6, 4), ConfigError);
}

TEST_CASE("causal attention ignores later positions") {
  SeededRng rng(7);
  MultiHeadAttention mha("m", 8, 2, true);
  init_weights(mha, InitScheme::XavierUniform, rng);
  Tensor x = randn({6, 8}, rng);
  Tensor base = mha.forward(x);
  for (Index i = 0; i < 5; ++i) {
    RowMatrix changed = x.matrix();
    for (Index j = i + 1; j < 6; ++j) changed.row(j) += randn({8}, rng).data().transpose() * 5.0;
    Tensor y = mha.forward(Tensor::from_matrix(changed));
    for (Index r = 0; r <= i; ++r)
      CHECK((y.matrix().row(r) - base.matrix().row(r)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("feed forward") {
  SeededRng rng(8);
  FeedForward zero("z", 4, 8);
  Tensor x = randn({3, 4}, rng);
  CHECK(zero.forward(x).data().cwiseAbs().maxCoeff() == 0.0);

  FeedForward id("id", 4, 4);
  set(id.up().weight(), RowMatrix::Identity(4, 4));
  set(id.down().weight(), RowMatrix::Identity(4, 4));
  CHECK(max_abs_diff(id.forward(x), gelu(x)) == 0.0);

  FeedForward f("f", 4, 8);
  init_weights(f, InitScheme::He, rng);
  f.up().bias()->set_value(randn({8}, rng));
  f.down().bias()->set_value(randn({4}, rng));
  RowMatrix h = x.matrix() * f.up().weight().value().matrix();
  h.rowwise() += f.up().bias()->value().data().transpose();
  h = h.unaryExpr([](double v) { return gelu_value(v); });
  RowMatrix out = h * f.down().weight().value().matrix();
  out.rowwise() += f.down().bias()->value().data().transpose();
  CHECK(max_abs_diff(f.forward(x), Tensor::from_matrix(out)) < 1e-12);
}

TEST_CASE("embedding lookup") {
  SeededRng rng(9);
  EmbeddingTable emb("e", 5, 4, 3);
  init_weights(emb, rng);
  const std::vector<int> toks{4, 0, 4};
  Tensor y = emb.forward(toks, nullptr);
  for (Index p = 0; p < 3; ++p) {
    const auto expect = emb.tokens().value().matrix().row(toks[static_cast<std::size_t>(p)]) +
                        emb.positions().value().matrix().row(p);
    CHECK((y.matrix().row(p) - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  const std::vector<int> too_long(5, 0);
  CHECK_THROWS_AS(emb.forward(too_long, nullptr), ShapeError);
}

TEST_CASE("dropout") {
  SeededRng rng(10);
  Tensor x = randn({10, 10}, rng);
  Dropout none(0.0, &rng);
  none.set_training(true);
  CHECK(max_abs_diff(none.forward(x), x) == 0.0);

  Dropout d(0.2, &rng);
  CHECK(max_abs_diff(d.forward(x), x) == 0.0);  // eval by default
  d.set_training(true);
  Tensor kept = d.forward(Tensor::ones({1000, 1000}));
  CHECK(std::abs(kept.data().mean() - 1.0) < 0.01);
  for (Index i = 0; i < 1000; ++i) CHECK((kept[i] == 0.0 || kept[i] == 1.25));
  d.set_training(false);
  CHECK(max_abs_diff(d.forward(x), x) == 0.0);

  CHECK_THROWS_AS(Dropout(1.0, &rng), ConfigError);
  CHECK_THROWS_AS(Dropout(-0.1, &rng), ConfigError);
}

TEST_CASE("initialization schemes") {
  SeededRng rng(11);
  Linear he("he", 256, 256), hr("hr", 256, 256), xu("xu", 256, 128);
  init_weights(he, InitScheme::He, rng);
  init_weights(hr, InitScheme::HeResidual, rng);
  init_weights(xu, InitScheme::XavierUniform, rng);
  CHECK(std::abs(sample_variance(he.weight().value().data()) / (2.0 / 256) - 1) < 0.05);
  CHECK(std::abs(sample_variance(hr.weight().value().data()) / (0.25 / 256) - 1) < 0.05);
  const double bound = std::sqrt(6.0 / (256 + 128));
  CHECK(xu.weight().value().data().cwiseAbs().maxCoeff() <= bound);
  CHECK(he.bias()->value().data().isZero(0.0));
  CHECK(parse_init_scheme("he_residual") == InitScheme::HeResidual);
  CHECK(to_string(InitScheme::XavierUniform) == "xavier_uniform");
  CHECK_THROWS_AS(parse_init_scheme("orthogonal"), ConfigError);

  LayerNorm ln("ln", 4);
  ln.gamma().set_value(randn({4}, rng));
  init_weights(ln);
  CHECK(ln.gamma().value().data().isOnes(0.0));
}

TEST_CASE("layers pass grad_check on inputs and parameters") {
  SeededRng rng(12);
  Linear lin("lin", 4, 4);
  LayerNorm ln("ln", 4);
  MultiHeadAttention mha("mha", 4, 2, true);
  FeedForward ffn("ffn", 4, 8);
  init_weights(lin, InitScheme::He, rng);
  init_weights(mha, InitScheme::XavierUniform, rng);
  init_weights(ffn, InitScheme::He, rng);
  ln.gamma().set_value(randn({4}, rng));
  ln.beta().set_value(randn({4}, rng));
  for (Module* m : std::vector<Module*>{&lin, &ln, &mha, &ffn}) {
    const Tensor x = randn({3, 4}, rng);
    const Tensor proj = randn({3, 4}, rng);
    CHECK(grad_check([&](const Tensor& t) { return sum(mul(m->forward(t), proj)); }, x) < 1e-4);
    auto loss = [&](Graph* g) {
      return sum(mul(m->forward(g ? g->constant(x) : x), proj));
    };
    CHECK(grad_check(loss, m->parameters()) < 1e-4);
  }
}
