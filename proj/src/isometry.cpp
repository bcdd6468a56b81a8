#include "rezero/isometry.hpp"

#include <cmath>

#include "rezero/error.hpp"

namespace rezero {

namespace {

void require_finite(const Tensor& y, const char* what) {
  if (!y.data().allFinite()) throw NumericError(std::string(what) + ": model output is not finite");
}

}  // namespace

JacobianMatrix jacobian(const ModelFn& f, const Tensor& x) {
  Graph g;
  Tensor input = g.variable(x.detached());
  Tensor y = f(input);
  require_finite(y, "jacobian");
  const Index rows = y.size();
  JacobianMatrix j{Eigen::MatrixXd::Zero(rows, x.size()), JacobianSource::Vjp};
  if (!y.on_graph()) return j;  // output does not depend on x
  Vector seed = Vector::Zero(rows);
  for (Index r = 0; r < rows; ++r) {
    seed[r] = 1.0;
    g.backward(y, Tensor(y.shape(), seed));
    j.values.row(r) = g.gradient(input).data().transpose();
    seed[r] = 0.0;
  }
  return j;
}

JacobianMatrix jacobian(Module& model, const Tensor& x) {
  model.set_training(false);
  return jacobian([&model](const Tensor& t) { return model.forward(t); }, x);
}

JacobianMatrix jacobian_fd(const ModelFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite-difference step must be positive");
  const Tensor base = x.detached();
  Tensor y0 = f(base);
  require_finite(y0, "jacobian_fd");
  JacobianMatrix j{Eigen::MatrixXd(y0.size(), x.size()), JacobianSource::FiniteDifference};
  Vector probe = base.data();
  for (Index c = 0; c < x.size(); ++c) {
    const double keep = probe[c];
    probe[c] = keep + h;
    Tensor plus = f(Tensor(x.shape(), probe));
    probe[c] = keep - h;
    Tensor minus = f(Tensor(x.shape(), probe));
    probe[c] = keep;
    require_finite(plus, "jacobian_fd");
    require_finite(minus, "jacobian_fd");
    j.values.col(c) = (plus.data() - minus.data()) / (2.0 * h);
  }
  return j;
}

Histogram log_histogram(const Eigen::VectorXd& sigma, const HistogramConfig& config) {
  if (config.bins < 1 || !(config.hi > config.lo)) {
    throw ContractError("histogram needs bins >= 1 and hi > lo");
  }
  Histogram h;
  const double width = (config.hi - config.lo) / config.bins;
  for (int b = 0; b <= config.bins; ++b) h.edges.push_back(config.lo + b * width);
  h.edges.back() = config.hi;
  h.counts.assign(static_cast<std::size_t>(config.bins), 0);
  for (Index i = 0; i < sigma.size(); ++i) {
    const double v = std::log10(std::max(sigma[i], kLogFloor));
    if (v < config.lo) {
      ++h.underflow;
      continue;
    }
    auto bin = static_cast<long>(std::floor((v - config.lo) / width));
    bin = std::min<long>(bin, config.bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

SpectrumResult spectrum_stats(const Eigen::VectorXd& sigma, double tau,
                              const HistogramConfig& config) {
  if (sigma.size() == 0) throw ContractError("spectrum_stats needs at least one singular value");
  if (!(tau > 0.0)) throw ContractError("vanishing threshold must be positive");
  SpectrumResult r;
  r.singular_values = sigma;
  r.chi = sigma.squaredNorm() / static_cast<double>(sigma.size());
  r.threshold = tau;
  r.vanishing_count = static_cast<long>((sigma.array() < tau).count());
  r.log10_values = sigma.array().max(kLogFloor).log10().matrix();
  r.histogram = log_histogram(sigma, config);
  return r;
}

SpectrumResult analyze(const JacobianMatrix& j, double tau, const HistogramConfig& config) {
  return spectrum_stats(jacobi_svd(j.values).sigma, tau, config);
}

std::optional<double> cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("cosine of differently shaped signals");
  const double na = a.data().norm();
  const double nb = b.data().norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return a.data().dot(b.data()) / (na * nb);
}

std::vector<std::optional<double>> cosine_propagation(const std::vector<Module*>& blocks,
                                                      const Tensor& x, const Tensor& x2) {
  if (x.shape() != x2.shape()) throw ShapeError("cosine_propagation needs equal shapes");
  if (x.data().norm() == 0.0 || x2.data().norm() == 0.0) {
    throw ContractError("cosine_propagation needs nonzero inputs");
  }
  std::vector<std::optional<double>> out;
  Tensor a = x.detached();
  Tensor b = x2.detached();
  for (Module* block : blocks) {
    block->set_training(false);
    a = block->forward(a);
    b = block->forward(b);
    out.push_back(cosine_similarity(a, b));
  }
  return out;
}

}  // namespace rezero
