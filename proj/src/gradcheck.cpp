#include <algorithm>
#include <cmath>

#include "rezero/autodiff.hpp"

namespace rezero {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

Tensor vjp(const TensorFn& f, const Tensor& x, const Tensor& u) {
  Graph g;
  Tensor xv = g.variable(x);
  Tensor y = f(xv);
  if (y.shape() != u.shape()) {
    throw ShapeError("cotangent shape " + shape_string(u.shape()) + " does not match output " +
                     shape_string(y.shape()));
  }
  if (!y.on_graph()) return Tensor::zeros(x.shape());
  g.backward(y, u);
  return g.gradient(xv);
}

double grad_check(const TensorFn& f, const Tensor& x, double h) {
  Graph g;
  Tensor xv = g.variable(x);
  Tensor y = f(xv);
  if (!y.is_scalar()) throw ContractError("grad_check needs a scalar-valued function");
  g.backward(y);
  const Vector analytic = g.gradient(xv).data();

  double worst = 0.0;
  Vector probe = x.data();
  for (Index i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(Tensor(x.shape(), probe)).item();
    probe[i] = saved - h;
    const double down = f(Tensor(x.shape(), probe)).item();
    probe[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double grad_check(const std::function<Tensor(Graph*)>& loss, const std::vector<Parameter*>& params,
                  double h) {
  std::vector<Vector> analytic;
  {
    Graph g;
    Tensor l = loss(&g);
    if (!l.is_scalar()) throw ContractError("grad_check needs a scalar loss");
    for (Parameter* p : params) p->zero_grad();
    if (l.on_graph()) g.backward(l);
    for (Parameter* p : params) analytic.push_back(p->grad());
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const Tensor original = p.value();
    Vector probe = original.data();
    for (Index i = 0; i < probe.size(); ++i) {
      const double saved = probe[i];
      probe[i] = saved + h;
      p.set_value(probe);
      const double up = loss(nullptr).item();
      probe[i] = saved - h;
      p.set_value(probe);
      const double down = loss(nullptr).item();
      probe[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
    p.set_value(original);
  }
  return worst;
}

}  // namespace rezero
