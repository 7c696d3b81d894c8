#include "aapl/grad_check.hpp"

#include <cmath>

namespace aapl {

double grad_check(const ScalarFn& f, const Tensor& point, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw ContractError("grad_check: eps must be in (0, 1e-2]");
  }

  Tensor analytic;
  {
    Tape tape;
    Tensor x(point.shape(), point.data(), true);
    Tensor loss = f(x);
    if (loss.size() != 1) {
      throw ContractError("grad_check: f must be scalar-valued");
    }
    Gradients grads = tape.backward(loss);
    const Tensor* g = grads.find(x);
    analytic = g ? *g : Tensor::zeros(point.shape());
  }

  TapeSuspend no_tape;  // numeric probes must not record anywhere
  double worst = 0.0;
  Tensor probe(point.shape(), point.data(), false);
  for (int i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe).value();
    probe[i] = saved - eps;
    const double down = f(probe).value();
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite value at probe point");
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace aapl
