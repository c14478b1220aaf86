#include "pa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pa/grad.hpp"

namespace pa {

GradientAudit audit_metric_gradient(const Metric& metric, const Tensor& a, const Tensor& b, double step,
                                    double floor) {
  metric.check_shape(a.shape());
  require_same_shape(a.shape(), b.shape(), "audit_metric_gradient");
  grad::Graph g;
  const grad::Var av = g.leaf(a);
  const grad::Var d = metric.distance(av, g.constant(b));
  const Tensor autodiff = g.backward(d).of(av);

  GradientAudit r;
  r.total = a.size();
  Tensor probe = a;
  const auto central = [&](std::size_t k, double h) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = metric(probe, b);
    probe[k] = orig - h;
    const double down = metric(probe, b);
    probe[k] = orig;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(autodiff[k]) <= floor) continue;
    ++r.checked;
    double err = 1e300;
    for (double h = step; h >= step / 100.0 * 0.999; h /= 10.0) {
      const double fd = central(k, h);
      err = std::min(err, std::abs(autodiff[k] - fd) / std::max(std::abs(autodiff[k]), std::abs(fd)));
      if (err < 1e-3) break;
    }
    r.max_relative_error = std::max(r.max_relative_error, err);
  }
  return r;
}

}  // namespace pa
