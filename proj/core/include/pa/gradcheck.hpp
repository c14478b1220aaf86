#pragma once

// Finite-difference audit of a metric's autodiff gradient.

#include <cstddef>

#include "pa/metrics.hpp"

namespace pa {

struct GradientAudit {
  double max_relative_error = 0.0;
  std::size_t checked = 0;  // elements with |autodiff| above the floor
  std::size_t total = 0;
};

/// Compares d metric(a, b) / d a against central differences on every element
/// whose autodiff magnitude exceeds `floor`. An element that misses 1e-3 is
/// retried with steps h/10 and h/100 (kinks of ReLU features); the smallest
/// error counts.
GradientAudit audit_metric_gradient(const Metric& metric, const Tensor& a, const Tensor& b, double step = 1e-4,
                                    double floor = 1e-6);

}  // namespace pa
