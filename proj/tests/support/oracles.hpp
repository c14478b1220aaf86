#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the gradient engine: every oracle is a direct loop over the
// defining formula.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pa/metrics.hpp"
#include "pa/tensor.hpp"

namespace pa::testing {

inline Tensor random_image(std::uint64_t seed, Shape s, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Smooth image in [-1, 1]: sum of a few random sinusoids per channel.
inline Tensor smooth_image(std::uint64_t seed, Shape s, double amplitude = 0.6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    double fy[3], fx[3], ph[3], am[3];
    for (int k = 0; k < 3; ++k) {
      fy[k] = 0.05 + 0.25 * u(rng);
      fx[k] = 0.05 + 0.25 * u(rng);
      ph[k] = 6.283185307179586 * u(rng);
      am[k] = amplitude / 3.0 * (0.5 + 0.5 * u(rng));
    }
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += am[k] * std::sin(fy[k] * i + fx[k] * j + ph[k]);
        t(c, i, j) = std::clamp(v, -1.0, 1.0);
      }
  }
  return t;
}

inline double mse_oracle(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.shape().c; ++c)
    for (std::size_t i = 0; i < a.shape().h; ++i)
      for (std::size_t j = 0; j < a.shape().w; ++j) {
        const double d = a(c, i, j) - b(c, i, j);
        acc += d * d;
      }
  return acc / static_cast<double>(a.size());
}

// Direct zero-padded cross-correlation. weights: out x in x kh x kw.
inline Tensor conv_oracle(const Tensor& x, const std::vector<double>& weights, std::size_t out,
                          std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  const Shape s = x.shape();
  const std::size_t oh = (s.h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (s.w + 2 * pad - kw) / stride + 1;
  Tensor y(Shape{out, oh, ow});
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.c; ++c)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              const long yy = static_cast<long>(i * stride + a) - static_cast<long>(pad);
              const long xx = static_cast<long>(j * stride + b) - static_cast<long>(pad);
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(s.h) || xx >= static_cast<long>(s.w)) continue;
              acc += weights[((o * s.c + c) * kh + a) * kw + b] * x(c, yy, xx);
            }
        y(o, i, j) = acc;
      }
  return y;
}

// 2-D Gaussian window evaluated directly from the density, then normalized.
inline std::vector<double> gaussian_window_2d(std::size_t n, double sigma) {
  std::vector<double> w(n * n);
  const double half = static_cast<double>(n / 2);
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double dy = a - half;
      const double dx = b - half;
      w[a * n + b] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      sum += w[a * n + b];
    }
  for (double& v : w) v /= sum;
  return w;
}

struct SsimOracleResult {
  std::vector<double> ssim_mean;  // per channel
  std::vector<double> cs_mean;    // per channel
};

// Sliding-window SSIM: at every valid window position compute weighted
// moments directly from the pixels under the window.
inline SsimOracleResult ssim_oracle(const Tensor& a, const Tensor& b, std::size_t n = 11,
                                    double sigma = 1.5, double L = 2.0) {
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const std::vector<double> w = gaussian_window_2d(n, sigma);
  const Shape s = a.shape();
  SsimOracleResult r;
  for (std::size_t c = 0; c < s.c; ++c) {
    double ssim_sum = 0.0, cs_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + n <= s.h; ++i)
      for (std::size_t j = 0; j + n <= s.w; ++j) {
        double ma = 0, mb = 0;
        for (std::size_t p = 0; p < n; ++p)
          for (std::size_t q = 0; q < n; ++q) {
            ma += w[p * n + q] * a(c, i + p, j + q);
            mb += w[p * n + q] * b(c, i + p, j + q);
          }
        double va = 0, vb = 0, cov = 0;
        for (std::size_t p = 0; p < n; ++p)
          for (std::size_t q = 0; q < n; ++q) {
            const double da = a(c, i + p, j + q) - ma;
            const double db = b(c, i + p, j + q) - mb;
            va += w[p * n + q] * da * da;
            vb += w[p * n + q] * db * db;
            cov += w[p * n + q] * da * db;
          }
        const double lum = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        const double cs = (2 * cov + c2) / (va + vb + c2);
        ssim_sum += lum * cs;
        cs_sum += cs;
        ++count;
      }
    r.ssim_mean.push_back(ssim_sum / count);
    r.cs_mean.push_back(cs_sum / count);
  }
  return r;
}

inline Tensor avg_pool_oracle(const Tensor& x) {
  const Shape s = x.shape();
  Tensor y(Shape{s.c, s.h / 2, s.w / 2});
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < s.h / 2; ++i)
      for (std::size_t j = 0; j < s.w / 2; ++j)
        y(c, i, j) = (x(c, 2 * i, 2 * j) + x(c, 2 * i + 1, 2 * j) + x(c, 2 * i, 2 * j + 1) +
                      x(c, 2 * i + 1, 2 * j + 1)) / 4.0;
  return y;
}

// Central finite differences of f at x, one element at a time.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                double step = 1e-3) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + step;
    const double up = f(probe);
    probe[k] = orig - step;
    const double down = f(probe);
    probe[k] = orig;
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

// Largest element-wise relative error over elements where |reference| > floor.
inline double max_relative_error(const Tensor& got, const Tensor& reference, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < got.size(); ++k) {
    if (std::abs(reference[k]) <= floor) continue;
    worst = std::max(worst, std::abs(got[k] - reference[k]) / std::abs(reference[k]));
  }
  return worst;
}


struct ConvMetricOracleResult {
  double value = 0.0;
  std::vector<bool> active_b;  // ReLU on/off pattern along the second image's branch
};

// Direct evaluation of the ConvMetric definition with nested loops.
inline ConvMetricOracleResult conv_metric_oracle(const ConvMetricWeights& w, const Tensor& a,
                                                 const Tensor& b) {
  ConvMetricOracleResult r;
  Tensor xa = a;
  Tensor xb = b;
  for (const ConvLayer& L : w.layers) {
    const auto& sp = L.spec;
    Tensor fa = conv_oracle(xa, L.kernel, sp.out_channels, sp.kernel_size, sp.kernel_size, sp.stride, sp.padding);
    Tensor fb = conv_oracle(xb, L.kernel, sp.out_channels, sp.kernel_size, sp.kernel_size, sp.stride, sp.padding);
    const Shape fs = fa.shape();
    for (std::size_t c = 0; c < fs.c; ++c)
      for (std::size_t k = 0; k < fs.plane(); ++k) {
        const double bias = L.bias.empty() ? 0.0 : L.bias[c];
        double& va = fa[c * fs.plane() + k];
        double& vb = fb[c * fs.plane() + k];
        va += bias;
        vb += bias;
        if (sp.activation == Activation::Relu) {
          r.active_b.push_back(vb > 0.0);
          va = std::max(va, 0.0);
          vb = std::max(vb, 0.0);
        }
      }
    double layer = 0.0;
    for (std::size_t k = 0; k < fs.plane(); ++k) {
      double na = 1e-10, nb = 1e-10;
      for (std::size_t c = 0; c < fs.c; ++c) {
        na += fa[c * fs.plane() + k] * fa[c * fs.plane() + k];
        nb += fb[c * fs.plane() + k] * fb[c * fs.plane() + k];
      }
      for (std::size_t c = 0; c < fs.c; ++c) {
        const double d = fa[c * fs.plane() + k] / std::sqrt(na) - fb[c * fs.plane() + k] / std::sqrt(nb);
        layer += L.calib[c] * d * d;
      }
    }
    r.value += layer / static_cast<double>(fs.plane());
    if (sp.pool == Pooling::Avg2) {
      fa = avg_pool_oracle(fa);
      fb = avg_pool_oracle(fb);
    }
    xa = std::move(fa);
    xb = std::move(fb);
  }
  return r;
}

// Autodiff vs central differences. Every element is first differenced with
// `step`. Central differences are only an oracle where the function is smooth
// over the whole stencil (no ReLU switch, no near-zero normalization), so an
// element that disagrees at `step` is re-differenced at step/10, step/100,
// ... and compared against the finer of the first two successive estimates that
// agree to `tolerance`. An element passes only when autodiff matches an
// estimate of that kind.
struct GradCheckResult {
  double max_relative_error = 0.0;          // over checked elements, final estimates
  double max_relative_error_at_step = 0.0;  // same, using `step` everywhere
  std::size_t checked = 0;                  // elements with |fd| > floor
  std::size_t refined = 0;                  // elements needing a smaller step
};

inline GradCheckResult gradient_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                      const Tensor& autodiff, double step = 1e-3, double floor = 1e-6,
                                      double tolerance = 1e-3) {
  GradCheckResult r;
  Tensor probe = x;
  const auto central = [&](std::size_t k, double h) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = f(probe);
    probe[k] = orig - h;
    const double down = f(probe);
    probe[k] = orig;
    return (up - down) / (2.0 * h);
  };
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double fd = central(k, step);
    if (std::abs(fd) <= floor) continue;
    ++r.checked;
    double err = rel(autodiff[k], fd);
    r.max_relative_error_at_step = std::max(r.max_relative_error_at_step, err);
    if (err >= tolerance) {
      ++r.refined;
      double h = step / 10.0;
      double prev = central(k, h);
      for (int level = 0; level < 3; ++level) {
        const double next = central(k, h / 10.0);
        const bool settled = std::abs(prev) > floor && rel(prev, next) < tolerance;
        prev = next;
        if (settled) break;
        h /= 10.0;
      }
      err = rel(autodiff[k], prev);
    }
    r.max_relative_error = std::max(r.max_relative_error, err);
  }
  return r;
}

}  // namespace pa::testing
