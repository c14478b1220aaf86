#include <algorithm>
#include <cmath>

#include "pa/error.hpp"
#include "pa/grad.hpp"

namespace pa::grad {
namespace {

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace

Var conv2d(const Var& x, const ConvKernel& kernel, std::size_t stride, std::size_t padding) {
  const Shape s = x.shape();
  if (kernel.in != s.c) {
    throw Error(ErrorKind::Shape, "conv2d: kernel in-channels " + dims(kernel.in, s.c) +
                                      " input channels");
  }
  if (kernel.weights.size() != kernel.out * kernel.in * kernel.kh * kernel.kw) {
    throw Error(ErrorKind::Shape, "conv2d: kernel holds " + std::to_string(kernel.weights.size()) +
                                      " weights for declared " + std::to_string(kernel.out) + "x" +
                                      std::to_string(kernel.in) + "x" + std::to_string(kernel.kh) +
                                      "x" + std::to_string(kernel.kw));
  }
  if (!kernel.bias.empty() && kernel.bias.size() != kernel.out) {
    throw Error(ErrorKind::Shape, "conv2d: bias length " + dims(kernel.bias.size(), kernel.out) +
                                      " out-channels");
  }
  if (stride == 0) throw Error(ErrorKind::Domain, "conv2d: stride must be positive");
  const std::size_t ph = s.h + 2 * padding;
  const std::size_t pw = s.w + 2 * padding;
  if (kernel.kh == 0 || kernel.kw == 0 || ph < kernel.kh || pw < kernel.kw) {
    throw Error(ErrorKind::Shape, "conv2d: kernel " + std::to_string(kernel.kh) + "x" +
                                      std::to_string(kernel.kw) + " does not fit padded input " +
                                      std::to_string(ph) + "x" + std::to_string(pw));
  }
  const Shape os{kernel.out, (ph - kernel.kh) / stride + 1, (pw - kernel.kw) / stride + 1};

  const Tensor& v = x.value();
  Tensor out(os);
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t o = 0; o < os.c; ++o) {
    const double b = kernel.bias.empty() ? 0.0 : kernel.bias[o];
    for (std::size_t oi = 0; oi < os.h; ++oi) {
      for (std::size_t oj = 0; oj < os.w; ++oj) {
        double acc = b;
        for (std::size_t ci = 0; ci < s.c; ++ci) {
          for (std::size_t ky = 0; ky < kernel.kh; ++ky) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oi * stride + ky) - pad;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(s.h)) continue;
            for (std::size_t kx = 0; kx < kernel.kw; ++kx) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(oj * stride + kx) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(s.w)) continue;
              acc += kernel.at(o, ci, ky, kx) * v(ci, static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
            }
          }
        }
        out(o, oi, oj) = acc;
      }
    }
  }

  const std::size_t id = x.id();
  return x.graph().record(
      std::move(out), {id}, [id, s, os, kernel, stride, pad](const Tensor& up, GradSink& sink) {
        Tensor* gx = sink.slot(id);
        if (!gx) return;
        for (std::size_t o = 0; o < os.c; ++o)
          for (std::size_t oi = 0; oi < os.h; ++oi)
            for (std::size_t oj = 0; oj < os.w; ++oj) {
              const double u = up(o, oi, oj);
              if (u == 0.0) continue;
              for (std::size_t ci = 0; ci < s.c; ++ci)
                for (std::size_t ky = 0; ky < kernel.kh; ++ky) {
                  const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oi * stride + ky) - pad;
                  if (y < 0 || y >= static_cast<std::ptrdiff_t>(s.h)) continue;
                  for (std::size_t kx = 0; kx < kernel.kw; ++kx) {
                    const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(oj * stride + kx) - pad;
                    if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(s.w)) continue;
                    (*gx)(ci, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) +=
                        u * kernel.at(o, ci, ky, kx);
                  }
                }
            }
      });
}

Var avg_pool2(const Var& x) {
  const Shape s = x.shape();
  if (s.h < 2 || s.w < 2) {
    throw Error(ErrorKind::Shape, "avg_pool2: input " + to_string(s) + " smaller than 2x2");
  }
  const Shape os{s.c, s.h / 2, s.w / 2};
  const Tensor& v = x.value();
  Tensor out(os);
  for (std::size_t c = 0; c < os.c; ++c)
    for (std::size_t i = 0; i < os.h; ++i)
      for (std::size_t j = 0; j < os.w; ++j)
        out(c, i, j) = 0.25 * (v(c, 2 * i, 2 * j) + v(c, 2 * i, 2 * j + 1) +
                               v(c, 2 * i + 1, 2 * j) + v(c, 2 * i + 1, 2 * j + 1));
  const std::size_t id = x.id();
  return x.graph().record(std::move(out), {id}, [id, os](const Tensor& up, GradSink& sink) {
    Tensor* gx = sink.slot(id);
    if (!gx) return;
    for (std::size_t c = 0; c < os.c; ++c)
      for (std::size_t i = 0; i < os.h; ++i)
        for (std::size_t j = 0; j < os.w; ++j) {
          const double u = 0.25 * up(c, i, j);
          (*gx)(c, 2 * i, 2 * j) += u;
          (*gx)(c, 2 * i, 2 * j + 1) += u;
          (*gx)(c, 2 * i + 1, 2 * j) += u;
          (*gx)(c, 2 * i + 1, 2 * j + 1) += u;
        }
  });
}

Var channel_l2_normalize(const Var& x, double eps) {
  const Shape s = x.shape();
  const Tensor& v = x.value();
  Tensor out(s);
  Tensor norms(Shape{1, s.h, s.w});
  for (std::size_t k = 0; k < s.plane(); ++k) {
    double ss = eps;
    for (std::size_t c = 0; c < s.c; ++c) ss += v[c * s.plane() + k] * v[c * s.plane() + k];
    const double n = std::sqrt(ss);
    norms[k] = n;
    for (std::size_t c = 0; c < s.c; ++c) out[c * s.plane() + k] = v[c * s.plane() + k] / n;
  }
  const std::size_t id = x.id();
  const Graph* gp = &x.graph();
  return x.graph().record(
      std::move(out), {id}, [gp, id, s, norms = std::move(norms)](const Tensor& up, GradSink& sink) {
        Tensor* gx = sink.slot(id);
        if (!gx) return;
        const Tensor& xv = gp->value(id);
        const std::size_t p = s.plane();
        for (std::size_t k = 0; k < p; ++k) {
          const double n = norms[k];
          double dot = 0.0;
          for (std::size_t c = 0; c < s.c; ++c) dot += up[c * p + k] * xv[c * p + k];
          const double n3 = n * n * n;
          for (std::size_t c = 0; c < s.c; ++c)
            (*gx)[c * p + k] += up[c * p + k] / n - xv[c * p + k] * dot / n3;
        }
      });
}

std::vector<double> gaussian_taps(std::size_t window, double sigma) {
  if (window == 0 || window % 2 == 0) {
    throw Error(ErrorKind::Domain, "gaussian window must be odd, got " + std::to_string(window));
  }
  if (!(sigma > 0.0)) throw Error(ErrorKind::Domain, "gaussian sigma must be positive");
  std::vector<double> taps(window);
  const double half = static_cast<double>(window / 2);
  double sum = 0.0;
  for (std::size_t k = 0; k < window; ++k) {
    const double d = static_cast<double>(k) - half;
    taps[k] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += taps[k];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Var gaussian_filter(const Var& x, std::size_t window, double sigma) {
  const std::vector<double> taps = gaussian_taps(window, sigma);
  const Shape s = x.shape();
  if (window > std::min(s.h, s.w)) {
    throw Error(ErrorKind::Shape, "gaussian_filter: window " + std::to_string(window) +
                                      " exceeds image " + std::to_string(s.h) + "x" +
                                      std::to_string(s.w));
  }
  const Shape os{s.c, s.h - window + 1, s.w - window + 1};
  const Tensor& v = x.value();

  // Rows first (H x W -> H x W'), then columns (-> H' x W').
  Tensor mid(Shape{s.c, s.h, os.w});
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < os.w; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < window; ++k) acc += taps[k] * v(c, i, j + k);
        mid(c, i, j) = acc;
      }
  Tensor out(os);
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < os.h; ++i)
      for (std::size_t j = 0; j < os.w; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < window; ++k) acc += taps[k] * mid(c, i + k, j);
        out(c, i, j) = acc;
      }

  const std::size_t id = x.id();
  return x.graph().record(std::move(out), {id}, [id, s, os, taps, window](const Tensor& up, GradSink& sink) {
    Tensor* gx = sink.slot(id);
    if (!gx) return;
    Tensor gmid(Shape{s.c, s.h, os.w});
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < os.h; ++i)
        for (std::size_t j = 0; j < os.w; ++j) {
          const double u = up(c, i, j);
          for (std::size_t k = 0; k < window; ++k) gmid(c, i + k, j) += taps[k] * u;
        }
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < os.w; ++j) {
          const double u = gmid(c, i, j);
          for (std::size_t k = 0; k < window; ++k) (*gx)(c, i, j + k) += taps[k] * u;
        }
  });
}

namespace {

// Clamped sample position along one axis with the right-sided interpolation
// cell: base index, fractional offset, and d(position)/d(displacement).
struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;
  double dpos;
};

AxisSample axis_sample(double pos, std::size_t n) {
  const double maxc = static_cast<double>(n - 1);
  double dpos = 1.0;
  if (pos < 0.0) {
    pos = 0.0;
    dpos = 0.0;
  } else if (pos > maxc) {
    pos = maxc;
    dpos = 0.0;
  }
  const double fl = std::floor(pos);
  const auto lo = static_cast<std::size_t>(fl);
  const std::size_t hi = std::min(lo + 1, n - 1);
  return AxisSample{lo, hi, pos - fl, dpos};
}

}  // namespace

Var bilinear_warp(const Var& source, const Var& flow) {
  const Shape s = source.shape();
  const Shape fs = flow.shape();
  if (fs.c != 2 || fs.h != s.h || fs.w != s.w) {
    throw Error(ErrorKind::Shape, "bilinear_warp: flow " + to_string(fs) + " does not match source " +
                                      to_string(s) + " (expected 2x" + std::to_string(s.h) + "x" +
                                      std::to_string(s.w) + ")");
  }
  const Tensor& src = source.value();
  const Tensor& fl = flow.value();
  Tensor out(s);
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j) {
      const AxisSample ay = axis_sample(static_cast<double>(i) + fl(0, i, j), s.h);
      const AxisSample ax = axis_sample(static_cast<double>(j) + fl(1, i, j), s.w);
      for (std::size_t c = 0; c < s.c; ++c) {
        const double top = (1.0 - ax.frac) * src(c, ay.lo, ax.lo) + ax.frac * src(c, ay.lo, ax.hi);
        const double bot = (1.0 - ax.frac) * src(c, ay.hi, ax.lo) + ax.frac * src(c, ay.hi, ax.hi);
        out(c, i, j) = (1.0 - ay.frac) * top + ay.frac * bot;
      }
    }

  const std::size_t sid = source.id();
  const std::size_t fid = flow.id();
  const Graph* gp = &source.graph();
  return source.graph().record(std::move(out), {sid, fid}, [gp, sid, fid, s](const Tensor& up, GradSink& sink) {
    Tensor* gsrc = sink.slot(sid);
    Tensor* gflow = sink.slot(fid);
    const Tensor& src = gp->value(sid);
    const Tensor& fl = gp->value(fid);
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        const AxisSample ay = axis_sample(static_cast<double>(i) + fl(0, i, j), s.h);
        const AxisSample ax = axis_sample(static_cast<double>(j) + fl(1, i, j), s.w);
        double dy = 0.0;
        double dx = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) {
          const double u = up(c, i, j);
          const double s00 = src(c, ay.lo, ax.lo);
          const double s01 = src(c, ay.lo, ax.hi);
          const double s10 = src(c, ay.hi, ax.lo);
          const double s11 = src(c, ay.hi, ax.hi);
          if (gsrc) {
            (*gsrc)(c, ay.lo, ax.lo) += u * (1.0 - ay.frac) * (1.0 - ax.frac);
            (*gsrc)(c, ay.lo, ax.hi) += u * (1.0 - ay.frac) * ax.frac;
            (*gsrc)(c, ay.hi, ax.lo) += u * ay.frac * (1.0 - ax.frac);
            (*gsrc)(c, ay.hi, ax.hi) += u * ay.frac * ax.frac;
          }
          const double top = (1.0 - ax.frac) * s00 + ax.frac * s01;
          const double bot = (1.0 - ax.frac) * s10 + ax.frac * s11;
          dy += u * (bot - top);
          dx += u * ((1.0 - ay.frac) * (s01 - s00) + ay.frac * (s11 - s10));
        }
        if (gflow) {
          (*gflow)(0, i, j) += dy * ay.dpos;
          (*gflow)(1, i, j) += dx * ax.dpos;
        }
      }
  });
}

}  // namespace pa::grad
