#include <algorithm>
#include <cmath>

#include "pa/error.hpp"
#include "pa/grad.hpp"

namespace pa::grad {
namespace {

std::size_t broadcast_dim(std::size_t a, std::size_t b, const Shape& sa, const Shape& sb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw Error(ErrorKind::Shape,
              "cannot broadcast shapes " + to_string(sa) + " and " + to_string(sb));
}

Shape broadcast(const Shape& a, const Shape& b) {
  return Shape{broadcast_dim(a.c, b.c, a, b), broadcast_dim(a.h, b.h, a, b),
               broadcast_dim(a.w, b.w, a, b)};
}

// Flat index into `s` for output coordinate (c, i, j), honoring size-1 dims.
inline std::size_t bindex(const Shape& s, std::size_t c, std::size_t i, std::size_t j) {
  return ((s.c == 1 ? 0 : c) * s.h + (s.h == 1 ? 0 : i)) * s.w + (s.w == 1 ? 0 : j);
}

// Runs f(out_k, a_k, b_k) over the broadcast output.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
  if (sa == out && sb == out) {
    for (std::size_t k = 0; k < out.size(); ++k) f(k, k, k);
    return;
  }
  std::size_t k = 0;
  for (std::size_t c = 0; c < out.c; ++c)
    for (std::size_t i = 0; i < out.h; ++i)
      for (std::size_t j = 0; j < out.w; ++j, ++k) f(k, bindex(sa, c, i, j), bindex(sb, c, i, j));
}

enum class BinOp { Add, Sub, Mul, Div };

Var binary(const Var& a, const Var& b, BinOp op) {
  Graph& g = a.graph();
  if (&b.graph() != &g) throw Error(ErrorKind::Domain, "operands belong to different graphs");
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const Shape out_shape = broadcast(va.shape(), vb.shape());
  Tensor out(out_shape);
  for_each_broadcast(out_shape, va.shape(), vb.shape(), [&](std::size_t k, std::size_t ia, std::size_t ib) {
    switch (op) {
      case BinOp::Add: out[k] = va[ia] + vb[ib]; break;
      case BinOp::Sub: out[k] = va[ia] - vb[ib]; break;
      case BinOp::Mul: out[k] = va[ia] * vb[ib]; break;
      case BinOp::Div: out[k] = va[ia] / vb[ib]; break;
    }
  });
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  const Graph* gp = &g;
  return g.record(std::move(out), {ida, idb},
                  [gp, ida, idb, op, out_shape](const Tensor& up, GradSink& sink) {
                    const Tensor& xa = gp->value(ida);
                    const Tensor& xb = gp->value(idb);
                    Tensor* ga = sink.slot(ida);
                    Tensor* gb = sink.slot(idb);
                    for_each_broadcast(out_shape, xa.shape(), xb.shape(),
                                       [&](std::size_t k, std::size_t ia, std::size_t ib) {
                                         const double u = up[k];
                                         switch (op) {
                                           case BinOp::Add:
                                             if (ga) (*ga)[ia] += u;
                                             if (gb) (*gb)[ib] += u;
                                             break;
                                           case BinOp::Sub:
                                             if (ga) (*ga)[ia] += u;
                                             if (gb) (*gb)[ib] -= u;
                                             break;
                                           case BinOp::Mul:
                                             if (ga) (*ga)[ia] += u * xb[ib];
                                             if (gb) (*gb)[ib] += u * xa[ia];
                                             break;
                                           case BinOp::Div:
                                             if (ga) (*ga)[ia] += u / xb[ib];
                                             if (gb) (*gb)[ib] -= u * xa[ia] / (xb[ib] * xb[ib]);
                                             break;
                                         }
                                       });
                  });
}

// Unary op with derivative expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Graph& g = x.graph();
  const Tensor& vx = x.value();
  Tensor out(vx.shape());
  for (std::size_t k = 0; k < vx.size(); ++k) out[k] = fwd(vx[k]);
  const std::size_t id = x.id();
  const std::size_t yid = g.size();  // id the result is about to receive
  const Graph* gp = &g;
  return g.record(std::move(out), {id}, [gp, id, yid, deriv](const Tensor& up, GradSink& sink) {
    Tensor* gx = sink.slot(id);
    if (!gx) return;
    const Tensor& xv = gp->value(id);
    const Tensor& yv = gp->value(yid);
    for (std::size_t k = 0; k < xv.size(); ++k) (*gx)[k] += up[k] * deriv(xv[k], yv[k]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::Add); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::Sub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::Mul); }
Var div(const Var& a, const Var& b) { return binary(a, b, BinOp::Div); }

Var add(const Var& a, double b) { return binary(a, a.graph().scalar(b), BinOp::Add); }
Var mul(const Var& a, double b) { return binary(a, a.graph().scalar(b), BinOp::Mul); }
Var sub(double a, const Var& b) { return binary(b.graph().scalar(a), b, BinOp::Sub); }
Var div(double a, const Var& b) { return binary(b.graph().scalar(a), b, BinOp::Div); }

Var square(const Var& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(const Var& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var clip(const Var& x, double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorKind::Domain, "clip: lower bound exceeds upper bound");
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var pow(const Var& x, double p) {
  return unary(
      x, [p](double v) { return v > 0.0 ? std::pow(v, p) : 0.0; },
      [p](double v, double) { return v > 0.0 ? p * std::pow(v, p - 1.0) : 0.0; });
}

Var spatial_mean(const Var& x) {
  Graph& g = x.graph();
  const Tensor& v = x.value();
  const Shape s = v.shape();
  Tensor out(Shape{s.c, 1, 1});
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (std::size_t c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.plane(); ++k) acc += v[c * s.plane() + k];
    out[c] = acc / static_cast<double>(s.plane());
  }
  const std::size_t id = x.id();
  return g.record(std::move(out), {id}, [id, s, inv](const Tensor& up, GradSink& sink) {
    Tensor* gx = sink.slot(id);
    if (!gx) return;
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t k = 0; k < s.plane(); ++k) (*gx)[c * s.plane() + k] += up[c] * inv;
  });
}

Var global_mean(const Var& x) {
  Graph& g = x.graph();
  const Tensor& v = x.value();
  double acc = 0.0;
  for (double e : v.values()) acc += e;
  const double inv = 1.0 / static_cast<double>(v.size());
  const std::size_t id = x.id();
  return g.record(Tensor::scalar(acc / static_cast<double>(v.size())), {id}, [id, inv](const Tensor& up, GradSink& sink) {
    Tensor* gx = sink.slot(id);
    if (!gx) return;
    const double u = up[0] * inv;
    for (double& e : gx->values()) e += u;
  });
}

}  // namespace pa::grad
