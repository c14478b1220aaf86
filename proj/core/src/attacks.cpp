#include "pa/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pa/error.hpp"
#include "pa/grad.hpp"

namespace pa {

namespace {

constexpr double kFlowEps = 1e-12;

double score(const Metric& m, const Tensor& ref, const Tensor& x) {
  const double s = m(ref, x);
  if (!std::isfinite(s)) throw Error(ErrorKind::Numeric, m.name() + ": non-finite distance");
  return s;
}

struct ScoreAndGrad {
  double s = 0.0;
  Tensor grad;
};

// Metric score at x and the gradient, with respect to x, of the rank loss
// the attack ascends: (r - 1)^2 forward, r^2 reverse, r = s_o / (s_o + s).
ScoreAndGrad rank_loss_gradient(const Metric& m, const Tensor& ref, const Tensor& x, double s_other,
                                bool reverse) {
  grad::Graph g;
  const grad::Var xv = g.leaf(x);
  const grad::Var s = m.distance(g.constant(ref), xv);
  const grad::Var ratio = s_other / (s + s_other);
  const grad::Var loss = grad::square(reverse ? ratio : ratio - 1.0);
  ScoreAndGrad r;
  r.s = s.value().item();
  if (!std::isfinite(r.s) || !std::isfinite(loss.value().item())) {
    throw Error(ErrorKind::Numeric, m.name() + ": non-finite loss");
  }
  r.grad = g.backward(loss).of(xv);
  return r;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

AttackOutcome start_outcome(const Triplet& t, const PreySelection& sel) {
  AttackOutcome o;
  o.prey = sel.prey;
  o.s_prey = sel.s_prey;
  o.s_other = sel.s_other;
  o.prey_image = t.distorted(sel.prey);
  o.adv = o.prey_image;
  o.s_adv = sel.s_prey;
  return o;
}

void finish(AttackOutcome& o) { o.stats = imperceptibility(o.adv, o.prey_image); }

// Signed-gradient iterations from `start` with delta clipped to the eps ball
// around `start` and the image clipped to [-1, 1].
void run_pgd(const Metric& m, const Tensor& ref, const Tensor& start, double s_other, const PgdConfig& c,
             bool reverse, AttackOutcome& o) {
  if (!(c.eps >= 0.0) || !(c.alpha >= 0.0)) throw Error(ErrorKind::Config, "pgd: eps and alpha must be >= 0");
  Tensor delta(start.shape());
  Tensor adv = start;
  for (std::size_t k = 0;; ++k) {
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = std::clamp(start[i] + delta[i], -1.0, 1.0);
    const bool last = k == c.max_iters;
    const bool need_step = !last;
    ScoreAndGrad sg;
    if (need_step) {
      sg = rank_loss_gradient(m, ref, adv, s_other, reverse);
    } else {
      sg.s = score(m, ref, adv);
    }
    const bool flipped = rank_flipped(sg.s, s_other, reverse);
    if (flipped && !o.first_flip) o.first_flip = k;
    o.adv = adv;
    o.s_adv = sg.s;
    o.iterations_used = k;
    if (flipped && c.stop_at_flip) break;
    if (last) break;
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double stepped = adv[i] + c.alpha * sign(sg.grad[i]);
      delta[i] = std::clamp(stepped - start[i], -c.eps, c.eps);
    }
  }
  o.success = rank_flipped(o.s_adv, s_other, reverse);
}

}  // namespace

void Triplet::validate() const {
  require_same_shape(ref.shape(), p0.shape(), "triplet ref/p0");
  require_same_shape(ref.shape(), p1.shape(), "triplet ref/p1");
}

PreySelection select_prey(const Triplet& t, const Metric& metric) {
  t.validate();
  const double s0 = score(metric, t.ref, t.p0);
  const double s1 = score(metric, t.ref, t.p1);
  if (s0 > s1) return {1, s1, s0};
  return {0, s0, s1};
}

PreySelection select_reverse_prey(const Triplet& t, const Metric& metric) {
  t.validate();
  const double s0 = score(metric, t.ref, t.p0);
  const double s1 = score(metric, t.ref, t.p1);
  if (s0 > s1) return {0, s0, s1};
  return {1, s1, s0};
}

double rank_loss(double s_other, double s_x) {
  if (s_other + s_x == 0.0) throw Error(ErrorKind::Domain, "rank_loss: both scores are zero");
  const double r = s_other / (s_other + s_x) - 1.0;
  return r * r;
}

double inverse_rank_loss(double s_other, double s_x) {
  if (s_other + s_x == 0.0) throw Error(ErrorKind::Domain, "inverse_rank_loss: both scores are zero");
  const double r = s_other / (s_other + s_x);
  return r * r;
}

double flow_loss(const Tensor& flow) {
  Tensor unused(flow.shape());
  return flow_loss(flow, unused);
}

double flow_loss(const Tensor& flow, Tensor& gradient) {
  const Shape s = flow.shape();
  if (s.c != 2) throw Error(ErrorKind::Shape, "flow_loss: flow must have 2 channels, got " + std::to_string(s.c));
  gradient = Tensor(s);
  const double floor = std::sqrt(kFlowEps);
  double total = 0.0;
  const auto pair = [&](std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
    const double du = flow(0, i, j) - flow(0, y, x);
    const double dv = flow(1, i, j) - flow(1, y, x);
    const double r = std::sqrt(du * du + dv * dv + kFlowEps);
    total += r - floor;
    gradient(0, i, j) += du / r;
    gradient(0, y, x) -= du / r;
    gradient(1, i, j) += dv / r;
    gradient(1, y, x) -= dv / r;
  };
  for (std::size_t i = 0; i < s.h; ++i) {
    for (std::size_t j = 0; j < s.w; ++j) {
      if (i > 0) pair(i, j, i - 1, j);
      if (i + 1 < s.h) pair(i, j, i + 1, j);
      if (j > 0) pair(i, j, i, j - 1);
      if (j + 1 < s.w) pair(i, j, i, j + 1);
    }
  }
  return total;
}

Imperceptibility imperceptibility(const Tensor& adv, const Tensor& prey) {
  require_same_shape(adv.shape(), prey.shape(), "imperceptibility");
  Imperceptibility r;
  double sq = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double d = adv[i] - prey[i];
    sq += d * d;
    for (std::size_t k = 0; k < kPixelThresholds.size(); ++k) {
      if (std::abs(d) > kPixelThresholds[k]) r.pct_pixels_gt[k] += 1.0;
    }
  }
  const double n = static_cast<double>(adv.size());
  for (double& p : r.pct_pixels_gt) p /= n;
  r.rmse_255 = std::sqrt(sq / n) * 127.5;
  r.psnr_255 = r.rmse_255 > 0.0 ? 20.0 * std::log10(255.0 / r.rmse_255)
                                : std::numeric_limits<double>::infinity();
  return r;
}

AttackOutcome fgsm_attack(const Triplet& t, const Metric& metric, const FgsmConfig& c) {
  if (!(c.eps_step > 0.0) || !(c.max_eps >= 0.0)) {
    throw Error(ErrorKind::Config, "fgsm: eps_step must be > 0 and max_eps >= 0");
  }
  const PreySelection sel = select_prey(t, metric);
  AttackOutcome o = start_outcome(t, sel);
  const Tensor& prey = o.prey_image;
  const ScoreAndGrad sg = rank_loss_gradient(metric, t.ref, prey, sel.s_other, false);
  Tensor direction(prey.shape());
  bool any = false;
  for (std::size_t i = 0; i < prey.size(); ++i) {
    direction[i] = sign(sg.grad[i]);
    any = any || direction[i] != 0.0;
  }
  if (!any) {
    o.diagnostic = "zero gradient at prey";
    finish(o);
    return o;
  }
  const auto steps = static_cast<std::size_t>(std::floor(c.max_eps / c.eps_step + 1e-9));
  Tensor adv(prey.shape());
  for (std::size_t n = 1; n <= steps; ++n) {
    const double eps = static_cast<double>(n) * c.eps_step;
    for (std::size_t i = 0; i < prey.size(); ++i) adv[i] = std::clamp(prey[i] + eps * direction[i], -1.0, 1.0);
    const double s = score(metric, t.ref, adv);
    o.adv = adv;
    o.s_adv = s;
    o.epsilon_used = eps;
    o.iterations_used = n;
    if (rank_flipped(s, sel.s_other)) {
      o.success = true;
      o.first_flip = n;
      break;
    }
  }
  finish(o);
  return o;
}

AttackOutcome pgd_attack(const Triplet& t, const Metric& metric, const PgdConfig& c) {
  const PreySelection sel = select_prey(t, metric);
  AttackOutcome o = start_outcome(t, sel);
  run_pgd(metric, t.ref, o.prey_image, sel.s_other, c, false, o);
  finish(o);
  return o;
}

AttackOutcome reverse_pgd_attack(const Triplet& t, const Metric& metric, const PgdConfig& c) {
  const PreySelection sel = select_reverse_prey(t, metric);
  AttackOutcome o = start_outcome(t, sel);
  run_pgd(metric, t.ref, o.prey_image, sel.s_other, c, true, o);
  finish(o);
  return o;
}

AttackOutcome one_pixel_attack(const Triplet& t, const Metric& metric, const optim::DeConfig& de) {
  const PreySelection sel = select_prey(t, metric);
  AttackOutcome o = start_outcome(t, sel);
  const Tensor& prey = o.prey_image;
  const Shape s = prey.shape();
  std::vector<optim::Bounds> bounds;
  bounds.push_back({0.0, static_cast<double>(s.h - 1)});
  bounds.push_back({0.0, static_cast<double>(s.w - 1)});
  for (std::size_t c = 0; c < s.c; ++c) bounds.push_back({-1.0, 1.0});
  // 1-pixel-wide axes: non-empty range that still rounds to 0
  for (auto& b : bounds) {
    if (b.hi <= b.lo) b.hi = b.lo + 0.49;
  }

  const auto apply = [&](std::span<const double> genome) {
    Tensor img = prey;
    const auto row = static_cast<std::size_t>(std::clamp<long>(std::lround(genome[0]), 0, static_cast<long>(s.h) - 1));
    const auto col = static_cast<std::size_t>(std::clamp<long>(std::lround(genome[1]), 0, static_cast<long>(s.w) - 1));
    for (std::size_t c = 0; c < s.c; ++c) img(c, row, col) = std::clamp(genome[2 + c], -1.0, 1.0);
    return img;
  };
  const auto objective = [&](std::span<const double> genome) { return -score(metric, t.ref, apply(genome)); };
  const auto early_stop = [&](std::span<const double>, double value) { return rank_flipped(-value, sel.s_other); };
  const optim::DeResult r = optim::differential_evolution(objective, bounds, de, early_stop);

  o.adv = apply(r.best);
  o.s_adv = score(metric, t.ref, o.adv);
  o.iterations_used = r.generations;
  o.success = rank_flipped(o.s_adv, sel.s_other);
  if (o.success) o.first_flip = r.generations;
  finish(o);
  return o;
}

AttackOutcome stadv_attack(const Triplet& t, const Metric& metric, const StadvConfig& c) {
  const PreySelection sel = select_prey(t, metric);
  AttackOutcome o = start_outcome(t, sel);
  const Tensor& prey = o.prey_image;
  const Shape flow_shape{2, prey.shape().h, prey.shape().w};

  const auto objective = [&](std::span<const double> x) {
    Tensor flow(flow_shape, std::vector<double>(x.begin(), x.end()));
    grad::Graph g;
    const grad::Var fv = g.leaf(flow);
    const grad::Var adv = grad::bilinear_warp(g.constant(prey), fv);
    const grad::Var s = metric.distance(g.constant(t.ref), adv);
    const grad::Var l_rank = grad::square(sel.s_other / (s + sel.s_other));
    const grad::Var weighted = l_rank * c.alpha_rank;
    const Tensor g_rank = g.backward(weighted).of(fv);
    Tensor g_flow;
    const double l_flow = flow_loss(flow, g_flow);
    optim::Evaluation e;
    e.loss = weighted.value().item() + c.beta_flow * l_flow;
    e.gradient.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e.gradient[i] = g_rank[i] + c.beta_flow * g_flow[i];
    e.converged = rank_flipped(s.value().item(), sel.s_other);
    return e;
  };

  optim::LbfgsConfig lc;
  lc.max_iterations = c.max_iterations;
  Tensor flow(flow_shape);
  try {
    const optim::LbfgsResult r = optim::lbfgs_minimize(objective, flow.vector(), lc);
    flow = Tensor(flow_shape, r.x);
    o.iterations_used = r.iterations;
    o.diagnostic = optim::to_string(r.status);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Numeric) throw;
    o.diagnostic = std::string("lbfgs diverged: ") + e.what();
    finish(o);
    return o;
  }
  grad::Graph g;
  o.adv = grad::bilinear_warp(g.constant(prey), g.constant(flow)).value();
  o.s_adv = score(metric, t.ref, o.adv);
  o.success = rank_flipped(o.s_adv, sel.s_other);
  if (o.success) o.first_flip = o.iterations_used;
  finish(o);
  return o;
}

AttackOutcome continue_with_pgd(const Triplet& t, const Metric& metric, const AttackOutcome& stadv,
                                std::size_t k, PgdConfig pgd) {
  if (!stadv.success) return stadv;
  AttackOutcome o = stadv;
  o.first_flip.reset();
  o.diagnostic.clear();
  pgd.max_iters = k;
  pgd.stop_at_flip = false;
  run_pgd(metric, t.ref, stadv.adv, stadv.s_other, pgd, false, o);
  finish(o);
  return o;
}

AttackOutcome combined_stadv_pgd(const Triplet& t, const Metric& metric, std::size_t k,
                                 const StadvConfig& stadv, const PgdConfig& pgd) {
  return continue_with_pgd(t, metric, stadv_attack(t, metric, stadv), k, pgd);
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::OnePixel: return "onepixel";
    case AttackKind::Stadv: return "stadv";
    case AttackKind::StadvPgd: return "stadv-pgd";
    case AttackKind::ReversePgd: return "reverse-pgd";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (AttackKind k : {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::OnePixel, AttackKind::Stadv,
                       AttackKind::StadvPgd, AttackKind::ReversePgd}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::Config, "unknown attack '" + std::string(name) +
                                     "'; available: fgsm, pgd, onepixel, stadv, stadv-pgd, reverse-pgd");
}

void AttackConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, what);
  };
  switch (kind) {
    case AttackKind::Fgsm:
      require(fgsm.eps_step > 0.0 && std::isfinite(fgsm.eps_step), "fgsm: eps_step must be > 0");
      require(fgsm.max_eps >= 0.0 && std::isfinite(fgsm.max_eps), "fgsm: max_eps must be >= 0");
      break;
    case AttackKind::OnePixel: de.validate(); break;
    case AttackKind::Stadv:
    case AttackKind::StadvPgd:
      require(stadv.alpha_rank > 0.0 && std::isfinite(stadv.alpha_rank), "stadv: alpha must be > 0");
      require(stadv.beta_flow >= 0.0 && std::isfinite(stadv.beta_flow), "stadv: beta must be >= 0");
      if (kind == AttackKind::Stadv) break;
      [[fallthrough]];
    case AttackKind::Pgd:
    case AttackKind::ReversePgd:
      require(pgd.eps >= 0.0 && std::isfinite(pgd.eps), "pgd: eps must be >= 0");
      require(pgd.alpha >= 0.0 && std::isfinite(pgd.alpha), "pgd: alpha must be >= 0");
      break;
  }
}

AttackOutcome run_attack(const Triplet& t, const Metric& metric, const AttackConfig& config,
                         std::uint64_t seed) {
  switch (config.kind) {
    case AttackKind::Fgsm: return fgsm_attack(t, metric, config.fgsm);
    case AttackKind::Pgd: return pgd_attack(t, metric, config.pgd);
    case AttackKind::OnePixel: {
      optim::DeConfig de = config.de;
      de.seed = seed;
      return one_pixel_attack(t, metric, de);
    }
    case AttackKind::Stadv: return stadv_attack(t, metric, config.stadv);
    case AttackKind::StadvPgd: return combined_stadv_pgd(t, metric, config.combined_k, config.stadv, config.pgd);
    case AttackKind::ReversePgd: return reverse_pgd_attack(t, metric, config.pgd);
  }
  throw Error(ErrorKind::Config, "unknown attack kind");
}

}  // namespace pa
