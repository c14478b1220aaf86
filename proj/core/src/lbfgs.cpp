#include <cmath>
#include <deque>
#include <numeric>

#include "pa/error.hpp"
#include "pa/optim.hpp"

namespace pa::optim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// H * g via the two-loop recursion, with the initial scaling s'y / y'y.
std::vector<double> apply_inverse_hessian(const std::deque<Pair>& mem, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alpha[k] = mem[k].rho * dot(mem[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * mem[k].y[i];
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * dot(mem[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * mem[k].s[i];
  }
  return q;
}

}  // namespace

void LbfgsConfig::validate() const {
  if (memory < 1) throw Error(ErrorKind::Config, "lbfgs: memory must be >= 1");
  if (!(gradient_tolerance > 0.0)) throw Error(ErrorKind::Config, "lbfgs: gradient_tolerance must be > 0");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw Error(ErrorKind::Config, "lbfgs: armijo_c1 must be in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorKind::Config, "lbfgs: shrink must be in (0, 1)");
  if (max_line_search_trials < 1) throw Error(ErrorKind::Config, "lbfgs: max_line_search_trials must be >= 1");
}

std::string to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::ConvergedByCallback: return "converged_by_callback";
    case LbfgsStatus::GradientSmall: return "gradient_small";
    case LbfgsStatus::MaxIterations: return "max_iters";
    case LbfgsStatus::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, std::vector<double> x0,
                           const LbfgsConfig& config) {
  config.validate();
  for (double v : x0) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "lbfgs: non-finite starting point");
  }
  LbfgsResult r;
  const auto evaluate = [&](std::span<const double> x) {
    Evaluation e = objective(x);
    ++r.evaluations;
    if (e.gradient.size() != x.size()) {
      throw Error(ErrorKind::Shape, "lbfgs: gradient has " + std::to_string(e.gradient.size()) +
                                        " entries, x has " + std::to_string(x.size()));
    }
    if (!std::isfinite(e.loss)) {
      throw Error(ErrorKind::Numeric, "lbfgs: non-finite loss at evaluation " + std::to_string(r.evaluations));
    }
    for (double g : e.gradient) {
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::Numeric,
                    "lbfgs: non-finite gradient at evaluation " + std::to_string(r.evaluations));
      }
    }
    return e;
  };

  std::vector<double> x = std::move(x0);
  Evaluation cur = evaluate(x);
  r.loss_history.push_back(cur.loss);
  const auto finish = [&](LbfgsStatus status) {
    r.x = x;
    r.loss = cur.loss;
    r.status = status;
    return r;
  };
  if (cur.converged) return finish(LbfgsStatus::ConvergedByCallback);

  std::deque<Pair> mem;
  std::vector<double> trial(x.size());
  while (true) {
    const double gnorm = norm(cur.gradient);
    if (gnorm < config.gradient_tolerance) return finish(LbfgsStatus::GradientSmall);
    if (r.iterations >= config.max_iterations) return finish(LbfgsStatus::MaxIterations);

    bool accepted = false;
    // attempt 0 uses the quasi-Newton direction, attempt 1 falls back to steepest descent
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (mem.empty()) break;
        mem.clear();
      }
      std::vector<double> d = apply_inverse_hessian(mem, cur.gradient);
      for (double& v : d) v = -v;
      double slope = dot(cur.gradient, d);
      if (!(slope < 0.0)) {
        mem.clear();
        d = cur.gradient;
        for (double& v : d) v = -v;
        slope = -gnorm * gnorm;
      }
      double t = mem.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
      for (std::size_t trial_no = 0; trial_no < config.max_line_search_trials; ++trial_no) {
        for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + t * d[i];
        Evaluation next = evaluate(trial);
        if (next.converged) {
          x = trial;
          cur = std::move(next);
          return finish(LbfgsStatus::ConvergedByCallback);
        }
        if (next.loss <= cur.loss + config.armijo_c1 * t * slope) {
          Pair p;
          p.s.resize(x.size());
          p.y.resize(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) {
            p.s[i] = trial[i] - x[i];
            p.y[i] = next.gradient[i] - cur.gradient[i];
          }
          const double sy = dot(p.s, p.y);
          if (sy > 1e-12 * norm(p.s) * norm(p.y)) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (mem.size() > config.memory) mem.pop_front();
          }
          x = trial;
          cur = std::move(next);
          accepted = true;
          break;
        }
        t *= config.shrink;
      }
    }
    if (!accepted) return finish(LbfgsStatus::LineSearchFailed);
    ++r.iterations;
    r.loss_history.push_back(cur.loss);
  }
}

}  // namespace pa::optim
