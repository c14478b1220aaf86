#pragma once

// Optimizers over flat real vectors: L-BFGS for smooth objectives and
// DE/rand/1/bin for black-box ones.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pa::optim {

// ---- L-BFGS ---------------------------------------------------------------

struct LbfgsConfig {
  std::size_t memory = 10;
  std::size_t max_iterations = 250;
  double gradient_tolerance = 1e-6;  // on the Euclidean norm
  double armijo_c1 = 1e-4;
  double shrink = 0.5;
  std::size_t max_line_search_trials = 20;

  void validate() const;
};

/// One objective evaluation. `converged` halts the optimizer at this point.
struct Evaluation {
  double loss = 0.0;
  std::vector<double> gradient;
  bool converged = false;
};

using LbfgsObjective = std::function<Evaluation(std::span<const double> x)>;

enum class LbfgsStatus {
  ConvergedByCallback,
  GradientSmall,
  MaxIterations,
  LineSearchFailed,  // no Armijo step along the L-BFGS or steepest-descent direction
};

std::string to_string(LbfgsStatus s);

struct LbfgsResult {
  std::vector<double> x;
  double loss = 0.0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  std::size_t iterations = 0;   // accepted steps
  std::size_t evaluations = 0;  // objective calls
  std::vector<double> loss_history;  // loss at x0 and after every accepted step
};

/// Two-loop recursion with backtracking Armijo line search. Throws
/// ErrorKind::Numeric when the objective yields a non-finite loss or gradient,
/// ErrorKind::Shape when the gradient length differs from x.
LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, std::vector<double> x0,
                           const LbfgsConfig& config = {});

// ---- differential evolution -----------------------------------------------

struct DeConfig {
  std::size_t population = 80;
  std::size_t max_generations = 75;
  double differential_weight = 0.5;
  double crossover_rate = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

using DeObjective = std::function<double(std::span<const double> x)>;
/// Receives a candidate and its objective value.
using DeEarlyStop = std::function<bool(std::span<const double> x, double value)>;

struct DeResult {
  std::vector<double> best;
  double value = 0.0;
  bool stopped_early = false;
  std::size_t generations = 0;
  std::size_t evaluations = 0;
};

/// Minimizes `objective` inside the box. Returns the first evaluated
/// candidate accepted by `early_stop`, if any.
DeResult differential_evolution(const DeObjective& objective, const std::vector<Bounds>& bounds,
                                const DeConfig& config = {}, const DeEarlyStop& early_stop = {});

}  // namespace pa::optim
