#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pa/error.hpp"
#include "pa/optim.hpp"

namespace pa::optim {
namespace {

std::vector<double> random_vector(std::uint64_t seed, std::size_t n, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

LbfgsObjective shifted_quadratic(const std::vector<double>& c) {
  return [c](std::span<const double> x) {
    Evaluation e;
    e.gradient.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - c[i];
      e.loss += d * d;
      e.gradient[i] = 2.0 * d;
    }
    return e;
  };
}

Evaluation rosenbrock(std::span<const double> x) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  return {a * a + 100.0 * b * b, {-2.0 * a - 400.0 * x[0] * b, 200.0 * b}};
}

double gradient_norm(const LbfgsObjective& f, const std::vector<double>& x) {
  double s = 0.0;
  for (double g : f(x).gradient) s += g * g;
  return std::sqrt(s);
}

TEST(Lbfgs, QuadraticReachesAnalyticMinimum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<double> c = random_vector(seed, 20, -3.0, 3.0);
    const auto f = shifted_quadratic(c);
    LbfgsConfig cfg;
    cfg.max_iterations = 50;
    const LbfgsResult r = lbfgs_minimize(f, std::vector<double>(20, 0.0), cfg);
    EXPECT_EQ(r.status, LbfgsStatus::GradientSmall) << to_string(r.status);
    EXPECT_LE(r.iterations, 50u);
    EXPECT_LT(gradient_norm(f, r.x), 1e-6);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(r.x[i], c[i], 1e-6);
  }
}

TEST(Lbfgs, RosenbrockFromClassicStart) {
  LbfgsConfig cfg;
  cfg.max_iterations = 200;
  cfg.gradient_tolerance = 1e-10;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, cfg);
  EXPECT_LT(r.loss, 1e-8);
  EXPECT_LE(r.iterations, 200u);
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 1e-3);
}

TEST(Lbfgs, CallbackAtFirstCallReturnsStart) {
  std::size_t calls = 0;
  const auto f = [&](std::span<const double> x) {
    ++calls;
    Evaluation e = rosenbrock(x);
    e.converged = true;
    return e;
  };
  const std::vector<double> x0{0.3, -0.7};
  const LbfgsResult r = lbfgs_minimize(f, x0, {});
  EXPECT_EQ(r.status, LbfgsStatus::ConvergedByCallback);
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(calls, 1u);
}

TEST(Lbfgs, CallbackHaltsAtTriggeringPoint) {
  std::vector<double> trigger;
  const auto f = [&](std::span<const double> x) {
    Evaluation e = rosenbrock(x);
    e.converged = e.loss < 1.0;
    if (e.converged && trigger.empty()) trigger.assign(x.begin(), x.end());
    return e;
  };
  const LbfgsResult r = lbfgs_minimize(f, {-1.2, 1.0}, {});
  EXPECT_EQ(r.status, LbfgsStatus::ConvergedByCallback);
  EXPECT_EQ(r.x, trigger);
  EXPECT_LT(r.loss, 1.0);
}

TEST(Lbfgs, AcceptedStepsNeverIncreaseLoss) {
  const LbfgsResult r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, {});
  ASSERT_GE(r.loss_history.size(), 2u);
  for (std::size_t k = 1; k < r.loss_history.size(); ++k) {
    EXPECT_LE(r.loss_history[k], r.loss_history[k - 1]) << "step " << k;
  }
}

TEST(Lbfgs, BitReproducible) {
  const LbfgsResult a = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, {});
  const LbfgsResult b = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, {});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Lbfgs, MaxIterationsStatus) {
  LbfgsConfig cfg;
  cfg.max_iterations = 3;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, cfg);
  EXPECT_EQ(r.status, LbfgsStatus::MaxIterations);
  EXPECT_EQ(r.iterations, 3u);
}

TEST(Lbfgs, NonFiniteObjectiveThrows) {
  const auto f = [](std::span<const double> x) { return Evaluation{std::nan(""), {x[0]}, false}; };
  try {
    lbfgs_minimize(f, {1.0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
  const auto g = [](std::span<const double> x) { return Evaluation{x[0], {INFINITY}, false}; };
  EXPECT_THROW(lbfgs_minimize(g, {1.0}, {}), Error);
}

TEST(Lbfgs, WrongGradientLengthThrows) {
  const auto f = [](std::span<const double>) { return Evaluation{1.0, {1.0, 2.0}, false}; };
  EXPECT_THROW(lbfgs_minimize(f, {1.0}, {}), Error);
}

TEST(Lbfgs, InvalidConfigRejected) {
  LbfgsConfig cfg;
  cfg.memory = 0;
  EXPECT_THROW(lbfgs_minimize(rosenbrock, {0.0, 0.0}, cfg), Error);
  cfg = {};
  cfg.gradient_tolerance = 0.0;
  EXPECT_THROW(lbfgs_minimize(rosenbrock, {0.0, 0.0}, cfg), Error);
}

TEST(Lbfgs, NonSmoothObjectiveStopsWithoutIncreasing) {
  // |x| has no Armijo step once the iterate sits on the kink
  const auto f = [](std::span<const double> x) {
    return Evaluation{std::abs(x[0]), {x[0] >= 0 ? 1.0 : -1.0}, false};
  };
  const LbfgsResult r = lbfgs_minimize(f, {0.0}, {});
  EXPECT_EQ(r.status, LbfgsStatus::LineSearchFailed);
  EXPECT_EQ(r.x[0], 0.0);
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

TEST(DifferentialEvolution, SphereDim5) {
  DeConfig cfg;
  cfg.seed = 3;
  const DeResult r = differential_evolution(sphere, std::vector<Bounds>(5, {-5.0, 5.0}), cfg);
  EXPECT_LT(r.value, 1e-2);
  EXPECT_FALSE(r.stopped_early);
  EXPECT_EQ(r.generations, 75u);
  EXPECT_EQ(r.evaluations, 80u * 76u);
}

TEST(DifferentialEvolution, EarlyStopAlwaysTrueReturnsInitialMember) {
  DeConfig cfg;
  cfg.seed = 9;
  std::size_t calls = 0;
  const auto f = [&](std::span<const double> x) {
    ++calls;
    return sphere(x);
  };
  const DeResult r = differential_evolution(f, std::vector<Bounds>(3, {-1.0, 1.0}), cfg,
                                            [](std::span<const double>, double) { return true; });
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(r.generations, 0u);
  // same seed, same first draw
  std::mt19937_64 rng(9);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(r.best[j], std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
  }
}

TEST(DifferentialEvolution, FixedSeedIsBitReproducible) {
  DeConfig cfg;
  cfg.seed = 42;
  cfg.max_generations = 20;
  const auto bounds = std::vector<Bounds>(4, {-2.0, 3.0});
  const DeResult a = differential_evolution(sphere, bounds, cfg);
  const DeResult b = differential_evolution(sphere, bounds, cfg);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.value, b.value);
  cfg.seed = 43;
  EXPECT_NE(differential_evolution(sphere, bounds, cfg).best, a.best);
}

TEST(DifferentialEvolution, CandidatesStayInBounds) {
  const std::vector<Bounds> bounds{{0.0, 1.0}, {-3.0, -2.0}, {10.0, 10.5}};
  bool all_inside = true;
  // optimum outside the box pushes mutants against the bounds
  const auto f = [&](std::span<const double> x) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      all_inside = all_inside && x[j] >= bounds[j].lo && x[j] <= bounds[j].hi;
    }
    return -(x[0] + x[1] + x[2]);
  };
  DeConfig cfg;
  cfg.population = 10;
  cfg.max_generations = 30;
  const DeResult r = differential_evolution(f, bounds, cfg);
  EXPECT_TRUE(all_inside);
  EXPECT_NEAR(r.best[0], 1.0, 1e-9);
  EXPECT_NEAR(r.best[2], 10.5, 1e-9);
}

TEST(DifferentialEvolution, InvalidInputsRejected) {
  DeConfig cfg;
  cfg.population = 3;
  EXPECT_THROW(differential_evolution(sphere, {{0.0, 1.0}}, cfg), Error);
  cfg = {};
  cfg.differential_weight = 2.5;
  EXPECT_THROW(differential_evolution(sphere, {{0.0, 1.0}}, cfg), Error);
  EXPECT_THROW(differential_evolution(sphere, {{1.0, 1.0}}, {}), Error);
  EXPECT_THROW(differential_evolution(sphere, {{0.0, INFINITY}}, {}), Error);
}

}  // namespace
}  // namespace pa::optim
