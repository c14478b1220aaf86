#include <algorithm>
#include <cmath>

#include "pa/error.hpp"
#include "pa/optim.hpp"
#include "pa/random.hpp"

namespace pa::optim {

void DeConfig::validate() const {
  if (population < 4) {
    throw Error(ErrorKind::Config, "differential evolution: population " + std::to_string(population) +
                                       " is below the minimum of 4");
  }
  if (!(differential_weight > 0.0 && differential_weight <= 2.0)) {
    throw Error(ErrorKind::Config, "differential evolution: F must be in (0, 2]");
  }
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw Error(ErrorKind::Config, "differential evolution: crossover rate must be in [0, 1]");
  }
}

DeResult differential_evolution(const DeObjective& objective, const std::vector<Bounds>& bounds,
                                const DeConfig& config, const DeEarlyStop& early_stop) {
  config.validate();
  if (bounds.empty()) throw Error(ErrorKind::Config, "differential evolution: no genes");
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    const Bounds& b = bounds[j];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
      throw Error(ErrorKind::Config, "differential evolution: gene " + std::to_string(j) +
                                         " needs finite bounds with lo < hi");
    }
  }

  const std::size_t np = config.population;
  const std::size_t dim = bounds.size();
  Rng rng(config.seed);
  DeResult r;

  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  std::vector<double> fit(np);
  const auto evaluate = [&](const std::vector<double>& x) {
    const double v = objective(x);
    ++r.evaluations;
    if (std::isnan(v)) throw Error(ErrorKind::Numeric, "differential evolution: objective returned NaN");
    return v;
  };
  const auto stop_with = [&](const std::vector<double>& x, double v) {
    if (!early_stop || !early_stop(x, v)) return false;
    r.best = x;
    r.value = v;
    r.stopped_early = true;
    return true;
  };

  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < dim; ++j) pop[i][j] = uniform(rng, bounds[j].lo, bounds[j].hi);
    fit[i] = evaluate(pop[i]);
    if (stop_with(pop[i], fit[i])) return r;
  }

  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<std::size_t> pick_gene(0, dim - 1);
  std::vector<std::vector<double>> next = pop;
  std::vector<double> next_fit = fit;
  std::vector<double> trial(dim);
  for (std::size_t gen = 0; gen < config.max_generations; ++gen) {
    r.generations = gen + 1;
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = pick(rng); while (a == i);
      do b = pick(rng); while (b == i || b == a);
      do c = pick(rng); while (c == i || c == a || c == b);
      const std::size_t forced = pick_gene(rng);
      for (std::size_t j = 0; j < dim; ++j) {
        const bool cross = j == forced || uniform(rng, 0.0, 1.0) < config.crossover_rate;
        const double v = cross ? pop[a][j] + config.differential_weight * (pop[b][j] - pop[c][j]) : pop[i][j];
        trial[j] = std::clamp(v, bounds[j].lo, bounds[j].hi);
      }
      const double f = evaluate(trial);
      if (stop_with(trial, f)) return r;
      if (f <= fit[i]) {
        next[i] = trial;
        next_fit[i] = f;
      }
    }
    pop = next;
    fit = next_fit;
  }

  const std::size_t best = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
  r.best = pop[best];
  r.value = fit[best];
  return r;
}

}  // namespace pa::optim
