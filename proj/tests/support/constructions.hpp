#pragma once

// Triplets with analytically known attack behaviour.

#include <cmath>
#include <random>
#include <utility>

#include "pa/attacks.hpp"
#include "support/oracles.hpp"

namespace pa::testing {

inline double mean_square(const Tensor& d) {
  double s = 0.0;
  for (double v : d.values()) s += v * v;
  return s / static_cast<double>(d.size());
}

// MSE reachable from prey = ref + d inside the l-inf ball of radius eps when
// no clipping occurs: every element moves eps further from ref.
inline double mse_after_sign_step(const Tensor& d, double eps) {
  double s = 0.0;
  for (double v : d.values()) s += (std::abs(v) + eps) * (std::abs(v) + eps);
  return s / static_cast<double>(d.size());
}

struct L2Construction {
  Triplet triplet;
  int prey = 0;
  double s_prey = 0.0;
  double s_other = 0.0;
  double bound = 0.0;  // s_other must stay below this for a guaranteed flip
};

// ref in [-0.7, 0.7]; prey = ref + d with |d| in [0.01, 0.05] so a radius-eps
// sign step never reaches the [-1, 1] clip. s_other is placed at
// s_prey + fraction * (mse_after_sign_step(d, eps) - s_prey).
inline L2Construction l2_margin_triplet(std::uint64_t seed, Shape shape, double eps, double fraction) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.01, 0.05);
  std::bernoulli_distribution coin(0.5);
  L2Construction c;
  const Tensor ref = random_image(seed * 7 + 1, shape, -0.7, 0.7);
  Tensor d(shape);
  for (double& v : d.values()) v = (coin(rng) ? 1.0 : -1.0) * mag(rng);
  c.s_prey = mean_square(d);
  c.bound = mse_after_sign_step(d, eps);
  c.s_other = c.s_prey + fraction * (c.bound - c.s_prey);
  Tensor n = random_image(seed * 7 + 2, shape, -1.0, 1.0);
  const double scale = std::sqrt(c.s_other / mean_square(n));
  Tensor prey = ref;
  Tensor other = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    prey[i] += d[i];
    other[i] += scale * n[i];
  }
  c.prey = coin(rng) ? 1 : 0;
  c.triplet.ref = ref;
  c.triplet.p0 = c.prey == 0 ? prey : other;
  c.triplet.p1 = c.prey == 0 ? other : prey;
  c.triplet.judge = c.prey == 0 ? 0.0 : 1.0;
  c.triplet.id = "l2-margin-" + std::to_string(seed);
  return c;
}

// Translate each channel by `shift` columns with edge replication.
inline Tensor shift_columns(const Tensor& x, long shift) {
  const Shape s = x.shape();
  Tensor y(s);
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        const long src = std::clamp<long>(static_cast<long>(j) - shift, 0, static_cast<long>(s.w) - 1);
        y(c, i, j) = x(c, i, static_cast<std::size_t>(src));
      }
  return y;
}

// other = smooth content, prey = the same content shifted one column,
// ref = prey + lambda * (other - prey) with lambda < 0.5, so prey is closer
// and a fraction of a pixel of displacement away from `other` flips the rank.
inline Triplet shift_triplet(std::uint64_t seed, Shape shape, double lambda, double amplitude = 0.4) {
  const Tensor other = smooth_image(seed, shape, amplitude);
  const Tensor prey = shift_columns(other, 1);
  Tensor ref = prey;
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] += lambda * (other[i] - prey[i]);
  Triplet t;
  t.ref = ref;
  const bool prey_first = seed % 2 == 0;
  t.p0 = prey_first ? prey : other;
  t.p1 = prey_first ? other : prey;
  t.judge = prey_first ? 0.0 : 1.0;
  t.id = "shift-" + std::to_string(seed);
  return t;
}

// Generic random triplet: two independent distortions of a smooth reference.
inline Triplet noisy_triplet(std::uint64_t seed, Shape shape, double noise0, double noise1) {
  const Tensor ref = smooth_image(seed, shape, 0.7);
  const Tensor n0 = random_image(seed * 3 + 1, shape, -noise0, noise0);
  const Tensor n1 = random_image(seed * 3 + 2, shape, -noise1, noise1);
  Triplet t;
  t.ref = ref;
  t.p0 = ref;
  t.p1 = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    t.p0[i] = std::clamp(ref[i] + n0[i], -1.0, 1.0);
    t.p1[i] = std::clamp(ref[i] + n1[i], -1.0, 1.0);
  }
  t.judge = noise0 < noise1 ? 0.0 : 1.0;
  t.id = "noisy-" + std::to_string(seed);
  return t;
}

struct BruteForceResult {
  bool flips = false;
  double best_distance = 0.0;
};

// Every pixel position times a 9-level grid per channel.
inline BruteForceResult one_pixel_brute_force(const Triplet& t, const Metric& m) {
  const PreySelection sel = select_prey(t, m);
  const Tensor& prey = t.distorted(sel.prey);
  const Shape s = prey.shape();
  std::vector<double> levels;
  for (int k = 0; k < 9; ++k) levels.push_back(-1.0 + 0.25 * k);
  std::size_t combos = 1;
  for (std::size_t c = 0; c < s.c; ++c) combos *= levels.size();
  BruteForceResult r;
  Tensor img = prey;
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j) {
      for (std::size_t code = 0; code < combos; ++code) {
        std::size_t rest = code;
        for (std::size_t c = 0; c < s.c; ++c) {
          img(c, i, j) = levels[rest % levels.size()];
          rest /= levels.size();
        }
        const double d = m(t.ref, img);
        r.best_distance = std::max(r.best_distance, d);
        if (d > sel.s_other) r.flips = true;
      }
      for (std::size_t c = 0; c < s.c; ++c) img(c, i, j) = prey(c, i, j);
    }
  return r;
}

inline std::size_t changed_pixel_positions(const Tensor& a, const Tensor& b) {
  const Shape s = a.shape();
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j) {
      bool diff = false;
      for (std::size_t c = 0; c < s.c; ++c) diff = diff || a(c, i, j) != b(c, i, j);
      n += diff ? 1 : 0;
    }
  return n;
}

}  // namespace pa::testing
