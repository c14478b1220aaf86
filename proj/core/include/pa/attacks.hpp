#pragma once

// Rank-flip attacks on full-reference metrics. A triplet (ref, p0, p1) is
// ranked by the metric; the attack perturbs the "prey" image until the rank
// between the two distorted images flips.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "pa/metrics.hpp"
#include "pa/optim.hpp"
#include "pa/tensor.hpp"

namespace pa {

struct Triplet {
  Tensor ref;
  Tensor p0;
  Tensor p1;
  double judge = 0.0;  // fraction of votes preferring p1
  std::string id;

  const Tensor& distorted(int index) const { return index == 0 ? p0 : p1; }
  /// Throws ErrorKind::Shape when the three images differ in shape.
  void validate() const;
};

struct PreySelection {
  int prey = 0;  // 0 or 1
  double s_prey = 0.0;
  double s_other = 0.0;
};

/// Prey = the distorted image closer to ref; equal scores pick p0.
PreySelection select_prey(const Triplet& t, const Metric& metric);
/// Mirror image: prey = the image farther from ref; equal scores pick p1.
PreySelection select_reverse_prey(const Triplet& t, const Metric& metric);

/// (s_other / (s_other + s_x) - 1)^2. Throws ErrorKind::Domain when both scores are zero.
double rank_loss(double s_other, double s_x);
/// (s_other / (s_other + s_x))^2, the quantity stAdv and the reverse attack drive.
double inverse_rank_loss(double s_other, double s_x);

/// Smoothness of a 2 x H x W flow: over every pixel and each in-bounds
/// 4-neighbour, sqrt(du^2 + dv^2 + 1e-12) - sqrt(1e-12).
double flow_loss(const Tensor& flow);
/// flow_loss and its gradient with respect to every flow entry.
double flow_loss(const Tensor& flow, Tensor& gradient);

inline constexpr std::array<double, 3> kPixelThresholds = {0.001, 0.01, 0.03};

struct Imperceptibility {
  double rmse_255 = 0.0;
  double psnr_255 = 0.0;  // +inf when identical
  std::array<double, 3> pct_pixels_gt{};  // fraction of elements with |delta| above each threshold
};

/// RMSE over all channels on the [0, 255] mapping (x + 1) * 127.5.
Imperceptibility imperceptibility(const Tensor& adv, const Tensor& prey);

struct AttackOutcome {
  bool success = false;
  Tensor adv;
  Tensor prey_image;
  int prey = 0;
  double s_prey = 0.0;
  double s_other = 0.0;
  double s_adv = 0.0;
  double epsilon_used = 0.0;              // FGSM
  std::size_t iterations_used = 0;        // PGD steps, DE generations, or L-BFGS iterations
  std::optional<std::size_t> first_flip;  // step at which the rank first flipped
  Imperceptibility stats;
  std::string diagnostic;
};

struct FgsmConfig {
  double max_eps = 0.05;
  double eps_step = 1e-4;
};

struct PgdConfig {
  double eps = 0.03;
  double alpha = 0.001;
  std::size_t max_iters = 30;
  bool stop_at_flip = true;  // false: always take exactly max_iters steps
};

struct StadvConfig {
  double alpha_rank = 50.0;
  double beta_flow = 0.05;
  std::size_t max_iterations = 250;
};

AttackOutcome fgsm_attack(const Triplet& t, const Metric& metric, const FgsmConfig& c = {});
AttackOutcome pgd_attack(const Triplet& t, const Metric& metric, const PgdConfig& c = {});
AttackOutcome one_pixel_attack(const Triplet& t, const Metric& metric, const optim::DeConfig& de = {});
AttackOutcome stadv_attack(const Triplet& t, const Metric& metric, const StadvConfig& c = {});
/// Exactly k PGD steps (ball radius pgd.eps, step pgd.alpha) starting from a
/// stAdv result. A failed stAdv stage is returned unchanged.
AttackOutcome continue_with_pgd(const Triplet& t, const Metric& metric, const AttackOutcome& stadv,
                                std::size_t k, PgdConfig pgd = {});
AttackOutcome combined_stadv_pgd(const Triplet& t, const Metric& metric, std::size_t k,
                                 const StadvConfig& stadv = {}, const PgdConfig& pgd = {});
/// Perturbs the farther image until it becomes the closer one.
AttackOutcome reverse_pgd_attack(const Triplet& t, const Metric& metric, const PgdConfig& c = {});

/// True when `s_adv` reverses the original ranking.
inline bool rank_flipped(double s_adv, double s_other, bool reverse = false) {
  return reverse ? s_adv < s_other : s_adv > s_other;
}

enum class AttackKind { Fgsm, Pgd, OnePixel, Stadv, StadvPgd, ReversePgd };

std::string to_string(AttackKind k);
/// Accepts fgsm, pgd, onepixel, stadv, stadv-pgd, reverse-pgd.
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::Pgd;
  FgsmConfig fgsm;
  PgdConfig pgd;
  optim::DeConfig de;
  StadvConfig stadv;
  std::size_t combined_k = 10;

  /// Throws ErrorKind::Config for out-of-range hyperparameters of the selected attack.
  void validate() const;
};

/// Dispatches on config.kind. `seed` replaces config.de.seed for One-pixel.
AttackOutcome run_attack(const Triplet& t, const Metric& metric, const AttackConfig& config,
                         std::uint64_t seed);

}  // namespace pa
