#pragma once

// 2AFC evaluation and attack benchmarks over triplet collections.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pa/attacks.hpp"
#include "pa/metrics.hpp"

namespace pa {

/// Keeps triplets whose judge is exactly 0 or 1.
std::vector<Triplet> select_unanimous(const std::vector<Triplet>& triplets);

/// Index of the image humans preferred: 1 when judge > 0.5.
int human_choice(const Triplet& t);
/// Index of the image closer under the metric; ties pick 0.
int metric_choice(double s0, double s1);

/// Runs f(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Each index is processed exactly once.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f);

using Chooser = std::function<int(const Triplet&)>;

double evaluate_2afc_accuracy(const std::vector<Triplet>& triplets, const Chooser& choose);
double evaluate_2afc_accuracy(const std::vector<Triplet>& triplets, const Metric& metric,
                              std::size_t threads = 1);

struct RunOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// One attacked sample, without image payloads.
struct SampleRecord {
  std::size_t index = 0;
  std::string id;
  int human = 0;
  int metric = 0;
  bool agree = false;
  double s0 = 0.0;
  double s1 = 0.0;
  std::string error;  // non-empty when the attack threw
  std::string diagnostic;
  bool success = false;
  int prey = 0;
  double s_other = 0.0;
  double s_adv = 0.0;
  double epsilon_used = 0.0;
  std::size_t iterations_used = 0;
  std::optional<std::size_t> first_flip;
  Imperceptibility stats;
  std::vector<bool> stage_success;  // combined attack: success after each curve k
};

struct BucketStats {
  std::size_t total = 0;
  std::size_t flipped = 0;
  std::size_t errors = 0;
  // over flipped samples
  double mean_eps = 0.0;
  std::array<double, 3> pct_pixels_gt{};
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
};

struct CurvePoint {
  std::size_t k = 0;
  std::size_t agree_flipped = 0;
  std::size_t agree_total = 0;
  std::size_t disagree_flipped = 0;
  std::size_t disagree_total = 0;
};

struct BenchmarkReport {
  std::string metric;
  std::string attack;
  std::uint64_t seed = 0;
  std::vector<SampleRecord> samples;
  BucketStats agree;
  BucketStats disagree;
  std::vector<CurvePoint> curve;  // cumulative flips by step k
};

/// Population statistics of a bucket's samples.
BucketStats bucket_stats(const std::vector<const SampleRecord*>& samples);

/// Attacks every triplet. Per-sample seeds depend only on (seed, index), so
/// the report does not depend on the thread count. Per-sample errors are
/// recorded, never rethrown.
BenchmarkReport run_attack_benchmark(const std::vector<Triplet>& triplets, const Metric& metric,
                                     const AttackConfig& config, const RunOptions& options = {});

/// Step values used for the combined attack's flip-rate curve.
std::vector<std::size_t> combined_curve_ks(std::size_t k);

struct MarginStats {
  std::size_t agree_count = 0;
  double agree_mean = 0.0;
  std::size_t disagree_count = 0;
  double disagree_mean = 0.0;
};

/// Mean |s0 - s1| per agreement bucket.
MarginStats margin_statistics(const std::vector<Triplet>& triplets, const Metric& metric,
                              std::size_t threads = 1);

// ---- transfer -------------------------------------------------------------

struct TransferPipeline {
  AttackKind source_attack = AttackKind::Stadv;  // Stadv or Pgd
  StadvConfig stadv;
  PgdConfig pgd;
  std::vector<std::size_t> pgd_ks = {10};               // PGD(k) stages from the original prey
  std::vector<std::size_t> combined_ks = {5, 10, 15, 20};  // stAdv + PGD(k) stages
  double rmse_cap = 3.0;
};

struct TransferTargetRow {
  std::string target;
  std::size_t accurate = 0;             // transfer-set samples the target ranks like humans
  std::vector<std::size_t> flipped;     // per stage
};

struct TransferReport {
  std::string source;
  std::uint64_t seed = 0;
  std::size_t source_accurate = 0;  // samples the source ranks like humans
  std::size_t source_flipped = 0;   // source-attack successes
  std::size_t transfer_set = 0;     // successes with RMSE <= cap
  std::size_t errors = 0;           // samples whose pipeline threw
  std::vector<std::string> stages;
  std::vector<double> stage_rmse_mean;
  std::vector<double> stage_rmse_std;
  std::vector<TransferTargetRow> targets;
  std::vector<std::size_t> transfer_indices;
};

/// White-box attack on `source`, keep successes within the RMSE cap, then
/// count, per target and stage, rank flips among samples the target ranked
/// like humans on the original images. Every target sees the same adversarial
/// tensor.
TransferReport run_transfer_benchmark(const std::vector<Triplet>& triplets, const Metric& source,
                                      const std::vector<const Metric*>& targets,
                                      const TransferPipeline& pipeline, const RunOptions& options = {});

}  // namespace pa
