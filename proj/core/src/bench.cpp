#include "pa/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "pa/error.hpp"
#include "pa/random.hpp"

namespace pa {

std::vector<Triplet> select_unanimous(const std::vector<Triplet>& triplets) {
  std::vector<Triplet> out;
  for (const Triplet& t : triplets) {
    if (t.judge == 0.0 || t.judge == 1.0) out.push_back(t);
  }
  return out;
}

int human_choice(const Triplet& t) { return t.judge > 0.5 ? 1 : 0; }

int metric_choice(double s0, double s1) { return s0 > s1 ? 1 : 0; }

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double evaluate_2afc_accuracy(const std::vector<Triplet>& triplets, const Chooser& choose) {
  if (triplets.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Triplet& t : triplets) hits += choose(t) == human_choice(t) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(triplets.size());
}

double evaluate_2afc_accuracy(const std::vector<Triplet>& triplets, const Metric& metric, std::size_t threads) {
  if (triplets.empty()) return 0.0;
  std::vector<int> hit(triplets.size(), 0);
  parallel_for(triplets.size(), threads, [&](std::size_t i) {
    const Triplet& t = triplets[i];
    hit[i] = metric_choice(metric(t.ref, t.p0), metric(t.ref, t.p1)) == human_choice(t) ? 1 : 0;
  });
  std::size_t hits = 0;
  for (int h : hit) hits += static_cast<std::size_t>(h);
  return static_cast<double>(hits) / static_cast<double>(triplets.size());
}

BucketStats bucket_stats(const std::vector<const SampleRecord*>& samples) {
  BucketStats b;
  b.total = samples.size();
  std::vector<const SampleRecord*> hit;
  for (const SampleRecord* s : samples) {
    if (!s->error.empty()) ++b.errors;
    if (s->success) hit.push_back(s);
  }
  b.flipped = hit.size();
  if (hit.empty()) return b;
  const double n = static_cast<double>(hit.size());
  for (const SampleRecord* s : hit) {
    b.mean_eps += s->epsilon_used;
    for (std::size_t k = 0; k < b.pct_pixels_gt.size(); ++k) b.pct_pixels_gt[k] += s->stats.pct_pixels_gt[k];
    b.rmse_mean += s->stats.rmse_255;
    b.psnr_mean += s->stats.psnr_255;
  }
  b.mean_eps /= n;
  for (double& p : b.pct_pixels_gt) p /= n;
  b.rmse_mean /= n;
  b.psnr_mean /= n;
  for (const SampleRecord* s : hit) {
    b.rmse_std += (s->stats.rmse_255 - b.rmse_mean) * (s->stats.rmse_255 - b.rmse_mean);
    b.psnr_std += (s->stats.psnr_255 - b.psnr_mean) * (s->stats.psnr_255 - b.psnr_mean);
  }
  b.rmse_std = std::sqrt(b.rmse_std / n);
  b.psnr_std = std::sqrt(b.psnr_std / n);
  return b;
}

std::vector<std::size_t> combined_curve_ks(std::size_t k) {
  std::vector<std::size_t> ks = {0, 5, 10, 15, 20, k};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

namespace {

std::size_t curve_length(const AttackConfig& c) {
  switch (c.kind) {
    case AttackKind::Fgsm: return static_cast<std::size_t>(std::floor(c.fgsm.max_eps / c.fgsm.eps_step + 1e-9));
    case AttackKind::Pgd:
    case AttackKind::ReversePgd: return c.pgd.max_iters;
    case AttackKind::OnePixel: return c.de.max_generations;
    case AttackKind::Stadv: return c.stadv.max_iterations;
    case AttackKind::StadvPgd: return 0;
  }
  return 0;
}

void copy_outcome(const AttackOutcome& o, SampleRecord& r) {
  r.success = o.success;
  r.prey = o.prey;
  r.s_other = o.s_other;
  r.s_adv = o.s_adv;
  r.epsilon_used = o.epsilon_used;
  r.iterations_used = o.iterations_used;
  r.first_flip = o.first_flip;
  r.stats = o.stats;
  r.diagnostic = o.diagnostic;
}

}  // namespace

BenchmarkReport run_attack_benchmark(const std::vector<Triplet>& triplets, const Metric& metric,
                                     const AttackConfig& config, const RunOptions& options) {
  config.validate();
  BenchmarkReport report;
  report.metric = metric.name();
  report.attack = to_string(config.kind);
  report.seed = options.seed;
  report.samples.resize(triplets.size());
  const std::vector<std::size_t> combined_ks = combined_curve_ks(config.combined_k);

  parallel_for(triplets.size(), options.threads, [&](std::size_t i) {
    const Triplet& t = triplets[i];
    SampleRecord& r = report.samples[i];
    r.index = i;
    r.id = t.id.empty() ? std::to_string(i) : t.id;
    r.human = human_choice(t);
    try {
      r.s0 = metric(t.ref, t.p0);
      r.s1 = metric(t.ref, t.p1);
      r.metric = metric_choice(r.s0, r.s1);
      r.agree = r.metric == r.human;
      if (config.kind == AttackKind::StadvPgd) {
        const AttackOutcome st = stadv_attack(t, metric, config.stadv);
        for (std::size_t k : combined_ks) {
          const AttackOutcome o = k == 0 ? st : continue_with_pgd(t, metric, st, k, config.pgd);
          r.stage_success.push_back(o.success);
          if (k == config.combined_k) copy_outcome(o, r);
        }
      } else {
        copy_outcome(run_attack(t, metric, config, derive_seed(options.seed, i)), r);
      }
    } catch (const std::exception& e) {
      r.error = e.what();
      r.success = false;
    }
  });

  std::vector<const SampleRecord*> agree, disagree;
  for (const SampleRecord& r : report.samples) (r.agree ? agree : disagree).push_back(&r);
  report.agree = bucket_stats(agree);
  report.disagree = bucket_stats(disagree);

  if (config.kind == AttackKind::StadvPgd) {
    for (std::size_t j = 0; j < combined_ks.size(); ++j) {
      CurvePoint p;
      p.k = combined_ks[j];
      for (const SampleRecord& r : report.samples) {
        const bool hit = j < r.stage_success.size() && r.stage_success[j];
        (r.agree ? p.agree_total : p.disagree_total) += 1;
        if (hit) (r.agree ? p.agree_flipped : p.disagree_flipped) += 1;
      }
      report.curve.push_back(p);
    }
  } else {
    const std::size_t K = curve_length(config);
    for (std::size_t k = 0; k <= K; ++k) {
      CurvePoint p;
      p.k = k;
      for (const SampleRecord& r : report.samples) {
        (r.agree ? p.agree_total : p.disagree_total) += 1;
        if (r.success && r.first_flip && *r.first_flip <= k) (r.agree ? p.agree_flipped : p.disagree_flipped) += 1;
      }
      report.curve.push_back(p);
    }
  }
  return report;
}

MarginStats margin_statistics(const std::vector<Triplet>& triplets, const Metric& metric, std::size_t threads) {
  std::vector<double> margin(triplets.size());
  std::vector<int> agree(triplets.size());
  parallel_for(triplets.size(), threads, [&](std::size_t i) {
    const Triplet& t = triplets[i];
    const double s0 = metric(t.ref, t.p0);
    const double s1 = metric(t.ref, t.p1);
    margin[i] = std::abs(s0 - s1);
    agree[i] = metric_choice(s0, s1) == human_choice(t) ? 1 : 0;
  });
  MarginStats m;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (agree[i]) {
      ++m.agree_count;
      m.agree_mean += margin[i];
    } else {
      ++m.disagree_count;
      m.disagree_mean += margin[i];
    }
  }
  if (m.agree_count) m.agree_mean /= static_cast<double>(m.agree_count);
  if (m.disagree_count) m.disagree_mean /= static_cast<double>(m.disagree_count);
  return m;
}

namespace {

struct TransferSample {
  bool failed = false;
  bool source_agree = false;
  bool source_flipped = false;
  bool kept = false;
  std::vector<double> stage_rmse;
  std::vector<int> target_agree;                // per target
  std::vector<std::vector<int>> target_flipped;  // [target][stage]
};

}  // namespace

TransferReport run_transfer_benchmark(const std::vector<Triplet>& triplets, const Metric& source,
                                      const std::vector<const Metric*>& targets,
                                      const TransferPipeline& pipeline, const RunOptions& options) {
  if (pipeline.source_attack != AttackKind::Stadv && pipeline.source_attack != AttackKind::Pgd) {
    throw Error(ErrorKind::Config, "transfer: source attack must be stadv or pgd, got " +
                                       to_string(pipeline.source_attack));
  }
  AttackConfig check;
  check.kind = AttackKind::StadvPgd;
  check.stadv = pipeline.stadv;
  check.pgd = pipeline.pgd;
  check.validate();
  if (!(pipeline.rmse_cap >= 0.0)) throw Error(ErrorKind::Config, "transfer: rmse cap must be >= 0");
  for (const Metric* t : targets) {
    if (t == nullptr) throw Error(ErrorKind::Config, "transfer: null target metric");
  }
  const bool spatial = pipeline.source_attack == AttackKind::Stadv;
  TransferReport report;
  report.source = source.name();
  report.seed = options.seed;
  report.stages.push_back(spatial ? "stadv" : "pgd");
  for (std::size_t k : pipeline.pgd_ks) report.stages.push_back("pgd(" + std::to_string(k) + ")");
  if (spatial) {
    for (std::size_t k : pipeline.combined_ks) report.stages.push_back("stadv+pgd(" + std::to_string(k) + ")");
  }
  const std::size_t n_stages = report.stages.size();

  const auto transfer_one = [&](const Triplet& t, TransferSample& ts) {
    const int human = human_choice(t);
    if (metric_choice(source(t.ref, t.p0), source(t.ref, t.p1)) != human) return;
    ts.source_agree = true;
    const AttackOutcome first = spatial ? stadv_attack(t, source, pipeline.stadv) : pgd_attack(t, source, pipeline.pgd);
    ts.source_flipped = first.success;
    if (!first.success || first.stats.rmse_255 > pipeline.rmse_cap) return;
    ts.kept = true;

    std::vector<Tensor> advs;
    advs.push_back(first.adv);
    for (std::size_t k : pipeline.pgd_ks) {
      PgdConfig c = pipeline.pgd;
      c.max_iters = k;
      c.stop_at_flip = false;
      advs.push_back(pgd_attack(t, source, c).adv);
    }
    if (spatial) {
      for (std::size_t k : pipeline.combined_ks) advs.push_back(continue_with_pgd(t, source, first, k, pipeline.pgd).adv);
    }
    const Tensor& prey = t.distorted(first.prey);
    const Tensor& other = t.distorted(1 - first.prey);
    for (const Tensor& a : advs) ts.stage_rmse.push_back(imperceptibility(a, prey).rmse_255);

    ts.target_agree.resize(targets.size());
    ts.target_flipped.assign(targets.size(), std::vector<int>(n_stages, 0));
    for (std::size_t m = 0; m < targets.size(); ++m) {
      const Metric& target = *targets[m];
      const double s_prey = target(t.ref, prey);
      const double s_other = target(t.ref, other);
      const int before = first.prey == 0 ? metric_choice(s_prey, s_other) : metric_choice(s_other, s_prey);
      if (before != human) continue;
      ts.target_agree[m] = 1;
      for (std::size_t s = 0; s < n_stages; ++s) {
        const double s_adv = target(t.ref, advs[s]);
        const int after = first.prey == 0 ? metric_choice(s_adv, s_other) : metric_choice(s_other, s_adv);
        ts.target_flipped[m][s] = after != human ? 1 : 0;
      }
    }
  };

  std::vector<TransferSample> samples(triplets.size());
  parallel_for(triplets.size(), options.threads, [&](std::size_t i) {
    TransferSample& ts = samples[i];
    try {
      transfer_one(triplets[i], ts);
    } catch (const std::exception&) {
      ts = TransferSample{};
      ts.failed = true;
    }
  });


  report.targets.resize(targets.size());
  for (std::size_t m = 0; m < targets.size(); ++m) {
    report.targets[m].target = targets[m]->name();
    report.targets[m].flipped.assign(n_stages, 0);
  }
  report.stage_rmse_mean.assign(n_stages, 0.0);
  report.stage_rmse_std.assign(n_stages, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TransferSample& ts = samples[i];
    report.errors += ts.failed ? 1 : 0;
    report.source_accurate += ts.source_agree ? 1 : 0;
    report.source_flipped += ts.source_flipped ? 1 : 0;
    if (!ts.kept) continue;
    ++report.transfer_set;
    report.transfer_indices.push_back(i);
    for (std::size_t s = 0; s < n_stages; ++s) report.stage_rmse_mean[s] += ts.stage_rmse[s];
    for (std::size_t m = 0; m < targets.size(); ++m) {
      report.targets[m].accurate += static_cast<std::size_t>(ts.target_agree[m]);
      for (std::size_t s = 0; s < n_stages; ++s) {
        report.targets[m].flipped[s] += static_cast<std::size_t>(ts.target_flipped[m][s]);
      }
    }
  }
  if (report.transfer_set > 0) {
    const double n = static_cast<double>(report.transfer_set);
    for (double& v : report.stage_rmse_mean) v /= n;
    for (const TransferSample& ts : samples) {
      if (!ts.kept) continue;
      for (std::size_t s = 0; s < n_stages; ++s) {
        const double d = ts.stage_rmse[s] - report.stage_rmse_mean[s];
        report.stage_rmse_std[s] += d * d;
      }
    }
    for (double& v : report.stage_rmse_std) v = std::sqrt(v / n);
  }
  return report;
}

}  // namespace pa
