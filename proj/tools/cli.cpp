#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

#include "pa/bench.hpp"
#include "pa/dataset.hpp"
#include "pa/error.hpp"
#include "pa/gradcheck.hpp"
#include "pa/random.hpp"
#include "pa/report.hpp"

namespace pa::cli {
namespace {

struct Common {
  std::string dataset;
  std::string metric = "l2";
  std::string weights;
  std::string resize;
  std::string out = "report";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool unanimous = false;
};

struct Hyper {
  AttackConfig attack;
  std::string kind;
  // transfer
  std::string source_attack = "stadv";
  std::vector<std::string> targets = {"l2", "ssim", "msssim"};
  double rmse_cap = 3.0;
  std::vector<std::size_t> pgd_ks = {10};
  std::vector<std::size_t> combined_ks = {5, 10, 15, 20};
  // gradcheck
  std::size_t size = 16;
  std::size_t channels = 3;
};

void add_data_options(CLI::App* app, Common& c, bool with_out) {
  app->add_option("--dataset", c.dataset, "manifest CSV or BAPPS directory")->required()->check(CLI::ExistingPath);
  app->add_option("--weights", c.weights, "ConvMetric weight file for metric 'conv'")->check(CLI::ExistingFile);
  app->add_option("--resize", c.resize, "resample every image to HxW, e.g. 64x64");
  app->add_flag("--unanimous", c.unanimous, "keep only samples with judge 0 or 1");
  app->add_option("--seed", c.seed, "random seed (PA_SEED overrides)");
  app->add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str();
  if (with_out) app->add_option("--out", c.out, "report directory")->capture_default_str();
}

void add_pgd_options(CLI::App* app, PgdConfig& p) {
  app->add_option("--eps", p.eps, "PGD l-inf budget")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--alpha", p.alpha, "PGD step size")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--iters", p.max_iters, "PGD iterations")->capture_default_str();
}

void add_stadv_options(CLI::App* app, StadvConfig& s) {
  app->add_option("--stadv-alpha", s.alpha_rank, "rank-loss weight")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--stadv-beta", s.beta_flow, "flow-loss weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--stadv-iters", s.max_iterations, "L-BFGS iterations")->capture_default_str();
}

std::optional<ResizeTo> parse_resize(const std::string& text) {
  if (text.empty()) return std::nullopt;
  unsigned long h = 0, w = 0;
  char x = 0, tail = 0;
  if (std::sscanf(text.c_str(), "%lu%c%lu%c", &h, &x, &w, &tail) != 3 || (x != 'x' && x != 'X') || h == 0 || w == 0) {
    throw Error(ErrorKind::Config, "--resize expects HxW with positive sizes, got '" + text + "'");
  }
  return ResizeTo{h, w};
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("PA_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || *env == '-') throw Error(ErrorKind::Config, std::string("PA_SEED is not an unsigned integer: ") + env);
  return v;
}

std::vector<Triplet> load(const Common& c, std::ostream& err) {
  std::vector<Triplet> ts = ingest_dataset(c.dataset, parse_resize(c.resize));
  if (c.unanimous) ts = select_unanimous(ts);
  err << "loaded " << ts.size() << " samples from " << c.dataset << "\n";
  return ts;
}

std::unique_ptr<Metric> metric_for(const std::string& name, const Common& c) { return make_metric(name, c.weights); }

int cmd_accuracy(const Common& c, std::ostream& out, std::ostream& err) {
  const auto metric = metric_for(c.metric, c);
  const auto ts = load(c, err);
  const double acc = evaluate_2afc_accuracy(ts, *metric, c.threads);
  const MarginStats m = margin_statistics(ts, *metric, c.threads);
  const auto correct = static_cast<std::size_t>(std::llround(acc * static_cast<double>(ts.size())));
  out << "seed=" << c.seed << " metric=" << metric->name() << " samples=" << ts.size() << " correct=" << correct
      << " accuracy=" << format_number(acc) << "\n";
  out << "margin agree n=" << m.agree_count << " mean=" << format_number(m.agree_mean) << "\n";
  out << "margin disagree n=" << m.disagree_count << " mean=" << format_number(m.disagree_mean) << "\n";
  return kOk;
}

void print_bucket(std::ostream& out, const char* name, const BucketStats& b) {
  out << name << ": flipped " << b.flipped << "/" << b.total << " mean_eps=" << format_number(b.mean_eps)
      << " rmse=" << format_number(b.rmse_mean, 3) << "+-" << format_number(b.rmse_std, 3)
      << " psnr=" << format_number(b.psnr_mean, 2) << "+-" << format_number(b.psnr_std, 2) << " errors=" << b.errors
      << "\n";
}

int cmd_attack(const Common& c, Hyper h, std::ostream& out, std::ostream& err) {
  h.attack.kind = parse_attack_kind(h.kind);
  h.attack.validate();
  const auto metric = metric_for(c.metric, c);
  const auto ts = load(c, err);
  err << "running " << to_string(h.attack.kind) << " on " << metric->name() << " with " << c.threads
      << " thread(s)\n";
  const BenchmarkReport r = run_attack_benchmark(ts, *metric, h.attack, {.seed = c.seed, .threads = c.threads});
  emit_report(r, c.out);
  err << "wrote " << c.out << "/{summary.csv,summary.json,per_sample.csv,plotdata.csv}\n";
  out << "seed=" << c.seed << " metric=" << r.metric << " attack=" << r.attack << "\n";
  print_bucket(out, "agree", r.agree);
  print_bucket(out, "disagree", r.disagree);
  return kOk;
}

int cmd_transfer(const Common& c, const Hyper& h, std::ostream& out, std::ostream& err) {
  TransferPipeline p;
  p.source_attack = parse_attack_kind(h.source_attack);
  p.stadv = h.attack.stadv;
  p.pgd = h.attack.pgd;
  p.pgd_ks = h.pgd_ks;
  p.combined_ks = h.combined_ks;
  p.rmse_cap = h.rmse_cap;
  const auto source = metric_for(c.metric, c);
  std::vector<std::unique_ptr<Metric>> owned;
  std::vector<const Metric*> targets;
  for (const std::string& name : h.targets) {
    owned.push_back(metric_for(name, c));
    targets.push_back(owned.back().get());
  }
  const auto ts = load(c, err);
  err << "transfer from " << source->name() << " via " << h.source_attack << " to " << targets.size()
      << " target(s)\n";
  const TransferReport r = run_transfer_benchmark(ts, *source, targets, p, {.seed = c.seed, .threads = c.threads});
  emit_transfer_report(r, c.out);
  err << "wrote " << c.out << "/{transfer.csv,transfer.json,plotdata.csv}\n";
  out << "seed=" << c.seed << " source=" << r.source << " accurate=" << r.source_accurate
      << " flipped=" << r.source_flipped << " transfer_set=" << r.transfer_set << " errors=" << r.errors << "\n";
  for (const TransferTargetRow& row : r.targets) {
    out << row.target << " accurate=" << row.accurate;
    for (std::size_t s = 0; s < r.stages.size(); ++s) out << " " << r.stages[s] << "=" << row.flipped[s];
    out << "\n";
  }
  return kOk;
}

int cmd_gradcheck(const Common& c, const Hyper& h, std::ostream& out) {
  if (h.size == 0 || (h.channels != 1 && h.channels != 3)) {
    throw Error(ErrorKind::Config, "gradcheck: --size must be >= 1 and --channels 1 or 3");
  }
  const auto metric = metric_for(c.metric, c);
  Rng rng(c.seed);
  const Shape shape{h.channels, h.size, h.size};
  Tensor a(shape), b(shape);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = uniform(rng, -0.9, 0.9);
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = std::clamp(a[k] + uniform(rng, -0.3, 0.3), -1.0, 1.0);
  const GradientAudit g = audit_metric_gradient(*metric, a, b);
  const bool ok = g.max_relative_error < 1e-3;
  out << "seed=" << c.seed << " metric=" << metric->name() << " checked=" << g.checked << "/" << g.total
      << " max_relative_error=" << format_number(g.max_relative_error, 9) << (ok ? " ok" : " FAILED") << "\n";
  return ok ? kOk : kRuntimeError;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial attacks on perceptual similarity metrics", args.empty() ? "percattack" : args[0]};
  app.require_subcommand(1);

  Common c;
  Hyper h;
  const std::string metric_help = "metric: l2, ssim, msssim, conv";

  CLI::App* acc = app.add_subcommand("accuracy", "2AFC accuracy and per-bucket score margins");
  add_data_options(acc, c, false);
  acc->add_option("--metric", c.metric, metric_help)->capture_default_str();

  CLI::App* atk = app.add_subcommand("attack", "attack every sample and write reports");
  atk->add_option("kind", h.kind, "fgsm, pgd, onepixel, stadv, stadv-pgd, reverse-pgd")->required();
  add_data_options(atk, c, true);
  atk->add_option("--metric", c.metric, metric_help)->capture_default_str();
  add_pgd_options(atk, h.attack.pgd);
  add_stadv_options(atk, h.attack.stadv);
  atk->add_option("--max-eps", h.attack.fgsm.max_eps, "FGSM largest epsilon")->capture_default_str();
  atk->add_option("--eps-step", h.attack.fgsm.eps_step, "FGSM epsilon increment")->capture_default_str();
  atk->add_option("--population", h.attack.de.population, "DE population")->capture_default_str();
  atk->add_option("--generations", h.attack.de.max_generations, "DE generations")->capture_default_str();
  atk->add_option("--de-f", h.attack.de.differential_weight, "DE differential weight")->capture_default_str();
  atk->add_option("--de-cr", h.attack.de.crossover_rate, "DE crossover rate")->capture_default_str();
  atk->add_option("--k", h.attack.combined_k, "PGD steps after stAdv (stadv-pgd)")->capture_default_str();

  CLI::App* tr = app.add_subcommand("transfer", "attack a source metric and score the images on targets");
  add_data_options(tr, c, true);
  tr->add_option("--source", c.metric, metric_help)->capture_default_str();
  tr->add_option("--targets", h.targets, "target metrics")->capture_default_str()->delimiter(',');
  tr->add_option("--source-attack", h.source_attack, "stadv or pgd")->capture_default_str();
  tr->add_option("--rmse-cap", h.rmse_cap, "keep source successes with RMSE (0-255 scale) at most this")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--pgd-k", h.pgd_ks, "PGD step counts from the original prey")->delimiter(',');
  tr->add_option("--combined-k", h.combined_ks, "PGD step counts after stAdv")->delimiter(',');
  add_pgd_options(tr, h.attack.pgd);
  add_stadv_options(tr, h.attack.stadv);

  CLI::App* gc = app.add_subcommand("gradcheck", "compare autodiff against finite differences");
  gc->add_option("--metric", c.metric, metric_help)->capture_default_str();
  gc->add_option("--weights", c.weights, "ConvMetric weight file")->check(CLI::ExistingFile);
  gc->add_option("--seed", c.seed, "random seed (PA_SEED overrides)");
  gc->add_option("--size", h.size, "image height and width")->capture_default_str();
  gc->add_option("--channels", h.channels, "1 or 3")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kConfigError;
  }

  try {
    c.seed = seed_from_env(c.seed);
    if (acc->parsed()) return cmd_accuracy(c, out, err);
    if (atk->parsed()) return cmd_attack(c, h, out, err);
    if (tr->parsed()) return cmd_transfer(c, h, out, err);
    return cmd_gradcheck(c, h, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace pa::cli
