#include "pa/report.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <vector>

#include "pa/dataset.hpp"
#include "pa/error.hpp"
#include "pa/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace pa {

std::string format_number(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

namespace {

// JSON value carrying exactly the CSV text of a number.
ordered_json json_number(const std::string& text) {
  if (text == "nan" || text == "inf" || text == "-inf") return nullptr;
  return ordered_json::parse(text);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  void write_csv(const fs::path& path, std::uint64_t seed) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << "# seed=" << seed << "\n";
    write_row(out, header_);
    for (const auto& r : rows_) write_row(out, r);
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  }

 private:
  static void write_row(std::ofstream& out, const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
    out << "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
}

std::string rate(std::size_t num, std::size_t den) {
  return format_number(den ? static_cast<double>(num) / static_cast<double>(den) : 0.0);
}

const std::vector<std::string> kSummaryHeader = {
    "metric",    "attack",       "bucket",      "total",       "flipped",   "flip_rate",
    "mean_eps",  "pct_gt_0.001", "pct_gt_0.01", "pct_gt_0.03", "rmse_mean", "rmse_std",
    "psnr_mean", "psnr_std",     "errors"};

}  // namespace

void emit_report(const BenchmarkReport& report, const fs::path& dir) {
  prepare_dir(dir);

  Table summary(kSummaryHeader);
  if (!report.samples.empty()) {
    for (const auto& [name, b] : {std::pair{"agree", &report.agree}, std::pair{"disagree", &report.disagree}}) {
      summary.add({report.metric, report.attack, name, std::to_string(b->total), std::to_string(b->flipped),
                   rate(b->flipped, b->total), format_number(b->mean_eps), format_number(b->pct_pixels_gt[0]),
                   format_number(b->pct_pixels_gt[1]), format_number(b->pct_pixels_gt[2]),
                   format_number(b->rmse_mean), format_number(b->rmse_std), format_number(b->psnr_mean),
                   format_number(b->psnr_std), std::to_string(b->errors)});
    }
  }
  summary.write_csv(dir / "summary.csv", report.seed);

  ordered_json j;
  j["seed"] = report.seed;
  j["metric"] = report.metric;
  j["attack"] = report.attack;
  j["rows"] = ordered_json::array();
  for (const auto& row : summary.rows()) {
    ordered_json r;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& key = kSummaryHeader[i];
      if (key == "metric" || key == "attack" || key == "bucket") {
        r[key] = row[i];
      } else {
        r[key] = json_number(row[i]);
      }
    }
    j["rows"].push_back(r);
  }
  write_json(dir / "summary.json", j);

  Table per_sample({"index", "id", "human", "metric_choice", "agree", "s0", "s1", "prey", "s_other", "s_adv",
                    "success", "epsilon_used", "iterations_used", "first_flip", "rmse_255", "psnr_255",
                    "pct_gt_0.001", "pct_gt_0.01", "pct_gt_0.03", "diagnostic", "error"});
  for (const SampleRecord& s : report.samples) {
    per_sample.add({std::to_string(s.index), s.id, std::to_string(s.human), std::to_string(s.metric),
                    s.agree ? "1" : "0", format_number(s.s0, 10), format_number(s.s1, 10), std::to_string(s.prey),
                    format_number(s.s_other, 10), format_number(s.s_adv, 10), s.success ? "1" : "0",
                    format_number(s.epsilon_used, 4), std::to_string(s.iterations_used),
                    s.first_flip ? std::to_string(*s.first_flip) : "", format_number(s.stats.rmse_255),
                    format_number(s.stats.psnr_255), format_number(s.stats.pct_pixels_gt[0]),
                    format_number(s.stats.pct_pixels_gt[1]), format_number(s.stats.pct_pixels_gt[2]), s.diagnostic,
                    s.error});
  }
  per_sample.write_csv(dir / "per_sample.csv", report.seed);

  Table plot({"attack", "k", "agree_flipped", "agree_total", "agree_flip_rate", "disagree_flipped",
              "disagree_total", "disagree_flip_rate"});
  if (!report.samples.empty()) {
    for (const CurvePoint& p : report.curve) {
      plot.add({report.attack, std::to_string(p.k), std::to_string(p.agree_flipped), std::to_string(p.agree_total),
                rate(p.agree_flipped, p.agree_total), std::to_string(p.disagree_flipped),
                std::to_string(p.disagree_total), rate(p.disagree_flipped, p.disagree_total)});
    }
  }
  plot.write_csv(dir / "plotdata.csv", report.seed);
}

void emit_transfer_report(const TransferReport& report, const fs::path& dir) {
  prepare_dir(dir);
  std::vector<std::string> header = {"source", "target", "accurate"};
  for (const std::string& s : report.stages) header.push_back(s);
  Table table(header);
  for (const TransferTargetRow& row : report.targets) {
    std::vector<std::string> r = {report.source, row.target, std::to_string(row.accurate)};
    for (std::size_t f : row.flipped) r.push_back(std::to_string(f));
    table.add(std::move(r));
  }
  table.write_csv(dir / "transfer.csv", report.seed);

  ordered_json j;
  j["seed"] = report.seed;
  j["source"] = report.source;
  j["source_accurate"] = report.source_accurate;
  j["source_flipped"] = report.source_flipped;
  j["transfer_set"] = report.transfer_set;
  j["errors"] = report.errors;
  j["stages"] = ordered_json::array();
  for (std::size_t s = 0; s < report.stages.size(); ++s) {
    j["stages"].push_back({{"name", report.stages[s]},
                           {"rmse_mean", json_number(format_number(report.stage_rmse_mean[s]))},
                           {"rmse_std", json_number(format_number(report.stage_rmse_std[s]))}});
  }
  j["targets"] = ordered_json::array();
  for (const TransferTargetRow& row : report.targets) {
    ordered_json t;
    t["target"] = row.target;
    t["accurate"] = row.accurate;
    t["flipped"] = ordered_json::object();
    for (std::size_t s = 0; s < report.stages.size(); ++s) t["flipped"][report.stages[s]] = row.flipped[s];
    j["targets"].push_back(t);
  }
  write_json(dir / "transfer.json", j);

  Table plot({"target", "stage", "k", "flipped", "accurate", "flip_rate"});
  for (const TransferTargetRow& row : report.targets) {
    for (std::size_t s = 0; s < report.stages.size(); ++s) {
      const std::string& name = report.stages[s];
      std::size_t k = 0;
      if (const auto open = name.find('('); open != std::string::npos) k = std::stoul(name.substr(open + 1));
      plot.add({row.target, name, std::to_string(k), std::to_string(row.flipped[s]), std::to_string(row.accurate),
                rate(row.flipped[s], row.accurate)});
    }
  }
  plot.write_csv(dir / "plotdata.csv", report.seed);
}

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

ExportFixture read_export_fixture(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open fixture " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  for (const char* key : {"image_a", "image_b", "distance", "crc32"}) {
    if (!j.contains(key)) throw Error(ErrorKind::Format, path.string() + ": missing '" + key + "'");
  }
  ExportFixture f;
  try {
    f.image_a = path.parent_path() / j["image_a"].get<std::string>();
    f.image_b = path.parent_path() / j["image_b"].get<std::string>();
    f.distance = j["distance"].get<double>();
    const auto& crc = j["crc32"];
    if (crc.is_string()) {
      f.crc32 = static_cast<std::uint32_t>(std::stoul(crc.get<std::string>(), nullptr, 16));
    } else {
      f.crc32 = crc.get<std::uint32_t>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return f;
}

FixtureCheck check_export_fixture(const fs::path& fixture, const fs::path& weights) {
  const ExportFixture f = read_export_fixture(fixture);
  const ConvMetric metric(load_conv_weights(weights));
  FixtureCheck c;
  c.recorded = f.distance;
  c.computed = metric(read_png(f.image_a), read_png(f.image_b));
  c.checksum_matches = file_crc32(weights) == f.crc32;
  return c;
}

}  // namespace pa
