#include "pa/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pa/error.hpp"

namespace fs = std::filesystem;

namespace pa {

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && ws(s[b])) ++b;
  return s.substr(b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw Error(ErrorKind::Format, "unterminated quote");
  out.push_back(trim(field));
  return out;
}

Tensor load_image(const fs::path& path, const std::optional<ResizeTo>& resize) {
  Tensor img = read_png(path);
  if (resize) img = resize_bilinear(img, resize->h, resize->w);
  return img;
}

double parse_judge(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw Error(ErrorKind::Format, where + ": judge '" + text + "' is not a number");
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorKind::Format, where + ": judge " + text + " outside [0, 1]");
  }
  return v;
}

}  // namespace

double pixel_to_unit(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

std::uint8_t unit_to_pixel(double x) {
  return static_cast<std::uint8_t>(std::clamp(std::lround((x + 1.0) * 127.5), 0L, 255L));
}

Tensor read_png(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  static constexpr std::array<std::uint8_t, 8> kSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 33 || !std::equal(kSig.begin(), kSig.end(), bytes.begin()) ||
      std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": not a PNG file");
  }
  const unsigned bit_depth = bytes[24];
  const unsigned color_type = bytes[25];
  if (bit_depth != 8) {
    throw Error(ErrorKind::Format, path.string() + ": bit depth " + std::to_string(bit_depth) + ", expected 8");
  }
  std::size_t channels = 0;
  png_uint_32 format = 0;
  switch (color_type) {
    case 0:
    case 4:
      channels = 1;
      format = PNG_FORMAT_GRAY;
      break;
    case 2:
    case 6:
      channels = 3;
      format = PNG_FORMAT_RGB;
      break;
    default:
      throw Error(ErrorKind::Format, path.string() + ": palette PNG not supported, expected gray or RGB");
  }

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::Format, path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::Format, path.string() + ": " + msg);
  }
  const std::size_t h = image.height;
  const std::size_t w = image.width;
  Tensor t(Shape{channels, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < channels; ++c) t(c, i, j) = pixel_to_unit(buffer[(i * w + j) * channels + c]);
  return t;
}

void write_png(const Tensor& t, const fs::path& path) {
  const Shape s = t.shape();
  if (s.c != 1 && s.c != 3) {
    throw Error(ErrorKind::Shape, "write_png: expected 1 or 3 channels, got " + std::to_string(s.c));
  }
  std::vector<std::uint8_t> buffer(s.size());
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j)
      for (std::size_t c = 0; c < s.c; ++c) buffer[(i * s.w + j) * s.c + c] = unit_to_pixel(t(c, i, j));
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(s.w);
  image.height = static_cast<png_uint_32>(s.h);
  image.format = s.c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const std::string file = path.string();
  if (!png_image_write_to_file(&image, file.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, file + ": " + image.message);
  }
}

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw Error(ErrorKind::Domain, "resize_bilinear: output size must be >= 1");
  const Shape s = x.shape();
  if (s.h == out_h && s.w == out_w) return x;
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t k = 0; k < out; ++k) {
      const double src = std::clamp((static_cast<double>(k) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      v[k] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return v;
  };
  const std::vector<Tap> ty = taps(s.h, out_h);
  const std::vector<Tap> tx = taps(s.w, out_w);
  Tensor y(Shape{s.c, out_h, out_w});
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        const Tap& a = ty[i];
        const Tap& b = tx[j];
        const double top = (1.0 - b.frac) * x(c, a.lo, b.lo) + b.frac * x(c, a.lo, b.hi);
        const double bottom = (1.0 - b.frac) * x(c, a.hi, b.lo) + b.frac * x(c, a.hi, b.hi);
        y(c, i, j) = (1.0 - a.frac) * top + a.frac * bottom;
      }
  return y;
}

std::vector<Triplet> ingest_manifest(const fs::path& manifest, std::optional<ResizeTo> resize) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + manifest.string());
  const fs::path base = manifest.parent_path();
  std::string line;
  std::size_t line_no = 0;
  std::vector<Triplet> out;
  bool header_seen = false;
  std::array<std::size_t, 4> col{};
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": " + e.what());
    }
    if (!header_seen) {
      static constexpr std::array<const char*, 4> kNames = {"ref", "p0", "p1", "judge"};
      for (std::size_t k = 0; k < kNames.size(); ++k) {
        const auto it = std::find(fields.begin(), fields.end(), kNames[k]);
        if (it == fields.end()) {
          throw Error(ErrorKind::Format, where + ": header must contain ref,p0,p1,judge");
        }
        col[k] = static_cast<std::size_t>(it - fields.begin());
      }
      header_seen = true;
      continue;
    }
    const std::size_t need = *std::max_element(col.begin(), col.end()) + 1;
    if (fields.size() < need) {
      throw Error(ErrorKind::Format, where + ": expected " + std::to_string(need) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    Triplet t;
    t.ref = load_image(base / fields[col[0]], resize);
    t.p0 = load_image(base / fields[col[1]], resize);
    t.p1 = load_image(base / fields[col[2]], resize);
    t.judge = parse_judge(fields[col[3]], where);
    t.id = fields[col[0]];
    t.validate();
    out.push_back(std::move(t));
  }
  if (!header_seen && line_no > 0) throw Error(ErrorKind::Format, manifest.string() + ": missing header");
  return out;
}

double parse_npy_scalar(std::span<const std::uint8_t> b) {
  static constexpr std::array<std::uint8_t, 6> kMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (b.size() < 10 || !std::equal(kMagic.begin(), kMagic.end(), b.begin())) {
    throw Error(ErrorKind::Format, "npy: bad magic");
  }
  if (b[6] != 1 || b[7] != 0) {
    throw Error(ErrorKind::Format, "npy: version " + std::to_string(b[6]) + "." + std::to_string(b[7]) +
                                       " not supported, expected 1.0");
  }
  const std::size_t hlen = b[8] | (std::size_t{b[9]} << 8);
  if (b.size() < 10 + hlen) throw Error(ErrorKind::Format, "npy: truncated header");
  const std::string header(reinterpret_cast<const char*>(b.data() + 10), hlen);

  const auto value_of = [&](const std::string& key) {
    const std::size_t k = header.find("'" + key + "'");
    if (k == std::string::npos) throw Error(ErrorKind::Format, "npy: header lacks '" + key + "'");
    std::size_t p = header.find(':', k);
    if (p == std::string::npos) throw Error(ErrorKind::Format, "npy: malformed header");
    ++p;
    while (p < header.size() && header[p] == ' ') ++p;
    std::size_t e = p;
    if (header[p] == '\'') {
      e = header.find('\'', p + 1);
      return header.substr(p + 1, e - p - 1);
    }
    if (header[p] == '(') {
      e = header.find(')', p);
      return header.substr(p, e - p + 1);
    }
    while (e < header.size() && header[e] != ',' && header[e] != '}') ++e;
    return trim(header.substr(p, e - p));
  };
  const std::string descr = value_of("descr");
  const std::string shape = value_of("shape");
  std::size_t elems = 1;
  {
    std::string digits;
    for (char ch : shape) {
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        digits += ch;
      } else if (!digits.empty()) {
        elems *= std::stoul(digits);
        digits.clear();
      }
    }
  }
  if (elems != 1) throw Error(ErrorKind::Format, "npy: expected a single element, shape " + shape);
  const std::uint8_t* data = b.data() + 10 + hlen;
  const std::size_t avail = b.size() - 10 - hlen;
  if (descr == "<f8") {
    if (avail < 8) throw Error(ErrorKind::Format, "npy: truncated data");
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | data[i];
    return std::bit_cast<double>(bits);
  }
  if (descr == "<f4") {
    if (avail < 4) throw Error(ErrorKind::Format, "npy: truncated data");
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) bits = (bits << 8) | data[i];
    return static_cast<double>(std::bit_cast<float>(bits));
  }
  throw Error(ErrorKind::Format, "npy: dtype '" + descr + "' not supported, expected <f4 or <f8");
}

double read_npy_scalar(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  try {
    return parse_npy_scalar(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

namespace {

void ingest_bapps_leaf(const fs::path& dir, const std::optional<ResizeTo>& resize, std::vector<Triplet>& out) {
  for (const char* sub : {"ref", "p0", "p1", "judge"}) {
    if (!fs::is_directory(dir / sub)) {
      throw Error(ErrorKind::Format, dir.string() + ": missing " + sub + "/ directory");
    }
  }
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir / "ref")) {
    if (e.is_regular_file() && e.path().extension() == ".png") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  for (const std::string& stem : stems) {
    const fs::path p0 = dir / "p0" / (stem + ".png");
    const fs::path p1 = dir / "p1" / (stem + ".png");
    const fs::path judge = dir / "judge" / (stem + ".npy");
    for (const fs::path& p : {p0, p1, judge}) {
      if (!fs::exists(p)) {
        throw Error(ErrorKind::Format, "bapps: sample '" + stem + "' has no " +
                                           p.parent_path().filename().string() + "/ entry (" + p.string() + ")");
      }
    }
    Triplet t;
    t.ref = load_image(dir / "ref" / (stem + ".png"), resize);
    t.p0 = load_image(p0, resize);
    t.p1 = load_image(p1, resize);
    t.judge = read_npy_scalar(judge);
    if (!std::isfinite(t.judge) || t.judge < 0.0 || t.judge > 1.0) {
      throw Error(ErrorKind::Format, judge.string() + ": judge outside [0, 1]");
    }
    t.id = (dir.filename() / stem).string();
    t.validate();
    out.push_back(std::move(t));
  }
}

}  // namespace

std::vector<Triplet> ingest_bapps(const fs::path& root, std::optional<ResizeTo> resize) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::Io, "bapps: " + root.string() + " is not a directory");
  std::vector<Triplet> out;
  if (fs::is_directory(root / "ref")) {
    ingest_bapps_leaf(root, resize, out);
    return out;
  }
  std::vector<fs::path> leaves;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::is_directory(e.path() / "ref")) leaves.push_back(e.path());
  }
  if (leaves.empty()) throw Error(ErrorKind::Format, "bapps: no ref/ directory under " + root.string());
  std::sort(leaves.begin(), leaves.end());
  for (const fs::path& leaf : leaves) ingest_bapps_leaf(leaf, resize, out);
  return out;
}

std::vector<Triplet> ingest_dataset(const fs::path& path, std::optional<ResizeTo> resize) {
  if (fs::is_directory(path)) return ingest_bapps(path, resize);
  return ingest_manifest(path, resize);
}

}  // namespace pa
