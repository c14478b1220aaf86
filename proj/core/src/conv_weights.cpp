#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pa/error.hpp"
#include "pa/metrics.hpp"

namespace pa {
namespace {

constexpr char kMagic[4] = {'P', 'A', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  const std::vector<std::uint8_t>& view() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorKind::Format, std::string("conv weights: truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{in_[pos_ + k]} << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{in_[pos_ + k]} << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::vector<double> f64s(std::size_t n, const char* what) {
    need(n * 8, what);
    std::vector<double> v(n);
    for (double& x : v) x = f64(what);
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_conv_weights(const ConvMetricWeights& w) {
  w.validate();
  Writer out;
  out.bytes(kMagic, 4);
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(w.layers.size()));
  for (const ConvLayer& L : w.layers) {
    const ConvLayerSpec& s = L.spec;
    out.u32(s.in_channels);
    out.u32(s.out_channels);
    out.u32(s.kernel_size);
    out.u32(s.stride);
    out.u32(s.padding);
    out.u32(static_cast<std::uint32_t>(s.activation));
    out.u32(static_cast<std::uint32_t>(s.pool));
    out.u32(L.bias.empty() ? 0u : 1u);
    for (double k : L.kernel) out.f64(k);
    for (double b : L.bias) out.f64(b);
    for (double c : L.calib) out.f64(c);
  }
  out.u32(crc32_of(out.view()));
  return out.take();
}

ConvMetricWeights decode_conv_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw Error(ErrorKind::Format, "conv weights: file too short for header");
  const auto payload = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  const std::uint32_t stored = trailer.u32("checksum");
  const std::uint32_t actual = crc32_of(payload);
  if (stored != actual) {
    throw Error(ErrorKind::Format, "conv weights: checksum mismatch (stored " +
                                       std::to_string(stored) + ", computed " +
                                       std::to_string(actual) + ")");
  }
  if (std::memcmp(payload.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::Format, "conv weights: bad magic, expected \"PAMW\"");
  }
  Reader in(payload.subspan(4));
  const std::uint32_t version = in.u32("version");
  if (version != kVersion) {
    throw Error(ErrorKind::Format, "conv weights: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("layer count");
  ConvMetricWeights w;
  for (std::uint32_t l = 0; l < count; ++l) {
    ConvLayer L;
    ConvLayerSpec& s = L.spec;
    s.in_channels = in.u32("layer spec");
    s.out_channels = in.u32("layer spec");
    s.kernel_size = in.u32("layer spec");
    s.stride = in.u32("layer spec");
    s.padding = in.u32("layer spec");
    s.activation = static_cast<Activation>(in.u32("layer spec"));
    s.pool = static_cast<Pooling>(in.u32("layer spec"));
    const std::uint32_t has_bias = in.u32("layer spec");
    if (has_bias > 1) throw Error(ErrorKind::Format, "conv weights: bad bias flag");
    const std::size_t nk = std::size_t{s.out_channels} * s.in_channels * s.kernel_size * s.kernel_size;
    L.kernel = in.f64s(nk, "kernel");
    if (has_bias) L.bias = in.f64s(s.out_channels, "bias");
    L.calib = in.f64s(s.out_channels, "calibration");
    w.layers.push_back(std::move(L));
  }
  if (in.remaining() != 0) {
    throw Error(ErrorKind::Format, "conv weights: " + std::to_string(in.remaining()) +
                                       " trailing bytes after last layer");
  }
  w.validate();
  return w;
}

void save_conv_weights(const ConvMetricWeights& w, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_conv_weights(w);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

ConvMetricWeights load_conv_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open weight file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_conv_weights(bytes);
}

}  // namespace pa
