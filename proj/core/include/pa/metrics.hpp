#pragma once

// Full-reference distances. Every metric follows the distance convention:
// smaller means more similar, d >= 0.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pa/grad.hpp"
#include "pa/tensor.hpp"

namespace pa {

class Metric {
 public:
  virtual ~Metric() = default;

  virtual std::string name() const = 0;

  /// Records the distance between `a` and `b` on their graph; returns a 1x1x1 node.
  virtual grad::Var distance(const grad::Var& a, const grad::Var& b) const = 0;

  /// Throws when images of this shape cannot be scored.
  virtual void check_shape(const Shape& s) const;

  /// Plain evaluation with both images held constant.
  double operator()(const Tensor& a, const Tensor& b) const;
};

// ---- classical ------------------------------------------------------------

/// Mean squared error over every element.
class L2Metric final : public Metric {
 public:
  std::string name() const override { return "l2"; }
  grad::Var distance(const grad::Var& a, const grad::Var& b) const override;
};

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 2.0;  // attack space [-1, 1]

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Valid-region SSIM maps of one scale.
struct SsimMaps {
  grad::Var ssim;  // luminance * contrast-structure
  grad::Var cs;    // contrast-structure only
};

SsimMaps ssim_maps(const grad::Var& a, const grad::Var& b, const SsimParams& p);

/// 1 - mean SSIM, averaged over channels.
class SsimMetric final : public Metric {
 public:
  explicit SsimMetric(SsimParams p = {}) : params_(p) {}
  std::string name() const override { return "ssim"; }
  grad::Var distance(const grad::Var& a, const grad::Var& b) const override;
  void check_shape(const Shape& s) const override;

 private:
  SsimParams params_;
};

/// Standard five-scale exponents; fewer scales use a renormalized prefix.
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Largest scale count (at most 5) whose coarsest level still fits the window.
std::size_t default_msssim_scales(const Shape& s, std::size_t window = 11);

/// 1 - MS-SSIM with 2x2 average-pool downsampling between scales.
/// scales == 0 picks default_msssim_scales() per input.
class MsSsimMetric final : public Metric {
 public:
  explicit MsSsimMetric(std::size_t scales = 0, SsimParams p = {}) : scales_(scales), params_(p) {}
  std::string name() const override { return "msssim"; }
  grad::Var distance(const grad::Var& a, const grad::Var& b) const override;
  void check_shape(const Shape& s) const override;

 private:
  std::size_t resolve_scales(const Shape& s) const;

  std::size_t scales_;
  SsimParams params_;
};

// ---- learned --------------------------------------------------------------

enum class Activation : std::uint32_t { None = 0, Relu = 1 };
enum class Pooling : std::uint32_t { None = 0, Avg2 = 1 };

struct ConvLayerSpec {
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t kernel_size = 0;
  std::uint32_t stride = 1;
  std::uint32_t padding = 0;
  Activation activation = Activation::Relu;
  Pooling pool = Pooling::None;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct ConvLayer {
  ConvLayerSpec spec;
  std::vector<double> kernel;  // out x in x k x k
  std::vector<double> bias;    // empty or out_channels
  std::vector<double> calib;   // out_channels, all >= 0

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Layer topology, kernels, and per-channel calibration of a ConvMetric.
struct ConvMetricWeights {
  std::vector<ConvLayer> layers;

  /// Throws ErrorKind::Format on inconsistent chaining, sizes, or negative calibration.
  void validate() const;

  friend bool operator==(const ConvMetricWeights&, const ConvMetricWeights&) = default;
};

/// Random weights for tests and gradient checks: `channels` per layer, 3x3 kernels.
ConvMetricWeights random_conv_weights(std::uint64_t seed, std::size_t in_channels,
                                      const std::vector<std::size_t>& channels);

/// Binary ConvMetricWeights file ("PAMW", version 1, little-endian, CRC32 trailer).
void save_conv_weights(const ConvMetricWeights& w, const std::filesystem::path& path);
ConvMetricWeights load_conv_weights(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_conv_weights(const ConvMetricWeights& w);
ConvMetricWeights decode_conv_weights(std::span<const std::uint8_t> bytes);

/// Feature-stack distance: per layer, channel-normalize both activations,
/// weight squared differences per channel, sum channels, average spatially;
/// sum over layers.
class ConvMetric final : public Metric {
 public:
  explicit ConvMetric(ConvMetricWeights weights);
  std::string name() const override { return "conv"; }
  grad::Var distance(const grad::Var& a, const grad::Var& b) const override;
  void check_shape(const Shape& s) const override;

  const ConvMetricWeights& weights() const { return weights_; }

 private:
  ConvMetricWeights weights_;
  std::vector<grad::ConvKernel> kernels_;
};

/// Names accepted by make_metric().
std::vector<std::string> metric_names();

/// Builds a metric by name. "conv" requires `weights_path`.
std::unique_ptr<Metric> make_metric(std::string_view name,
                                    const std::filesystem::path& weights_path = {});

}  // namespace pa
