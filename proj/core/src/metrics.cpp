#include "pa/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pa/error.hpp"
#include "pa/random.hpp"

namespace pa {

using grad::Var;

void Metric::check_shape(const Shape& s) const {
  if (s.size() == 0) throw Error(ErrorKind::Shape, name() + ": empty image");
}

double Metric::operator()(const Tensor& a, const Tensor& b) const {
  require_same_shape(a.shape(), b.shape(), name().c_str());
  check_shape(a.shape());
  grad::Graph g;
  return distance(g.constant(a), g.constant(b)).value().item();
}

// ---- L2 -------------------------------------------------------------------

Var L2Metric::distance(const Var& a, const Var& b) const {
  require_same_shape(a.shape(), b.shape(), "l2_distance");
  return grad::global_mean(grad::square(a - b));
}

// ---- SSIM -----------------------------------------------------------------

SsimMaps ssim_maps(const Var& a, const Var& b, const SsimParams& p) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const auto blur = [&](const Var& x) { return grad::gaussian_filter(x, p.window, p.sigma); };
  const Var mu_a = blur(a);
  const Var mu_b = blur(b);
  const Var mu_aa = mu_a * mu_a;
  const Var mu_bb = mu_b * mu_b;
  const Var mu_ab = mu_a * mu_b;
  const Var var_a = blur(a * a) - mu_aa;
  const Var var_b = blur(b * b) - mu_bb;
  const Var cov = blur(a * b) - mu_ab;

  const Var lum = (mu_ab * 2.0 + p.c1()) / (mu_aa + mu_bb + p.c1());
  const Var cs = (cov * 2.0 + p.c2()) / (var_a + var_b + p.c2());
  return SsimMaps{lum * cs, cs};
}

void SsimMetric::check_shape(const Shape& s) const {
  if (std::min(s.h, s.w) < params_.window) {
    throw Error(ErrorKind::Shape, "ssim: image " + to_string(s) + " smaller than the " +
                                      std::to_string(params_.window) + "x" +
                                      std::to_string(params_.window) + " window");
  }
}

Var SsimMetric::distance(const Var& a, const Var& b) const {
  check_shape(a.shape());
  return 1.0 - grad::global_mean(ssim_maps(a, b, params_).ssim);
}

// ---- MS-SSIM --------------------------------------------------------------

std::size_t default_msssim_scales(const Shape& s, std::size_t window) {
  const std::size_t side = std::min(s.h, s.w);
  std::size_t scales = 0;
  while (scales < 5 && side >= (window << scales)) ++scales;
  return scales;
}

std::size_t MsSsimMetric::resolve_scales(const Shape& s) const {
  const std::size_t scales = scales_ == 0 ? default_msssim_scales(s, params_.window) : scales_;
  if (scales == 0 || scales > 5 || std::min(s.h, s.w) < (params_.window << (scales - 1))) {
    throw Error(ErrorKind::Shape, "msssim: image " + to_string(s) + " too small for " +
                                      std::to_string(std::max<std::size_t>(scales, 1)) +
                                      " scale(s) with window " + std::to_string(params_.window));
  }
  return scales;
}

void MsSsimMetric::check_shape(const Shape& s) const { resolve_scales(s); }

Var MsSsimMetric::distance(const Var& a, const Var& b) const {
  require_same_shape(a.shape(), b.shape(), "msssim");
  const std::size_t scales = resolve_scales(a.shape());
  if (scales == 1) return SsimMetric(params_).distance(a, b);

  double total = 0.0;
  for (std::size_t s = 0; s < scales; ++s) total += kMsSsimWeights[s];

  Var xa = a;
  Var xb = b;
  Var product;
  for (std::size_t s = 0; s < scales; ++s) {
    const SsimMaps maps = ssim_maps(xa, xb, params_);
    const bool coarsest = s + 1 == scales;
    const Var term = grad::spatial_mean(coarsest ? maps.ssim : maps.cs);
    const Var factor = grad::pow(term, kMsSsimWeights[s] / total);
    product = s == 0 ? factor : product * factor;
    if (!coarsest) {
      xa = grad::avg_pool2(xa);
      xb = grad::avg_pool2(xb);
    }
  }
  return 1.0 - grad::global_mean(product);
}

// ---- ConvMetric -----------------------------------------------------------

void ConvMetricWeights::validate() const {
  if (layers.empty()) throw Error(ErrorKind::Format, "conv weights: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ConvLayer& L = layers[l];
    const ConvLayerSpec& s = L.spec;
    const std::string where = "conv weights layer " + std::to_string(l) + ": ";
    if (s.in_channels == 0 || s.out_channels == 0 || s.kernel_size == 0 || s.stride == 0) {
      throw Error(ErrorKind::Format, where + "zero channel count, kernel size, or stride");
    }
    if (l > 0 && s.in_channels != layers[l - 1].spec.out_channels) {
      throw Error(ErrorKind::Format, where + "in_channels " + std::to_string(s.in_channels) +
                                         " does not chain from previous out_channels " +
                                         std::to_string(layers[l - 1].spec.out_channels));
    }
    if (s.activation != Activation::None && s.activation != Activation::Relu) {
      throw Error(ErrorKind::Format, where + "unknown activation code");
    }
    if (s.pool != Pooling::None && s.pool != Pooling::Avg2) {
      throw Error(ErrorKind::Format, where + "unknown pooling code");
    }
    const std::size_t nk = std::size_t{s.out_channels} * s.in_channels * s.kernel_size * s.kernel_size;
    if (L.kernel.size() != nk) {
      throw Error(ErrorKind::Format, where + "kernel has " + std::to_string(L.kernel.size()) +
                                         " values, expected " + std::to_string(nk));
    }
    if (!L.bias.empty() && L.bias.size() != s.out_channels) {
      throw Error(ErrorKind::Format, where + "bias length mismatch");
    }
    if (L.calib.size() != s.out_channels) {
      throw Error(ErrorKind::Format, where + "calibration length mismatch");
    }
    for (double c : L.calib) {
      if (!(c >= 0.0) || !std::isfinite(c)) {
        throw Error(ErrorKind::Format, where + "calibration weights must be finite and non-negative");
      }
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(L.kernel.begin(), L.kernel.end(), finite) ||
        !std::all_of(L.bias.begin(), L.bias.end(), finite)) {
      throw Error(ErrorKind::Format, where + "non-finite kernel or bias value");
    }
  }
}

ConvMetricWeights random_conv_weights(std::uint64_t seed, std::size_t in_channels,
                                      const std::vector<std::size_t>& channels) {
  Rng rng(seed);
  ConvMetricWeights w;
  std::size_t in = in_channels;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    ConvLayer layer;
    layer.spec.in_channels = static_cast<std::uint32_t>(in);
    layer.spec.out_channels = static_cast<std::uint32_t>(channels[l]);
    layer.spec.kernel_size = 3;
    layer.spec.stride = 1;
    layer.spec.padding = 1;
    layer.spec.activation = Activation::Relu;
    layer.spec.pool = l + 1 < channels.size() ? Pooling::Avg2 : Pooling::None;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in * 9));
    layer.kernel.resize(channels[l] * in * 9);
    for (double& k : layer.kernel) k = uniform(rng, -scale, scale);
    layer.bias.resize(channels[l]);
    for (double& b : layer.bias) b = uniform(rng, 0.0, 0.1);
    layer.calib.resize(channels[l]);
    for (double& c : layer.calib) c = uniform(rng, 0.0, 1.0);
    w.layers.push_back(std::move(layer));
    in = channels[l];
  }
  return w;
}

ConvMetric::ConvMetric(ConvMetricWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
  for (const ConvLayer& L : weights_.layers) {
    grad::ConvKernel k;
    k.out = L.spec.out_channels;
    k.in = L.spec.in_channels;
    k.kh = k.kw = L.spec.kernel_size;
    k.weights = L.kernel;
    k.bias = L.bias;
    kernels_.push_back(std::move(k));
  }
}

void ConvMetric::check_shape(const Shape& s) const {
  const ConvLayerSpec& first = weights_.layers.front().spec;
  if (s.c != first.in_channels) {
    throw Error(ErrorKind::Shape, "conv metric expects " + std::to_string(first.in_channels) +
                                      " input channels, image has " + std::to_string(s.c));
  }
  std::size_t h = s.h;
  std::size_t w = s.w;
  for (std::size_t l = 0; l < weights_.layers.size(); ++l) {
    const ConvLayerSpec& sp = weights_.layers[l].spec;
    const std::size_t ph = h + 2 * sp.padding;
    const std::size_t pw = w + 2 * sp.padding;
    if (ph < sp.kernel_size || pw < sp.kernel_size) {
      throw Error(ErrorKind::Shape, "conv metric layer " + std::to_string(l) + ": input " +
                                        std::to_string(h) + "x" + std::to_string(w) +
                                        " too small for kernel " + std::to_string(sp.kernel_size));
    }
    h = (ph - sp.kernel_size) / sp.stride + 1;
    w = (pw - sp.kernel_size) / sp.stride + 1;
    if (sp.pool == Pooling::Avg2) {
      if (h < 2 || w < 2) {
        throw Error(ErrorKind::Shape, "conv metric layer " + std::to_string(l) +
                                          ": feature map too small to pool");
      }
      h /= 2;
      w /= 2;
    }
  }
}

Var ConvMetric::distance(const Var& a, const Var& b) const {
  require_same_shape(a.shape(), b.shape(), "conv_metric_distance");
  check_shape(a.shape());
  grad::Graph& g = a.graph();
  Var xa = a;
  Var xb = b;
  Var total;
  for (std::size_t l = 0; l < weights_.layers.size(); ++l) {
    const ConvLayer& L = weights_.layers[l];
    const grad::ConvKernel& k = kernels_[l];
    Var fa = grad::conv2d(xa, k, L.spec.stride, L.spec.padding);
    Var fb = grad::conv2d(xb, k, L.spec.stride, L.spec.padding);
    if (L.spec.activation == Activation::Relu) {
      fa = grad::relu(fa);
      fb = grad::relu(fb);
    }
    const Var diff = grad::square(grad::channel_l2_normalize(fa) - grad::channel_l2_normalize(fb));
    const Var calib = g.constant(Tensor(Shape{L.calib.size(), 1, 1}, L.calib));
    // mean over C*H*W times C == spatial mean of the channel sum
    const Var layer = grad::global_mean(diff * calib) * static_cast<double>(L.calib.size());
    total = l == 0 ? layer : total + layer;
    if (L.spec.pool == Pooling::Avg2) {
      fa = grad::avg_pool2(fa);
      fb = grad::avg_pool2(fb);
    }
    xa = fa;
    xb = fb;
  }
  return total;
}

// ---- registry -------------------------------------------------------------

std::vector<std::string> metric_names() { return {"l2", "ssim", "msssim", "conv"}; }

std::unique_ptr<Metric> make_metric(std::string_view name, const std::filesystem::path& weights_path) {
  if (name == "l2") return std::make_unique<L2Metric>();
  if (name == "ssim") return std::make_unique<SsimMetric>();
  if (name == "msssim") return std::make_unique<MsSsimMetric>();
  if (name == "conv") {
    if (weights_path.empty()) {
      throw Error(ErrorKind::Config, "metric 'conv' needs a weight file (--weights)");
    }
    return std::make_unique<ConvMetric>(load_conv_weights(weights_path));
  }
  std::string known;
  for (const std::string& n : metric_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::Config, "unknown metric '" + std::string(name) + "'; available: " + known);
}

}  // namespace pa
