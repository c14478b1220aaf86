#pragma once

// Image and dataset ingestion. Pixels map to the attack space [-1, 1] via
// v / 127.5 - 1.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pa/attacks.hpp"
#include "pa/tensor.hpp"

namespace pa {

/// 8-bit gray (1 channel) or RGB (3 channels) PNG. Alpha is dropped.
/// Throws ErrorKind::Format for other bit depths or palette images.
Tensor read_png(const std::filesystem::path& path);
/// Writes 1- or 3-channel tensors; values are rounded after (x + 1) * 127.5.
void write_png(const Tensor& image, const std::filesystem::path& path);

double pixel_to_unit(std::uint8_t v);
std::uint8_t unit_to_pixel(double x);

/// Bilinear resampling, half-pixel centres (align_corners = false), edges clamped.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

struct ResizeTo {
  std::size_t h = 0;
  std::size_t w = 0;
};

/// CSV with header ref,p0,p1,judge. Paths are relative to the manifest's directory.
std::vector<Triplet> ingest_manifest(const std::filesystem::path& manifest,
                                     std::optional<ResizeTo> resize = std::nullopt);

/// Single value of an NPY v1.0 little-endian float array (<f4 or <f8) holding one element.
double parse_npy_scalar(std::span<const std::uint8_t> bytes);
double read_npy_scalar(const std::filesystem::path& path);

/// `root` holds ref/, p0/, p1/, judge/ with matching basenames, or
/// subdirectories that each do (e.g. one per distortion family).
std::vector<Triplet> ingest_bapps(const std::filesystem::path& root,
                                  std::optional<ResizeTo> resize = std::nullopt);

/// Dispatch on the path: a directory is read as BAPPS, a file as a manifest.
std::vector<Triplet> ingest_dataset(const std::filesystem::path& path,
                                    std::optional<ResizeTo> resize = std::nullopt);

}  // namespace pa
