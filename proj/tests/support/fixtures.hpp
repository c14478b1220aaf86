#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pa/dataset.hpp"
#include "support/constructions.hpp"
#include "support/tempdir.hpp"

namespace pa::testing {

// Snaps every value to a pixel level so PNG storage is lossless.
inline Triplet quantized(Triplet t) {
  for (Tensor* x : {&t.ref, &t.p0, &t.p1})
    for (std::size_t k = 0; k < x->size(); ++k) (*x)[k] = pixel_to_unit(unit_to_pixel((*x)[k]));
  return t;
}

// n noisy triplets, judge flipped on every third, as PNGs plus manifest.csv.
inline std::vector<Triplet> fixture_triplets(std::size_t n, Shape shape, std::uint64_t seed) {
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < n; ++i) {
    Triplet t = noisy_triplet(seed + i, shape, 0.03 + 0.004 * (i % 5), 0.045 + 0.004 * (i % 4));
    if (i % 3 == 2) t.judge = 1.0 - t.judge;
    out.push_back(quantized(std::move(t)));
  }
  return out;
}

inline std::filesystem::path write_manifest_fixture(const std::filesystem::path& dir, const std::vector<Triplet>& ts) {
  std::filesystem::create_directories(dir / "img");
  std::string csv = "ref,p0,p1,judge\n";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string stem = "img/" + std::to_string(i);
    write_png(ts[i].ref, dir / (stem + "_ref.png"));
    write_png(ts[i].p0, dir / (stem + "_p0.png"));
    write_png(ts[i].p1, dir / (stem + "_p1.png"));
    csv += stem + "_ref.png," + stem + "_p0.png," + stem + "_p1.png," + (ts[i].judge == 1.0 ? "1" : "0") + "\n";
  }
  spit(dir / "manifest.csv", csv);
  return dir / "manifest.csv";
}

}  // namespace pa::testing
