#include <gtest/gtest.h>

#include <cmath>

#include "pa/dataset.hpp"
#include "pa/error.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

namespace pa {
namespace {

using testing::TempDir;

// Quantized image: every value is an exact pixel level.
Tensor pixel_image(std::uint64_t seed, Shape s) {
  Tensor t = testing::random_image(seed, s);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = pixel_to_unit(unit_to_pixel(t[k]));
  return t;
}

void expect_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    return;
  }
  ADD_FAILURE() << "no error thrown";
}

TEST(PixelMapping, Endpoints) {
  EXPECT_EQ(pixel_to_unit(0), -1.0);
  EXPECT_EQ(pixel_to_unit(255), 1.0);
  EXPECT_DOUBLE_EQ(pixel_to_unit(128), 128.0 / 127.5 - 1.0);
  for (int v = 0; v < 256; ++v) EXPECT_EQ(unit_to_pixel(pixel_to_unit(static_cast<std::uint8_t>(v))), v);
}

TEST(Png, RoundTripRgbAndGray) {
  TempDir dir("png");
  for (std::size_t c : {1u, 3u}) {
    const Tensor img = pixel_image(10 + c, {c, 7, 5});
    const auto path = dir / ("img" + std::to_string(c) + ".png");
    write_png(img, path);
    const Tensor back = read_png(path);
    EXPECT_EQ(back.shape(), img.shape());
    EXPECT_EQ(back, img);
  }
}

TEST(Png, RejectsGarbage) {
  TempDir dir("pngbad");
  testing::spit(dir / "x.png", "definitely not a png file with enough bytes in it");
  expect_kind(ErrorKind::Format, [&] { read_png(dir / "x.png"); });
  expect_kind(ErrorKind::Io, [&] { read_png(dir / "missing.png"); });
}

TEST(Resize, IdentityIsBitExact) {
  const Tensor img = testing::random_image(3, {3, 6, 9});
  EXPECT_EQ(resize_bilinear(img, 6, 9), img);
}

TEST(Resize, TwoByTwoToOneIsMean) {
  const Tensor img({1, 2, 2}, {0.1, -0.3, 0.7, 0.25});
  const Tensor out = resize_bilinear(img, 1, 1);
  EXPECT_NEAR(out[0], (0.1 - 0.3 + 0.7 + 0.25) / 4.0, 1e-15);
}

// Independent per-pixel evaluation: clamp the source coordinate, then interpolate.
double bilinear_oracle(const Tensor& x, std::size_t c, double y, double xx) {
  const Shape s = x.shape();
  y = std::clamp(y, 0.0, static_cast<double>(s.h - 1));
  xx = std::clamp(xx, 0.0, static_cast<double>(s.w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(xx));
  const std::size_t y1 = std::min(y0 + 1, s.h - 1);
  const std::size_t x1 = std::min(x0 + 1, s.w - 1);
  const double fy = y - y0, fx = xx - x0;
  return (1 - fy) * ((1 - fx) * x(c, y0, x0) + fx * x(c, y0, x1)) + fy * ((1 - fx) * x(c, y1, x0) + fx * x(c, y1, x1));
}

TEST(Resize, RampMatchesOracle) {
  Tensor ramp({2, 4, 4});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) ramp(c, i, j) = 0.1 * i - 0.05 * j + 0.3 * c - 0.2;
  for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{3, 5}, {8, 8}, {2, 7}, {1, 3}}) {
    const Tensor out = resize_bilinear(ramp, oh, ow);
    ASSERT_EQ(out.shape(), (Shape{2, oh, ow}));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double y = (i + 0.5) * 4.0 / oh - 0.5;
          const double x = (j + 0.5) * 4.0 / ow - 0.5;
          EXPECT_NEAR(out(c, i, j), bilinear_oracle(ramp, c, y, x), 1e-12);
        }
  }
}

TEST(Resize, ZeroSizeThrows) {
  expect_kind(ErrorKind::Domain, [] { resize_bilinear(Tensor({1, 2, 2}), 0, 1); });
}

TEST(Npy, HandWrittenFixture) {
  const std::string bytes = testing::npy_f8(0.4);
  const std::vector<std::uint8_t> v(bytes.begin(), bytes.end());
  EXPECT_EQ(parse_npy_scalar(v), 0.4);
  const std::string zero = testing::npy_f8(0.0);
  EXPECT_EQ(parse_npy_scalar(std::vector<std::uint8_t>(zero.begin(), zero.end())), 0.0);
}

TEST(Npy, Float32) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }";
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::string s = "\x93NUMPY";
  s += '\x01';
  s += '\x00';
  s += static_cast<char>(header.size());
  s += '\x00';
  s += header;
  const float f = 0.25f;
  s.append(reinterpret_cast<const char*>(&f), 4);
  EXPECT_EQ(parse_npy_scalar(std::vector<std::uint8_t>(s.begin(), s.end())), 0.25);
}

TEST(Npy, BadMagicAndVersion) {
  std::string s = testing::npy_f8(0.4);
  std::string bad_magic = s;
  bad_magic[1] = 'X';
  expect_kind(ErrorKind::Format, [&] { parse_npy_scalar(std::vector<std::uint8_t>(bad_magic.begin(), bad_magic.end())); });
  std::string bad_version = s;
  bad_version[6] = '\x03';
  expect_kind(ErrorKind::Format,
              [&] { parse_npy_scalar(std::vector<std::uint8_t>(bad_version.begin(), bad_version.end())); });
  std::string big_endian = s;
  big_endian.replace(big_endian.find("<f8"), 3, ">f8");
  expect_kind(ErrorKind::Format,
              [&] { parse_npy_scalar(std::vector<std::uint8_t>(big_endian.begin(), big_endian.end())); });
}

void write_triplet_files(const std::filesystem::path& root, const std::string& stem, std::uint64_t seed, double judge,
                         Shape s = {3, 6, 6}) {
  for (const char* sub : {"ref", "p0", "p1", "judge"}) std::filesystem::create_directories(root / sub);
  write_png(pixel_image(seed, s), root / "ref" / (stem + ".png"));
  write_png(pixel_image(seed + 1, s), root / "p0" / (stem + ".png"));
  write_png(pixel_image(seed + 2, s), root / "p1" / (stem + ".png"));
  testing::spit(root / "judge" / (stem + ".npy"), testing::npy_f8(judge));
}

TEST(Manifest, ReadsTripletsRelativeToManifest) {
  TempDir dir("manifest");
  const Tensor ref = pixel_image(1, {3, 4, 4});
  const Tensor p0 = pixel_image(2, {3, 4, 4});
  const Tensor p1 = pixel_image(3, {3, 4, 4});
  std::filesystem::create_directories(dir / "img");
  write_png(ref, dir / "img/r.png");
  write_png(p0, dir / "img/a.png");
  write_png(p1, dir / "img/b.png");
  testing::spit(dir / "m.csv", "judge,ref,p0,p1\n0.6,img/r.png,img/a.png,\"img/b.png\"\n1,img/r.png,img/b.png,img/a.png\n");
  const auto ts = ingest_manifest(dir / "m.csv");
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[0].ref, ref);
  EXPECT_EQ(ts[0].p0, p0);
  EXPECT_EQ(ts[0].p1, p1);
  EXPECT_EQ(ts[0].judge, 0.6);
  EXPECT_EQ(ts[1].p0, p1);
  EXPECT_EQ(ts[1].judge, 1.0);

  const auto small = ingest_manifest(dir / "m.csv", ResizeTo{2, 2});
  EXPECT_EQ(small[0].ref.shape(), (Shape{3, 2, 2}));
}

TEST(Manifest, EmptyFileGivesEmptyList) {
  TempDir dir("empty");
  testing::spit(dir / "m.csv", "");
  EXPECT_TRUE(ingest_manifest(dir / "m.csv").empty());
  testing::spit(dir / "h.csv", "ref,p0,p1,judge\n");
  EXPECT_TRUE(ingest_manifest(dir / "h.csv").empty());
}

TEST(Manifest, Errors) {
  TempDir dir("manbad");
  expect_kind(ErrorKind::Io, [&] { ingest_manifest(dir / "nope.csv"); });
  testing::spit(dir / "nohdr.csv", "ref,p0,judge\nx,y,0\n");
  expect_kind(ErrorKind::Format, [&] { ingest_manifest(dir / "nohdr.csv"); });
  write_png(pixel_image(1, {1, 2, 2}), dir / "a.png");
  testing::spit(dir / "judge.csv", "ref,p0,p1,judge\na.png,a.png,a.png,1.5\n");
  expect_kind(ErrorKind::Format, [&] { ingest_manifest(dir / "judge.csv"); });
  testing::spit(dir / "miss.csv", "ref,p0,p1,judge\na.png,a.png,gone.png,1\n");
  expect_kind(ErrorKind::Io, [&] { ingest_manifest(dir / "miss.csv"); });
}

TEST(Bapps, FlatLayout) {
  TempDir dir("bapps");
  write_triplet_files(dir.path(), "000001", 10, 0.0);
  write_triplet_files(dir.path(), "000000", 20, 0.4);
  const auto ts = ingest_bapps(dir.path());
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[0].judge, 0.4);
  EXPECT_EQ(ts[0].ref, pixel_image(20, {3, 6, 6}));
  EXPECT_EQ(ts[1].judge, 0.0);
  EXPECT_NE(ts[0].id.find("000000"), std::string::npos);
}

TEST(Bapps, FamilySubdirectoriesAndDispatch) {
  TempDir dir("bapps2");
  write_triplet_files(dir / "traditional", "a", 1, 1.0);
  write_triplet_files(dir / "cnn", "a", 4, 0.0);
  write_triplet_files(dir / "cnn", "b", 7, 1.0);
  const auto ts = ingest_dataset(dir.path());
  ASSERT_EQ(ts.size(), 3u);
  EXPECT_EQ(ts[0].id, "cnn/a");
  EXPECT_EQ(ts[2].id, "traditional/a");
}

TEST(Bapps, MissingEntryNamesBasename) {
  TempDir dir("bapps3");
  write_triplet_files(dir.path(), "sample42", 1, 1.0);
  std::filesystem::remove(dir / "p1/sample42.png");
  try {
    ingest_bapps(dir.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sample42"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace pa
