#include "doctest.h"
#include "support.hpp"

#include "segmict/image.hpp"
#include "segmict/phantom.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace segmict;

namespace {

std::vector<unsigned char> p5(const std::string &header, std::vector<unsigned char> payload) {
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  return bytes;
}

ImageErrorKind decode_error(const std::vector<unsigned char> &bytes) {
  try {
    decode_pgm(bytes);
  } catch (const ImageError &error) {
    return error.kind();
  }
  FAIL("decode_pgm accepted a bad stream");
  return ImageErrorKind::NotFound;
}

std::vector<unsigned char> payload_of(const std::vector<unsigned char> &encoded, std::size_t n) {
  return {encoded.end() - static_cast<std::ptrdiff_t>(n), encoded.end()};
}

void write_gray_png(const std::filesystem::path &path, int width, int height,
                    const std::vector<unsigned char> &bytes) {
  std::FILE *file = std::fopen(path.c_str(), "wb");
  REQUIRE(file != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(file);
}

} // namespace

TEST_CASE("decode_pgm returns raw 8-bit samples") {
  const PixelGrid grid = decode_pgm(p5("P5\n2 2\n255\n", {0, 128, 255, 64}));
  CHECK(grid.width() == 2);
  CHECK(grid.height() == 2);
  CHECK(grid.data() == std::vector<double>{0, 128, 255, 64});
}

TEST_CASE("decode_pgm tolerates header comments") {
  const PixelGrid grid = decode_pgm(p5("P5 # comment\n3 1\n# more\n255\n", {1, 2, 3}));
  CHECK(grid.data() == std::vector<double>{1, 2, 3});
}

TEST_CASE("decode_pgm divides 16-bit samples by maxval") {
  const PixelGrid grid = decode_pgm(p5("P5\n2 1\n1000\n", {0x03, 0xE8, 0x01, 0xF4}));
  CHECK(grid[0] == doctest::Approx(1.0));
  CHECK(grid[1] == doctest::Approx(0.5));
}

TEST_CASE("decode_pgm reports distinct error kinds") {
  CHECK(decode_error(p5("P5\n2 2\n255\n", {1, 2, 3})) == ImageErrorKind::TruncatedPayload);
  CHECK(decode_error(p5("P2\n2 2\n255\n", {1, 2, 3, 4})) == ImageErrorKind::MalformedHeader);
  CHECK(decode_error(p5("P5\n2 x\n255\n", {1, 2, 3, 4})) == ImageErrorKind::MalformedHeader);
  CHECK(decode_error(p5("P5\n2 2\n0\n", {1, 2, 3, 4})) == ImageErrorKind::MalformedHeader);
  CHECK(decode_error(p5("P5\n2 2\n70000\n", {1, 2, 3, 4})) == ImageErrorKind::UnsupportedDepth);
}

TEST_CASE("load_image on a missing file") {
  try {
    load_image("/nonexistent/slice.pgm");
    FAIL("expected an error");
  } catch (const ImageError &error) {
    CHECK(error.kind() == ImageErrorKind::NotFound);
  }
}

TEST_CASE("a full-size slice file has 22987 pixels") {
  testing::ScratchDir dir("image");
  const PhantomInstance phantom = generate_phantom({});
  save_image(phantom.clean, dir / "slice.pgm");
  const PixelGrid loaded = load_image(dir / "slice.pgm");
  CHECK(loaded.width() == 181);
  CHECK(loaded.height() == 127);
  CHECK(loaded.size() == 22987u);
}

TEST_CASE("encode_pgm scales by 255 and rounds half up") {
  const PixelGrid grid(4, 1, {0.0, 0.5, 1.0, 0.25});
  CHECK(payload_of(encode_pgm(grid), 4) == std::vector<unsigned char>{0, 128, 255, 64});
}

TEST_CASE("encode_pgm clamps out-of-range values") {
  const PixelGrid grid(3, 1, {1.7, -0.4, 0.2});
  CHECK(payload_of(encode_pgm(grid), 3) == std::vector<unsigned char>{255, 0, 51});
}

TEST_CASE("encode_pgm rejects non-finite values") {
  const PixelGrid grid(2, 1, {0.1, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(encode_pgm(grid), ImageError);
}

TEST_CASE("save_image to an unwritable path") {
  try {
    save_image(PixelGrid(2, 2), "/nonexistent/dir/out.pgm");
    FAIL("expected an error");
  } catch (const ImageError &error) {
    CHECK(error.kind() == ImageErrorKind::Unwritable);
  }
}

TEST_CASE("an all-zero grid survives save and load") {
  testing::ScratchDir dir("image");
  save_image(PixelGrid(5, 3), dir / "zeros.pgm");
  CHECK(load_image(dir / "zeros.pgm") == PixelGrid(5, 3));
}

TEST_CASE("round trip through 8-bit PGM stays within one grey level") {
  // 8-bit loads return byte values, so the comparison is against load / 255
  testing::ScratchDir dir("image");
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int width = 2 + static_cast<int>(rng() % 30);
    const int height = 2 + static_cast<int>(rng() % 30);
    PixelGrid grid(width, height);
    for (std::size_t p = 0; p < grid.size(); ++p)
      grid[p] = testing::uniform(rng, 0.0, 1.0);
    save_image(grid, dir / "g.pgm");
    const PixelGrid loaded = load_image(dir / "g.pgm");
    REQUIRE(loaded.same_shape(grid));
    for (std::size_t p = 0; p < grid.size(); ++p)
      CHECK(std::abs(loaded[p] / 255.0 - grid[p]) <= 1.0 / 255.0);
  }
}

TEST_CASE("round trip through 16-bit PGM") {
  testing::ScratchDir dir("image");
  std::mt19937_64 rng(12);
  PixelGrid grid(17, 9);
  for (std::size_t p = 0; p < grid.size(); ++p)
    grid[p] = testing::uniform(rng, 0.0, 1.0);
  save_image16(grid, dir / "g16.pgm");
  const PixelGrid loaded = load_image(dir / "g16.pgm");
  for (std::size_t p = 0; p < grid.size(); ++p)
    CHECK(std::abs(loaded[p] - grid[p]) <= 0.5 / 65535.0 + 1e-15);
}

TEST_CASE("load_image reads 8-bit grayscale PNG as raw bytes") {
  testing::ScratchDir dir("image");
  write_gray_png(dir / "g.png", 3, 2, {0, 10, 20, 128, 200, 255});
  const PixelGrid grid = load_image(dir / "g.png");
  CHECK(grid.width() == 3);
  CHECK(grid.height() == 2);
  CHECK(grid.data() == std::vector<double>{0, 10, 20, 128, 200, 255});
}

TEST_CASE("normalize maps [min,max] onto [0,1]") {
  CHECK(normalize(PixelGrid(3, 1, {10, 20, 30})).data() == std::vector<double>{0, 0.5, 1});
  CHECK(normalize(PixelGrid(3, 1, {5, 5, 5})).data() == std::vector<double>{0, 0, 0});
  const PixelGrid unit(4, 1, {0.0, 0.3, 1.0, 0.7});
  CHECK(normalize(unit) == unit);
}

TEST_CASE("normalize rejects non-finite input") {
  const PixelGrid grid(2, 1, {0.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(normalize(grid), ImageError);
}

TEST_CASE("normalize is idempotent") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    PixelGrid grid(8, 6);
    for (std::size_t p = 0; p < grid.size(); ++p)
      grid[p] = testing::uniform(rng, -50.0, 300.0);
    const PixelGrid once = normalize(grid);
    const PixelGrid twice = normalize(once);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      CHECK(once[p] >= 0.0);
      CHECK(once[p] <= 1.0);
      CHECK(std::abs(twice[p] - once[p]) <= 1e-12);
    }
  }
}

TEST_CASE("foreground_mask thresholds strictly") {
  const PixelGrid grid(3, 1, {0.0, 0.005, 0.5});
  CHECK(foreground_mask(grid).flags == std::vector<bool>{false, false, true});
  CHECK(foreground_mask(PixelGrid(4, 2)).count() == 0u);
  CHECK(foreground_mask(grid, -1.0).count() == 3u);
  CHECK(foreground_mask(grid).width == 3);
}

TEST_CASE("PixelGrid rejects inconsistent shapes") {
  CHECK_THROWS_AS(PixelGrid(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(PixelGrid(2, 2, std::vector<double>(3)), std::invalid_argument);
}
