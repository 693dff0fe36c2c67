#include "segmict/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace segmict {

PixelGrid::PixelGrid(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("PixelGrid: dimensions must be positive");
}

PixelGrid::PixelGrid(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("PixelGrid: dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("PixelGrid: data length does not match width*height");
}

std::size_t ForegroundMask::count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

namespace {

class HeaderReader {
public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r')
          ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw ImageError(ImageErrorKind::MalformedHeader, "PGM header: expected an integer");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000)
        throw ImageError(ImageErrorKind::MalformedHeader, "PGM header: integer out of range");
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ImageError(ImageErrorKind::NotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PngReadState {
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t count) {
  auto *state = static_cast<PngReadState *>(png_get_io_ptr(png));
  if (state->pos + count > state->bytes.size())
    png_error(png, "truncated PNG stream");
  std::copy_n(state->bytes.begin() + static_cast<std::ptrdiff_t>(state->pos), count, out);
  state->pos += count;
}

PixelGrid decode_png(std::span<const unsigned char> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png)
    throw ImageError(ImageErrorKind::UnsupportedFormat, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError(ImageErrorKind::UnsupportedFormat, "libpng initialization failed");
  }

  PngReadState state{bytes, 0};
  std::vector<unsigned char> pixels;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;

  // libpng reports errors through longjmp; nothing with a destructor may be
  // constructed between here and the matching png_destroy_read_struct.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(ImageErrorKind::TruncatedPayload, "PNG decode failed");
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(color_type != PNG_COLOR_TYPE_GRAY ? ImageErrorKind::UnsupportedFormat
                                                        : ImageErrorKind::UnsupportedDepth,
                     "only 8-bit grayscale PNG is supported");
  }
  pixels.resize(static_cast<std::size_t>(width) * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> data(pixels.begin(), pixels.end());
  return PixelGrid(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

} // namespace

PixelGrid decode_pgm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ImageError(ImageErrorKind::MalformedHeader, "not a binary PGM (P5) stream");
  HeaderReader header(bytes.subspan(2));
  const long width = header.read_uint();
  const long height = header.read_uint();
  const long maxval = header.read_uint();
  if (width <= 0 || height <= 0)
    throw ImageError(ImageErrorKind::MalformedHeader, "PGM header: zero dimension");
  if (maxval <= 0)
    throw ImageError(ImageErrorKind::MalformedHeader, "PGM header: maxval must be positive");
  if (maxval > 65535)
    throw ImageError(ImageErrorKind::UnsupportedDepth, "PGM maxval above 65535");

  // exactly one whitespace byte separates the header from the raster
  std::size_t offset = 2 + header.pos();
  if (offset >= bytes.size() || !std::isspace(bytes[offset]))
    throw ImageError(ImageErrorKind::MalformedHeader, "PGM header: missing raster separator");
  ++offset;

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  if (bytes.size() - offset < count * sample_bytes)
    throw ImageError(ImageErrorKind::TruncatedPayload, "PGM raster shorter than header declares");

  std::vector<double> data(count);
  const auto raster = bytes.subspan(offset);
  if (sample_bytes == 1) {
    for (std::size_t p = 0; p < count; ++p)
      data[p] = raster[p];
  } else {
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t p = 0; p < count; ++p) {
      const unsigned value = (static_cast<unsigned>(raster[2 * p]) << 8) | raster[2 * p + 1];
      data[p] = value * scale;
    }
  }
  return PixelGrid(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

PixelGrid load_image(const std::filesystem::path &path) {
  const auto bytes = read_file(path);
  static constexpr unsigned char png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(png_magic), std::end(png_magic), bytes.begin()))
    return decode_png(bytes);
  return decode_pgm(bytes);
}

namespace {

std::vector<unsigned char> encode_samples(const PixelGrid &grid, unsigned maxval) {
  const std::string header = "P5\n" + std::to_string(grid.width()) + " " +
                             std::to_string(grid.height()) + "\n" + std::to_string(maxval) +
                             "\n";
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + grid.size() * sample_bytes);
  for (const double value : grid.values()) {
    if (!std::isfinite(value))
      throw ImageError(ImageErrorKind::NonFinite, "cannot encode a non-finite pixel");
    const double clamped = std::clamp(value, 0.0, 1.0);
    const auto sample = static_cast<unsigned>(std::floor(clamped * maxval + 0.5));
    if (sample_bytes == 2)
      out.push_back(static_cast<unsigned char>(sample >> 8));
    out.push_back(static_cast<unsigned char>(sample & 0xffu));
  }
  return out;
}

void write_bytes(std::span<const unsigned char> bytes, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ImageError(ImageErrorKind::Unwritable, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw ImageError(ImageErrorKind::Unwritable, "short write to " + path.string());
}

} // namespace

std::vector<unsigned char> encode_pgm(const PixelGrid &grid) { return encode_samples(grid, 255); }

std::vector<unsigned char> encode_pgm16(const PixelGrid &grid) {
  return encode_samples(grid, 65535);
}

void save_pgm_bytes(int width, int height, std::span<const unsigned char> bytes,
                    const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ImageError(ImageErrorKind::Unwritable, "cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw ImageError(ImageErrorKind::Unwritable, "short write to " + path.string());
}

void save_image(const PixelGrid &grid, const std::filesystem::path &path) {
  write_bytes(encode_pgm(grid), path);
}

void save_image16(const PixelGrid &grid, const std::filesystem::path &path) {
  write_bytes(encode_pgm16(grid), path);
}

PixelGrid normalize(const PixelGrid &grid) {
  const auto values = grid.values();
  if (std::any_of(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }))
    throw ImageError(ImageErrorKind::NonFinite, "normalize: non-finite pixel value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - min;
  PixelGrid out(grid.width(), grid.height(), 0.0);
  if (range <= 0.0)
    return out;
  for (std::size_t p = 0; p < grid.size(); ++p)
    out[p] = std::clamp((grid[p] - min) / range, 0.0, 1.0);
  return out;
}

ForegroundMask foreground_mask(const PixelGrid &grid, double threshold) {
  ForegroundMask mask{grid.width(), grid.height(), std::vector<bool>(grid.size())};
  for (std::size_t p = 0; p < grid.size(); ++p)
    mask.flags[p] = grid[p] > threshold;
  return mask;
}

} // namespace segmict
