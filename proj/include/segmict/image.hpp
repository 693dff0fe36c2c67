#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace segmict {

/// Scalar field on a width x height pixel grid, row-major, top-left origin.
class PixelGrid {
public:
  PixelGrid() = default;
  PixelGrid(int width, int height, double fill = 0.0);
  PixelGrid(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double &operator[](std::size_t p) { return data_[p]; }
  double operator[](std::size_t p) const { return data_[p]; }
  double &at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double> &data() const { return data_; }

  bool same_shape(const PixelGrid &other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const PixelGrid &, const PixelGrid &) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel tissue flag (true = tissue, false = background).
struct ForegroundMask {
  int width = 0;
  int height = 0;
  std::vector<bool> flags;

  std::size_t size() const { return flags.size(); }
  std::size_t count() const;
  bool operator[](std::size_t p) const { return flags[p]; }

  static ForegroundMask all(int width, int height, bool value = true) {
    return {width, height, std::vector<bool>(static_cast<std::size_t>(width) * height, value)};
  }
};

enum class ImageErrorKind {
  NotFound,
  MalformedHeader,
  TruncatedPayload,
  UnsupportedDepth,
  UnsupportedFormat,
  Unwritable,
  NonFinite,
};

class ImageError : public std::runtime_error {
public:
  ImageError(ImageErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ImageErrorKind kind() const { return kind_; }

private:
  ImageErrorKind kind_;
};

/// Reads a binary PGM (P5, maxval up to 65535) or an 8-bit grayscale PNG.
/// 8-bit PGM and PNG samples are returned as raw byte values; 16-bit PGM
/// samples are divided by maxval.
PixelGrid load_image(const std::filesystem::path &path);

/// Decodes an in-memory P5 buffer. Same conventions as load_image.
PixelGrid decode_pgm(std::span<const unsigned char> bytes);

/// Writes P5 with maxval 255: values are clamped to [0,1], scaled by 255 and
/// rounded half up.
void save_image(const PixelGrid &grid, const std::filesystem::path &path);

std::vector<unsigned char> encode_pgm(const PixelGrid &grid);

/// Same clamp and rounding with maxval 65535 (big-endian samples); load_image
/// maps these back to [0,1].
void save_image16(const PixelGrid &grid, const std::filesystem::path &path);
std::vector<unsigned char> encode_pgm16(const PixelGrid &grid);

/// Raw 8-bit P5 writer, used for label maps.
void save_pgm_bytes(int width, int height, std::span<const unsigned char> bytes,
                    const std::filesystem::path &path);

/// Affine map of [min,max] onto [0,1]; a constant grid maps to zeros.
PixelGrid normalize(const PixelGrid &grid);

ForegroundMask foreground_mask(const PixelGrid &grid, double threshold = 0.01);

} // namespace segmict
