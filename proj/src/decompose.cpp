#include "segmict/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segmict {

void DecomposeParams::validate() const {
  if (!(sigma > 0.0))
    throw std::invalid_argument("decompose: sigma must be positive");
  if (!(lower_rate > 0.0 && lower_rate < upper_rate && upper_rate < 1.0))
    throw std::invalid_argument("decompose: need 0 < lower_rate < upper_rate < 1");
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * static_cast<std::size_t>(radius) + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double value = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = value;
    sum += value;
  }
  for (auto &value : kernel)
    value /= sum;
  return kernel;
}

PixelGrid gaussian_blur(const PixelGrid &grid, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = grid.width();
  const int h = grid.height();

  PixelGrid rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * grid.at(std::clamp(x + k, 0, w - 1), y);
      rows.at(x, y) = acc;
    }
  }
  PixelGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * rows.at(x, std::clamp(y + k, 0, h - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

PixelGrid gradient_magnitude(const PixelGrid &grid) {
  const int w = grid.width();
  const int h = grid.height();
  PixelGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double here = grid.at(x, y);
      const double dx = grid.at(std::min(x + 1, w - 1), y) - here;
      const double dy = grid.at(x, std::min(y + 1, h - 1)) - here;
      out.at(x, y) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return out;
}

PixelGrid local_total_variation(const PixelGrid &grid, double sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("local_total_variation: sigma must be positive");
  return gaussian_blur(gradient_magnitude(grid), sigma);
}

double total_variation(const PixelGrid &grid) {
  const auto magnitude = gradient_magnitude(grid);
  double sum = 0.0;
  for (const double value : magnitude.values())
    sum += value;
  return sum;
}

Decomposition decompose(const PixelGrid &grid, const DecomposeParams &params) {
  params.validate();
  const PixelGrid smoothed = gaussian_blur(grid, params.sigma);
  const PixelGrid ltv = local_total_variation(grid, params.sigma);
  const PixelGrid ltv_smoothed = local_total_variation(smoothed, params.sigma);

  constexpr double flat_floor = 1e-12;
  const double span = params.upper_rate - params.lower_rate;

  Decomposition out{PixelGrid(grid.width(), grid.height()),
                    PixelGrid(grid.width(), grid.height())};
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double reduction = ltv[p] > flat_floor ? (ltv[p] - ltv_smoothed[p]) / ltv[p] : 0.0;
    const double weight = std::clamp((reduction - params.lower_rate) / span, 0.0, 1.0);
    out.cartoon[p] = weight * smoothed[p] + (1.0 - weight) * grid[p];
    out.texture[p] = grid[p] - out.cartoon[p];
  }
  return out;
}

TextureStatistics texture_statistics(const PixelGrid &texture, const ForegroundMask &mask) {
  if (mask.width != texture.width() || mask.height != texture.height())
    throw std::invalid_argument("texture_statistics: mask shape mismatch");
  TextureStatistics stats;
  double sum = 0.0;
  stats.min = INFINITY;
  stats.max = -INFINITY;
  for (std::size_t p = 0; p < texture.size(); ++p) {
    if (!mask[p])
      continue;
    sum += texture[p];
    stats.min = std::min(stats.min, texture[p]);
    stats.max = std::max(stats.max, texture[p]);
    ++stats.count;
  }
  if (stats.count == 0)
    throw std::invalid_argument("texture_statistics: empty mask");
  stats.mean = sum / static_cast<double>(stats.count);
  double squares = 0.0;
  for (std::size_t p = 0; p < texture.size(); ++p) {
    if (mask[p])
      squares += (texture[p] - stats.mean) * (texture[p] - stats.mean);
  }
  stats.stddev = std::sqrt(squares / static_cast<double>(stats.count));
  return stats;
}

} // namespace segmict
