#pragma once

#include "segmict/image.hpp"

#include <vector>

namespace segmict {

/// Parameters of the nonlinear low-pass/high-pass filter pair.
struct DecomposeParams {
  double sigma = 2.0;      ///< Gaussian scale in pixels
  double lower_rate = 0.25;
  double upper_rate = 0.5;

  void validate() const;
};

/// Additive split input = cartoon + texture.
struct Decomposition {
  PixelGrid cartoon;
  PixelGrid texture;
};

struct TextureStatistics {
  double mean = 0.0;
  double stddev = 0.0; ///< population convention (divide by n)
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Normalized, truncated (radius ceil(3 sigma)) 1D Gaussian kernel.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with replicate boundary.
PixelGrid gaussian_blur(const PixelGrid &grid, double sigma);

/// Forward-difference gradient magnitude, replicate boundary.
PixelGrid gradient_magnitude(const PixelGrid &grid);

/// Local total variation G_sigma * |grad grid|.
PixelGrid local_total_variation(const PixelGrid &grid, double sigma);

/// Discrete (isotropic, forward-difference) total variation of the grid.
double total_variation(const PixelGrid &grid);

/// Blends the Gaussian-smoothed image with the input according to how much
/// smoothing reduces local total variation: oscillating regions go to the
/// texture, edges and flat regions stay in the cartoon.
Decomposition decompose(const PixelGrid &grid, const DecomposeParams &params = {});

/// Throws std::invalid_argument on an empty mask or a shape mismatch.
TextureStatistics texture_statistics(const PixelGrid &texture, const ForegroundMask &mask);

} // namespace segmict
