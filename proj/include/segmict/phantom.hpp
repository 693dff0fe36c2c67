#pragma once

#include "segmict/image.hpp"
#include "segmict/segmentation.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>

namespace segmict {

enum class PhantomGeometry { NestedEllipses, Blobs };

std::string to_string(PhantomGeometry geometry);
PhantomGeometry parse_geometry(const std::string &text);

struct PhantomSpec {
  int width = 181;
  int height = 127;
  double noise_percent = 0.0; ///< Rician sigma as percent of the brightest tissue
  double bias_level = 0.0;    ///< peak-to-peak bias range in percent, centred at 1
  std::uint64_t seed = 1;
  std::array<double, 3> tissue_levels{0.33, 0.66, 0.99};
  PhantomGeometry geometry = PhantomGeometry::NestedEllipses;

  void validate() const;
};

struct PhantomInstance {
  PixelGrid clean;
  LabelMap gt;
  PixelGrid bias;
  PixelGrid corrupted;
  double sigma = 0.0;
  std::array<std::size_t, 3> tissue_counts{};
};

/// Stateless counter-based generator: every (seed, stream, counter) triple
/// maps to a fixed 64-bit value, independent of draw order.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// Uniform in (0, 1].
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// Two independent standard normals (Box-Muller on two counter uniforms).
std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t counter);

/// sqrt((amplitude + sigma d1)^2 + (sigma d2)^2).
double rician_sample(double amplitude, double sigma, double draw1, double draw2);

PhantomInstance generate_phantom(const PhantomSpec &spec);

} // namespace segmict
