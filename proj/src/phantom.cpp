#include "segmict/phantom.hpp"
#include "segmict/legendre_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace segmict {

std::string to_string(PhantomGeometry geometry) {
  return geometry == PhantomGeometry::Blobs ? "blobs" : "nested-ellipses";
}

PhantomGeometry parse_geometry(const std::string &text) {
  if (text == "nested-ellipses")
    return PhantomGeometry::NestedEllipses;
  if (text == "blobs")
    return PhantomGeometry::Blobs;
  throw std::invalid_argument("unknown phantom geometry '" + text + "'");
}

void PhantomSpec::validate() const {
  if (width < 8 || height < 8)
    throw std::invalid_argument("PhantomSpec: image must be at least 8x8");
  if (!(noise_percent >= 0.0))
    throw std::invalid_argument("PhantomSpec: noise_percent must be nonnegative");
  if (!(bias_level >= 0.0 && bias_level < 200.0))
    throw std::invalid_argument("PhantomSpec: bias_level must lie in [0,200)");
  for (std::size_t i = 0; i < tissue_levels.size(); ++i) {
    if (!(tissue_levels[i] > 0.0 && tissue_levels[i] <= 1.0))
      throw std::invalid_argument("PhantomSpec: tissue levels must lie in (0,1]");
    if (i > 0 && !(tissue_levels[i] > tissue_levels[i - 1]))
      throw std::invalid_argument("PhantomSpec: tissue levels must strictly increase");
  }
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

enum Stream : std::uint64_t { kGeometry = 1, kBias = 2, kNoise = 3 };

} // namespace

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t bits = counter_hash(seed, stream, counter) >> 11;
  return static_cast<double>(bits + 1) * 0x1.0p-53;
}

std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t counter) {
  const double u1 = counter_uniform(seed, stream, 2 * counter);
  const double u2 = counter_uniform(seed, stream, 2 * counter + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double rician_sample(double amplitude, double sigma, double draw1, double draw2) {
  if (sigma == 0.0)
    return std::abs(amplitude);
  const double real = amplitude + sigma * draw1;
  const double imaginary = sigma * draw2;
  return std::sqrt(real * real + imaginary * imaginary);
}

namespace {

class Geometry {
public:
  Geometry(const PhantomSpec &spec) : spec_(spec) {
    cx_ = 0.5 * (spec.width - 1) + 4.0 * (draw() - 0.5);
    cy_ = 0.5 * (spec.height - 1) + 4.0 * (draw() - 0.5);
    a_ = 0.45 * spec.width;
    b_ = 0.44 * spec.height;
    for (auto &term : outer_) {
      term.amplitude = 0.025 * draw();
      term.phase = 2.0 * std::numbers::pi * draw();
    }
    for (auto &term : inner_) {
      term.amplitude = 0.06 * draw();
      term.phase = 2.0 * std::numbers::pi * draw();
    }
    gm_outer_ = std::sqrt(0.85 + 0.03 * draw());
    wm_outer_ = std::sqrt(0.38 + 0.12 * draw());
    for (auto &blob : blobs_) {
      const double r = 0.6 * std::sqrt(draw());
      const double t = 2.0 * std::numbers::pi * draw();
      blob.x = cx_ + r * a_ * std::cos(t);
      blob.y = cy_ + r * b_ * std::sin(t);
      blob.scale = 0.08 * spec.width + 0.06 * spec.width * draw();
    }
  }

  int label(int x, int y) const {
    const double dx = (x - cx_) / a_;
    const double dy = (y - cy_) / b_;
    const double theta = std::atan2(dy, dx);
    const double radial = std::hypot(dx, dy) / wobble(outer_, 2, theta);
    if (radial > 1.0)
      return LabelMap::background;
    if (radial > gm_outer_)
      return 0;
    if (spec_.geometry == PhantomGeometry::NestedEllipses)
      return radial * wobble(inner_, 3, theta) > wm_outer_ ? 1 : 2;

    // blobs: white matter where a sum of Gaussian bumps is high, leaving a
    // grey band inside the CSF ring
    if (radial > gm_outer_ - 0.1)
      return 1;
    double field = 0.0;
    for (const auto &blob : blobs_) {
      const double ex = x - blob.x;
      const double ey = y - blob.y;
      field += std::exp(-0.5 * (ex * ex + ey * ey) / (blob.scale * blob.scale));
    }
    return field > 0.6 ? 2 : 1;
  }

private:
  struct Harmonic {
    double amplitude = 0.0;
    double phase = 0.0;
  };
  struct Blob {
    double x = 0.0;
    double y = 0.0;
    double scale = 1.0;
  };

  template <std::size_t K>
  static double wobble(const std::array<Harmonic, K> &terms, int first_order, double theta) {
    double factor = 1.0;
    for (std::size_t k = 0; k < K; ++k)
      factor += terms[k].amplitude * std::cos((first_order + static_cast<int>(k)) * theta +
                                              terms[k].phase);
    return factor;
  }

  double draw() { return counter_uniform(spec_.seed, kGeometry, counter_++); }

  const PhantomSpec &spec_;
  std::uint64_t counter_ = 0;
  double cx_ = 0.0, cy_ = 0.0, a_ = 1.0, b_ = 1.0;
  double gm_outer_ = 0.93, wm_outer_ = 0.66;
  std::array<Harmonic, 3> outer_{};
  std::array<Harmonic, 5> inner_{};
  std::array<Blob, 8> blobs_{};
};

PixelGrid bias_field(const PhantomSpec &spec) {
  PixelGrid field(spec.width, spec.height, 1.0);
  if (spec.bias_level == 0.0)
    return field;
  const BasisSet basis = build_legendre_basis(spec.width, spec.height, 3);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(basis.size());
  for (int j = 1; j < basis.size(); ++j)
    w(j) = 2.0 * counter_uniform(spec.seed, kBias, static_cast<std::uint64_t>(j)) - 1.0;
  const Eigen::VectorXd raw = basis.matrix() * w;
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (hi - lo <= 0.0)
    return field;
  const double half_range = spec.bias_level / 200.0;
  for (std::size_t p = 0; p < field.size(); ++p) {
    const double unit = (raw(static_cast<Eigen::Index>(p)) - lo) / (hi - lo); // in [0,1]
    field[p] = 1.0 + half_range * (2.0 * unit - 1.0);
  }
  return field;
}

} // namespace

PhantomInstance generate_phantom(const PhantomSpec &spec) {
  spec.validate();
  const int w = spec.width;
  const int h = spec.height;
  Geometry geometry(spec);

  PhantomInstance out;
  out.gt = {w, h, 3, std::vector<int>(static_cast<std::size_t>(w) * h, LabelMap::background)};
  out.clean = PixelGrid(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = geometry.label(x, y);
      const std::size_t p = out.clean.index(x, y);
      out.gt.labels[p] = label;
      if (label != LabelMap::background) {
        out.clean[p] = spec.tissue_levels[static_cast<std::size_t>(label)];
        ++out.tissue_counts[static_cast<std::size_t>(label)];
      }
    }
  }

  out.bias = bias_field(spec);
  out.sigma = spec.noise_percent / 100.0 * spec.tissue_levels.back();
  out.corrupted = PixelGrid(w, h, 0.0);
  for (std::size_t p = 0; p < out.corrupted.size(); ++p) {
    const double amplitude = out.bias[p] * out.clean[p];
    if (out.sigma == 0.0) {
      out.corrupted[p] = amplitude;
      continue;
    }
    const auto [n1, n2] = counter_normal_pair(spec.seed, kNoise, p);
    out.corrupted[p] = rician_sample(amplitude, out.sigma, n1, n2);
  }
  return out;
}

} // namespace segmict
