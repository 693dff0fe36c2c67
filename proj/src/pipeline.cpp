#include "segmict/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace segmict {

std::string to_string(PipelineMode mode) {
  return mode == PipelineMode::MicoBaseline ? "mico-baseline" : "segmict2t";
}

PipelineMode parse_mode(const std::string &text) {
  if (text == "segmict2t")
    return PipelineMode::SegMIC2T;
  if (text == "mico-baseline" || text == "mico")
    return PipelineMode::MicoBaseline;
  throw std::invalid_argument("unknown mode '" + text + "'");
}

std::vector<double> default_seeds(int n_classes) {
  std::vector<double> seeds(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = n_classes == 3 ? 0.33 * static_cast<double>(i + 1)
                              : 0.99 * static_cast<double>(i + 1) / static_cast<double>(n_classes);
  return seeds;
}

std::vector<double> kmeans_seeds(const Eigen::VectorXd &class_means) {
  std::vector<double> seeds(class_means.begin(), class_means.end());
  std::sort(seeds.begin(), seeds.end());
  bool increasing = std::all_of(seeds.begin(), seeds.end(),
                                [](double value) { return std::isfinite(value); });
  for (std::size_t i = 1; i < seeds.size() && increasing; ++i)
    increasing = seeds[i] > seeds[i - 1];
  return increasing ? seeds : default_seeds(static_cast<int>(seeds.size()));
}

std::vector<double> range_seeds(const PixelGrid &image, const ForegroundMask &mask, int k) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t p = 0; p < image.size(); ++p) {
    if (!mask[p])
      continue;
    lo = std::min(lo, image[p]);
    hi = std::max(hi, image[p]);
  }
  if (!(hi > lo))
    return default_seeds(k);
  std::vector<double> seeds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = lo + (hi - lo) * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * k);
  return seeds;
}

KMeansResult cluster_corrected(const PixelGrid &image, const ForegroundMask &mask,
                               const Eigen::VectorXd &class_means) {
  const int k = static_cast<int>(class_means.size());
  KMeansResult best = kmeans_segment(image, mask, k, kmeans_seeds(class_means));
  // the solver means also fit background and outliers, so they can seed a
  // local optimum with an empty cluster; seeds spread over the data compete
  KMeansResult other = kmeans_segment(image, mask, k, range_seeds(image, mask, k));
  if (other.wcss.back() < best.wcss.back())
    best = std::move(other);
  return best;
}

PipelineResult correct_image(const PixelGrid &image, const PipelineConfig &config) {
  PipelineResult result;
  result.normalized = normalize(image);
  result.solver = config.solver;
  if (config.mode == PipelineMode::SegMIC2T) {
    result.split = decompose(result.normalized, config.decompose);
  } else {
    result.split = {result.normalized, PixelGrid(image.width(), image.height(), 0.0)};
    result.solver.mu = 0.0;
  }
  const BasisSet basis =
      build_legendre_basis(image.width(), image.height(), result.solver.basis_order);
  result.correction = admm::run(result.split.cartoon, result.split.texture, result.solver, basis);
  return result;
}

PipelineResult run_pipeline(const PixelGrid &image, const PipelineConfig &config,
                            const std::optional<ForegroundMask> &mask) {
  if (mask && (mask->width != image.width() || mask->height != image.height()))
    throw std::invalid_argument("run_pipeline: mask shape mismatch");
  PipelineResult result = correct_image(image, config);
  result.mask = mask ? *mask : foreground_mask(result.normalized, config.mask_threshold);

  const Eigen::VectorXd tissue = admm::tissue_image(result.correction.state);
  const PixelGrid unclamped(image.width(), image.height(),
                            std::vector<double>(tissue.begin(), tissue.end()));
  result.segmentation = cluster_corrected(unclamped, result.mask, result.correction.state.c);
  return result;
}

} // namespace segmict
