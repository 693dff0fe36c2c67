#pragma once

#include "segmict/admm.hpp"
#include "segmict/decompose.hpp"
#include "segmict/image.hpp"
#include "segmict/legendre_basis.hpp"
#include "segmict/segmentation.hpp"

#include <optional>
#include <string>

namespace segmict {

enum class PipelineMode { SegMIC2T, MicoBaseline };

std::string to_string(PipelineMode mode);
PipelineMode parse_mode(const std::string &text);

struct PipelineConfig {
  admm::SolverConfig solver;
  DecomposeParams decompose;
  PipelineMode mode = PipelineMode::SegMIC2T;
  double mask_threshold = 0.01;
};

struct PipelineResult {
  PixelGrid normalized;      ///< I mapped to [0,1]
  Decomposition split;       ///< cartoon/texture; texture is zero in MICO mode
  admm::SolverConfig solver; ///< effective solver settings (mu forced to 0 for MICO)
  admm::RunResult correction;
  ForegroundMask mask;       ///< pixels that were clustered
  KMeansResult segmentation;
};

/// Steps 1 and 2 only: normalization, decomposition and the solver run. The
/// mask and segmentation fields are left empty.
PipelineResult correct_image(const PixelGrid &image, const PipelineConfig &config);

/// Noise estimation, correction and K-means clustering of one slice.
/// In MICO mode the decomposition is skipped: the solver sees the normalized
/// image with zero texture and mu = 0.
/// `mask` selects the pixels to cluster; when absent the normalized image is
/// thresholded at config.mask_threshold.
PipelineResult run_pipeline(const PixelGrid &image, const PipelineConfig &config,
                            const std::optional<ForegroundMask> &mask = std::nullopt);

/// Evenly spaced intensities; 0.33, 0.66, 0.99 for three classes.
std::vector<double> default_seeds(int n_classes);

/// Sorted solver means when they are strictly increasing, otherwise
/// default_seeds.
std::vector<double> kmeans_seeds(const Eigen::VectorXd &class_means);

/// Midpoints of k equal bins spanning the masked intensity range.
std::vector<double> range_seeds(const PixelGrid &image, const ForegroundMask &mask, int k);

/// K-means from kmeans_seeds(class_means) and from range_seeds; the run with
/// the lower final within-cluster sum of squares wins, ties to the solver seeds.
KMeansResult cluster_corrected(const PixelGrid &image, const ForegroundMask &mask,
                               const Eigen::VectorXd &class_means);

} // namespace segmict
