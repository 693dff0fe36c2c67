#pragma once

#include "segmict/admm.hpp"
#include "segmict/image.hpp"

#include <span>
#include <vector>

namespace segmict {

/// Per-pixel class index in [0, n_classes), or `background`.
struct LabelMap {
  static constexpr int background = -1;

  int width = 0;
  int height = 0;
  int n_classes = 0;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  ForegroundMask foreground() const;

  friend bool operator==(const LabelMap &, const LabelMap &) = default;
};

struct KMeansResult {
  LabelMap labels;
  std::vector<double> centroids;   ///< ascending, indexed by label
  std::vector<bool> empty;         ///< clusters that ended without pixels
  int iterations = 0;
  std::vector<double> wcss;        ///< within-cluster sum of squares per iteration
};

/// Lloyd iterations on the 1D intensities of foreground pixels, until the
/// assignment stops changing or 100 iterations. Ties go to the lower centroid
/// index, an empty cluster keeps its previous centroid, and labels are
/// renumbered so that centroids ascend (empty clusters last).
/// Throws std::invalid_argument when k < 2, init is not strictly increasing,
/// or there are fewer foreground pixels than clusters.
KMeansResult kmeans_segment(const PixelGrid &image, const ForegroundMask &mask, int k,
                            std::span<const double> init_centroids);

/// label = argmax_i u_{p,i}, ties to the lower index.
LabelMap argmax_labels(const admm::Membership &u, const ForegroundMask &mask, int width,
                       int height);

/// True exactly where the pixel is foreground and carries class_index.
std::vector<bool> binary_mask(const LabelMap &labels, int class_index);

/// Grey levels for label PGMs: background 0, class i -> round(255 (i+1) / N).
std::vector<unsigned char> encode_labels(const LabelMap &labels);
LabelMap decode_labels(const PixelGrid &raw, int n_classes);

void save_labels(const LabelMap &labels, const std::filesystem::path &path);
LabelMap load_labels(const std::filesystem::path &path, int n_classes);

} // namespace segmict
