#include "segmict/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace segmict {

ForegroundMask LabelMap::foreground() const {
  ForegroundMask mask{width, height, std::vector<bool>(labels.size())};
  for (std::size_t p = 0; p < labels.size(); ++p)
    mask.flags[p] = labels[p] != background;
  return mask;
}

KMeansResult kmeans_segment(const PixelGrid &image, const ForegroundMask &mask, int k,
                            std::span<const double> init_centroids) {
  if (k < 2)
    throw std::invalid_argument("kmeans_segment: need at least two clusters");
  if (init_centroids.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("kmeans_segment: need one initial centroid per cluster");
  for (int i = 1; i < k; ++i)
    if (!(init_centroids[i] > init_centroids[i - 1]))
      throw std::invalid_argument("kmeans_segment: initial centroids must strictly increase");
  if (mask.width != image.width() || mask.height != image.height())
    throw std::invalid_argument("kmeans_segment: mask shape mismatch");

  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < image.size(); ++p)
    if (mask[p])
      pixels.push_back(p);
  if (pixels.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("kmeans_segment: fewer foreground pixels than clusters");

  std::vector<double> centroids(init_centroids.begin(), init_centroids.end());
  std::vector<int> assignment(pixels.size(), -1);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  KMeansResult result;

  auto nearest = [&](double value) {
    int best = 0;
    double best_distance = std::abs(value - centroids[0]);
    for (int i = 1; i < k; ++i) {
      const double distance = std::abs(value - centroids[static_cast<std::size_t>(i)]);
      if (distance < best_distance) {
        best = i;
        best_distance = distance;
      }
    }
    return best;
  };

  constexpr int max_iterations = 100;
  for (int iteration = 0; iteration < max_iterations; ++iteration) {
    bool changed = false;
    for (std::size_t n = 0; n < pixels.size(); ++n) {
      const int label = nearest(image[pixels[n]]);
      changed |= label != assignment[n];
      assignment[n] = label;
    }
    if (!changed)
      break;
    ++result.iterations;

    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t n = 0; n < pixels.size(); ++n) {
      const auto label = static_cast<std::size_t>(assignment[n]);
      sums[label] += image[pixels[n]];
      ++counts[label];
    }
    for (std::size_t i = 0; i < centroids.size(); ++i)
      if (counts[i] > 0)
        centroids[i] = sums[i] / static_cast<double>(counts[i]);

    double wcss = 0.0;
    for (std::size_t n = 0; n < pixels.size(); ++n) {
      const double d = image[pixels[n]] - centroids[static_cast<std::size_t>(assignment[n])];
      wcss += d * d;
    }
    result.wcss.push_back(wcss);
  }

  std::fill(counts.begin(), counts.end(), 0);
  for (const int label : assignment)
    ++counts[static_cast<std::size_t>(label)];

  // canonical order: nonempty clusters by ascending centroid, empty ones last
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const bool empty_a = counts[static_cast<std::size_t>(a)] == 0;
    const bool empty_b = counts[static_cast<std::size_t>(b)] == 0;
    if (empty_a != empty_b)
      return !empty_a;
    return centroids[static_cast<std::size_t>(a)] < centroids[static_cast<std::size_t>(b)];
  });
  std::vector<int> rank(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r)
    rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

  result.labels = {image.width(), image.height(), k,
                   std::vector<int>(image.size(), LabelMap::background)};
  for (std::size_t n = 0; n < pixels.size(); ++n)
    result.labels.labels[pixels[n]] = rank[static_cast<std::size_t>(assignment[n])];
  for (int r = 0; r < k; ++r) {
    const auto original = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
    result.centroids.push_back(centroids[original]);
    result.empty.push_back(counts[original] == 0);
  }
  return result;
}

LabelMap argmax_labels(const admm::Membership &u, const ForegroundMask &mask, int width,
                       int height) {
  if (u.rows() != static_cast<Eigen::Index>(mask.size()))
    throw std::invalid_argument("argmax_labels: membership rows do not match mask");
  LabelMap out{width, height, static_cast<int>(u.cols()),
               std::vector<int>(mask.size(), LabelMap::background)};
  for (Eigen::Index p = 0; p < u.rows(); ++p) {
    if (!mask[static_cast<std::size_t>(p)])
      continue;
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < u.cols(); ++i)
      if (u(p, i) > u(p, best))
        best = i;
    out.labels[static_cast<std::size_t>(p)] = static_cast<int>(best);
  }
  return out;
}

std::vector<bool> binary_mask(const LabelMap &labels, int class_index) {
  if (class_index < 0 || class_index >= labels.n_classes)
    throw std::invalid_argument("binary_mask: class index out of range");
  std::vector<bool> out(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p)
    out[p] = labels.labels[p] == class_index;
  return out;
}

std::vector<unsigned char> encode_labels(const LabelMap &labels) {
  std::vector<unsigned char> out(labels.size(), 0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const int label = labels.labels[p];
    if (label == LabelMap::background)
      continue;
    out[p] = static_cast<unsigned char>(
        std::lround(255.0 * (label + 1) / static_cast<double>(labels.n_classes)));
  }
  return out;
}

LabelMap decode_labels(const PixelGrid &raw, int n_classes) {
  if (n_classes < 1)
    throw std::invalid_argument("decode_labels: need at least one class");
  LabelMap out{raw.width(), raw.height(), n_classes,
               std::vector<int>(raw.size(), LabelMap::background)};
  const double step = 255.0 / n_classes;
  for (std::size_t p = 0; p < raw.size(); ++p) {
    const long level = std::lround(raw[p] / step);
    if (level > 0)
      out.labels[p] = static_cast<int>(std::min<long>(level, n_classes)) - 1;
  }
  return out;
}

void save_labels(const LabelMap &labels, const std::filesystem::path &path) {
  save_pgm_bytes(labels.width, labels.height, encode_labels(labels), path);
}

LabelMap load_labels(const std::filesystem::path &path, int n_classes) {
  return decode_labels(load_image(path), n_classes);
}

} // namespace segmict
