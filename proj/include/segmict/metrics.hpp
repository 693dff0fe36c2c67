#pragma once

#include "segmict/image.hpp"
#include "segmict/segmentation.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace segmict {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts &, const ConfusionCounts &) = default;
};

/// Counts over pixels where eval_mask is set.
ConfusionCounts confusion(const std::vector<bool> &predicted, const std::vector<bool> &truth,
                          const ForegroundMask &eval_mask);

// An empty optional marks an undefined metric (zero denominator).
std::optional<double> jaccard(const ConfusionCounts &c);     // TP/(TP+FP+FN)
std::optional<double> sensitivity(const ConfusionCounts &c); // TP/(TP+FN)
std::optional<double> specificity(const ConfusionCounts &c); // TN/(TP+TN), as tabulated
std::optional<double> specificity_conventional(const ConfusionCounts &c); // TN/(TN+FP)
std::optional<double> dice(const ConfusionCounts &c);        // 2TP/(2TP+FN+FP)

struct RoiMetrics {
  std::string roi;
  ConfusionCounts counts;
  std::optional<double> jaccard;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> specificity_conventional;
  std::optional<double> dice;
};

struct MetricsReport {
  std::vector<RoiMetrics> rois;

  const RoiMetrics &roi(const std::string &name) const;
};

class EvaluationMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Names CSF, GM, WM for three classes, class_<i> otherwise.
std::string roi_name(int class_index, int n_classes);

/// Per-class binary masks of pred and gt compared over eval_mask.
/// Throws EvaluationMismatch on differing shapes or class counts.
MetricsReport evaluate(const LabelMap &pred, const LabelMap &gt, const ForegroundMask &eval_mask);

/// CSV with one row per ROI:
/// roi,jaccard,sensitivity,specificity,dice,specificity_conventional,tp,fp,tn,fn
void write_metrics_csv(const MetricsReport &report, std::ostream &out);
void write_metrics_csv(const MetricsReport &report, const std::filesystem::path &path);

/// "%.6f" rendering, "NA" for undefined values.
std::string format_metric(const std::optional<double> &value);

} // namespace segmict
