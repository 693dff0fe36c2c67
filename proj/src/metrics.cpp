#include "segmict/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace segmict {

ConfusionCounts confusion(const std::vector<bool> &predicted, const std::vector<bool> &truth,
                          const ForegroundMask &eval_mask) {
  if (predicted.size() != truth.size() || predicted.size() != eval_mask.size())
    throw EvaluationMismatch("confusion: mask lengths differ");
  ConfusionCounts c;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    if (!eval_mask[p])
      continue;
    if (predicted[p])
      ++(truth[p] ? c.tp : c.fp);
    else
      ++(truth[p] ? c.fn : c.tn);
  }
  return c;
}

namespace {

std::optional<double> ratio(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0)
    return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

} // namespace

std::optional<double> jaccard(const ConfusionCounts &c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
std::optional<double> sensitivity(const ConfusionCounts &c) { return ratio(c.tp, c.tp + c.fn); }
std::optional<double> specificity(const ConfusionCounts &c) { return ratio(c.tn, c.tp + c.tn); }
std::optional<double> specificity_conventional(const ConfusionCounts &c) {
  return ratio(c.tn, c.tn + c.fp);
}
std::optional<double> dice(const ConfusionCounts &c) {
  return ratio(2 * c.tp, 2 * c.tp + c.fn + c.fp);
}

const RoiMetrics &MetricsReport::roi(const std::string &name) const {
  for (const auto &entry : rois)
    if (entry.roi == name)
      return entry;
  throw std::out_of_range("MetricsReport: no ROI named " + name);
}

std::string roi_name(int class_index, int n_classes) {
  if (n_classes == 3) {
    static const char *names[] = {"CSF", "GM", "WM"};
    return names[class_index];
  }
  return "class_" + std::to_string(class_index);
}

MetricsReport evaluate(const LabelMap &pred, const LabelMap &gt, const ForegroundMask &eval_mask) {
  if (pred.n_classes != gt.n_classes)
    throw EvaluationMismatch("evaluate: class counts differ");
  if (pred.width != gt.width || pred.height != gt.height || eval_mask.width != gt.width ||
      eval_mask.height != gt.height)
    throw EvaluationMismatch("evaluate: image dimensions differ");

  MetricsReport report;
  for (int i = 0; i < gt.n_classes; ++i) {
    RoiMetrics entry;
    entry.roi = roi_name(i, gt.n_classes);
    entry.counts = confusion(binary_mask(pred, i), binary_mask(gt, i), eval_mask);
    entry.jaccard = jaccard(entry.counts);
    entry.sensitivity = sensitivity(entry.counts);
    entry.specificity = specificity(entry.counts);
    entry.specificity_conventional = specificity_conventional(entry.counts);
    entry.dice = dice(entry.counts);
    report.rois.push_back(std::move(entry));
  }
  return report;
}

std::string format_metric(const std::optional<double> &value) {
  if (!value)
    return "NA";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6f", *value);
  return buffer;
}

void write_metrics_csv(const MetricsReport &report, std::ostream &out) {
  out << "roi,jaccard,sensitivity,specificity,dice,specificity_conventional,tp,fp,tn,fn\n";
  for (const auto &r : report.rois) {
    out << r.roi << ',' << format_metric(r.jaccard) << ',' << format_metric(r.sensitivity) << ','
        << format_metric(r.specificity) << ',' << format_metric(r.dice) << ','
        << format_metric(r.specificity_conventional) << ',' << r.counts.tp << ',' << r.counts.fp
        << ',' << r.counts.tn << ',' << r.counts.fn << '\n';
  }
}

void write_metrics_csv(const MetricsReport &report, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  write_metrics_csv(report, out);
}

} // namespace segmict
