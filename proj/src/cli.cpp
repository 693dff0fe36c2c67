#include "segmict/cli.hpp"
#include "segmict/kv_text.hpp"
#include "segmict/metrics.hpp"
#include "segmict/phantom.hpp"
#include "segmict/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace segmict::cli {

namespace fs = std::filesystem;

namespace {

class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  PhantomSpec phantom;
  std::string input;
  std::string gt;
  std::string pred;
  fs::path out = "segmict_out";
  PipelineMode mode = PipelineMode::SegMIC2T;
  bool mode_given = false;
  std::string preset = "paper";
  admm::SolverConfig solver;
  DecomposeParams decompose;
  double mask_threshold = 0.01;
  std::vector<double> np_list{5, 7, 9};
  std::vector<double> bl_list{0, 20, 40};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
};

double to_real(const std::string &key, const std::string &text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(value))
    throw InputError(key + ": expected a number, got '" + text + "'");
  return value;
}

int to_int(const std::string &key, const std::string &text) {
  const double value = to_real(key, text);
  if (value != std::floor(value) || std::abs(value) > 1e9)
    throw InputError(key + ": expected an integer, got '" + text + "'");
  return static_cast<int>(value);
}

std::uint64_t to_seed(const std::string &key, const std::string &text) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    if (!text.empty() && text.front() != '-')
      value = std::stoull(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    throw InputError(key + ": expected a nonnegative integer, got '" + text + "'");
  return value;
}

std::vector<double> to_list(const std::string &key, const std::string &text) {
  std::vector<double> values;
  try {
    values = parse_double_list(text);
  } catch (const std::exception &) {
    throw InputError(key + ": expected a comma-separated list of numbers, got '" + text + "'");
  }
  if (values.empty())
    throw InputError(key + ": empty list");
  return values;
}

// Applies every entry of `record` on top of `s`; unknown keys are errors so
// that typos in configuration files do not pass silently.
void apply(Settings &s, const KeyValueRecord &record, bool &rho_given) {
  for (const auto &[key, value] : record.entries()) {
    if (key == "np")
      s.phantom.noise_percent = to_real(key, value);
    else if (key == "bl")
      s.phantom.bias_level = to_real(key, value);
    else if (key == "seed")
      s.phantom.seed = to_seed(key, value);
    else if (key == "geometry")
      s.phantom.geometry = parse_geometry(value);
    else if (key == "width")
      s.phantom.width = to_int(key, value);
    else if (key == "height")
      s.phantom.height = to_int(key, value);
    else if (key == "input")
      s.input = value;
    else if (key == "gt")
      s.gt = value;
    else if (key == "pred")
      s.pred = value;
    else if (key == "out")
      s.out = value;
    else if (key == "mode") {
      s.mode = parse_mode(value);
      s.mode_given = true;
    } else if (key == "preset")
      continue; // resolved before everything else
    else if (key == "iters")
      s.solver.max_iter = to_int(key, value);
    else if (key == "mu")
      s.solver.mu = to_real(key, value);
    else if (key == "eps")
      s.solver.epsilon = to_real(key, value);
    else if (key == "rho") {
      s.solver.rho = to_real(key, value);
      rho_given = true;
    } else if (key == "basis_order")
      s.solver.basis_order = to_int(key, value);
    else if (key == "classes")
      s.solver.n_classes = to_int(key, value);
    else if (key == "sigma")
      s.decompose.sigma = to_real(key, value);
    else if (key == "lower_rate")
      s.decompose.lower_rate = to_real(key, value);
    else if (key == "upper_rate")
      s.decompose.upper_rate = to_real(key, value);
    else if (key == "mask_threshold")
      s.mask_threshold = to_real(key, value);
    else if (key == "np_list")
      s.np_list = to_list(key, value);
    else if (key == "bl_list")
      s.bl_list = to_list(key, value);
    else if (key == "seeds") {
      s.seeds.clear();
      for (const double seed : to_list(key, value)) {
        if (seed < 0 || seed != std::floor(seed))
          throw InputError("seeds: expected nonnegative integers");
        s.seeds.push_back(static_cast<std::uint64_t>(seed));
      }
    } else
      throw InputError("unknown setting '" + key + "'");
  }
}

// Defaults, then the preset, then the configuration file, then flags.
Settings resolve(const std::optional<KeyValueRecord> &file, const KeyValueRecord &flags) {
  Settings s;
  if (auto preset = flags.get("preset"))
    s.preset = *preset;
  else if (file && file->get("preset"))
    s.preset = *file->get("preset");
  if (s.preset == "paper")
    s.solver = admm::SolverConfig::paper();
  else if (s.preset == "theory")
    s.solver = admm::SolverConfig::theory();
  else
    throw InputError("preset: expected 'paper' or 'theory', got '" + s.preset + "'");

  bool rho_given = false;
  try {
    if (file)
      apply(s, *file, rho_given);
    apply(s, flags, rho_given);
    if (s.preset == "theory" && !rho_given)
      s.solver.rho = admm::rho_lower_bound(s.solver.mu, s.solver.epsilon, 0.0) + 1.0;
    s.solver.validate();
    s.phantom.validate();
    s.decompose.validate();
  } catch (const std::invalid_argument &e) {
    throw InputError(e.what());
  }
  if (!(s.mask_threshold < 1.0))
    throw InputError("mask_threshold must be below 1");
  return s;
}

// Files of one command, written all-or-nothing.
class OutputSet {
public:
  using Writer = std::function<void(const fs::path &)>;

  void add(const std::string &name, Writer writer) {
    items_.push_back({name, std::move(writer)});
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto &item : items_)
      out.push_back(item.name);
    return out;
  }

  void commit(const fs::path &dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
      throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::vector<fs::path> written;
    try {
      for (const auto &item : items_) {
        const fs::path staging = dir / (item.name + ".partial");
        written.push_back(staging);
        item.write(staging);
      }
      for (std::size_t i = 0; i < items_.size(); ++i)
        fs::rename(written[i], dir / items_[i].name);
    } catch (...) {
      for (const auto &path : written)
        fs::remove(path, ec);
      throw;
    }
  }

private:
  struct Item {
    std::string name;
    Writer write;
  };
  std::vector<Item> items_;
};

OutputSet::Writer text_writer(std::function<void(std::ostream &)> body) {
  return [body = std::move(body)](const fs::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw InputError("cannot write " + path.string());
    body(out);
    if (!out)
      throw InputError("short write to " + path.string());
  };
}

OutputSet::Writer image16_writer(PixelGrid grid) {
  return [grid = std::move(grid)](const fs::path &path) { save_image16(grid, path); };
}

OutputSet::Writer labels_writer(LabelMap labels) {
  return [labels = std::move(labels)](const fs::path &path) { save_labels(labels, path); };
}

// Divides by the maximum so the grid fits a [0,1] image file; returns the
// factor for the report.
double scale_to_unit(PixelGrid &grid) {
  const auto values = grid.values();
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  const double scale = peak > 0.0 ? peak : 1.0;
  for (auto &value : grid.values())
    value /= scale;
  return scale;
}

std::string join_names(const std::vector<std::string> &names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i)
    out += (i ? "," : "") + names[i];
  return out;
}

std::string number_tag(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%g", value);
  return buffer;
}

struct Source {
  PixelGrid image;
  std::optional<LabelMap> gt;
  std::optional<PhantomInstance> phantom;
};

Source load_source(const Settings &s, bool allow_phantom = true) {
  Source source;
  if (!s.input.empty()) {
    source.image = load_image(s.input);
  } else if (allow_phantom) {
    source.phantom = generate_phantom(s.phantom);
    source.image = source.phantom->corrupted;
    source.gt = source.phantom->gt;
  } else {
    throw InputError("--input is required");
  }
  if (!s.gt.empty())
    source.gt = load_labels(s.gt, s.solver.n_classes);
  if (source.gt && (source.gt->width != source.image.width() ||
                    source.gt->height != source.image.height()))
    throw EvaluationMismatch("ground truth and input image dimensions differ");
  return source;
}

void describe_source(KeyValueRecord &report, const Settings &s, const Source &source) {
  report.set("input", source.phantom ? std::string("phantom") : s.input);
  report.set("width", source.image.width());
  report.set("height", source.image.height());
  if (source.phantom) {
    report.set("phantom.np", s.phantom.noise_percent);
    report.set("phantom.bl", s.phantom.bias_level);
    report.set("phantom.seed", std::to_string(s.phantom.seed));
    report.set("phantom.geometry", to_string(s.phantom.geometry));
    report.set("phantom.sigma", source.phantom->sigma);
  }
  if (!s.gt.empty())
    report.set("gt", s.gt);
}

void describe_settings(KeyValueRecord &report, const Settings &s, const admm::SolverConfig &used) {
  report.set("mode", to_string(s.mode));
  report.set("preset", s.preset);
  report.set("solver.mu", used.mu);
  report.set("solver.epsilon", used.epsilon);
  report.set("solver.rho", used.rho);
  report.set("solver.max_iter", used.max_iter);
  report.set("solver.n_classes", used.n_classes);
  report.set("solver.basis_order", used.basis_order);
  if (s.mode == PipelineMode::SegMIC2T) {
    report.set("decompose.sigma", s.decompose.sigma);
    report.set("decompose.lower_rate", s.decompose.lower_rate);
    report.set("decompose.upper_rate", s.decompose.upper_rate);
  }
}

void describe_solution(KeyValueRecord &report, const admm::AdmmState &state, double bias_scale) {
  report.set("final.iterations", state.iter);
  report.set("final.c", std::vector<double>(state.c.begin(), state.c.end()));
  report.set("final.w", std::vector<double>(state.w.begin(), state.w.end()));
  report.set("final.c_norm", state.c.norm());
  report.set("final.w_norm", state.w.norm());
  report.set("final.v_norm", state.v.norm());
  if (!state.history.empty()) {
    const auto &last = state.history.back();
    report.set("final.objective", last.objective);
    report.set("final.aug_lagrangian", last.aug_lagrangian);
    report.set("final.constraint_residual", last.constraint_residual);
    report.set("final.image_change", last.image_change);
    report.set("final.multiplier_change", last.multiplier_change);
  }
  report.set("degeneracy.c_events", state.degeneracy.c_events);
  report.set("degeneracy.w_events", state.degeneracy.w_events);
  std::string classes;
  for (std::size_t i = 0; i < state.degeneracy.classes.size(); ++i)
    if (state.degeneracy.classes[i])
      classes += (classes.empty() ? "" : ",") + std::to_string(i);
  report.set("degeneracy.classes", classes.empty() ? std::string("none") : classes);
  report.set("bias.scale", bias_scale);
}

void describe_clustering(KeyValueRecord &report, const KMeansResult &clusters,
                         const ForegroundMask &mask, bool from_gt, double threshold) {
  report.set("mask.source", std::string(from_gt ? "ground-truth" : "threshold"));
  if (!from_gt)
    report.set("mask.threshold", threshold);
  report.set("mask.pixels", static_cast<int>(mask.count()));
  report.set("kmeans.centroids", clusters.centroids);
  report.set("kmeans.iterations", clusters.iterations);
  std::string empty;
  for (std::size_t i = 0; i < clusters.empty.size(); ++i)
    if (clusters.empty[i])
      empty += (empty.empty() ? "" : ",") + std::to_string(i);
  report.set("kmeans.empty", empty.empty() ? std::string("none") : empty);
}

void add_report(OutputSet &outputs, KeyValueRecord report) {
  auto names = outputs.names();
  names.push_back("report.txt");
  report.set("outputs", join_names(names));
  outputs.add("report.txt", text_writer([report = std::move(report)](std::ostream &out) {
                out << "# segmict run report\n";
                report.write(out);
              }));
}

void print_metrics(std::ostream &out, const MetricsReport &metrics) {
  for (const auto &roi : metrics.rois)
    out << "  " << roi.roi << ": dice " << format_metric(roi.dice) << ", jaccard "
        << format_metric(roi.jaccard) << '\n';
}

// --- commands ---------------------------------------------------------------

int cmd_phantom(const Settings &s, std::ostream &out) {
  PhantomInstance instance = generate_phantom(s.phantom);
  PixelGrid corrupted = instance.corrupted;
  PixelGrid bias = instance.bias;
  const double corrupted_scale = scale_to_unit(corrupted);
  const double bias_scale = scale_to_unit(bias);

  OutputSet outputs;
  outputs.add("corrupted.pgm", image16_writer(corrupted));
  outputs.add("clean.pgm", image16_writer(instance.clean));
  outputs.add("bias.pgm", image16_writer(bias));
  outputs.add("gt_labels.pgm", labels_writer(instance.gt));

  KeyValueRecord report;
  report.set("command", "phantom");
  report.set("phantom.np", s.phantom.noise_percent);
  report.set("phantom.bl", s.phantom.bias_level);
  report.set("phantom.seed", std::to_string(s.phantom.seed));
  report.set("phantom.geometry", to_string(s.phantom.geometry));
  report.set("width", s.phantom.width);
  report.set("height", s.phantom.height);
  report.set("phantom.sigma", instance.sigma);
  report.set("phantom.tissue_levels", std::vector<double>(s.phantom.tissue_levels.begin(),
                                                          s.phantom.tissue_levels.end()));
  for (int i = 0; i < 3; ++i)
    report.set("phantom.pixels." + roi_name(i, 3),
               static_cast<int>(instance.tissue_counts[static_cast<std::size_t>(i)]));
  report.set("corrupted.scale", corrupted_scale);
  report.set("bias.scale", bias_scale);
  add_report(outputs, std::move(report));
  outputs.commit(s.out);
  out << "phantom written to " << s.out.string() << '\n';
  return kSuccess;
}

int cmd_decompose(const Settings &s, std::ostream &out) {
  const Source source = load_source(s);
  const PixelGrid normalized = normalize(source.image);
  const Decomposition split = decompose(normalized, s.decompose);
  const ForegroundMask mask =
      source.gt ? source.gt->foreground() : foreground_mask(normalized, s.mask_threshold);
  const TextureStatistics stats = texture_statistics(split.texture, mask);

  constexpr double texture_offset = 0.5;
  PixelGrid shifted = split.texture;
  for (auto &value : shifted.values())
    value += texture_offset;

  OutputSet outputs;
  outputs.add("cartoon.pgm", image16_writer(split.cartoon));
  outputs.add("texture.pgm", image16_writer(shifted));

  KeyValueRecord report;
  report.set("command", "decompose");
  describe_source(report, s, source);
  report.set("decompose.sigma", s.decompose.sigma);
  report.set("decompose.lower_rate", s.decompose.lower_rate);
  report.set("decompose.upper_rate", s.decompose.upper_rate);
  report.set("texture.offset", texture_offset);
  report.set("texture.mean", stats.mean);
  report.set("texture.stddev", stats.stddev);
  report.set("texture.min", stats.min);
  report.set("texture.max", stats.max);
  report.set("texture.pixels", static_cast<int>(stats.count));
  report.set("tv.input", total_variation(normalized));
  report.set("tv.cartoon", total_variation(split.cartoon));
  add_report(outputs, std::move(report));
  outputs.commit(s.out);
  out << "texture stddev " << format_double(stats.stddev) << " over " << stats.count
      << " pixels\n";
  return kSuccess;
}

int cmd_correct(const Settings &s, std::ostream &out) {
  const Source source = load_source(s);
  const PipelineConfig config{s.solver, s.decompose, s.mode, s.mask_threshold};
  const PipelineResult result = correct_image(source.image, config);
  PixelGrid bias = result.correction.bias;
  const double bias_scale = scale_to_unit(bias);

  OutputSet outputs;
  outputs.add("corrected.pgm", image16_writer(result.correction.corrected));
  outputs.add("bias.pgm", image16_writer(bias));
  outputs.add("history.csv", text_writer([&history = result.correction.state.history](
                                             std::ostream &o) { admm::write_history_csv(history, o); }));

  KeyValueRecord report;
  report.set("command", "correct");
  describe_source(report, s, source);
  describe_settings(report, s, result.solver);
  describe_solution(report, result.correction.state, bias_scale);
  add_report(outputs, std::move(report));
  outputs.commit(s.out);
  out << "corrected image written to " << s.out.string() << '\n';
  return kSuccess;
}

int cmd_segment(const Settings &s, std::ostream &out) {
  const Source source = load_source(s, false);
  const PixelGrid normalized = normalize(source.image);
  const ForegroundMask mask =
      source.gt ? source.gt->foreground() : foreground_mask(normalized, s.mask_threshold);
  const auto seeds = default_seeds(s.solver.n_classes);
  const KMeansResult clusters = cluster_corrected(
      normalized, mask, Eigen::Map<const Eigen::VectorXd>(seeds.data(), std::ssize(seeds)));

  std::optional<MetricsReport> metrics;
  if (source.gt)
    metrics = evaluate(clusters.labels, *source.gt, source.gt->foreground());

  OutputSet outputs;
  outputs.add("labels.pgm", labels_writer(clusters.labels));
  if (metrics)
    outputs.add("metrics.csv",
                text_writer([m = *metrics](std::ostream &o) { write_metrics_csv(m, o); }));
  KeyValueRecord report;
  report.set("command", "segment");
  describe_source(report, s, source);
  report.set("solver.n_classes", s.solver.n_classes);
  describe_clustering(report, clusters, mask, source.gt.has_value(), s.mask_threshold);
  add_report(outputs, std::move(report));
  outputs.commit(s.out);
  out << "labels written to " << s.out.string() << '\n';
  if (metrics)
    print_metrics(out, *metrics);
  return kSuccess;
}

int cmd_evaluate(const Settings &s, std::ostream &out) {
  if (s.pred.empty() || s.gt.empty())
    throw InputError("evaluate needs --pred and --gt");
  const LabelMap pred = load_labels(s.pred, s.solver.n_classes);
  const LabelMap gt = load_labels(s.gt, s.solver.n_classes);
  if (pred.width != gt.width || pred.height != gt.height)
    throw EvaluationMismatch("prediction and ground truth dimensions differ");
  const MetricsReport metrics = evaluate(pred, gt, gt.foreground());

  OutputSet outputs;
  outputs.add("metrics.csv",
              text_writer([&metrics](std::ostream &o) { write_metrics_csv(metrics, o); }));
  outputs.commit(s.out);
  write_metrics_csv(metrics, out);
  return kSuccess;
}

struct PipelineOutcome {
  OutputSet outputs;
  std::optional<MetricsReport> metrics;
};

PipelineOutcome pipeline_outputs(const Settings &s, const Source &source) {
  const PipelineConfig config{s.solver, s.decompose, s.mode, s.mask_threshold};
  const std::optional<ForegroundMask> mask =
      source.gt ? std::optional<ForegroundMask>(source.gt->foreground()) : std::nullopt;
  PipelineResult result = run_pipeline(source.image, config, mask);

  PipelineOutcome outcome;
  if (source.gt)
    outcome.metrics = evaluate(result.segmentation.labels, *source.gt, source.gt->foreground());

  PixelGrid bias = result.correction.bias;
  const double bias_scale = scale_to_unit(bias);
  auto history =
      std::make_shared<std::vector<admm::IterationRecord>>(result.correction.state.history);

  OutputSet &outputs = outcome.outputs;
  outputs.add("corrected.pgm", image16_writer(result.correction.corrected));
  outputs.add("bias.pgm", image16_writer(bias));
  outputs.add("labels.pgm", labels_writer(result.segmentation.labels));
  outputs.add("history.csv", text_writer([history](std::ostream &o) {
                admm::write_history_csv(*history, o);
              }));
  if (outcome.metrics)
    outputs.add("metrics.csv", text_writer([m = *outcome.metrics](std::ostream &o) {
                  write_metrics_csv(m, o);
                }));

  KeyValueRecord report;
  report.set("command", "pipeline");
  describe_source(report, s, source);
  describe_settings(report, s, result.solver);
  describe_solution(report, result.correction.state, bias_scale);
  describe_clustering(report, result.segmentation, result.mask, mask.has_value(),
                      s.mask_threshold);
  add_report(outputs, std::move(report));
  return outcome;
}

int cmd_pipeline(const Settings &s, std::ostream &out) {
  const Source source = load_source(s);
  PipelineOutcome outcome = pipeline_outputs(s, source);
  outcome.outputs.commit(s.out);
  out << "pipeline (" << to_string(s.mode) << ") written to " << s.out.string() << '\n';
  if (outcome.metrics)
    print_metrics(out, *outcome.metrics);
  return kSuccess;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int exit_code_for(const std::exception &e) {
  if (dynamic_cast<const admm::SolverDivergence *>(&e))
    return kDivergence;
  if (dynamic_cast<const EvaluationMismatch *>(&e))
    return kEvaluationMismatch;
  return kInputError;
}

int cmd_matrix(const Settings &s, std::ostream &out, std::ostream &err) {
  const std::vector<PipelineMode> modes =
      s.mode_given ? std::vector<PipelineMode>{s.mode}
                   : std::vector<PipelineMode>{PipelineMode::SegMIC2T, PipelineMode::MicoBaseline};

  struct Row {
    std::uint64_t seed;
    double np;
    double bl;
    PipelineMode mode;
    RoiMetrics roi;
  };
  std::vector<Row> rows;
  int first_failure = kSuccess;
  std::string first_message;
  int cells = 0;
  int failures = 0;

  for (const std::uint64_t seed : s.seeds) {
    for (const double np : s.np_list) {
      for (const double bl : s.bl_list) {
        Settings cell = s;
        cell.input.clear();
        cell.gt.clear();
        cell.phantom.seed = seed;
        cell.phantom.noise_percent = np;
        cell.phantom.bias_level = bl;
        const std::string tag =
            "s" + std::to_string(seed) + "_np" + number_tag(np) + "_bl" + number_tag(bl);
        std::optional<Source> source;
        for (const PipelineMode mode : modes) {
          ++cells;
          cell.mode = mode;
          try {
            if (!source)
              source = load_source(cell);
            PipelineOutcome outcome = pipeline_outputs(cell, *source);
            outcome.outputs.commit(s.out / "cells" / tag / to_string(mode));
            for (const auto &roi : outcome.metrics->rois)
              rows.push_back({seed, np, bl, mode, roi});
          } catch (const std::exception &e) {
            ++failures;
            const std::string message = tag + " " + to_string(mode) + ": " + e.what();
            err << "cell failed: " << message << '\n';
            if (first_failure == kSuccess) {
              first_failure = exit_code_for(e);
              first_message = message;
            }
          }
        }
      }
    }
  }

  OutputSet outputs;
  outputs.add("aggregate.csv", text_writer([&rows](std::ostream &o) {
                o << "seed,np,bl,method,roi,jaccard,sensitivity,specificity,dice,"
                     "specificity_conventional\n";
                for (const auto &r : rows)
                  o << r.seed << ',' << number_tag(r.np) << ',' << number_tag(r.bl) << ','
                    << to_string(r.mode) << ',' << r.roi.roi << ',' << format_metric(r.roi.jaccard)
                    << ',' << format_metric(r.roi.sensitivity) << ','
                    << format_metric(r.roi.specificity) << ',' << format_metric(r.roi.dice) << ','
                    << format_metric(r.roi.specificity_conventional) << '\n';
              }));
  outputs.add("medians.csv", text_writer([&rows, &modes](std::ostream &o) {
                o << "method,roi,cells,jaccard,sensitivity,specificity,dice\n";
                std::vector<std::string> roi_order;
                for (const auto &r : rows)
                  if (std::find(roi_order.begin(), roi_order.end(), r.roi.roi) == roi_order.end())
                    roi_order.push_back(r.roi.roi);
                for (const PipelineMode mode : modes) {
                  for (const auto &name : roi_order) {
                    std::vector<double> j, se, sp, d;
                    for (const auto &r : rows) {
                      if (r.mode != mode || r.roi.roi != name)
                        continue;
                      if (r.roi.jaccard)
                        j.push_back(*r.roi.jaccard);
                      if (r.roi.sensitivity)
                        se.push_back(*r.roi.sensitivity);
                      if (r.roi.specificity)
                        sp.push_back(*r.roi.specificity);
                      if (r.roi.dice)
                        d.push_back(*r.roi.dice);
                    }
                    auto cell = [](const std::vector<double> &v) {
                      return v.empty() ? std::string("NA") : format_metric(median(v));
                    };
                    o << to_string(mode) << ',' << name << ',' << d.size() << ',' << cell(j) << ','
                      << cell(se) << ',' << cell(sp) << ',' << cell(d) << '\n';
                  }
                }
              }));
  outputs.commit(s.out);

  out << cells << " cells, " << failures << " failed\n";
  if (first_failure != kSuccess)
    out << "first failure: " << first_message << '\n';
  return first_failure;
}

// --- argument parsing -------------------------------------------------------

struct FlagTable {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option *>> options;

  void add(CLI::App *app, const std::string &key, const std::string &flag,
           const std::string &help) {
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  KeyValueRecord given() const {
    KeyValueRecord record;
    for (const auto &[key, option] : options)
      if (option->count() > 0)
        record.set(key, values.at(key));
    return record;
  }
};

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Cartoon/texture-guided bias correction and tissue segmentation of MRI slices"};
  app.name(args.empty() ? "segmict" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  FlagTable flags;
  std::string config_path;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "key = value settings file; flags override it");
    flags.add(sub, "out", "--out", "output directory");
  };
  auto phantom = [&](CLI::App *sub) {
    flags.add(sub, "np", "--np", "noise percent of the brightest tissue");
    flags.add(sub, "bl", "--bl", "bias level, percent peak-to-peak");
    flags.add(sub, "seed", "--seed", "phantom seed");
    flags.add(sub, "geometry", "--geometry", "nested-ellipses or blobs");
    flags.add(sub, "width", "--width", "phantom width");
    flags.add(sub, "height", "--height", "phantom height");
  };
  auto input = [&](CLI::App *sub) {
    flags.add(sub, "input", "--input", "PGM or PNG slice; a phantom is generated when absent");
  };
  auto solver = [&](CLI::App *sub) {
    flags.add(sub, "mode", "--mode", "segmict2t or mico-baseline");
    flags.add(sub, "preset", "--preset", "paper or theory");
    flags.add(sub, "iters", "--iters", "solver iterations");
    flags.add(sub, "mu", "--mu", "texture penalty weight");
    flags.add(sub, "eps", "--eps", "weight clamp epsilon");
    flags.add(sub, "rho", "--rho", "augmented Lagrangian penalty");
    flags.add(sub, "basis_order", "--basis-order", "Legendre order of the bias basis");
    flags.add(sub, "classes", "--classes", "number of tissue classes");
  };
  auto filter = [&](CLI::App *sub) {
    flags.add(sub, "sigma", "--sigma", "decomposition Gaussian scale");
    flags.add(sub, "lower_rate", "--lower-rate", "decomposition lower rate");
    flags.add(sub, "upper_rate", "--upper-rate", "decomposition upper rate");
  };
  auto masking = [&](CLI::App *sub) {
    flags.add(sub, "gt", "--gt", "ground-truth label PGM; also selects the clustered pixels");
    flags.add(sub, "mask_threshold", "--mask-threshold",
              "foreground threshold on the normalized image when no ground truth is given");
  };

  auto *phantom_cmd = app.add_subcommand("phantom", "generate a synthetic corrupted slice");
  common(phantom_cmd);
  phantom(phantom_cmd);

  auto *decompose_cmd = app.add_subcommand("decompose", "split a slice into cartoon and texture");
  common(decompose_cmd);
  input(decompose_cmd);
  phantom(decompose_cmd);
  filter(decompose_cmd);
  masking(decompose_cmd);

  auto *correct_cmd = app.add_subcommand("correct", "bias and noise correction only");
  common(correct_cmd);
  input(correct_cmd);
  phantom(correct_cmd);
  solver(correct_cmd);
  filter(correct_cmd);

  auto *segment_cmd = app.add_subcommand("segment", "K-means labels of a (corrected) slice");
  common(segment_cmd);
  input(segment_cmd);
  masking(segment_cmd);
  flags.add(segment_cmd, "classes", "--classes", "number of tissue classes");

  auto *evaluate_cmd = app.add_subcommand("evaluate", "compare two label PGMs");
  common(evaluate_cmd);
  flags.add(evaluate_cmd, "pred", "--pred", "predicted label PGM");
  flags.add(evaluate_cmd, "gt", "--gt", "ground-truth label PGM");
  flags.add(evaluate_cmd, "classes", "--classes", "number of tissue classes");

  auto *pipeline_cmd = app.add_subcommand("pipeline", "decompose, correct, segment, evaluate");
  common(pipeline_cmd);
  input(pipeline_cmd);
  phantom(pipeline_cmd);
  solver(pipeline_cmd);
  filter(pipeline_cmd);
  masking(pipeline_cmd);

  auto *matrix_cmd = app.add_subcommand("matrix", "pipeline over a grid of phantom instances");
  common(matrix_cmd);
  solver(matrix_cmd);
  filter(matrix_cmd);
  flags.add(matrix_cmd, "np_list", "--np-list", "noise percents, comma separated");
  flags.add(matrix_cmd, "bl_list", "--bl-list", "bias levels, comma separated");
  flags.add(matrix_cmd, "seeds", "--seeds", "phantom seeds, comma separated");
  flags.add(matrix_cmd, "geometry", "--geometry", "nested-ellipses or blobs");
  flags.add(matrix_cmd, "width", "--width", "phantom width");
  flags.add(matrix_cmd, "height", "--height", "phantom height");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty())
    reversed.pop_back(); // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }

  try {
    std::optional<KeyValueRecord> file;
    if (!config_path.empty()) {
      try {
        file = KeyValueRecord::load(config_path);
      } catch (const std::runtime_error &e) {
        throw InputError(std::string("config: ") + e.what());
      }
    }
    const Settings settings = resolve(file, flags.given());

    if (phantom_cmd->parsed())
      return cmd_phantom(settings, out);
    if (decompose_cmd->parsed())
      return cmd_decompose(settings, out);
    if (correct_cmd->parsed())
      return cmd_correct(settings, out);
    if (segment_cmd->parsed())
      return cmd_segment(settings, out);
    if (evaluate_cmd->parsed())
      return cmd_evaluate(settings, out);
    if (pipeline_cmd->parsed())
      return cmd_pipeline(settings, out);
    return cmd_matrix(settings, out, err);
  } catch (const admm::SolverDivergence &e) {
    const auto &last = e.last_record();
    err << "error: " << e.what() << "\n  last record: iter " << last.iter << ", objective "
        << format_double(last.objective) << ", constraint_residual "
        << format_double(last.constraint_residual) << '\n';
    return kDivergence;
  } catch (const EvaluationMismatch &e) {
    err << "error: " << e.what() << '\n';
    return kEvaluationMismatch;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

} // namespace segmict::cli
