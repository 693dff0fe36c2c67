#include "doctest.h"
#include "support.hpp"

#include "segmict/cli.hpp"
#include "segmict/kv_text.hpp"
#include "segmict/metrics.hpp"
#include "segmict/phantom.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

using namespace segmict;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "segmict");
  std::ostringstream out;
  std::ostringstream err;
  Invocation result;
  result.code = cli::run(args, out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

std::string slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t data_rows(const fs::path &csv) {
  std::istringstream lines(slurp(csv));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line))
    ++rows;
  return rows == 0 ? 0 : rows - 1;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path &csv) {
  std::istringstream lines(slurp(csv));
  std::string line;
  std::getline(lines, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream stream(line);
    std::string cell;
    while (std::getline(stream, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

bool empty_or_missing(const fs::path &dir) { return !fs::exists(dir) || fs::is_empty(dir); }

const std::vector<std::string> kQuick{"--iters", "4", "--width", "64", "--height", "64"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string> &tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

} // namespace

TEST_CASE("pipeline on a phantom writes every declared output") {
  testing::ScratchDir dir("cli");
  const auto run = invoke(with({"pipeline", "--np", "5", "--bl", "0", "--out",
                                (dir / "run").string()},
                               kQuick));
  REQUIRE(run.code == cli::kSuccess);
  const KeyValueRecord report = KeyValueRecord::load(dir / "run" / "report.txt");
  CHECK(*report.get("mode") == "segmict2t");
  const auto declared = *report.get("outputs");
  std::stringstream names(declared);
  std::string name;
  int count = 0;
  while (std::getline(names, name, ',')) {
    ++count;
    CHECK(fs::exists(dir / "run" / name));
    CHECK(fs::file_size(dir / "run" / name) > 0u);
  }
  CHECK(count == 6);
  CHECK(data_rows(dir / "run" / "history.csv") == 4u);
}

TEST_CASE("the default pipeline records 30 iterations") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke({"pipeline", "--np", "5", "--bl", "0", "--out", (dir / "run").string()}).code ==
          cli::kSuccess);
  CHECK(data_rows(dir / "run" / "history.csv") == 30u);
}

TEST_CASE("MICO baseline mode is recorded in the report") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke(with({"pipeline", "--mode", "mico-baseline", "--out", (dir / "run").string()},
                      kQuick))
              .code == cli::kSuccess);
  const KeyValueRecord report = KeyValueRecord::load(dir / "run" / "report.txt");
  CHECK(*report.get("mode") == "mico-baseline");
  CHECK(std::stod(*report.get("solver.mu")) == 0.0);
  CHECK_FALSE(report.contains("decompose.sigma"));
}

TEST_CASE("a missing input is an input error and leaves nothing behind") {
  testing::ScratchDir dir("cli");
  const auto run =
      invoke({"pipeline", "--input", (dir / "absent.pgm").string(), "--out", (dir / "run").string()});
  CHECK(run.code == cli::kInputError);
  CHECK_FALSE(run.err.empty());
  CHECK_FALSE(fs::exists(dir / "run"));
}

TEST_CASE("bad flags are input errors") {
  CHECK(invoke({"pipeline", "--bogus", "1"}).code == cli::kInputError);
  CHECK(invoke({"pipeline", "--mu", "abc"}).code == cli::kInputError);
  CHECK(invoke({"pipeline", "--mode", "fcm"}).code == cli::kInputError);
  CHECK(invoke({"pipeline", "--preset", "fast"}).code == cli::kInputError);
  CHECK(invoke({}).code == cli::kInputError);
  CHECK(invoke({"--help"}).code == cli::kSuccess);
}

TEST_CASE("a diverging solve exits 4 without outputs") {
  testing::ScratchDir dir("cli");
  const auto run =
      invoke(with({"pipeline", "--mu", "1e308", "--out", (dir / "run").string()}, kQuick));
  CHECK(run.code == cli::kDivergence);
  CHECK(empty_or_missing(dir / "run"));
}

TEST_CASE("flags override the config file, which overrides defaults") {
  testing::ScratchDir dir("cli");
  {
    std::ofstream config(dir / "run.cfg");
    config << "# test settings\niters = 5\nnp = 7\nwidth = 64\nheight = 64\n";
  }
  REQUIRE(invoke({"pipeline", "--config", (dir / "run.cfg").string(), "--iters", "3", "--out",
                  (dir / "run").string()})
              .code == cli::kSuccess);
  const KeyValueRecord report = KeyValueRecord::load(dir / "run" / "report.txt");
  CHECK(*report.get("solver.max_iter") == "3");
  CHECK(*report.get("phantom.np") == "7");
  CHECK(data_rows(dir / "run" / "history.csv") == 3u);
}

TEST_CASE("unknown config keys are rejected") {
  testing::ScratchDir dir("cli");
  {
    std::ofstream config(dir / "run.cfg");
    config << "iterations = 5\n";
  }
  CHECK(invoke({"pipeline", "--config", (dir / "run.cfg").string(), "--out",
                (dir / "run").string()})
            .code == cli::kInputError);
}

TEST_CASE("the theory preset sets rho from the bound unless given") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke(with({"correct", "--preset", "theory", "--out", (dir / "a").string()}, kQuick))
              .code == cli::kSuccess);
  const KeyValueRecord a = KeyValueRecord::load(dir / "a" / "report.txt");
  CHECK(std::stod(*a.get("solver.epsilon")) == 0.1);
  CHECK(std::stod(*a.get("solver.rho")) == doctest::Approx(4.839));

  REQUIRE(invoke(with({"correct", "--preset", "theory", "--rho", "7", "--out",
                       (dir / "b").string()},
                      kQuick))
              .code == cli::kSuccess);
  CHECK(std::stod(*KeyValueRecord::load(dir / "b" / "report.txt").get("solver.rho")) == 7.0);
}

TEST_CASE("same settings give byte-identical outputs") {
  testing::ScratchDir dir("cli");
  const std::vector<std::string> common{"pipeline", "--np", "9", "--bl", "40", "--seed", "3"};
  REQUIRE(invoke(with(common, {"--out", (dir / "a").string()})).code == cli::kSuccess);
  REQUIRE(invoke(with(common, {"--out", (dir / "b").string()})).code == cli::kSuccess);
  for (const char *name : {"history.csv", "labels.pgm", "metrics.csv", "corrected.pgm"})
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
}

TEST_CASE("evaluate matches the library and reports mismatches") {
  testing::ScratchDir dir("cli");
  PhantomSpec spec;
  spec.seed = 2;
  const PhantomInstance phantom = generate_phantom(spec);
  LabelMap pred = phantom.gt;
  for (std::size_t p = 0; p < pred.size(); p += 7)
    if (pred.labels[p] != LabelMap::background)
      pred.labels[p] = (pred.labels[p] + 1) % 3;
  save_labels(phantom.gt, dir / "gt.pgm");
  save_labels(pred, dir / "pred.pgm");

  const auto run = invoke({"evaluate", "--pred", (dir / "pred.pgm").string(), "--gt",
                           (dir / "gt.pgm").string(), "--out", (dir / "eval").string()});
  REQUIRE(run.code == cli::kSuccess);
  std::ostringstream expected;
  write_metrics_csv(evaluate(pred, phantom.gt, phantom.gt.foreground()), expected);
  CHECK(slurp(dir / "eval" / "metrics.csv") == expected.str());
  CHECK(run.out.find(expected.str()) != std::string::npos);

  const auto same = invoke({"evaluate", "--pred", (dir / "gt.pgm").string(), "--gt",
                            (dir / "gt.pgm").string(), "--out", (dir / "same").string()});
  REQUIRE(same.code == cli::kSuccess);
  for (const auto &row : csv_rows(dir / "same" / "metrics.csv")) {
    CHECK(row[1] == "1.000000");
    CHECK(row[4] == "1.000000");
  }

  LabelMap swapped = phantom.gt;
  for (auto &label : swapped.labels)
    if (label != LabelMap::background)
      label = (label + 1) % 3;
  save_labels(swapped, dir / "swapped.pgm");
  REQUIRE(invoke({"evaluate", "--pred", (dir / "swapped.pgm").string(), "--gt",
                  (dir / "gt.pgm").string(), "--out", (dir / "swapped").string()})
              .code == cli::kSuccess);
  for (const auto &row : csv_rows(dir / "swapped" / "metrics.csv"))
    CHECK(row[2] == "0.000000");

  save_labels(LabelMap{10, 10, 3, std::vector<int>(100, 0)}, dir / "small.pgm");
  const auto mismatch = invoke({"evaluate", "--pred", (dir / "small.pgm").string(), "--gt",
                                (dir / "gt.pgm").string(), "--out", (dir / "bad").string()});
  CHECK(mismatch.code == cli::kEvaluationMismatch);
  CHECK(empty_or_missing(dir / "bad"));
}

TEST_CASE("phantom, decompose, correct and segment commands chain through files") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke({"phantom", "--np", "5", "--bl", "20", "--out", (dir / "ph").string()}).code ==
          cli::kSuccess);
  for (const char *name : {"corrupted.pgm", "clean.pgm", "bias.pgm", "gt_labels.pgm", "report.txt"})
    CHECK(fs::exists(dir / "ph" / name));

  const std::string input = (dir / "ph" / "corrupted.pgm").string();
  const std::string gt = (dir / "ph" / "gt_labels.pgm").string();
  REQUIRE(invoke({"decompose", "--input", input, "--out", (dir / "dec").string()}).code ==
          cli::kSuccess);
  CHECK(fs::exists(dir / "dec" / "cartoon.pgm"));
  CHECK(fs::exists(dir / "dec" / "texture.pgm"));

  REQUIRE(invoke({"correct", "--input", input, "--iters", "5", "--out", (dir / "cor").string()})
              .code == cli::kSuccess);
  CHECK(data_rows(dir / "cor" / "history.csv") == 5u);

  const auto seg = invoke({"segment", "--input", (dir / "cor" / "corrected.pgm").string(), "--gt",
                           gt, "--out", (dir / "seg").string()});
  REQUIRE(seg.code == cli::kSuccess);
  CHECK(fs::exists(dir / "seg" / "labels.pgm"));
  CHECK(fs::exists(dir / "seg" / "metrics.csv"));

  CHECK(invoke({"segment", "--out", (dir / "none").string()}).code == cli::kInputError);
}

TEST_CASE("pipeline on files reproduces the phantom pipeline") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke({"phantom", "--np", "7", "--bl", "20", "--seed", "2", "--out",
                  (dir / "ph").string()})
              .code == cli::kSuccess);
  const auto run = invoke({"pipeline", "--input", (dir / "ph" / "corrupted.pgm").string(),
                           "--gt", (dir / "ph" / "gt_labels.pgm").string(), "--out",
                           (dir / "run").string()});
  REQUIRE(run.code == cli::kSuccess);
  for (const auto &row : csv_rows(dir / "run" / "metrics.csv"))
    CHECK(std::stod(row[4]) > 0.85);
}

TEST_CASE("a single-cell matrix matches the pipeline command") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke(with({"matrix", "--np-list", "5", "--bl-list", "20", "--seeds", "2", "--mode",
                       "segmict2t", "--out", (dir / "m").string()},
                      kQuick))
              .code == cli::kSuccess);
  REQUIRE(invoke(with({"pipeline", "--np", "5", "--bl", "20", "--seed", "2", "--out",
                       (dir / "p").string()},
                      kQuick))
              .code == cli::kSuccess);
  const fs::path cell = dir / "m" / "cells" / "s2_np5_bl20" / "segmict2t";
  for (const char *name : {"history.csv", "labels.pgm", "metrics.csv"})
    CHECK(slurp(cell / name) == slurp(dir / "p" / name));
  CHECK(data_rows(dir / "m" / "aggregate.csv") == 3u);
}

TEST_CASE("matrix medians agree with a recomputation from the aggregate") {
  testing::ScratchDir dir("cli");
  REQUIRE(invoke(with({"matrix", "--np-list", "5,9", "--bl-list", "0,40", "--seeds", "1",
                       "--out", (dir / "m").string()},
                      kQuick))
              .code == cli::kSuccess);
  const auto aggregate = csv_rows(dir / "m" / "aggregate.csv");
  CHECK(aggregate.size() == 4u * 2u * 3u);

  std::map<std::pair<std::string, std::string>, std::vector<double>> dice;
  for (const auto &row : aggregate)
    dice[{row[3], row[4]}].push_back(std::stod(row[8]));
  const auto medians = csv_rows(dir / "m" / "medians.csv");
  CHECK(medians.size() == 6u);
  for (const auto &row : medians) {
    auto values = dice.at({row[0], row[1]});
    REQUIRE(values.size() == 4u);
    std::sort(values.begin(), values.end());
    const double expected = 0.5 * (values[1] + values[2]);
    CHECK(std::stoul(row[2]) == 4u);
    CHECK(std::abs(std::stod(row[6]) - expected) <= 1.5e-6);
  }
}

TEST_CASE("matrix keeps going past a failing cell") {
  testing::ScratchDir dir("cli");
  const auto run = invoke(with({"matrix", "--np-list", "5", "--bl-list", "0", "--seeds", "1",
                                "--mu", "1e308", "--out", (dir / "m").string()},
                               kQuick));
  CHECK(run.code == cli::kDivergence);
  // the MICO cell forces mu = 0 and still succeeds
  CHECK(data_rows(dir / "m" / "aggregate.csv") == 3u);
  CHECK(run.err.find("cell failed") != std::string::npos);
}
