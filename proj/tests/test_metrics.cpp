#include "doctest.h"
#include "support.hpp"

#include "segmict/metrics.hpp"

#include <sstream>

using namespace segmict;

namespace {

std::vector<bool> first_n(std::size_t n, std::size_t total) {
  std::vector<bool> out(total, false);
  for (std::size_t p = 0; p < n; ++p)
    out[p] = true;
  return out;
}

// Balanced 3-class map on a w x 3 grid, one class per row.
LabelMap striped(int width, int shift) {
  LabelMap map{width, 3, 3, std::vector<int>(static_cast<std::size_t>(width) * 3)};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < width; ++x)
      map.labels[static_cast<std::size_t>(y * width + x)] = (y + shift) % 3;
  return map;
}

} // namespace

TEST_CASE("confusion examples") {
  const auto all = ForegroundMask::all(100, 1);
  const auto gt = first_n(40, 100);
  CHECK(confusion(gt, gt, all) == ConfusionCounts{40, 0, 60, 0});
  CHECK(confusion(std::vector<bool>(100, false), gt, all) == ConfusionCounts{0, 0, 60, 40});
  CHECK_THROWS_AS(confusion(gt, first_n(1, 99), all), EvaluationMismatch);
}

TEST_CASE("confusion matches per-pixel enumeration") {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> pred(10), gt(10);
    ForegroundMask mask = ForegroundMask::all(10, 1);
    for (std::size_t p = 0; p < 10; ++p) {
      pred[p] = rng() % 2;
      gt[p] = rng() % 2;
      mask.flags[p] = rng() % 4 != 0;
    }
    ConfusionCounts expected;
    for (std::size_t p = 0; p < 10; ++p) {
      if (!mask.flags[p])
        continue;
      expected.tp += pred[p] && gt[p];
      expected.fp += pred[p] && !gt[p];
      expected.fn += !pred[p] && gt[p];
      expected.tn += !pred[p] && !gt[p];
    }
    const ConfusionCounts counts = confusion(pred, gt, mask);
    CHECK(counts == expected);
    CHECK(counts.total() == mask.count());
  }
}

TEST_CASE("metric formulas") {
  const ConfusionCounts c{8, 2, 88, 2};
  CHECK(*jaccard(c) == doctest::Approx(8.0 / 12.0));
  CHECK(*dice(c) == 0.8);
  CHECK(*sensitivity(c) == 0.8);
  CHECK(*specificity(c) == doctest::Approx(88.0 / 96.0));
  CHECK(*specificity_conventional(c) == doctest::Approx(88.0 / 90.0));

  const ConfusionCounts perfect{30, 0, 70, 0};
  CHECK(*jaccard(perfect) == 1.0);
  CHECK(*dice(perfect) == 1.0);
  CHECK(*sensitivity(perfect) == 1.0);
}

TEST_CASE("zero denominators are undefined, not zero") {
  const ConfusionCounts empty{0, 0, 10, 0};
  CHECK_FALSE(jaccard(empty).has_value());
  CHECK_FALSE(dice(empty).has_value());
  CHECK_FALSE(sensitivity(empty).has_value());
  CHECK(*specificity(empty) == 1.0);
  CHECK_FALSE(specificity(ConfusionCounts{}).has_value());
  CHECK(format_metric(std::nullopt) == "NA");
  CHECK(format_metric(0.5) == "0.500000");
}

TEST_CASE("dice and jaccard are related by 2j/(1+j)") {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 500; ++trial) {
    const ConfusionCounts c{1 + rng() % 1000, rng() % 1000, rng() % 1000, rng() % 1000};
    const double j = *jaccard(c);
    const double d = *dice(c);
    CHECK(std::abs(d - 2.0 * j / (1.0 + j)) <= 1e-12);
    CHECK(d >= j);
    CHECK(d <= 1.0);
    CHECK(*sensitivity(c) <= 1.0);
    CHECK(*specificity(c) <= 1.0);
  }
}

TEST_CASE("a new true positive never lowers the overlap metrics") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCounts c{rng() % 50, rng() % 50, rng() % 50, 1 + rng() % 50};
    const ConfusionCounts more{c.tp + 1, c.fp, c.tn, c.fn};
    if (jaccard(c)) {
      CHECK(*jaccard(more) >= *jaccard(c));
      CHECK(*dice(more) >= *dice(c));
    }
    CHECK(*sensitivity(more) >= *sensitivity(c));
  }
}

TEST_CASE("dice is symmetric in prediction and truth") {
  std::mt19937_64 rng(84);
  const auto all = ForegroundMask::all(64, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> a(64), b(64);
    for (std::size_t p = 0; p < 64; ++p) {
      a[p] = rng() % 3 == 0;
      b[p] = rng() % 2 == 0;
    }
    const auto ab = dice(confusion(a, b, all));
    const auto ba = dice(confusion(b, a, all));
    REQUIRE(ab.has_value() == ba.has_value());
    if (ab)
      CHECK(*ab == *ba);
  }
}

TEST_CASE("evaluate on identical maps scores 1 everywhere") {
  const LabelMap map = striped(7, 0);
  const MetricsReport report = evaluate(map, map, map.foreground());
  REQUIRE(report.rois.size() == 3u);
  CHECK(report.rois[0].roi == "CSF");
  CHECK(report.rois[2].roi == "WM");
  for (const auto &roi : report.rois) {
    CHECK(*roi.jaccard == 1.0);
    CHECK(*roi.dice == 1.0);
    CHECK(*roi.sensitivity == 1.0);
    CHECK(*roi.specificity_conventional == 1.0);
    // tn / (tn + tp) on a balanced map
    CHECK(*roi.specificity == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("evaluate on cyclically permuted labels has zero sensitivity") {
  const LabelMap gt = striped(7, 0);
  const LabelMap pred = striped(7, 1);
  for (const auto &roi : evaluate(pred, gt, gt.foreground()).rois)
    CHECK(*roi.sensitivity == 0.0);
}

TEST_CASE("evaluate rejects incompatible maps") {
  const LabelMap gt = striped(7, 0);
  LabelMap two = gt;
  two.n_classes = 2;
  CHECK_THROWS_AS(evaluate(two, gt, gt.foreground()), EvaluationMismatch);
  const LabelMap wider = striped(8, 0);
  CHECK_THROWS_AS(evaluate(wider, gt, gt.foreground()), EvaluationMismatch);
}

TEST_CASE("evaluate ignores pixels outside the evaluation mask") {
  LabelMap gt = striped(4, 0);
  LabelMap pred = gt;
  pred.labels[0] = 2;
  ForegroundMask mask = gt.foreground();
  mask.flags[0] = false;
  for (const auto &roi : evaluate(pred, gt, mask).rois)
    CHECK(*roi.dice == 1.0);
}

TEST_CASE("metrics CSV layout") {
  const LabelMap map = striped(2, 0);
  std::ostringstream csv;
  write_metrics_csv(evaluate(map, map, map.foreground()), csv);
  CHECK(csv.str() ==
        "roi,jaccard,sensitivity,specificity,dice,specificity_conventional,tp,fp,tn,fn\n"
        "CSF,1.000000,1.000000,0.666667,1.000000,1.000000,2,0,4,0\n"
        "GM,1.000000,1.000000,0.666667,1.000000,1.000000,2,0,4,0\n"
        "WM,1.000000,1.000000,0.666667,1.000000,1.000000,2,0,4,0\n");
}
