#include "segmict/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace segmict {

namespace {

// Projects `point` onto the affine set {u_i = 0 for i outside `support`,
// sum u = 1, m^T u = target}. Returns false when that set is empty or the
// projection leaves the nonnegative orthant.
bool project_on_support(std::span<const double> m, double target, std::span<const double> point,
                        unsigned support, double tol, std::vector<double> &out) {
  const std::size_t n = m.size();
  double count = 0.0;
  double sum_m = 0.0;
  double sum_mm = 0.0;
  double sum_u = 0.0;
  double sum_mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(support & (1u << i)))
      continue;
    count += 1.0;
    sum_m += m[i];
    sum_mm += m[i] * m[i];
    sum_u += point[i];
    sum_mu += m[i] * point[i];
  }
  const double mean_m = sum_m / count;
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (support & (1u << i))
      spread += (m[i] - mean_m) * (m[i] - mean_m);

  const double r_sum = 1.0 - sum_u;
  const double r_target = target - sum_mu;
  double a = 0.0;
  double b = 0.0;
  if (spread <= tol * tol) {
    // m is constant on the support: m^T u = mean_m for every feasible u
    if (std::abs(mean_m - target) > tol)
      return false;
    a = r_sum / count;
  } else {
    const double det = count * sum_mm - sum_m * sum_m;
    a = (sum_mm * r_sum - sum_m * r_target) / det;
    b = (count * r_target - sum_m * r_sum) / det;
  }

  out.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(support & (1u << i)))
      continue;
    const double value = point[i] + a + b * m[i];
    if (value < -tol)
      return false;
    out[i] = std::max(value, 0.0);
  }
  return true;
}

} // namespace

std::vector<double> project_onto_simplex_slice(std::span<const double> m, double target,
                                               std::span<const double> point) {
  const std::size_t n = m.size();
  if (n == 0 || n > 16 || point.size() != n)
    throw std::invalid_argument("project_onto_simplex_slice: need 1..16 classes");
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double scale = std::max({1.0, std::abs(*lo), std::abs(*hi), std::abs(target)});
  const double tol = 1e-12 * scale;
  if (target < *lo - tol || target > *hi + tol)
    return {};

  std::vector<double> best;
  std::vector<double> candidate;
  double best_distance = std::numeric_limits<double>::infinity();
  for (unsigned support = 1; support < (1u << n); ++support) {
    if (!project_on_support(m, target, point, support, tol, candidate))
      continue;
    double distance = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      distance += (candidate[i] - point[i]) * (candidate[i] - point[i]);
    if (distance < best_distance) {
      best_distance = distance;
      best = candidate;
    }
  }
  if (best.empty()) {
    // numerically marginal slice: fall back to the edge between the extreme
    // entries of m, which always contains a point with m^T u = target
    const auto i_lo = static_cast<std::size_t>(lo - m.begin());
    const auto i_hi = static_cast<std::size_t>(hi - m.begin());
    best.assign(n, 0.0);
    if (i_lo == i_hi) {
      best[i_lo] = 1.0;
    } else {
      const double theta = std::clamp((target - *lo) / (*hi - *lo), 0.0, 1.0);
      best[i_hi] = theta;
      best[i_lo] = 1.0 - theta;
    }
    return best;
  }

  double total = 0.0;
  for (const double value : best)
    total += value;
  for (auto &value : best)
    value /= total;
  return best;
}

std::vector<double> solve_simplex_affine_square(std::span<const double> m, double l,
                                                std::span<const double> previous) {
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  if (*hi - *lo <= 1e-15 * std::max(1.0, std::abs(*hi)))
    return {previous.begin(), previous.end()};
  const double target = std::clamp(-l, *lo, *hi);
  return project_onto_simplex_slice(m, target, previous);
}

} // namespace segmict
