#include "segmict/admm.hpp"
#include "segmict/simplex_qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <limits>

namespace segmict::admm {

void SolverConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("SolverConfig: epsilon must lie in (0,1)");
  if (!(rho > 0.0))
    throw std::invalid_argument("SolverConfig: rho must be positive");
  if (!(mu >= 0.0))
    throw std::invalid_argument("SolverConfig: mu must be nonnegative");
  if (max_iter < 1)
    throw std::invalid_argument("SolverConfig: max_iter must be at least 1");
  if (n_classes < 2 || n_classes > 8)
    throw std::invalid_argument("SolverConfig: n_classes must be in [2,8]");
  if (basis_order < 0)
    throw std::invalid_argument("SolverConfig: basis_order must be nonnegative");
}

SolverConfig SolverConfig::paper() { return {}; }

SolverConfig SolverConfig::theory() {
  SolverConfig config;
  config.epsilon = 0.1;
  config.mu = 1e-2;
  config.rho = rho_lower_bound(config.mu, config.epsilon, 0.0) + 1.0;
  return config;
}

Eigen::VectorXd as_vector(const PixelGrid &grid) {
  return Eigen::Map<const Eigen::VectorXd>(grid.values().data(),
                                           static_cast<Eigen::Index>(grid.size()));
}

Eigen::VectorXd compute_gamma(const Eigen::VectorXd &vbar, double epsilon) {
  Eigen::VectorXd gamma(vbar.size());
  for (Eigen::Index p = 0; p < vbar.size(); ++p) {
    const double inverse =
        vbar(p) == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / vbar(p);
    gamma(p) = std::clamp(inverse, epsilon, 1.0 / epsilon);
  }
  return gamma;
}

double penalty(const Eigen::VectorXd &v, const Eigen::VectorXd &vbar,
               const Eigen::VectorXd &gamma, double mu) {
  double sum = 0.0;
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    const double d = v(p) - vbar(p);
    sum += 0.5 * v(p) * v(p) + 0.5 * mu * gamma(p) * d * d;
  }
  return sum;
}

Eigen::VectorXd penalty_gradient(const Eigen::VectorXd &v, const Eigen::VectorXd &vbar,
                                 const Eigen::VectorXd &gamma, double mu) {
  return v + mu * gamma.cwiseProduct(v - vbar);
}

Eigen::VectorXd constraint_map(const Membership &u, const Eigen::VectorXd &c,
                               const Eigen::VectorXd &w, const BasisSet &basis,
                               const Eigen::VectorXd &ibar) {
  const Eigen::VectorXd bias = basis.matrix() * w;
  const Eigen::VectorXd tissue = u * c;
  return bias.cwiseProduct(tissue) - ibar;
}

Membership update_u(const AdmmState &state, const BasisSet &basis, const Eigen::VectorXd &ibar) {
  const Eigen::VectorXd bias = basis.matrix() * state.w;
  const auto n = static_cast<std::size_t>(state.c.size());
  Membership out(state.u.rows(), state.u.cols());
  std::vector<double> m(n);
  for (Eigen::Index p = 0; p < out.rows(); ++p) {
    for (std::size_t i = 0; i < n; ++i)
      m[i] = bias(p) * state.c(static_cast<Eigen::Index>(i));
    const double l = state.v(p) - ibar(p) + state.zeta(p);
    const std::span<const double> previous(state.u.row(p).data(), n);
    const auto row = solve_simplex_affine_square(m, l, previous);
    for (std::size_t i = 0; i < n; ++i)
      out(p, static_cast<Eigen::Index>(i)) = row[i];
  }
  return out;
}

namespace {

// Solves H x = g. On a (numerically) singular H falls back to the ridge
// (H + tau I) x = g + tau x_prev, which leaves x_prev untouched along the
// null space of H.
LeastSquaresUpdate solve_guarded(const Eigen::MatrixXd &H, const Eigen::VectorXd &g,
                                 const Eigen::VectorXd &previous) {
  constexpr double singular_ratio = 1e-12;
  constexpr double ridge = 1e-10;

  LeastSquaresUpdate out;
  const double max_diag = H.diagonal().maxCoeff();
  out.degenerate_components.resize(static_cast<std::size_t>(H.rows()));
  for (Eigen::Index j = 0; j < H.rows(); ++j)
    out.degenerate_components[static_cast<std::size_t>(j)] =
        !(H(j, j) > singular_ratio * max_diag) || max_diag <= 0.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  const auto &lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  out.degenerate = !(largest > 0.0) || lambda.minCoeff() <= singular_ratio * largest;

  if (!out.degenerate) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    out.x = ldlt.solve(g);
    out.x += ldlt.solve(g - H * out.x);
    return out;
  }
  const Eigen::MatrixXd &V = eig.eigenvectors();
  const Eigen::VectorXd rhs = V.transpose() * (g - H * previous);
  Eigen::VectorXd step(rhs.size());
  for (Eigen::Index i = 0; i < rhs.size(); ++i)
    step(i) = rhs(i) / (std::max(lambda(i), 0.0) + ridge);
  out.x = previous + V * step;
  return out;
}

} // namespace

LeastSquaresUpdate update_c(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar) {
  const Eigen::VectorXd bias = basis.matrix() * state.w;
  const Eigen::Index n = state.c.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index p = 0; p < state.u.rows(); ++p) {
    const double target = ibar(p) - state.v(p) - state.zeta(p);
    const double b = bias(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a_i = b * state.u(p, i);
      g(i) += a_i * target;
      for (Eigen::Index j = 0; j <= i; ++j)
        H(i, j) += a_i * b * state.u(p, j);
    }
  }
  H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
  return solve_guarded(H, g, state.c);
}

LeastSquaresUpdate update_w(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar) {
  const Eigen::VectorXd tissue = state.u * state.c;
  const Eigen::MatrixXd B = tissue.asDiagonal() * basis.matrix();
  const Eigen::VectorXd target = ibar - state.v - state.zeta;
  const Eigen::MatrixXd H = B.transpose() * B;
  const Eigen::VectorXd g = B.transpose() * target;
  return solve_guarded(H, g, state.w);
}

Eigen::VectorXd update_v(const AdmmState &state, const BasisSet &basis,
                         const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                         const SolverConfig &config) {
  const Eigen::VectorXd z =
      constraint_map(state.u, state.c, state.w, basis, ibar) + state.zeta;
  Eigen::VectorXd v(z.size());
  for (Eigen::Index p = 0; p < z.size(); ++p) {
    const double weight = config.mu * state.gamma(p);
    v(p) = (weight * vbar(p) - config.rho * z(p)) / (1.0 + weight + config.rho);
  }
  return v;
}

Eigen::VectorXd update_multipliers(const AdmmState &state, const BasisSet &basis,
                                   const Eigen::VectorXd &ibar) {
  return state.zeta + constraint_map(state.u, state.c, state.w, basis, ibar) + state.v;
}

double augmented_lagrangian(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                            const SolverConfig &config) {
  const Eigen::VectorXd residual =
      constraint_map(state.u, state.c, state.w, basis, ibar) + state.v;
  double coupling = 0.0;
  double quadratic = 0.0;
  for (Eigen::Index p = 0; p < residual.size(); ++p) {
    coupling += state.zeta(p) * residual(p);
    quadratic += residual(p) * residual(p);
  }
  return penalty(state.v, vbar, state.gamma, config.mu) + config.rho * coupling +
         0.5 * config.rho * quadratic;
}

double augmented_lagrangian_difference(const AdmmState &a, const AdmmState &b,
                                       const BasisSet &basis, const Eigen::VectorXd &ibar,
                                       const Eigen::VectorXd &vbar, const SolverConfig &config) {
  const Eigen::VectorXd model_a = constraint_map(a.u, a.c, a.w, basis, ibar);
  const Eigen::VectorXd model_b = constraint_map(b.u, b.c, b.w, basis, ibar);
  const double rho = config.rho;
  double sum = 0.0;
  for (Eigen::Index p = 0; p < ibar.size(); ++p) {
    const double dv = a.v(p) - b.v(p);
    const double ra = model_a(p) + a.v(p);
    const double rb = model_b(p) + b.v(p);
    const double dr = (model_a(p) - model_b(p)) + dv;
    const double penalty_change =
        0.5 * dv * (a.v(p) + b.v(p)) +
        0.5 * config.mu * a.gamma(p) * dv * (a.v(p) + b.v(p) - 2.0 * vbar(p));
    const double coupling_change = rho * ((a.zeta(p) - b.zeta(p)) * ra + b.zeta(p) * dr);
    const double quadratic_change = 0.5 * rho * dr * (ra + rb);
    sum += penalty_change + coupling_change + quadratic_change;
  }
  return sum;
}

double rho_lower_bound(double mu, double epsilon, double delta) {
  const double ratio = 1.0 + mu / epsilon;
  return 4.0 * (ratio * ratio + delta) - 1.0 - mu * epsilon;
}

namespace {

double relative_gap(double measured, double predicted) {
  const double gap = std::abs(measured - predicted);
  const double scale = std::max(std::abs(measured), std::abs(predicted));
  return scale > 0.0 ? gap / scale : 0.0;
}

} // namespace

StepCheck check_v_decrease(const AdmmState &before, const AdmmState &after,
                           const BasisSet &basis, const Eigen::VectorXd &ibar,
                           const Eigen::VectorXd &vbar, const SolverConfig &config) {
  StepCheck check;
  check.measured = augmented_lagrangian_difference(before, after, basis, ibar, vbar, config);
  double predicted = 0.0;
  for (Eigen::Index p = 0; p < before.v.size(); ++p) {
    const double dv = after.v(p) - before.v(p);
    predicted += (1.0 + config.rho + config.mu * before.gamma(p)) * dv * dv;
  }
  check.predicted = 0.5 * predicted;
  check.relative_error = relative_gap(check.measured, check.predicted);
  return check;
}

StepCheck check_multiplier_increase(const AdmmState &before, const AdmmState &after,
                                    const BasisSet &basis, const Eigen::VectorXd &ibar,
                                    const Eigen::VectorXd &vbar, const SolverConfig &config) {
  StepCheck check;
  check.measured = augmented_lagrangian_difference(after, before, basis, ibar, vbar, config);
  check.predicted = config.rho * (after.zeta - before.zeta).squaredNorm();
  check.relative_error = relative_gap(check.measured, check.predicted);
  return check;
}

AdmmState initialize(const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                     const BasisSet &basis, const SolverConfig &config) {
  config.validate();
  const Eigen::Index pixels = ibar.size();
  if (vbar.size() != pixels || basis.pixels() != pixels)
    throw std::invalid_argument("admm::initialize: image, texture and basis sizes differ");

  const Eigen::Index n = config.n_classes;
  AdmmState state;
  state.c.resize(n);
  if (n == 3) {
    state.c << 0.33, 0.66, 0.99;
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      state.c(i) = 0.99 * static_cast<double>(i + 1) / static_cast<double>(n);
  }
  state.u = Membership::Zero(pixels, n);
  for (Eigen::Index p = 0; p < pixels; ++p) {
    Eigen::Index label = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ibar(p) <= state.c(i)) {
        label = i;
        break;
      }
    }
    state.u(p, label) = 1.0;
  }
  state.w = unit_bias_coefficients(basis);
  state.v = Eigen::VectorXd::Zero(pixels);
  state.zeta = Eigen::VectorXd::Zero(pixels);
  state.gamma = compute_gamma(vbar, config.epsilon);
  state.degeneracy.classes.assign(static_cast<std::size_t>(n), false);
  return state;
}

Eigen::VectorXd tissue_image(const AdmmState &state) { return state.u * state.c; }

namespace {

bool finite_state(const AdmmState &state) {
  return state.u.allFinite() && state.c.allFinite() && state.w.allFinite() &&
         state.v.allFinite() && state.zeta.allFinite();
}

} // namespace

void iterate(AdmmState &state, const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
             const SolverConfig &config, const BasisSet &basis,
             const IterationObserver &observer) {
  config.validate();
  Eigen::VectorXd reconstruction =
      (basis.matrix() * state.w).cwiseProduct(tissue_image(state));
  IterationRecord last;
  last.iter = state.iter;

  for (int k = 0; k < config.max_iter; ++k) {
    const Eigen::VectorXd previous_zeta = state.zeta;
    state.u = update_u(state, basis, ibar);

    auto c_step = update_c(state, basis, ibar);
    state.c = std::move(c_step.x);
    if (c_step.degenerate)
      ++state.degeneracy.c_events;
    for (std::size_t i = 0; i < c_step.degenerate_components.size(); ++i)
      if (c_step.degenerate_components[i])
        state.degeneracy.classes[i] = true;

    auto w_step = update_w(state, basis, ibar);
    state.w = std::move(w_step.x);
    if (w_step.degenerate)
      ++state.degeneracy.w_events;

    if (observer) {
      const AdmmState before_v = state;
      state.v = update_v(state, basis, ibar, vbar, config);
      const AdmmState after_v = state;
      state.zeta = update_multipliers(state, basis, ibar);
      observer({before_v, after_v, state});
    } else {
      state.v = update_v(state, basis, ibar, vbar, config);
      state.zeta = update_multipliers(state, basis, ibar);
    }
    ++state.iter;
    if (!finite_state(state))
      throw SolverDivergence("non-finite iterate at iteration " + std::to_string(state.iter),
                             last);

    if (config.history) {
      const Eigen::VectorXd bias = basis.matrix() * state.w;
      const Eigen::VectorXd next = bias.cwiseProduct(tissue_image(state));
      const Eigen::VectorXd residual =
          constraint_map(state.u, state.c, state.w, basis, ibar) + state.v;
      IterationRecord record;
      record.iter = state.iter;
      record.objective = penalty(state.v, vbar, state.gamma, config.mu);
      record.aug_lagrangian = augmented_lagrangian(state, basis, ibar, vbar, config);
      record.constraint_residual = residual.norm();
      record.image_change = (next - reconstruction).norm();
      record.multiplier_change = config.rho * (state.zeta - previous_zeta).norm();
      reconstruction = next;
      state.history.push_back(record);
      last = record;
    }
  }
}

void write_history_csv(const std::vector<IterationRecord> &history, std::ostream &out) {
  out << "iter,objective,aug_lagrangian,constraint_residual,image_change,multiplier_change\n";
  char line[256];
  for (const auto &r : history) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.objective,
                  r.aug_lagrangian, r.constraint_residual, r.image_change, r.multiplier_change);
    out << line;
  }
}

RunResult run(const PixelGrid &ibar, const PixelGrid &vbar, const SolverConfig &config,
              const BasisSet &basis, const IterationObserver &observer) {
  if (!ibar.same_shape(vbar) || ibar.width() != basis.width() ||
      ibar.height() != basis.height())
    throw std::invalid_argument("admm::run: image, texture and basis shapes differ");
  const Eigen::VectorXd ibar_vec = as_vector(ibar);
  const Eigen::VectorXd vbar_vec = as_vector(vbar);
  RunResult result{initialize(ibar_vec, vbar_vec, basis, config), {}, {}};
  iterate(result.state, ibar_vec, vbar_vec, config, basis, observer);

  const Eigen::VectorXd tissue = tissue_image(result.state);
  std::vector<double> corrected(tissue.begin(), tissue.end());
  for (auto &value : corrected)
    value = std::clamp(value, 0.0, 1.0);
  result.corrected = PixelGrid(ibar.width(), ibar.height(), std::move(corrected));
  result.bias = eval_bias(basis, result.state.w);
  return result;
}

} // namespace segmict::admm
