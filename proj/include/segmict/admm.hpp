#pragma once

#include "segmict/image.hpp"
#include "segmict/legendre_basis.hpp"

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace segmict::admm {

/// P x N fuzzy memberships, one simplex row per pixel.
using Membership = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SolverConfig {
  double mu = 1e-2;
  double epsilon = 1e-13;
  double rho = 10.0;
  int n_classes = 3;
  int basis_order = 3;
  int max_iter = 30;
  bool history = true;

  void validate() const;

  /// mu = 1e-2, epsilon = 1e-13, rho = 10, 30 iterations.
  static SolverConfig paper();
  /// epsilon = 0.1, mu = 1e-2 and rho one above rho_lower_bound(mu, epsilon, 0),
  /// the regime where the augmented Lagrangian provably decreases.
  static SolverConfig theory();
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;           ///< g(v^k)
  double aug_lagrangian = 0.0;      ///< L_rho(x^k, v^k, lambda^k)
  double constraint_residual = 0.0; ///< ||M(x^k) + v^k||
  double image_change = 0.0;        ///< ||b^k J^k - b^{k-1} J^{k-1}||
  double multiplier_change = 0.0;   ///< rho ||zeta^k - zeta^{k-1}||
};

struct Degeneracy {
  int c_events = 0; ///< iterations where the c normal equations were singular
  int w_events = 0;
  std::vector<bool> classes; ///< classes whose column of A vanished at least once
};

struct AdmmState {
  Membership u;
  Eigen::VectorXd c;
  Eigen::VectorXd w;
  Eigen::VectorXd v;
  Eigen::VectorXd zeta; ///< scaled multipliers lambda / rho
  Eigen::VectorXd gamma;
  int iter = 0;
  std::vector<IterationRecord> history;
  Degeneracy degeneracy;

  Eigen::Index pixels() const { return v.size(); }
};

/// Result of a ridge-guarded normal-equation solve.
struct LeastSquaresUpdate {
  Eigen::VectorXd x;
  bool degenerate = false;
  std::vector<bool> degenerate_components;
};

class SolverDivergence : public std::runtime_error {
public:
  SolverDivergence(const std::string &what, IterationRecord last)
      : std::runtime_error(what), last_(last) {}
  const IterationRecord &last_record() const { return last_; }

private:
  IterationRecord last_;
};

Eigen::VectorXd as_vector(const PixelGrid &grid);

/// gamma_p = mid{eps, 1/vbar_p, 1/eps}, with 1/0 read as +infinity.
Eigen::VectorXd compute_gamma(const Eigen::VectorXd &vbar, double epsilon);

/// g(v) = 1/2 ||v||^2 + mu/2 ||v - vbar||^2_Gamma.
double penalty(const Eigen::VectorXd &v, const Eigen::VectorXd &vbar,
               const Eigen::VectorXd &gamma, double mu);
Eigen::VectorXd penalty_gradient(const Eigen::VectorXd &v, const Eigen::VectorXd &vbar,
                                 const Eigen::VectorXd &gamma, double mu);

/// M(x)_p = (w^T G_p)(c^T u_p) - ibar_p.
Eigen::VectorXd constraint_map(const Membership &u, const Eigen::VectorXd &c,
                               const Eigen::VectorXd &w, const BasisSet &basis,
                               const Eigen::VectorXd &ibar);

/// Per-pixel exact minimizer of (m_p^T u_p + l_p)^2 over the simplex,
/// m_p = (w^T G_p) c, l_p = v_p - ibar_p + zeta_p. Ties resolve to the
/// minimizer nearest the current u_p.
Membership update_u(const AdmmState &state, const BasisSet &basis, const Eigen::VectorXd &ibar);

/// argmin_c ||A c + v - ibar + zeta||, rows A_p = (w^T G_p) u_p^T.
LeastSquaresUpdate update_c(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar);

/// argmin_w ||B w + v - ibar + zeta||, rows B_p = (c^T u_p) G_p^T.
LeastSquaresUpdate update_w(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar);

/// v_p = (mu gamma_p vbar_p - rho z_p) / (1 + mu gamma_p + rho),
/// z_p = M(x)_p + zeta_p.
Eigen::VectorXd update_v(const AdmmState &state, const BasisSet &basis,
                         const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                         const SolverConfig &config);

/// zeta + M(x) + v.
Eigen::VectorXd update_multipliers(const AdmmState &state, const BasisSet &basis,
                                   const Eigen::VectorXd &ibar);

/// g(v) + <rho zeta, M(x)+v> + rho/2 ||M(x)+v||^2 (memberships assumed on
/// the simplex, so the indicator term is zero).
double augmented_lagrangian(const AdmmState &state, const BasisSet &basis,
                            const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                            const SolverConfig &config);

/// L(a) - L(b) accumulated per pixel in factored form, so that small steps
/// are not lost to cancellation between two large Lagrangian values.
double augmented_lagrangian_difference(const AdmmState &a, const AdmmState &b,
                                       const BasisSet &basis, const Eigen::VectorXd &ibar,
                                       const Eigen::VectorXd &vbar, const SolverConfig &config);

/// 4((1 + mu/eps)^2 + delta) - 1 - mu eps.
double rho_lower_bound(double mu, double epsilon, double delta);

struct StepCheck {
  double measured = 0.0;  ///< change of L evaluated from its definition
  double predicted = 0.0; ///< closed-form value
  double relative_error = 0.0;
};

/// Around the v update: measured drop L(before) - L(after) against
/// 1/2 ||dv||^2_S with S = (1 + rho) I + mu Gamma.
StepCheck check_v_decrease(const AdmmState &before, const AdmmState &after,
                           const BasisSet &basis, const Eigen::VectorXd &ibar,
                           const Eigen::VectorXd &vbar, const SolverConfig &config);

/// Around the multiplier update: measured rise L(after) - L(before) against
/// rho ||dzeta||^2.
StepCheck check_multiplier_increase(const AdmmState &before, const AdmmState &after,
                                    const BasisSet &basis, const Eigen::VectorXd &ibar,
                                    const Eigen::VectorXd &vbar, const SolverConfig &config);

/// Initial iterate: evenly spaced class means (0.33, 0.66, 0.99 for three
/// classes), hard memberships by thresholding ibar at those means, unit bias,
/// v = zeta = 0.
AdmmState initialize(const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
                     const BasisSet &basis, const SolverConfig &config);

/// Snapshots taken inside one iteration, for diagnostics.
struct IterationSnapshots {
  const AdmmState &before_v;
  const AdmmState &after_v;
  const AdmmState &after_multipliers;
};
using IterationObserver = std::function<void(const IterationSnapshots &)>;

struct RunResult {
  AdmmState state;
  PixelGrid corrected; ///< c^T u_p clamped to [0,1]
  PixelGrid bias;      ///< w^T G_p
};

/// Runs config.max_iter iterations of u -> c -> w -> v -> zeta.
/// Throws SolverDivergence when an iterate turns non-finite.
RunResult run(const PixelGrid &ibar, const PixelGrid &vbar, const SolverConfig &config,
              const BasisSet &basis, const IterationObserver &observer = {});

/// Continues from an existing state for config.max_iter more iterations.
void iterate(AdmmState &state, const Eigen::VectorXd &ibar, const Eigen::VectorXd &vbar,
             const SolverConfig &config, const BasisSet &basis,
             const IterationObserver &observer = {});

/// Header iter,objective,aug_lagrangian,constraint_residual,image_change,
/// multiplier_change, then one row per record with "%.17g" values.
void write_history_csv(const std::vector<IterationRecord> &history, std::ostream &out);

/// Unclamped c^T u_p.
Eigen::VectorXd tissue_image(const AdmmState &state);

} // namespace segmict::admm
