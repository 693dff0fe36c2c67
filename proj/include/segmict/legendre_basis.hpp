#pragma once

#include "segmict/image.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace segmict {

/// Legendre polynomial P_degree(t) via the three-term recurrence.
double legendre(int degree, double t);

/// Smooth basis images g^1..g^M for the bias field, stored as the columns of
/// a P x M matrix so that row p is the per-pixel vector G_p.
class BasisSet {
public:
  BasisSet(int width, int height, Eigen::MatrixXd images,
           std::vector<std::pair<int, int>> degrees = {});

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return static_cast<int>(images_.cols()); }
  Eigen::Index pixels() const { return images_.rows(); }

  const Eigen::MatrixXd &matrix() const { return images_; }
  PixelGrid image(int j) const;

  /// (x-degree, y-degree) of each basis image, empty for custom bases.
  const std::vector<std::pair<int, int>> &degrees() const { return degrees_; }

  /// G_p; throws std::out_of_range for p >= P.
  Eigen::VectorXd vector_at(Eigen::Index p) const;

private:
  int width_;
  int height_;
  Eigen::MatrixXd images_;
  std::vector<std::pair<int, int>> degrees_;
};

/// All products P_i(x)P_j(y) with i + j <= order, x and y mapped per axis to
/// [-1,1]. Ordered by total degree, then by ascending x-degree.
/// M = (order+1)(order+2)/2.
BasisSet build_legendre_basis(int width, int height, int order);

/// b_p = w^T G_p. Throws std::invalid_argument on length mismatch.
PixelGrid eval_bias(const BasisSet &basis, const Eigen::VectorXd &w);

/// Coefficients reproducing the constant field 1 (g^1 is the constant image).
Eigen::VectorXd unit_bias_coefficients(const BasisSet &basis);

} // namespace segmict
