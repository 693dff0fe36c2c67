#include "segmict/legendre_basis.hpp"

#include <stdexcept>
#include <string>

namespace segmict {

double legendre(int degree, double t) {
  if (degree < 0)
    throw std::invalid_argument("legendre: negative degree");
  if (degree == 0)
    return 1.0;
  double previous = 1.0;
  double current = t;
  for (int k = 1; k < degree; ++k) {
    const double next = ((2.0 * k + 1.0) * t * current - k * previous) / (k + 1.0);
    previous = current;
    current = next;
  }
  return current;
}

BasisSet::BasisSet(int width, int height, Eigen::MatrixXd images,
                   std::vector<std::pair<int, int>> degrees)
    : width_(width), height_(height), images_(std::move(images)), degrees_(std::move(degrees)) {
  if (images_.rows() != static_cast<Eigen::Index>(width) * height)
    throw std::invalid_argument("BasisSet: image length does not match width*height");
  if (images_.cols() < 1)
    throw std::invalid_argument("BasisSet: empty basis");
}

PixelGrid BasisSet::image(int j) const {
  const auto column = images_.col(j);
  return PixelGrid(width_, height_, std::vector<double>(column.begin(), column.end()));
}

Eigen::VectorXd BasisSet::vector_at(Eigen::Index p) const {
  if (p < 0 || p >= images_.rows())
    throw std::out_of_range("BasisSet::vector_at: pixel index " + std::to_string(p) +
                            " out of range");
  return images_.row(p).transpose();
}

BasisSet build_legendre_basis(int width, int height, int order) {
  if (order < 0)
    throw std::invalid_argument("build_legendre_basis: order must be nonnegative");
  if (width < 2 || height < 2)
    throw std::invalid_argument("build_legendre_basis: grid must be at least 2x2");

  // 1D factor tables, one row per degree
  auto table = [order](int n) {
    Eigen::MatrixXd values(order + 1, n);
    for (int k = 0; k <= order; ++k)
      for (int i = 0; i < n; ++i)
        values(k, i) = legendre(k, -1.0 + 2.0 * i / (n - 1));
    return values;
  };
  const Eigen::MatrixXd px = table(width);
  const Eigen::MatrixXd py = table(height);

  std::vector<std::pair<int, int>> degrees;
  for (int total = 0; total <= order; ++total)
    for (int i = 0; i <= total; ++i)
      degrees.emplace_back(i, total - i);

  Eigen::MatrixXd images(static_cast<Eigen::Index>(width) * height,
                         static_cast<Eigen::Index>(degrees.size()));
  for (std::size_t j = 0; j < degrees.size(); ++j) {
    const auto [dx, dy] = degrees[j];
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        images(static_cast<Eigen::Index>(y) * width + x, static_cast<Eigen::Index>(j)) =
            px(dx, x) * py(dy, y);
  }
  return BasisSet(width, height, std::move(images), std::move(degrees));
}

PixelGrid eval_bias(const BasisSet &basis, const Eigen::VectorXd &w) {
  if (w.size() != basis.size())
    throw std::invalid_argument("eval_bias: coefficient length does not match basis size");
  const Eigen::VectorXd field = basis.matrix() * w;
  return PixelGrid(basis.width(), basis.height(),
                   std::vector<double>(field.begin(), field.end()));
}

Eigen::VectorXd unit_bias_coefficients(const BasisSet &basis) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(basis.size());
  w(0) = 1.0;
  return w;
}

} // namespace segmict
