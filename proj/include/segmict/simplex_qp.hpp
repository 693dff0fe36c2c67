#pragma once

#include <span>
#include <vector>

namespace segmict {

/// Exact solver for min over the standard simplex of (m^T u + l)^2.
///
/// The optimal value of m^T u is t* = clamp(-l, min m, max m). Among all
/// minimizers (a slice of the simplex), the one closest to `previous` in the
/// Euclidean norm is returned, found by enumerating the supports of u. When
/// all entries of m coincide every point of the simplex is optimal and
/// `previous` is returned unchanged.
///
/// Enumeration is exponential in m.size(); intended for a handful of classes.
std::vector<double> solve_simplex_affine_square(std::span<const double> m, double l,
                                                std::span<const double> previous);

/// Euclidean projection of `point` onto {u >= 0, sum u = 1} ∩ {m^T u = target}.
/// Returns an empty vector when the slice is empty.
std::vector<double> project_onto_simplex_slice(std::span<const double> m, double target,
                                               std::span<const double> point);

} // namespace segmict
