#pragma once

#include <cstddef>
#include <vector>

namespace phaseflow {

/// A point (x, xi) of phase space R^n x R^n.
struct PhasePoint {
  std::vector<double> x;
  std::vector<double> xi;

  PhasePoint() = default;
  PhasePoint(std::vector<double> x_, std::vector<double> xi_)
      : x(std::move(x_)), xi(std::move(xi_)) {}
  /// One-dimensional convenience form.
  PhasePoint(double x1, double xi1) : x{x1}, xi{xi1} {}

  std::size_t dim() const { return x.size(); }
  bool finite() const;

  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

/// l1 distance |x - y| + |xi - eta| summed over coordinates.
double l1_distance(const PhasePoint& a, const PhasePoint& b);
/// Euclidean distance in R^{2n}.
double euclidean_distance(const PhasePoint& a, const PhasePoint& b);

}  // namespace phaseflow
