#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace phaseflow {

using Complex = std::complex<double>;

/// Uniform grids: x_j = -L + j*dx on [-L, L) with dx = 2L/Nx, and
/// xi_m = -Xi + m*dxi on [-Xi, Xi) with dxi = 2Xi/Nxi.
struct GridSpec {
  double L = 12.0;
  std::size_t Nx = 256;
  double Xi = 12.0;
  std::size_t Nxi = 256;

  /// Throws Error(kInvalidArgument) unless L, Xi > 0, Nx, Nxi >= 8 and Nx is
  /// a power of two.
  void validate() const;

  double dx() const { return 2.0 * L / static_cast<double>(Nx); }
  double dxi() const { return 2.0 * Xi / static_cast<double>(Nxi); }
  double x(std::size_t j) const { return -L + static_cast<double>(j) * dx(); }
  double xi(std::size_t m) const { return -Xi + static_cast<double>(m) * dxi(); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Samples of a function on the x-grid.
struct Signal {
  GridSpec grid;
  std::vector<Complex> values;

  Signal() = default;
  explicit Signal(const GridSpec& g) : grid(g), values(g.Nx) {}

  double norm() const;
};

/// Trapezoid inner product <f, g> = dx * sum conj(f) g.
Complex inner_product(const Signal& f, const Signal& g);

/// Samples of a phase-space function; stored xi-row major, so row m holds
/// v(x_0..x_{Nx-1}, xi_m).
struct PhaseField {
  GridSpec grid;
  std::vector<Complex> values;

  PhaseField() = default;
  explicit PhaseField(const GridSpec& g) : grid(g), values(g.Nx * g.Nxi) {}

  Complex& at(std::size_t j, std::size_t m) { return values[m * grid.Nx + j]; }
  const Complex& at(std::size_t j, std::size_t m) const { return values[m * grid.Nx + j]; }

  double norm() const;
  double sup_norm() const;
};

/// Fraction of the squared norm carried by the outermost `width` samples on
/// either side. 0 for the zero signal.
double boundary_mass(const Signal& f, std::size_t width = 4);

/// Largest modulus among the outermost `width` samples on either side,
/// relative to the peak modulus. 0 for the zero signal.
double edge_ratio(const Signal& f, std::size_t width = 4);

/// Same two measures for a phase field, over the outer `width` rows and
/// columns together.
double boundary_mass(const PhaseField& v, std::size_t width = 4);
double edge_ratio(const PhaseField& v, std::size_t width = 4);

}  // namespace phaseflow
