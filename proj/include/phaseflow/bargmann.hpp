#pragma once

// One-dimensional Bargmann transform on uniform grids.
//
//   (Tf)(x, xi) = c int exp(-(x-y)^2/2) exp(i xi (x-y)) f(y) dy
//   (T*v)(y)    = c int int exp(-(x-y)^2/2) exp(i xi (y-x)) v(x, xi) dx dxi
//
// with c = 2^{-1/2} pi^{-3/4}, both integrals by the trapezoid rule.

#include <string>
#include <vector>

#include "phaseflow/grid.hpp"

namespace phaseflow {

using Warnings = std::vector<std::string>;

inline constexpr double kBoundaryMassLimit = 1e-6;
inline constexpr double kSignalEdgeWarning = 1e-12;
inline constexpr double kFieldEdgeWarning = 1e-10;

/// 2^{-1/2} pi^{-3/4}.
double bargmann_constant();

/// Fast convolution per xi-row, OpenMP over rows. Throws BoundaryMass when
/// more than 1e-6 of the squared norm sits on the outer samples; appends a
/// warning to `warnings` (if given) when the edge exceeds 1e-12 of the peak.
PhaseField bargmann_forward(const Signal& f, Warnings* warnings = nullptr);

/// Direct quadrature reference for bargmann_forward (serial).
PhaseField bargmann_forward_direct(const Signal& f);

/// Row-wise fast convolution, rows summed in a fixed order. Throws
/// BoundaryMass like the forward transform; warns when |v| on the outer rows
/// or columns exceeds 1e-10 of the peak.
Signal bargmann_inverse(const PhaseField& v, Warnings* warnings = nullptr);

/// Direct quadrature reference for bargmann_inverse (serial).
Signal bargmann_inverse_direct(const PhaseField& v);

struct CrResidual {
  PhaseField field;   // i d_xi v - (d_x - i xi) v
  double sup_norm = 0.0;
  double rel_norm = 0.0;  // |field| / |(d_x - i xi) v|, 0 when both vanish
};

/// Spectral derivatives in x and xi with two-thirds de-aliasing.
CrResidual cr_residual(const PhaseField& v);

/// pi^{-1/4} exp(-(z-y)^2/2) exp(i eta (z-y)) sampled on the x-grid. Throws
/// OutOfWindow unless |y| + 4 <= L and |eta| + 4 <= Xi.
Signal coherent_state(double y, double eta, const GridSpec& grid);

/// T T* applied to the discrete delta at grid node (j, m): one column of the
/// reproducing kernel.
PhaseField reproducing_column(const GridSpec& grid, std::size_t j, std::size_t m);

/// Closed form of that column: (2 pi)^{-1} exp(-(x-y)^2/4) exp(-(xi-eta)^2/4)
/// exp(i (x-y)(xi+eta)/2).
Complex reproducing_kernel(double x, double xi, double y, double eta);

}  // namespace phaseflow
