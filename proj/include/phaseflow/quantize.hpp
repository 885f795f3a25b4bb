#pragma once

// Weyl quantization on the periodic x-grid and Crank-Nicolson propagation of
//   (D_t + a^w + i b^w) u = 0,   D_t = -i d/dt,
// i.e. du/dt = -i a^w u + b^w u.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "phaseflow/bargmann.hpp"
#include "phaseflow/grid.hpp"
#include "phaseflow/symbol.hpp"

namespace phaseflow {

inline constexpr const char* kSignConvention = "D_t = -i d/dt";
inline constexpr double kSymmetryDefectWarning = 1e-6;

struct OperatorMatrix {
  GridSpec grid;
  Eigen::MatrixXcd entries;
  double symmetry_defect = 0.0;  // |A - A^H|_F / |A|_F before symmetrization

  Signal apply(const Signal& u) const;
};

/// W_jk = (1/Nx) sum_m exp(i k_m (x_j - x_k)) q(t, (x_j + x_k)/2, k_m) with
/// k_m = 2 pi m / (Nx dx), m = -Nx/2 .. Nx/2 - 1, the frequencies the grid
/// resolves. One inverse FFT per midpoint, OpenMP over midpoints. The result
/// is averaged with its adjoint; a warning is appended when the defect
/// before averaging exceeds 1e-6.
OperatorMatrix weyl_matrix(const SymbolExpr& q, double t, const GridSpec& grid,
                           Warnings* warnings = nullptr);

/// Direct-sum reference for weyl_matrix (serial).
OperatorMatrix weyl_matrix_direct(const SymbolExpr& q, double t, const GridSpec& grid);

/// Frequency sample k_m of the Weyl matrix, m in [0, Nx) mapped to -Nx/2 + m.
double weyl_frequency(const GridSpec& grid, std::size_t m);

struct PropagatorTrace {
  std::vector<double> times;
  std::vector<Signal> states;
  std::vector<double> norms;
};

/// Crank-Nicolson: (I + dt/2 H) u_{k+1} = (I - dt/2 H) u_k, H = i a^w - b^w,
/// with the operators frozen at the step midpoint. Time-independent symbols
/// are assembled and factored once. Throws SolveFailure for a singular step
/// matrix and BoundaryMass when a state reaches the window edge (edge/peak
/// above 1e-6).
PropagatorTrace propagate(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                          const Signal& u0, double s, double t_end, int nsteps);

}  // namespace phaseflow
