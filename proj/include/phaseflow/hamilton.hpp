#pragma once

// Bicharacteristics of x' = a_xi, xi' = -a_x and the variational system
// for their Jacobian.

#include <Eigen/Dense>
#include <vector>

#include "phaseflow/phase_point.hpp"
#include "phaseflow/symbol.hpp"

namespace phaseflow {

struct StepControl {
  double h = 1e-3;
  /// When positive, h is halved until two successive endpoints differ by
  /// less than tol in the sup norm.
  double tol = 0.0;
  /// Coordinates beyond this magnitude raise BlowupDetected.
  double blowup = 1e8;
  int max_refinements = 16;
};

/// Times are monotone in the direction of integration; times[0] == s.
struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  PhasePoint seed;
  double s = 0.0;

  const PhasePoint& end() const { return points.back(); }
};

struct JacobianFlow {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  /// d(x^t, xi^t)/d(x^0, xi^0), 2n x 2n, ordered (x, xi).
  std::vector<Eigen::MatrixXd> jac;
  /// Trapezoid integral of the spectral norm of A from s to times[k].
  std::vector<double> a_norm_integral;
};

struct BilipschitzReport {
  double lip_forward = 0.0;
  double lip_inverse = 0.0;
  double gronwall_margin = 0.0;
  double max_det_defect = 0.0;  // max |det jac - 1|
};

/// Hamiltonian vector field of `a` with derivatives prepared once.
class HamiltonField {
 public:
  explicit HamiltonField(const SymbolExpr& a, bool with_second = false);

  int dim() const { return dim_; }
  /// Writes (a_xi, -a_x) at (t, z) into dz; z and dz are packed (x, xi).
  void velocity(double t, const double* z, double* dz) const;
  /// The block matrix A = [[a_xi x, a_xi xi], [-a_xx, -a_x xi]].
  Eigen::MatrixXd variational_matrix(double t, const double* z) const;

 private:
  int dim_;
  std::vector<SymbolExpr> grad_x_;
  std::vector<SymbolExpr> grad_xi_;
  std::vector<SymbolExpr> second_;  // (2n)^2 entries of the Hessian, row major
  bool with_second_;
};

/// Classical RK4 on a uniform grid from s to t_end (either direction).
Trajectory integrate_flow(const SymbolExpr& a, const PhasePoint& seed, double s, double t_end,
                          const StepControl& step = {});

/// RK4 on the coupled system (z, J) with J' = A J, J(s) = I.
JacobianFlow variational_flow(const SymbolExpr& a, const PhasePoint& seed, double s,
                              double t_end, const StepControl& step = {});

/// Runs variational_flow per seed (OpenMP over seeds) and aggregates.
BilipschitzReport bilipschitz_report(const SymbolExpr& a, const std::vector<PhasePoint>& seeds,
                                     double s, double t_end, const StepControl& step = {});
/// Serial reference for bilipschitz_report.
BilipschitzReport bilipschitz_report_serial(const SymbolExpr& a,
                                            const std::vector<PhasePoint>& seeds, double s,
                                            double t_end, const StepControl& step = {});

/// Flow of every seed (OpenMP over seeds, results in seed order).
std::vector<Trajectory> integrate_ensemble(const SymbolExpr& a,
                                           const std::vector<PhasePoint>& seeds, double s,
                                           double t_end, const StepControl& step = {});

/// Spectral norm (largest singular value).
double spectral_norm(const Eigen::MatrixXd& m);

/// Number of uniform RK4 steps used for [s, t_end] at nominal step h.
std::size_t step_count(double s, double t_end, double h);

}  // namespace phaseflow
