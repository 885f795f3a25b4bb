#pragma once

// Phase-space kernel of T S(t,s) T*, its decay away from the flow image, the
// K_q kernel of T q^w T*, transport along characteristics, and the two
// estimates built from them.

#include <functional>
#include <optional>
#include <vector>

#include "phaseflow/bargmann.hpp"
#include "phaseflow/hamilton.hpp"
#include "phaseflow/quantize.hpp"
#include "phaseflow/symclass.hpp"

namespace phaseflow {

struct KernelSlice {
  GridSpec grid;
  PhasePoint source{0.0, 0.0};
  double s = 0.0;
  double t = 0.0;
  PhaseField values;
  PhasePoint flow_image{0.0, 0.0};
};

/// K(t, ., ., s, y, eta) = T S(t,s) T* delta_(y,eta), computed as
/// 2^{-1/2} pi^{-1/2} T S(t,s) coherent_state(y, eta). Throws OutOfWindow
/// when the source or any point of its trajectory lacks 4 units of margin.
KernelSlice phase_kernel_slice(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                               const PhasePoint& source, double s, double t, const GridSpec& grid,
                               int nsteps, const StepControl& flow_step = {});

/// Grid node with the largest |K|.
PhasePoint slice_peak(const KernelSlice& slice);

struct FitOptions {
  std::size_t bins = 40;
  double threshold = 1e-10;  // relative to the peak modulus
  std::size_t min_samples = 50;
  double min_decades = 1.0;  // of (1 + d)
  /// Fit only shells with d >= d_min + tail_fraction (d_max - d_min).
  double tail_fraction = 0.0;
};

struct DecayFit {
  double fitted_constant = 0.0;  // C in |K| ~ C (1 + d)^{-N}
  double fitted_exponent = 0.0;  // N hat
  std::vector<double> sample_distances;  // d of each shell maximum used
  std::vector<double> shell_maxima;
  /// RMS misfit of log10 |K| divided by max(1, decades spanned by the shell
  /// maxima), i.e. misfit per decade of dynamic range.
  double residual = 0.0;
  double rms_misfit = 0.0;  // log10 units
  double decades = 0.0;
  std::size_t usable_samples = 0;
};

/// l1 phase distance d = |x - x^t| + |xi - xi^t| to slice.flow_image; binned
/// shell maxima fitted by least squares in log-log. Throws
/// InsufficientDecadeRange when fewer than min_samples samples clear the
/// threshold or (1 + d) spans less than min_decades.
DecayFit decay_fit(const KernelSlice& slice, const FitOptions& options = {});

struct KqQuad {
  double h = 0.05;      // trapezoid step in z and eta
  double width = 8.0;   // half-width of the window around the midpoints
};

struct KqProbe {
  PhasePoint left{0.0, 0.0};   // (x, xi)
  PhasePoint right{0.0, 0.0};  // (x1, xi1)
};

/// (2 pi^2)^{-1} e^{i(x+x1)(xi-xi1)/2} int int e^{-(xi+xi1-2 eta)^2/4}
/// e^{-(x+x1-2z)^2/4} q(z, eta) e^{i eta (x-x1)} e^{-iz(xi-xi1)} dz deta,
/// with q evaluated at time t. Throws WindowTooSmall when the integrand on
/// the window edge exceeds 1e-12 of its peak.
std::vector<Complex> kq_kernel(const SymbolExpr& q, const std::vector<KqProbe>& probes,
                               const KqQuad& quad = {}, double t = 0.0);

/// q = a(t, .) - a(t, base) - grad a(t, base) . ((x, xi) - base).
SymbolExpr linearization_residual(const SymbolExpr& a, double t, const PhasePoint& base);

/// Kernel of T q^w T* between phase points X and Y computed through the
/// Weyl matrix on `grid`; q = q_re + i q_im. Reference for kq_kernel.
Complex weyl_route_kernel(const SymbolExpr& q_re, const std::optional<SymbolExpr>& q_im,
                          double t, const PhasePoint& X, const PhasePoint& Y, const GridSpec& grid);

using PhaseFunction = std::function<Complex(const PhasePoint&)>;

struct TransportSolution {
  std::vector<PhasePoint> seeds;
  std::vector<double> times;
  std::vector<std::vector<Complex>> values;         // [seed][time]
  std::vector<std::vector<double>> growth_factors;  // e^{int_s^t b}
  std::vector<std::vector<double>> forcing_integral;  // int_s^t |f|
  /// max over seeds and times of |v| / (e^M (|v0| + int |f|)), when M given.
  std::optional<double> envelope_ratio;
};

/// RK4 along each characteristic of
///   v' = (-i (a - xi a_xi) + b) v + i f,
/// co-integrated with the flow, log e^{int b} and int |f|.
TransportSolution transport_solve(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                                  const PhaseFunction& v0, const std::optional<SymbolExpr>& f,
                                  const std::vector<PhasePoint>& seeds, double s, double t_end,
                                  double h = 1e-3, std::optional<double> M = std::nullopt);

struct FtcQuad {
  std::size_t radial = 2000;   // Simpson panels in r (or x for n = 1)
  std::size_t angular = 256;   // trapezoid nodes in theta for n = 2
};

struct FtcResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // 0 when both sides vanish
};

/// lhs = int_{|x|<=R} |q|, rhs = R^{n+1} int_{|x|<=R} |x|^{1-n} |Hess q|
/// (spectral norm), n in {1, 2}. Throws BasePointNotCritical unless q(0)
/// and grad q(0) vanish to 1e-10.
FtcResult ftc_lemma_ratio(const SymbolExpr& q, double R, int n, const FtcQuad& quad = {});

/// v(t, x, xi) for the E-operator probe.
using PhaseHistory = std::function<Complex(double t, const PhasePoint& z)>;
/// Builds the history attached to one seed from that seed's trajectory.
using HistoryFactory = std::function<PhaseHistory(const Trajectory&)>;

/// v(t) = reproducing kernel centered at the seed's flow image (moving) or
/// at the seed itself (stationary).
HistoryFactory gaussian_history(bool moving);

/// Linear interpolation in t between slices, bilinear in (x, xi); zero
/// outside the slice grids.
HistoryFactory slice_history(std::vector<KernelSlice> slices);

struct EOperatorOptions {
  std::size_t time_samples = 9;  // trapezoid nodes on [s, t_end], at least 8
  double s = 0.0;
  double t_end = 1.0;
  StepControl flow_step{};
};

struct EOperatorResult {
  double lhs_estimate = 0.0;  // max over seeds of int |Ev(t, x^t, xi^t)| dt
  double rhs_bound = 0.0;     // max over seeds of sqrt(k0 k4N) sup_t int w |v|
  double ratio = 0.0;         // lhs / rhs, 0 when both vanish
  std::vector<double> lhs_per_seed;
  std::vector<double> rhs_per_seed;
  double weighted_integral = 0.0;  // max over seeds of sup_t int w |v|
};

/// Ev = T q^w T* v with q = a - a_lin + i (b - b(base)) linearized at the
/// trajectory point, evaluated there; the weight is
/// (1 + |x^t - x| + |xi^t - xi|)^{2n+3-2N} on a grid centered at (x^t, xi^t).
/// Throws MissingConstant when kappa_0 or kappa_{4N} is absent from report.
EOperatorResult e_operator_bound(const SymbolExpr& a, const std::optional<SymbolExpr>& b, int N,
                                 const std::vector<PhasePoint>& seeds, const GridSpec& grid,
                                 const SymbolClassReport& report, const HistoryFactory& history,
                                 const EOperatorOptions& options = {});

}  // namespace phaseflow
