#pragma once

// Symbol-class constants measured along the Hamilton flow. Suprema over phase
// space are replaced by maxima over a finite seed (or ray) grid, so every
// constant here is a grid lower bound for the true supremum.

#include <map>
#include <optional>
#include <vector>

#include "phaseflow/hamilton.hpp"
#include "phaseflow/symbol.hpp"

namespace phaseflow {

/// Flow grid used for time integrals along bicharacteristics: RK4 with step h
/// on [t0, t1], trapezoid rule on the same nodes.
struct QuadControl {
  double h = 1e-3;
  double t0 = 0.0;
  double t1 = 1.0;
};

struct SymbolClassReport {
  int order_cap = 0;
  std::map<MultiIndex, double> c_a;  // 2 <= |alpha|+|beta| <= order_cap
  std::map<MultiIndex, double> c_b;  // 1 <= |alpha|+|beta| <= order_cap
  std::optional<double> kappa0;
  std::map<int, double> kappaN;  // N = 2..order_cap
  std::optional<double> M;
  std::map<double, double> omega;
  std::optional<double> mizohata;
  std::optional<double> smallness_margin;
};

/// c^a, c^b, kappa_0 and kappa_N. OpenMP over seeds.
SymbolClassReport kappa_constants(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                                  int order_cap, const std::vector<PhasePoint>& seeds,
                                  const QuadControl& quad = {});

/// Trapezoid cumulative integral of q(t, z(t)) over the stored trajectory.
std::vector<double> cumulative_along(const SymbolExpr& q, const Trajectory& tr);

/// max over k of (B[k] - min_{i <= k} B[i]); 0 for an empty or decreasing B.
double max_interval_gain(const std::vector<double>& cumulative);

/// sup over seeds and t0 <= t1 of the integral of b along the flow of a.
double growth_constant_M(const SymbolExpr& b, const SymbolExpr& a,
                         const std::vector<PhasePoint>& seeds, const QuadControl& quad = {});

/// omega(h) = sup over seeds, t0 of the integral over [t0, t0+h] of the
/// largest second-order derivative modulus of a along the flow.
std::map<double, double> equiintegrability_modulus(const SymbolExpr& a,
                                                   const std::vector<double>& h_list,
                                                   const std::vector<PhasePoint>& seeds,
                                                   const QuadControl& quad = {});

struct RayGrid {
  std::vector<std::vector<double>> bases;
  std::vector<std::vector<double>> directions;  // normalized internally
  std::vector<double> radii;
};

/// sup over the ray grid of |integral_0^R b1(x + r w) . w dr|, trapezoid
/// rule with step dr. `b1` holds one expression in x per coordinate.
double mizohata_constant(const std::vector<SymbolExpr>& b1, const RayGrid& rays, double dr = 1e-3);

struct SmallnessResult {
  double margin = 0.0;
  bool satisfied = false;
};

inline constexpr double kDefaultSmallnessThreshold = 0.1;

/// margin = exp(2M) * kappa_0 * kappa_{4N}. Throws MissingConstant when any
/// ingredient was not computed.
SmallnessResult smallness_check(const SymbolClassReport& report, int N,
                                double threshold = kDefaultSmallnessThreshold);

}  // namespace phaseflow
