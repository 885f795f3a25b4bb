#include "phaseflow/hamilton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "phaseflow/error.hpp"
#include "phaseflow/parallel.hpp"

namespace phaseflow {

namespace {

std::string point_str(const PhasePoint& p) {
  std::string s = "(";
  for (double v : p.x) s += std::to_string(v) + ",";
  for (std::size_t i = 0; i < p.xi.size(); ++i)
    s += std::to_string(p.xi[i]) + (i + 1 < p.xi.size() ? "," : "");
  return s + ")";
}

using Rhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;

void rk4_step(const Rhs& f, double t, double h, std::vector<double>& y, std::vector<double>& k1,
              std::vector<double>& k2, std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
  const std::size_t n = y.size();
  f(t, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  f(t + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  f(t + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  f(t + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i)
    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Uniform RK4 from s to t_end; `observe` sees every stored state.
void run_rk4(const Rhs& f, std::vector<double> y, double s, double t_end, double h_nominal,
             std::size_t guarded, double blowup,
             const std::function<void(double, const std::vector<double>&)>& observe) {
  const std::size_t steps = step_count(s, t_end, h_nominal);
  const double h = steps == 0 ? 0.0 : (t_end - s) / static_cast<double>(steps);
  std::vector<double> k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
  observe(s, y);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = s + static_cast<double>(k) * h;
    rk4_step(f, t, h, y, k1, k2, k3, k4, tmp);
    for (std::size_t i = 0; i < guarded; ++i) {
      if (!std::isfinite(y[i]) || std::abs(y[i]) > blowup)
        throw Error(ErrorKind::kBlowupDetected,
                    "flow left the bound " + std::to_string(blowup) + " at t = " +
                        std::to_string(t + h));
    }
    observe(k + 1 == steps ? t_end : s + static_cast<double>(k + 1) * h, y);
  }
}

std::vector<double> pack(const PhasePoint& p) {
  std::vector<double> z(p.x);
  z.insert(z.end(), p.xi.begin(), p.xi.end());
  return z;
}

PhasePoint unpack(const std::vector<double>& z, int n) {
  PhasePoint p;
  p.x.assign(z.begin(), z.begin() + n);
  p.xi.assign(z.begin() + n, z.begin() + 2 * n);
  return p;
}

void check_inputs(const SymbolExpr& a, const PhasePoint& seed, const StepControl& step) {
  if (static_cast<int>(seed.x.size()) != a.dim() || static_cast<int>(seed.xi.size()) != a.dim())
    throw Error(ErrorKind::kDimensionMismatch, "seed dimension does not match the symbol");
  if (!seed.finite()) throw Error(ErrorKind::kInvalidArgument, "seed is not finite");
  if (!(step.h > 0.0)) throw Error(ErrorKind::kInvalidArgument, "step h must be positive");
}

double sup_diff(const PhasePoint& a, const PhasePoint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) d = std::max(d, std::abs(a.x[i] - b.x[i]));
  for (std::size_t i = 0; i < a.xi.size(); ++i) d = std::max(d, std::abs(a.xi[i] - b.xi[i]));
  return d;
}

Trajectory integrate_fixed(const HamiltonField& field, const PhasePoint& seed, double s,
                           double t_end, double h, double blowup) {
  const int n = field.dim();
  Trajectory tr;
  tr.seed = seed;
  tr.s = s;
  Rhs f = [&](double t, const std::vector<double>& z, std::vector<double>& dz) {
    field.velocity(t, z.data(), dz.data());
  };
  run_rk4(f, pack(seed), s, t_end, h, static_cast<std::size_t>(2 * n), blowup,
          [&](double t, const std::vector<double>& z) {
            tr.times.push_back(t);
            tr.points.push_back(unpack(z, n));
          });
  return tr;
}

JacobianFlow variational_fixed(const HamiltonField& field, const PhasePoint& seed, double s,
                               double t_end, double h, double blowup) {
  const int n = field.dim();
  const int m = 2 * n;
  JacobianFlow out;
  Rhs f = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    field.velocity(t, y.data(), dy.data());
    const Eigen::MatrixXd a = field.variational_matrix(t, y.data());
    Eigen::Map<const Eigen::MatrixXd> jac(y.data() + m, m, m);
    Eigen::Map<Eigen::MatrixXd> djac(dy.data() + m, m, m);
    djac.noalias() = a * jac;
  };
  std::vector<double> y = pack(seed);
  y.resize(static_cast<std::size_t>(m + m * m), 0.0);
  for (int i = 0; i < m; ++i) y[static_cast<std::size_t>(m + i * m + i)] = 1.0;

  double prev_t = s;
  double prev_norm = 0.0;
  run_rk4(f, y, s, t_end, h, static_cast<std::size_t>(m), blowup,
          [&](double t, const std::vector<double>& state) {
            const double norm_a = spectral_norm(field.variational_matrix(t, state.data()));
            const double integral =
                out.times.empty()
                    ? 0.0
                    : out.a_norm_integral.back() + 0.5 * std::abs(t - prev_t) * (norm_a + prev_norm);
            out.times.push_back(t);
            out.points.push_back(unpack(state, n));
            out.jac.emplace_back(Eigen::Map<const Eigen::MatrixXd>(state.data() + m, m, m));
            out.a_norm_integral.push_back(integral);
            prev_t = t;
            prev_norm = norm_a;
          });
  return out;
}

template <class Run>
auto refine(const StepControl& step, Run run) {
  auto result = run(step.h);
  if (step.tol <= 0.0) return result;
  double h = step.h;
  for (int k = 0; k < step.max_refinements; ++k) {
    h *= 0.5;
    auto finer = run(h);
    const double d = sup_diff(result.points.back(), finer.points.back());
    result = std::move(finer);
    if (d < step.tol) break;
  }
  return result;
}

}  // namespace

HamiltonField::HamiltonField(const SymbolExpr& a, bool with_second)
    : dim_(a.dim()), with_second_(with_second) {
  const int n = dim_;
  for (int i = 0; i < n; ++i) {
    grad_x_.push_back(derivative(a, 1 + i));
    grad_xi_.push_back(derivative(a, 1 + n + i));
  }
  if (with_second) {
    // Hessian over packed (x, xi).
    std::vector<SymbolExpr> first;
    first.insert(first.end(), grad_x_.begin(), grad_x_.end());
    first.insert(first.end(), grad_xi_.begin(), grad_xi_.end());
    for (int r = 0; r < 2 * n; ++r)
      for (int c = 0; c < 2 * n; ++c) second_.push_back(derivative(first[static_cast<std::size_t>(r)], 1 + c));
  }
}

void HamiltonField::velocity(double t, const double* z, double* dz) const {
  const int n = dim_;
  double vars[64];
  std::vector<double> heap;
  double* v = vars;
  if (2 * n + 1 > 64) {
    heap.resize(static_cast<std::size_t>(2 * n + 1));
    v = heap.data();
  }
  v[0] = t;
  for (int i = 0; i < 2 * n; ++i) v[1 + i] = z[i];
  const std::span<const double> span(v, static_cast<std::size_t>(2 * n + 1));
  for (int i = 0; i < n; ++i) {
    dz[i] = grad_xi_[static_cast<std::size_t>(i)].evaluate(span);
    dz[n + i] = -grad_x_[static_cast<std::size_t>(i)].evaluate(span);
  }
}

Eigen::MatrixXd HamiltonField::variational_matrix(double t, const double* z) const {
  if (!with_second_)
    throw Error(ErrorKind::kInvalidArgument, "field was built without second derivatives");
  const int n = dim_;
  const int m = 2 * n;
  std::vector<double> v(static_cast<std::size_t>(m + 1));
  v[0] = t;
  for (int i = 0; i < m; ++i) v[static_cast<std::size_t>(1 + i)] = z[i];
  Eigen::MatrixXd hess(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      hess(r, c) = second_[static_cast<std::size_t>(r * m + c)].evaluate(v);
  // Rows of A: d/d(x,xi) of a_xi, then of -a_x.
  Eigen::MatrixXd a(m, m);
  a.topRows(n) = hess.bottomRows(n);
  a.bottomRows(n) = -hess.topRows(n);
  return a;
}

std::size_t step_count(double s, double t_end, double h) {
  const double span = std::abs(t_end - s);
  if (span == 0.0) return 0;
  const double raw = span / h;
  const double n = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  return static_cast<std::size_t>(std::max(1.0, n));
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

Trajectory integrate_flow(const SymbolExpr& a, const PhasePoint& seed, double s, double t_end,
                          const StepControl& step) {
  check_inputs(a, seed, step);
  const HamiltonField field(a);
  return refine(step, [&](double h) {
    return integrate_fixed(field, seed, s, t_end, h, step.blowup);
  });
}

JacobianFlow variational_flow(const SymbolExpr& a, const PhasePoint& seed, double s,
                              double t_end, const StepControl& step) {
  check_inputs(a, seed, step);
  const HamiltonField field(a, true);
  return refine(step, [&](double h) {
    return variational_fixed(field, seed, s, t_end, h, step.blowup);
  });
}

namespace {

BilipschitzReport summarize(const JacobianFlow& flow) {
  BilipschitzReport r;
  for (std::size_t k = 0; k < flow.jac.size(); ++k) {
    const Eigen::MatrixXd& j = flow.jac[k];
    r.lip_forward = std::max(r.lip_forward, spectral_norm(j));
    r.lip_inverse = std::max(r.lip_inverse, spectral_norm(j.inverse()));
    r.gronwall_margin =
        std::max(r.gronwall_margin, spectral_norm(j) / std::exp(flow.a_norm_integral[k]));
    r.max_det_defect = std::max(r.max_det_defect, std::abs(j.determinant() - 1.0));
  }
  return r;
}

BilipschitzReport merge(const std::vector<BilipschitzReport>& parts) {
  BilipschitzReport r;
  for (const auto& p : parts) {
    r.lip_forward = std::max(r.lip_forward, p.lip_forward);
    r.lip_inverse = std::max(r.lip_inverse, p.lip_inverse);
    r.gronwall_margin = std::max(r.gronwall_margin, p.gronwall_margin);
    r.max_det_defect = std::max(r.max_det_defect, p.max_det_defect);
  }
  return r;
}

BilipschitzReport one_seed(const SymbolExpr& a, const PhasePoint& seed, double s, double t_end,
                           const StepControl& step) {
  try {
    return summarize(variational_flow(a, seed, s, t_end, step));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " [seed " + point_str(seed) + "]");
  }
}

}  // namespace

BilipschitzReport bilipschitz_report(const SymbolExpr& a, const std::vector<PhasePoint>& seeds,
                                     double s, double t_end, const StepControl& step) {
  if (seeds.empty()) throw Error(ErrorKind::kInvalidArgument, "seed ensemble is empty");
  std::vector<BilipschitzReport> parts(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { parts[i] = one_seed(a, seeds[i], s, t_end, step); });
  return merge(parts);
}

BilipschitzReport bilipschitz_report_serial(const SymbolExpr& a,
                                            const std::vector<PhasePoint>& seeds, double s,
                                            double t_end, const StepControl& step) {
  if (seeds.empty()) throw Error(ErrorKind::kInvalidArgument, "seed ensemble is empty");
  std::vector<BilipschitzReport> parts;
  for (const auto& seed : seeds) parts.push_back(one_seed(a, seed, s, t_end, step));
  return merge(parts);
}

std::vector<Trajectory> integrate_ensemble(const SymbolExpr& a,
                                           const std::vector<PhasePoint>& seeds, double s,
                                           double t_end, const StepControl& step) {
  std::vector<Trajectory> out(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    try {
      out[i] = integrate_flow(a, seeds[i], s, t_end, step);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [seed " + point_str(seeds[i]) + "]");
    }
  });
  return out;
}

}  // namespace phaseflow
