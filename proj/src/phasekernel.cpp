#include "phaseflow/phasekernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include "phaseflow/error.hpp"
#include "phaseflow/parallel.hpp"

namespace phaseflow {

namespace {

using std::numbers::pi;

std::string point_text(const PhasePoint& p) {
  std::string s = "(";
  char buf[32];
  for (std::size_t i = 0; i < p.dim(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? ", " : "", p.x[i]);
    s += buf;
  }
  for (std::size_t i = 0; i < p.dim(); ++i) {
    std::snprintf(buf, sizeof buf, ", %.6g", p.xi[i]);
    s += buf;
  }
  return s + ")";
}

bool in_window(const PhasePoint& p, const GridSpec& g) {
  return p.dim() == 1 && std::abs(p.x[0]) + 4.0 <= g.L && std::abs(p.xi[0]) + 4.0 <= g.Xi;
}

void require_dim1(const SymbolExpr& e, const char* what) {
  if (e.dim() != 1) throw Error(ErrorKind::kDimensionMismatch, std::string(what) + " needs a 1D symbol");
}

// (T f)(x, xi) at one phase point, direct trapezoid quadrature.
Complex bargmann_at(const Signal& f, double x, double xi) {
  const GridSpec& g = f.grid;
  Complex s = 0.0;
  for (std::size_t l = 0; l < g.Nx; ++l) {
    const double d = x - g.x(l);
    s += std::exp(-0.5 * d * d) * std::polar(1.0, xi * d) * f.values[l];
  }
  return bargmann_constant() * g.dx() * s;
}

// Trapezoid-in-time sample nodes on [s, t_end] and the exact flow there.
Trajectory sampled_flow(const SymbolExpr& a, const PhasePoint& seed, double s, double t_end,
                        std::size_t samples, const StepControl& step) {
  Trajectory tr;
  tr.seed = seed;
  tr.s = s;
  tr.times.push_back(s);
  tr.points.push_back(seed);
  for (std::size_t k = 1; k < samples; ++k) {
    const double t1 = k + 1 == samples ? t_end
                                       : s + (t_end - s) * static_cast<double>(k) /
                                                 static_cast<double>(samples - 1);
    tr.points.push_back(integrate_flow(a, tr.points.back(), tr.times.back(), t1, step).end());
    tr.times.push_back(t1);
  }
  return tr;
}

PhasePoint center_at(const Trajectory& tr, double t) {
  const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t);
  if (it != tr.times.end() && *it == t) return tr.points[static_cast<std::size_t>(it - tr.times.begin())];
  if (it == tr.times.begin()) return tr.points.front();
  if (it == tr.times.end()) return tr.points.back();
  const std::size_t k = static_cast<std::size_t>(it - tr.times.begin());
  const double w = (t - tr.times[k - 1]) / (tr.times[k] - tr.times[k - 1]);
  return PhasePoint((1 - w) * tr.points[k - 1].x[0] + w * tr.points[k].x[0],
                    (1 - w) * tr.points[k - 1].xi[0] + w * tr.points[k].xi[0]);
}

Complex bilinear(const KernelSlice& s, const PhasePoint& z) {
  const GridSpec& g = s.grid;
  const double fx = (z.x[0] + g.L) / g.dx();
  const double fm = (z.xi[0] + g.Xi) / g.dxi();
  if (fx < 0.0 || fm < 0.0 || fx > static_cast<double>(g.Nx - 1) || fm > static_cast<double>(g.Nxi - 1))
    return 0.0;
  const auto j = std::min(static_cast<std::size_t>(fx), g.Nx - 2);
  const auto m = std::min(static_cast<std::size_t>(fm), g.Nxi - 2);
  const double wx = fx - static_cast<double>(j), wm = fm - static_cast<double>(m);
  return (1 - wx) * (1 - wm) * s.values.at(j, m) + wx * (1 - wm) * s.values.at(j + 1, m) +
         (1 - wx) * wm * s.values.at(j, m + 1) + wx * wm * s.values.at(j + 1, m + 1);
}

double safe_ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / den;
}

}  // namespace

KernelSlice phase_kernel_slice(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                               const PhasePoint& source, double s, double t, const GridSpec& grid,
                               int nsteps, const StepControl& flow_step) {
  grid.validate();
  require_dim1(a, "phase_kernel_slice");
  if (!in_window(source, grid))
    throw Error(ErrorKind::kOutOfWindow, "kernel source " + point_text(source) +
                                             " needs 4 units of margin inside the grid windows");
  KernelSlice slice;
  slice.grid = grid;
  slice.source = source;
  slice.s = s;
  slice.t = t;
  slice.flow_image = source;
  Signal u = coherent_state(source.x[0], source.xi[0], grid);
  if (t != s) {
    const auto tr = integrate_flow(a, source, s, t, flow_step);
    for (std::size_t k = 0; k < tr.points.size(); ++k)
      if (!in_window(tr.points[k], grid))
        throw Error(ErrorKind::kOutOfWindow, "flow of source " + point_text(source) +
                                                 " leaves the grid window at " +
                                                 point_text(tr.points[k]));
    slice.flow_image = tr.end();
    u = propagate(a, b, u, s, t, nsteps).states.back();
  }
  slice.values = bargmann_forward(u);
  const double scale = 1.0 / std::sqrt(2.0 * pi);  // T* delta = this times the coherent state
  for (auto& z : slice.values.values) z *= scale;
  return slice;
}

PhasePoint slice_peak(const KernelSlice& slice) {
  const GridSpec& g = slice.grid;
  std::size_t bj = 0, bm = 0;
  double best = -1.0;
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t j = 0; j < g.Nx; ++j) {
      const double v = std::abs(slice.values.at(j, m));
      if (v > best) best = v, bj = j, bm = m;
    }
  return PhasePoint(g.x(bj), g.xi(bm));
}

DecayFit decay_fit(const KernelSlice& slice, const FitOptions& options) {
  const GridSpec& g = slice.grid;
  if (options.bins < 2) throw Error(ErrorKind::kInvalidArgument, "decay fit needs at least 2 bins");
  const double peak = slice.values.sup_norm();
  struct Sample {
    double d, k;
  };
  std::vector<Sample> usable;
  const double x0 = slice.flow_image.x[0], xi0 = slice.flow_image.xi[0];
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t j = 0; j < g.Nx; ++j) {
      const double k = std::abs(slice.values.at(j, m));
      if (peak > 0.0 && k >= options.threshold * peak)
        usable.push_back({std::abs(g.x(j) - x0) + std::abs(g.xi(m) - xi0), k});
    }
  if (usable.size() < options.min_samples)
    throw Error(ErrorKind::kInsufficientDecadeRange,
                "decay fit: " + std::to_string(usable.size()) + " usable samples, need " +
                    std::to_string(options.min_samples));
  double d_min = INFINITY, d_max = 0.0;
  for (const auto& s : usable) d_min = std::min(d_min, s.d), d_max = std::max(d_max, s.d);
  const double span = std::log10((1.0 + d_max) / (1.0 + d_min));
  if (span < options.min_decades) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "decay fit: 1 + d spans %.3g decades, need %.3g", span,
                  options.min_decades);
    throw Error(ErrorKind::kInsufficientDecadeRange, buf);
  }

  const std::size_t nb = options.bins;
  std::vector<double> best(nb, -1.0), at(nb, 0.0);
  for (const auto& s : usable) {
    auto b = static_cast<std::size_t>((s.d - d_min) / (d_max - d_min) * static_cast<double>(nb));
    b = std::min(b, nb - 1);
    if (s.k > best[b]) best[b] = s.k, at[b] = s.d;
  }
  DecayFit fit;
  fit.usable_samples = usable.size();
  const double d_from = d_min + options.tail_fraction * (d_max - d_min);
  for (std::size_t b = 0; b < nb; ++b)
    if (best[b] > 0.0 && at[b] >= d_from) {
      fit.sample_distances.push_back(at[b]);
      fit.shell_maxima.push_back(best[b]);
    }
  const std::size_t n = fit.sample_distances.size();
  if (n < 2) throw Error(ErrorKind::kInsufficientDecadeRange, "decay fit: fewer than two shells");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> X(n), Y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X[i] = std::log10(1.0 + fit.sample_distances[i]);
    Y[i] = std::log10(fit.shell_maxima[i]);
    sx += X[i], sy += Y[i], sxx += X[i] * X[i], sxy += X[i] * Y[i];
  }
  const double nn = static_cast<double>(n);
  const double var = sxx - sx * sx / nn;
  if (!(var > 0.0)) throw Error(ErrorKind::kInsufficientDecadeRange, "decay fit: degenerate shells");
  const double slope = (sxy - sx * sy / nn) / var;
  const double intercept = (sy - slope * sx) / nn;
  fit.fitted_exponent = slope == 0.0 ? 0.0 : -slope;
  fit.fitted_constant = std::pow(10.0, intercept);
  double ss = 0.0, ymin = INFINITY, ymax = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = Y[i] - (intercept + slope * X[i]);
    ss += r * r;
    ymin = std::min(ymin, Y[i]);
    ymax = std::max(ymax, Y[i]);
  }
  fit.rms_misfit = std::sqrt(ss / nn);
  fit.decades = ymax - ymin;
  fit.residual = fit.rms_misfit / std::max(1.0, fit.decades);
  return fit;
}

std::vector<Complex> kq_kernel(const SymbolExpr& q, const std::vector<KqProbe>& probes,
                               const KqQuad& quad, double t) {
  require_dim1(q, "kq_kernel");
  if (!(quad.h > 0.0) || !(quad.width > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "kq_kernel: step and width must be positive");
  const auto half = static_cast<std::size_t>(std::ceil(quad.width / quad.h));
  const std::size_t nodes = 2 * half + 1;
  const double C = 1.0 / (2.0 * pi * pi);
  std::vector<Complex> out;
  out.reserve(probes.size());
  for (const auto& p : probes) {
    if (p.left.dim() != 1 || p.right.dim() != 1)
      throw Error(ErrorKind::kDimensionMismatch, "kq_kernel probes must be 1D phase points");
    const double x = p.left.x[0], xi = p.left.xi[0], x1 = p.right.x[0], xi1 = p.right.xi[0];
    const double zc = 0.5 * (x + x1), ec = 0.5 * (xi + xi1);
    std::vector<double> node(nodes), gauss(nodes);
    std::vector<Complex> z_phase(nodes), e_phase(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double off = (static_cast<double>(i) - static_cast<double>(half)) * quad.h;
      node[i] = off;
      gauss[i] = std::exp(-off * off);
      z_phase[i] = std::polar(1.0, -(zc + off) * (xi - xi1));
      e_phase[i] = std::polar(1.0, (ec + off) * (x - x1));
    }
    std::vector<Complex> row_sum(nodes);
    std::vector<double> row_peak(nodes), row_edge(nodes);
    parallel_for(nodes, [&](std::size_t r) {
      Complex s = 0.0;
      double pk = 0.0, edge = 0.0;
      for (std::size_t i = 0; i < nodes; ++i) {
        const double w = gauss[r] * gauss[i] * q.evaluate_1d(t, zc + node[i], ec + node[r]);
        s += w * z_phase[i];
        pk = std::max(pk, std::abs(w));
        if (i == 0 || i + 1 == nodes || r == 0 || r + 1 == nodes) edge = std::max(edge, std::abs(w));
      }
      row_sum[r] = s * e_phase[r];
      row_peak[r] = pk;
      row_edge[r] = edge;
    });
    Complex total = 0.0;
    double pk = 0.0, edge = 0.0;
    for (std::size_t r = 0; r < nodes; ++r) {
      total += row_sum[r];
      pk = std::max(pk, row_peak[r]);
      edge = std::max(edge, row_edge[r]);
    }
    if (edge > 1e-12 * pk) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "kq_kernel: integrand at the window edge is %.3g of peak", edge / pk);
      throw Error(ErrorKind::kWindowTooSmall, buf);
    }
    out.push_back(C * std::polar(1.0, 0.5 * (x + x1) * (xi - xi1)) * total * quad.h * quad.h);
  }
  return out;
}

SymbolExpr linearization_residual(const SymbolExpr& a, double t, const PhasePoint& base) {
  const int n = a.dim();
  if (static_cast<int>(base.dim()) != n) throw Error(ErrorKind::kDimensionMismatch, "linearization base has the wrong dimension");
  const SymbolExpr at = substitute_time(a, t);
  // An affine symbol is its own linearization.
  bool affine = true;
  for (int i = 1; i <= 2 * n && affine; ++i)
    for (int j = i; j <= 2 * n && affine; ++j) affine = derivative(derivative(at, i), j).is_zero();
  if (affine) return SymbolExpr::constant(0.0, n);
  SymbolExpr q = at - SymbolExpr::constant(at.evaluate(t, base), n);
  for (int i = 0; i < n; ++i) {
    const double gx = derivative(at, 1 + i).evaluate(t, base);
    const double gxi = derivative(at, 1 + n + i).evaluate(t, base);
    if (gx != 0.0)
      q = q - SymbolExpr::constant(gx, n) *
                  (SymbolExpr::position(i, n) - SymbolExpr::constant(base.x[i], n));
    if (gxi != 0.0)
      q = q - SymbolExpr::constant(gxi, n) *
                  (SymbolExpr::frequency(i, n) - SymbolExpr::constant(base.xi[i], n));
  }
  return simplify(q);
}

Complex weyl_route_kernel(const SymbolExpr& q_re, const std::optional<SymbolExpr>& q_im, double t,
                          const PhasePoint& X, const PhasePoint& Y, const GridSpec& grid) {
  require_dim1(q_re, "weyl_route_kernel");
  grid.validate();
  Signal u(grid);
  for (std::size_t l = 0; l < grid.Nx; ++l) {
    const double d = grid.x(l) - Y.x[0];
    u.values[l] = bargmann_constant() * std::exp(-0.5 * d * d) * std::polar(1.0, Y.xi[0] * d);
  }
  Signal w = weyl_matrix(q_re, t, grid).apply(u);
  if (q_im) {
    const Signal wi = weyl_matrix(*q_im, t, grid).apply(u);
    for (std::size_t l = 0; l < grid.Nx; ++l) w.values[l] += Complex(0.0, 1.0) * wi.values[l];
  }
  return bargmann_at(w, X.x[0], X.xi[0]);
}

TransportSolution transport_solve(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                                  const PhaseFunction& v0, const std::optional<SymbolExpr>& f,
                                  const std::vector<PhasePoint>& seeds, double s, double t_end,
                                  double h, std::optional<double> M) {
  const int n = a.dim();
  if (!(h > 0.0)) throw Error(ErrorKind::kInvalidArgument, "transport_solve: step must be positive");
  const HamiltonField field(a);
  std::vector<SymbolExpr> a_xi;
  for (int i = 0; i < n; ++i) a_xi.push_back(derivative(a, 1 + n + i));
  const std::size_t steps = step_count(s, t_end, h);
  const double dt = steps ? (t_end - s) / static_cast<double>(steps) : 0.0;

  TransportSolution sol;
  sol.seeds = seeds;
  for (std::size_t k = 0; k <= steps; ++k)
    sol.times.push_back(k == steps ? t_end : s + static_cast<double>(k) * dt);
  sol.values.resize(seeds.size());
  sol.growth_factors.resize(seeds.size());
  sol.forcing_integral.resize(seeds.size());

  // State: z (2n), Re v, Im v, log growth, int |f|.
  const std::size_t dimz = static_cast<std::size_t>(2 * n), width = dimz + 4;
  auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    field.velocity(t, y.data(), dy.data());
    std::vector<double> vars(1 + dimz);
    vars[0] = t;
    std::copy(y.begin(), y.begin() + static_cast<long>(dimz), vars.begin() + 1);
    double theta = a.evaluate(vars);
    for (int i = 0; i < n; ++i) theta -= y[static_cast<std::size_t>(n + i)] * a_xi[static_cast<std::size_t>(i)].evaluate(vars);
    const double bv = b ? b->evaluate(vars) : 0.0;
    const double fv = f ? f->evaluate(vars) : 0.0;
    const Complex v(y[dimz], y[dimz + 1]);
    const Complex dv = Complex(bv, -theta) * v + Complex(0.0, fv);
    dy[dimz] = dv.real();
    dy[dimz + 1] = dv.imag();
    dy[dimz + 2] = bv;
    dy[dimz + 3] = std::abs(fv);
  };

  parallel_for(seeds.size(), [&](std::size_t si) {
    const PhasePoint& seed = seeds[si];
    if (static_cast<int>(seed.dim()) != n) throw Error(ErrorKind::kDimensionMismatch, "transport seed dimension mismatch");
    std::vector<double> y(width);
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = seed.x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(n + i)] = seed.xi[static_cast<std::size_t>(i)];
    }
    const Complex init = v0(seed);
    y[dimz] = init.real();
    y[dimz + 1] = init.imag();
    auto record = [&] {
      sol.values[si].emplace_back(y[dimz], y[dimz + 1]);
      sol.growth_factors[si].push_back(std::exp(y[dimz + 2]));
      sol.forcing_integral[si].push_back(y[dimz + 3]);
    };
    record();
    std::vector<double> k1(width), k2(width), k3(width), k4(width), tmp(width);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t0 = sol.times[k], step = sol.times[k + 1] - t0;
      rhs(t0, y, k1);
      for (std::size_t i = 0; i < width; ++i) tmp[i] = y[i] + 0.5 * step * k1[i];
      rhs(t0 + 0.5 * step, tmp, k2);
      for (std::size_t i = 0; i < width; ++i) tmp[i] = y[i] + 0.5 * step * k2[i];
      rhs(t0 + 0.5 * step, tmp, k3);
      for (std::size_t i = 0; i < width; ++i) tmp[i] = y[i] + step * k3[i];
      rhs(t0 + step, tmp, k4);
      for (std::size_t i = 0; i < width; ++i)
        y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      for (double c : y)
        if (!std::isfinite(c))
          throw Error(ErrorKind::kBlowupDetected, "transport from seed " + point_text(seed) + " diverged");
      record();
    }
  });

  if (M) {
    double worst = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const double v0abs = std::abs(sol.values[si].front());
      for (std::size_t k = 0; k < sol.times.size(); ++k)
        worst = std::max(worst, safe_ratio(std::abs(sol.values[si][k]),
                                           std::exp(*M) * (v0abs + sol.forcing_integral[si][k])));
    }
    sol.envelope_ratio = worst;
  }
  return sol;
}

FtcResult ftc_lemma_ratio(const SymbolExpr& q, double R, int n, const FtcQuad& quad) {
  if (n != 1 && n != 2) throw Error(ErrorKind::kInvalidArgument, "ftc_lemma_ratio supports n = 1 or 2");
  if (q.dim() != n) throw Error(ErrorKind::kDimensionMismatch, "ftc_lemma_ratio: symbol dimension differs from n");
  if (!(R > 0.0)) throw Error(ErrorKind::kInvalidArgument, "ftc_lemma_ratio: R must be positive");
  if (q.depends_on_time()) throw Error(ErrorKind::kInvalidArgument, "ftc_lemma_ratio: q must not depend on t");
  for (int i = 0; i < n; ++i)
    if (q.depends_on(1 + n + i))
      throw Error(ErrorKind::kInvalidArgument, "ftc_lemma_ratio: q must depend on x only");
  const std::size_t panels = quad.radial + quad.radial % 2;
  if (panels < 2 || (n == 2 && quad.angular < 4))
    throw Error(ErrorKind::kInvalidArgument, "ftc_lemma_ratio: quadrature too coarse");

  std::vector<SymbolExpr> grad, hess;
  for (int i = 0; i < n; ++i) grad.push_back(derivative(q, 1 + i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) hess.push_back(derivative(grad[static_cast<std::size_t>(i)], 1 + j));

  const PhasePoint origin(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0));
  double defect = std::abs(q.evaluate(0.0, origin));
  for (const auto& g : grad) defect = std::max(defect, std::abs(g.evaluate(0.0, origin)));
  if (defect > 1e-10) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "q or its gradient is %.3g at the origin", defect);
    throw Error(ErrorKind::kBasePointNotCritical, buf);
  }

  auto hess_norm = [&](const PhasePoint& p) {
    if (n == 1) return std::abs(hess[0].evaluate(0.0, p));
    const double h11 = hess[0].evaluate(0.0, p), h12 = hess[1].evaluate(0.0, p),
                 h22 = hess[3].evaluate(0.0, p);
    const double mean = 0.5 * (h11 + h22), rad = std::hypot(0.5 * (h11 - h22), h12);
    return std::max(std::abs(mean + rad), std::abs(mean - rad));
  };
  auto simpson_weight = [&](std::size_t i) {
    return (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  };

  FtcResult r;
  if (n == 1) {
    const double hx = 2.0 * R / static_cast<double>(panels);
    for (std::size_t i = 0; i <= panels; ++i) {
      const PhasePoint p(-R + static_cast<double>(i) * hx, 0.0);
      const double w = simpson_weight(i) * hx / 3.0;
      r.lhs += w * std::abs(q.evaluate(0.0, p));
      r.rhs += w * hess_norm(p);
    }
    r.rhs *= R * R;
  } else {
    const double hr = R / static_cast<double>(panels);
    const double ht = 2.0 * pi / static_cast<double>(quad.angular);
    for (std::size_t i = 0; i <= panels; ++i) {
      const double rad = static_cast<double>(i) * hr;
      double ring_q = 0.0, ring_h = 0.0;
      for (std::size_t k = 0; k < quad.angular; ++k) {
        const double th = static_cast<double>(k) * ht;
        const PhasePoint p({rad * std::cos(th), rad * std::sin(th)}, {0.0, 0.0});
        ring_q += std::abs(q.evaluate(0.0, p));
        ring_h += hess_norm(p);
      }
      const double w = simpson_weight(i) * hr / 3.0 * ht;
      r.lhs += w * rad * ring_q;
      r.rhs += w * ring_h;  // |x|^{-1} cancels the polar Jacobian
    }
    r.rhs *= R * R * R;
  }
  r.ratio = safe_ratio(r.lhs, r.rhs);
  return r;
}

HistoryFactory gaussian_history(bool moving) {
  return [moving](const Trajectory& tr) -> PhaseHistory {
    return [moving, tr](double t, const PhasePoint& z) {
      const PhasePoint c = moving ? center_at(tr, t) : tr.seed;
      return reproducing_kernel(z.x[0], z.xi[0], c.x[0], c.xi[0]);
    };
  };
}

HistoryFactory slice_history(std::vector<KernelSlice> slices) {
  if (slices.empty()) throw Error(ErrorKind::kInvalidArgument, "slice_history needs at least one slice");
  std::sort(slices.begin(), slices.end(), [](const auto& l, const auto& r) { return l.t < r.t; });
  auto shared = std::make_shared<const std::vector<KernelSlice>>(std::move(slices));
  return [shared](const Trajectory&) -> PhaseHistory {
    return [shared](double t, const PhasePoint& z) -> Complex {
      const auto& sl = *shared;
      if (t <= sl.front().t) return bilinear(sl.front(), z);
      if (t >= sl.back().t) return bilinear(sl.back(), z);
      std::size_t k = 1;
      while (sl[k].t < t) ++k;
      const double w = (t - sl[k - 1].t) / (sl[k].t - sl[k - 1].t);
      return (1.0 - w) * bilinear(sl[k - 1], z) + w * bilinear(sl[k], z);
    };
  };
}

EOperatorResult e_operator_bound(const SymbolExpr& a, const std::optional<SymbolExpr>& b, int N,
                                 const std::vector<PhasePoint>& seeds, const GridSpec& grid,
                                 const SymbolClassReport& report, const HistoryFactory& history,
                                 const EOperatorOptions& options) {
  require_dim1(a, "e_operator_bound");
  grid.validate();
  if (N < 1) throw Error(ErrorKind::kInvalidArgument, "e_operator_bound: N must be at least 1");
  if (options.time_samples < 8)
    throw Error(ErrorKind::kInvalidArgument, "e_operator_bound: at least 8 time samples");
  if (seeds.empty()) throw Error(ErrorKind::kInvalidArgument, "e_operator_bound: no seeds");
  if (!report.kappa0) throw Error(ErrorKind::kMissingConstant, "kappa_0 was not computed");
  const auto kn = report.kappaN.find(4 * N);
  if (kn == report.kappaN.end())
    throw Error(ErrorKind::kMissingConstant, "kappa_" + std::to_string(4 * N) + " was not computed");
  const double amplitude = std::sqrt(*report.kappa0 * kn->second);
  const int n = 1;
  const double exponent = 2 * n + 3 - 2 * N;

  EOperatorResult res;
  for (const auto& seed : seeds) {
    const Trajectory tr = sampled_flow(a, seed, options.s, options.t_end, options.time_samples,
                                       options.flow_step);
    const PhaseHistory v = history(tr);
    std::vector<double> ev(tr.times.size());
    double sup_weighted = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      const double t = tr.times[k];
      const PhasePoint& base = tr.points[k];

      // Weighted integral on a grid centered at the trajectory point.
      std::vector<double> rows(grid.Nxi);
      parallel_for(grid.Nxi, [&](std::size_t m) {
        const double dxi = (static_cast<double>(m) - static_cast<double>(grid.Nxi / 2)) * grid.dxi();
        double s = 0.0;
        for (std::size_t j = 0; j < grid.Nx; ++j) {
          const double dx = (static_cast<double>(j) - static_cast<double>(grid.Nx / 2)) * grid.dx();
          const PhasePoint z(base.x[0] + dx, base.xi[0] + dxi);
          s += std::pow(1.0 + std::abs(dx) + std::abs(dxi), exponent) * std::abs(v(t, z));
        }
        rows[m] = s;
      });
      double integral = 0.0;
      for (double r : rows) integral += r;
      sup_weighted = std::max(sup_weighted, integral * grid.dx() * grid.dxi());

      const SymbolExpr q_re = linearization_residual(a, t, base);
      std::optional<SymbolExpr> q_im;
      if (b) {
        const SymbolExpr bt = substitute_time(*b, t);
        q_im = simplify(bt - SymbolExpr::constant(bt.evaluate(t, base), 1));
        if (q_im->is_zero()) q_im.reset();
      }
      if (q_re.is_zero() && !q_im) continue;
      PhaseField field(grid);
      parallel_for(grid.Nxi, [&](std::size_t m) {
        for (std::size_t j = 0; j < grid.Nx; ++j) field.at(j, m) = v(t, PhasePoint(grid.x(j), grid.xi(m)));
      });
      const Signal u = bargmann_inverse(field);
      Signal w = weyl_matrix(q_re, t, grid).apply(u);
      if (q_im) {
        const Signal wi = weyl_matrix(*q_im, t, grid).apply(u);
        for (std::size_t l = 0; l < grid.Nx; ++l) w.values[l] += Complex(0.0, 1.0) * wi.values[l];
      }
      ev[k] = std::abs(bargmann_at(w, base.x[0], base.xi[0]));
    }
    double lhs = 0.0;
    for (std::size_t k = 0; k + 1 < ev.size(); ++k)
      lhs += 0.5 * (ev[k] + ev[k + 1]) * (tr.times[k + 1] - tr.times[k]);
    lhs = std::abs(lhs);
    const double rhs = amplitude * sup_weighted;
    res.lhs_per_seed.push_back(lhs);
    res.rhs_per_seed.push_back(rhs);
    res.lhs_estimate = std::max(res.lhs_estimate, lhs);
    res.rhs_bound = std::max(res.rhs_bound, rhs);
    res.weighted_integral = std::max(res.weighted_integral, sup_weighted);
  }
  res.ratio = safe_ratio(res.lhs_estimate, res.rhs_bound);
  return res;
}

}  // namespace phaseflow
