#include "phaseflow/symclass.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phaseflow/error.hpp"
#include "phaseflow/parallel.hpp"

namespace phaseflow {

namespace {

void check_seeds(const std::vector<PhasePoint>& seeds) {
  if (seeds.empty()) throw Error(ErrorKind::kInvalidArgument, "seed ensemble is empty");
}

void check_quad(const QuadControl& quad) {
  if (!(quad.h > 0.0)) throw Error(ErrorKind::kInvalidArgument, "quadrature step must be positive");
  if (!(quad.t1 >= quad.t0)) throw Error(ErrorKind::kInvalidArgument, "quadrature interval reversed");
}

std::vector<double> packed(double t, const PhasePoint& p) {
  std::vector<double> v{t};
  v.insert(v.end(), p.x.begin(), p.x.end());
  v.insert(v.end(), p.xi.begin(), p.xi.end());
  return v;
}

Trajectory flow_of(const SymbolExpr& a, const PhasePoint& seed, const QuadControl& quad) {
  return integrate_flow(a, seed, quad.t0, quad.t1, StepControl{quad.h});
}

// Trapezoid integral of |q| along the trajectory.
double abs_integral(const SymbolExpr& q, const Trajectory& tr) {
  double sum = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double v = std::abs(q.evaluate(packed(tr.times[k], tr.points[k])));
    if (k > 0) sum += 0.5 * (tr.times[k] - tr.times[k - 1]) * (v + prev);
    prev = v;
  }
  return sum;
}

std::string tag(const PhasePoint& p) {
  std::string s = "(";
  for (double v : p.x) s += std::to_string(v) + ",";
  for (double v : p.xi) s += std::to_string(v) + ",";
  s.back() = ')';
  return s;
}

}  // namespace

SymbolClassReport kappa_constants(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                                  int order_cap, const std::vector<PhasePoint>& seeds,
                                  const QuadControl& quad) {
  check_seeds(seeds);
  check_quad(quad);
  if (order_cap < 2) throw Error(ErrorKind::kInvalidArgument, "order_cap must be at least 2");
  const auto table_a = derivative_table(a, 2, order_cap);
  const auto table_b = b ? derivative_table(*b, 1, order_cap)
                         : std::vector<std::pair<MultiIndex, SymbolExpr>>{};

  // per_seed[i][k]: integral for derivative k (a entries first, then b).
  std::vector<std::vector<double>> per_seed(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    try {
      const Trajectory tr = flow_of(a, seeds[i], quad);
      auto& row = per_seed[i];
      for (const auto& entry : table_a) row.push_back(abs_integral(entry.second, tr));
      for (const auto& entry : table_b) row.push_back(abs_integral(entry.second, tr));
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [seed " + tag(seeds[i]) + "]");
    }
  });

  SymbolClassReport r;
  r.order_cap = order_cap;
  for (std::size_t k = 0; k < table_a.size(); ++k) {
    double c = 0.0;
    for (const auto& row : per_seed) c = std::max(c, row[k]);
    r.c_a[table_a[k].first] = c;
  }
  for (std::size_t k = 0; k < table_b.size(); ++k) {
    double c = 0.0;
    for (const auto& row : per_seed) c = std::max(c, row[table_a.size() + k]);
    r.c_b[table_b[k].first] = c;
  }

  auto max_in = [](const std::map<MultiIndex, double>& c, int lo, int hi) {
    double m = 0.0;
    for (const auto& [idx, v] : c)
      if (idx.order() >= lo && idx.order() <= hi) m = std::max(m, v);
    return m;
  };
  r.kappa0 = max_in(r.c_a, 2, 2) + max_in(r.c_b, 1, 1);
  for (int n = 2; n <= order_cap; ++n) r.kappaN[n] = max_in(r.c_a, 2, n) + max_in(r.c_b, 1, n);
  return r;
}

std::vector<double> cumulative_along(const SymbolExpr& q, const Trajectory& tr) {
  std::vector<double> out;
  out.reserve(tr.times.size());
  double sum = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double v = q.evaluate(packed(tr.times[k], tr.points[k]));
    if (k > 0) sum += 0.5 * (tr.times[k] - tr.times[k - 1]) * (v + prev);
    prev = v;
    out.push_back(sum);
  }
  return out;
}

double max_interval_gain(const std::vector<double>& cumulative) {
  if (cumulative.empty()) return 0.0;
  double best = 0.0;
  double lowest = cumulative.front();
  for (double b : cumulative) {
    lowest = std::min(lowest, b);
    best = std::max(best, b - lowest);
  }
  return best;
}

double growth_constant_M(const SymbolExpr& b, const SymbolExpr& a,
                         const std::vector<PhasePoint>& seeds, const QuadControl& quad) {
  check_seeds(seeds);
  check_quad(quad);
  std::vector<double> gains(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    try {
      gains[i] = max_interval_gain(cumulative_along(b, flow_of(a, seeds[i], quad)));
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [seed " + tag(seeds[i]) + "]");
    }
  });
  return *std::max_element(gains.begin(), gains.end());
}

std::map<double, double> equiintegrability_modulus(const SymbolExpr& a,
                                                   const std::vector<double>& h_list,
                                                   const std::vector<PhasePoint>& seeds,
                                                   const QuadControl& quad) {
  check_seeds(seeds);
  check_quad(quad);
  const double span = quad.t1 - quad.t0;
  for (double h : h_list)
    if (!(h > 0.0) || h > span + 1e-12)
      throw Error(ErrorKind::kInvalidArgument, "window h must lie in (0, t1 - t0]");
  const auto second = derivative_table(a, 2, 2);

  std::vector<std::vector<double>> per_seed(seeds.size(), std::vector<double>(h_list.size()));
  parallel_for(seeds.size(), [&](std::size_t i) {
    try {
      const Trajectory tr = flow_of(a, seeds[i], quad);
      // Cumulative integral of max_{|alpha|+|beta|=2} |d a|.
      std::vector<double> cum(tr.times.size(), 0.0);
      double prev = 0.0;
      for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const auto vars = packed(tr.times[k], tr.points[k]);
        double v = 0.0;
        for (const auto& entry : second) v = std::max(v, std::abs(entry.second.evaluate(vars)));
        if (k > 0) cum[k] = cum[k - 1] + 0.5 * (tr.times[k] - tr.times[k - 1]) * (v + prev);
        prev = v;
      }
      auto cum_at = [&](double t) {
        if (t >= tr.times.back()) return cum.back();
        const auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - tr.times.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - tr.times[lo]) / (tr.times[hi] - tr.times[lo]);
        return cum[lo] + w * (cum[hi] - cum[lo]);
      };
      for (std::size_t j = 0; j < h_list.size(); ++j) {
        const double h = h_list[j];
        // The window flush with the right end keeps omega monotone in h.
        double best = cum.back() - cum_at(quad.t1 - h);
        for (std::size_t k = 0; k < tr.times.size() && tr.times[k] + h <= quad.t1; ++k)
          best = std::max(best, cum_at(tr.times[k] + h) - cum[k]);
        per_seed[i][j] = best;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [seed " + tag(seeds[i]) + "]");
    }
  });

  std::map<double, double> omega;
  for (std::size_t j = 0; j < h_list.size(); ++j) {
    double m = 0.0;
    for (const auto& row : per_seed) m = std::max(m, row[j]);
    omega[h_list[j]] = m;
  }
  return omega;
}

double mizohata_constant(const std::vector<SymbolExpr>& b1, const RayGrid& rays, double dr) {
  if (b1.empty()) throw Error(ErrorKind::kInvalidArgument, "mizohata: empty vector field");
  if (!(dr > 0.0)) throw Error(ErrorKind::kInvalidArgument, "mizohata: step must be positive");
  const std::size_t n = static_cast<std::size_t>(b1.front().dim());
  if (b1.size() != n) throw Error(ErrorKind::kDimensionMismatch, "mizohata: need one component per dimension");
  if (rays.bases.empty() || rays.directions.empty() || rays.radii.empty())
    throw Error(ErrorKind::kInvalidArgument, "mizohata: ray grid is empty");

  std::vector<std::vector<double>> dirs;
  for (const auto& w : rays.directions) {
    if (w.size() != n) throw Error(ErrorKind::kDimensionMismatch, "mizohata: direction dimension");
    double norm = 0.0;
    for (double c : w) norm += c * c;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(ErrorKind::kInvalidArgument, "mizohata: zero direction");
    std::vector<double> unit(w);
    for (double& c : unit) c /= norm;
    dirs.push_back(std::move(unit));
  }
  std::vector<double> radii(rays.radii);
  std::sort(radii.begin(), radii.end());
  if (radii.front() < 0.0) throw Error(ErrorKind::kInvalidArgument, "mizohata: negative radius");

  const std::size_t total = rays.bases.size() * dirs.size();
  std::vector<double> best(total, 0.0);
  parallel_for(total, [&](std::size_t idx) {
    const auto& base = rays.bases[idx / dirs.size()];
    const auto& w = dirs[idx % dirs.size()];
    if (base.size() != n) throw Error(ErrorKind::kDimensionMismatch, "mizohata: base dimension");
    std::vector<double> vars(2 * n + 1, 0.0);
    auto integrand = [&](double r) {
      for (std::size_t i = 0; i < n; ++i) vars[1 + i] = base[i] + r * w[i];
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += b1[i].evaluate(vars) * w[i];
      return dot;
    };
    try {
      // Each radius gets its own uniform trapezoid grid with step <= dr.
      double m = 0.0;
      for (double R : radii) {
        if (R == 0.0) continue;
        const std::size_t panels = static_cast<std::size_t>(std::ceil(R / dr - 1e-9));
        const double step = R / static_cast<double>(panels);
        double sum = 0.5 * (integrand(0.0) + integrand(R));
        for (std::size_t k = 1; k < panels; ++k) sum += integrand(static_cast<double>(k) * step);
        m = std::max(m, std::abs(sum * step));
      }
      best[idx] = m;
    } catch (const Error& e) {
      std::string ray = "base (";
      for (double c : base) ray += std::to_string(c) + ",";
      ray.back() = ')';
      throw Error(e.kind(), std::string(e.what()) + " [ray " + ray + "]");
    }
  });
  return *std::max_element(best.begin(), best.end());
}

SmallnessResult smallness_check(const SymbolClassReport& report, int N, double threshold) {
  if (N < 1) throw Error(ErrorKind::kInvalidArgument, "smallness_check: N must be positive");
  if (!report.kappa0) throw Error(ErrorKind::kMissingConstant, "kappa_0 was not computed");
  const auto it = report.kappaN.find(4 * N);
  if (it == report.kappaN.end())
    throw Error(ErrorKind::kMissingConstant,
                "kappa_" + std::to_string(4 * N) + " was not computed (order cap " +
                    std::to_string(report.order_cap) + ")");
  if (!report.M) throw Error(ErrorKind::kMissingConstant, "growth constant M was not computed");
  SmallnessResult r;
  r.margin = std::exp(2.0 * *report.M) * *report.kappa0 * it->second;
  r.satisfied = r.margin < threshold;
  return r;
}

}  // namespace phaseflow
