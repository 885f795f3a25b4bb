#include "phaseflow/quantize.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "phaseflow/error.hpp"
#include "phaseflow/fft.hpp"
#include "phaseflow/parallel.hpp"

namespace phaseflow {

namespace {

using std::numbers::pi;

double midpoint(const GridSpec& g, std::size_t p) {
  return -g.L + 0.5 * static_cast<double>(p) * g.dx();
}

void symmetrize(OperatorMatrix& op, Warnings* warnings) {
  const double scale = op.entries.norm();
  const Eigen::MatrixXcd adj = op.entries.adjoint();
  op.symmetry_defect = scale == 0.0 ? 0.0 : (op.entries - adj).norm() / scale;
  op.entries = 0.5 * (op.entries + adj);
  if (warnings && op.symmetry_defect > kSymmetryDefectWarning) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "Weyl matrix symmetry defect %.3g exceeds 1e-6",
                  op.symmetry_defect);
    warnings->push_back(buf);
  }
}

void check_edge(const Signal& u, double t) {
  const double r = edge_ratio(u);
  if (r > kBoundaryMassLimit) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "state reaches the window edge at t = %.6g (edge/peak %.3g)", t, r);
    throw Error(ErrorKind::kBoundaryMass, buf);
  }
}

}  // namespace

Signal OperatorMatrix::apply(const Signal& u) const {
  Eigen::Map<const Eigen::VectorXcd> in(u.values.data(), static_cast<Eigen::Index>(u.values.size()));
  Signal out(grid);
  Eigen::Map<Eigen::VectorXcd>(out.values.data(), static_cast<Eigen::Index>(out.values.size())) =
      entries * in;
  return out;
}

double weyl_frequency(const GridSpec& grid, std::size_t m) {
  const double mm = static_cast<double>(m) - static_cast<double>(grid.Nx / 2);
  return 2.0 * pi * mm / (static_cast<double>(grid.Nx) * grid.dx());
}

OperatorMatrix weyl_matrix(const SymbolExpr& q, double t, const GridSpec& grid, Warnings* warnings) {
  grid.validate();
  const std::size_t n = grid.Nx;
  OperatorMatrix op{grid, Eigen::MatrixXcd::Zero(n, n)};
  const Fft fft(n);
  // Midpoint index p = j + k; row p of the table holds the inverse FFT of
  // m -> q(mid_p, k_m), indexed by d = (j - k) mod n.
  parallel_for(2 * n - 1, [&](std::size_t p) {
    std::vector<Complex> buf(n);
    const double x = midpoint(grid, p);
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t bin = (m + n - n / 2) % n;  // frequency index m - n/2
      buf[bin] = q.evaluate_1d(t, x, weyl_frequency(grid, m));
    }
    fft.backward(buf);
    const std::size_t j_lo = p < n ? 0 : p - (n - 1);
    const std::size_t j_hi = p < n ? p : n - 1;
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const std::size_t k = p - j;
      op.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          buf[(j + n - k) % n] / static_cast<double>(n);
    }
  });
  symmetrize(op, warnings);
  return op;
}

OperatorMatrix weyl_matrix_direct(const SymbolExpr& q, double t, const GridSpec& grid) {
  grid.validate();
  const std::size_t n = grid.Nx;
  OperatorMatrix op{grid, Eigen::MatrixXcd::Zero(n, n)};
  std::vector<Complex> roots(n);
  for (std::size_t r = 0; r < n; ++r) roots[r] = std::polar(1.0, 2.0 * pi * r / n);
  std::vector<double> qv(n);
  for (std::size_t p = 0; p < 2 * n - 1; ++p) {
    const double x = midpoint(grid, p);
    for (std::size_t m = 0; m < n; ++m) qv[m] = q.evaluate_1d(t, x, weyl_frequency(grid, m));
    const std::size_t j_lo = p < n ? 0 : p - (n - 1);
    const std::size_t j_hi = p < n ? p : n - 1;
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const std::size_t k = p - j;
      const std::size_t d = (j + n - k) % n;
      Complex s = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        // exp(2 pi i (m - n/2) d / n)
        const std::size_t r = ((m + n - n / 2) % n) * d % n;
        s += qv[m] * roots[r];
      }
      op.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = s / static_cast<double>(n);
    }
  }
  symmetrize(op, nullptr);
  return op;
}

PropagatorTrace propagate(const SymbolExpr& a, const std::optional<SymbolExpr>& b,
                          const Signal& u0, double s, double t_end, int nsteps) {
  if (nsteps < 1) throw Error(ErrorKind::kInvalidArgument, "propagate: nsteps must be at least 1");
  if (!std::isfinite(s) || !std::isfinite(t_end))
    throw Error(ErrorKind::kInvalidArgument, "propagate: times must be finite");
  const GridSpec& grid = u0.grid;
  grid.validate();
  if (u0.values.size() != grid.Nx)
    throw Error(ErrorKind::kInvalidArgument, "propagate: signal length does not match grid");
  check_edge(u0, s);

  const auto n = static_cast<Eigen::Index>(grid.Nx);
  const double dt = (t_end - s) / nsteps;
  const bool frozen = !a.depends_on_time() && !(b && b->depends_on_time());
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(n, n);

  Eigen::MatrixXcd explicit_part;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
  auto assemble = [&](double t) {
    Eigen::MatrixXcd h = Complex(0.0, 1.0) * weyl_matrix(a, t, grid).entries;
    if (b) h -= weyl_matrix(*b, t, grid).entries;
    const Eigen::MatrixXcd implicit_part = eye + (0.5 * dt) * h;
    explicit_part = eye - (0.5 * dt) * h;
    lu.compute(implicit_part);
    if (!(lu.rcond() > 1e-14))
      throw Error(ErrorKind::kSolveFailure, "Crank-Nicolson step matrix is singular");
  };

  PropagatorTrace trace;
  trace.times.push_back(s);
  trace.states.push_back(u0);
  trace.norms.push_back(u0.norm());
  Eigen::VectorXcd u = Eigen::Map<const Eigen::VectorXcd>(u0.values.data(), n);
  if (frozen) assemble(s);
  for (int k = 0; k < nsteps; ++k) {
    const double t0 = s + k * dt;
    if (!frozen) assemble(t0 + 0.5 * dt);
    u = lu.solve(explicit_part * u);
    Signal state(grid);
    Eigen::Map<Eigen::VectorXcd>(state.values.data(), n) = u;
    for (const Complex& z : state.values)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw Error(ErrorKind::kSolveFailure, "Crank-Nicolson step produced non-finite values");
    const double t1 = k + 1 == nsteps ? t_end : s + (k + 1) * dt;
    check_edge(state, t1);
    trace.times.push_back(t1);
    trace.norms.push_back(state.norm());
    trace.states.push_back(std::move(state));
  }
  return trace;
}

}  // namespace phaseflow
