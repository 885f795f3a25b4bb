#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "phaseflow/error.hpp"
#include "phaseflow/phasekernel.hpp"

using namespace phaseflow;
using std::numbers::pi;

namespace {

const GridSpec kGrid{};
const SymbolExpr kFree = parse_symbol("xi^2/2", 1);
const SymbolExpr kOsc = parse_symbol("(x^2+xi^2)/2", 1);

bool within_cell(const PhasePoint& p, const PhasePoint& q, const GridSpec& g) {
  return std::abs(p.x[0] - q.x[0]) <= g.dx() && std::abs(p.xi[0] - q.xi[0]) <= g.dxi();
}

// Independent shell-maximum fit of an analytic modulus |K|(dx, dxi) on the
// default grid: 40 uniform bins in the l1 distance, least squares in
// log10 |K| against log10(1 + d).
double analytic_exponent(double (*modulus)(double, double)) {
  std::vector<std::pair<double, double>> pts;
  double peak = 0.0;
  for (std::size_t m = 0; m < kGrid.Nxi; ++m)
    for (std::size_t j = 0; j < kGrid.Nx; ++j) peak = std::max(peak, modulus(kGrid.x(j), kGrid.xi(m)));
  for (std::size_t m = 0; m < kGrid.Nxi; ++m)
    for (std::size_t j = 0; j < kGrid.Nx; ++j) {
      const double k = modulus(kGrid.x(j), kGrid.xi(m));
      if (k >= 1e-10 * peak) pts.emplace_back(std::abs(kGrid.x(j)) + std::abs(kGrid.xi(m)), k);
    }
  double lo = 1e300, hi = 0.0;
  for (auto& [d, k] : pts) lo = std::min(lo, d), hi = std::max(hi, d);
  std::vector<double> best(40, -1.0), at(40);
  for (auto& [d, k] : pts) {
    const auto b = std::min<std::size_t>(39, static_cast<std::size_t>((d - lo) / (hi - lo) * 40));
    if (k > best[b]) best[b] = k, at[b] = d;
  }
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int b = 0; b < 40; ++b) {
    if (best[b] < 0) continue;
    const double x = std::log10(1 + at[b]), y = std::log10(best[b]);
    n += 1, sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return -(sxy - sx * sy / n) / (sxx - sx * sx / n);
}

double gauss_modulus(double x, double xi) { return std::exp(-(x * x + xi * xi) / 4) / (2 * pi); }

}  // namespace

TEST_CASE("phase_kernel_slice: t = s reproduces the Gaussian kernel by two routes") {
  for (const PhasePoint src : {PhasePoint(0.0, 0.0), PhasePoint(1.03125, -0.5625)}) {
    const auto slice = phase_kernel_slice(kFree, std::nullopt, src, 0.0, 0.0, kGrid, 1);
    CHECK(slice.flow_image == src);
    // Route 2: T T* on the discrete delta; src lies on grid nodes.
    const auto j = static_cast<std::size_t>(std::lround((src.x[0] + kGrid.L) / kGrid.dx()));
    const auto m = static_cast<std::size_t>(std::lround((src.xi[0] + kGrid.Xi) / kGrid.dxi()));
    const auto column = reproducing_column(kGrid, j, m);
    const double peak = slice.values.sup_norm();
    double worst_route = 0.0, worst_form = 0.0;
    const Complex fitted = slice.values.at(j, m) / reproducing_kernel(src.x[0], src.xi[0], src.x[0], src.xi[0]);
    for (std::size_t mm = 0; mm < kGrid.Nxi; ++mm)
      for (std::size_t jj = 0; jj < kGrid.Nx; ++jj) {
        const Complex k = slice.values.at(jj, mm);
        if (std::abs(k) < 1e-6 * peak) continue;
        worst_route = std::max(worst_route, std::abs(k - column.at(jj, mm)) / std::abs(k));
        const Complex form = fitted * reproducing_kernel(kGrid.x(jj), kGrid.xi(mm), src.x[0], src.xi[0]);
        worst_form = std::max(worst_form, std::abs(std::abs(k) - std::abs(form)) / std::abs(form));
      }
    CHECK(worst_route < 1e-4);
    CHECK(worst_form < 1e-4);
    CHECK(std::abs(std::abs(fitted) - 1.0) < 1e-8);
  }
}

TEST_CASE("phase_kernel_slice: peaks follow closed-form flows") {
  const auto free = phase_kernel_slice(kFree, std::nullopt, {0.0, 2.0}, 0.0, 1.0, kGrid, 200);
  CHECK(within_cell(slice_peak(free), {2.0, 2.0}, kGrid));
  CHECK(within_cell(free.flow_image, {2.0, 2.0}, kGrid));
  const auto rot = phase_kernel_slice(kOsc, std::nullopt, {1.0, 0.0}, 0.0, pi / 2, kGrid, 200);
  CHECK(within_cell(slice_peak(rot), {0.0, -1.0}, kGrid));
}

TEST_CASE("property: kernel peak tracks the flow image on a 3x3 source grid") {
  for (const auto* a : {&kFree, &kOsc})
    for (double t : {0.5, 1.0})
      for (double y : {-1.0, 0.0, 1.0})
        for (double eta : {-1.0, 0.0, 1.0}) {
          const auto slice = phase_kernel_slice(*a, std::nullopt, {y, eta}, 0.0, t, kGrid, 100);
          CHECK(within_cell(slice_peak(slice), slice.flow_image, kGrid));
        }
}

TEST_CASE("phase_kernel_slice: window errors") {
  CHECK_THROWS_AS(phase_kernel_slice(kFree, std::nullopt, {9.0, 0.0}, 0.0, 0.0, kGrid, 1), Error);
  try {
    // x^t = 5 + 3t passes 8 = L - 4 before t = 1.5.
    phase_kernel_slice(kFree, std::nullopt, {5.0, 3.0}, 0.0, 1.5, kGrid, 10);
    FAIL("expected OutOfWindow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kOutOfWindow);
  }
}

TEST_CASE("decay_fit: Gaussian, flat and evolved slices") {
  const auto gauss = phase_kernel_slice(kFree, std::nullopt, {0.0, 0.0}, 0.0, 0.0, kGrid, 1);
  const auto fit = decay_fit(gauss);
  // Shell maxima of exp(-d^2/8) over 13.6 units of d: the whole-range
  // power-law slope is finite, it only grows in the tail.
  CHECK(fit.fitted_exponent == doctest::Approx(analytic_exponent(gauss_modulus)).epsilon(1e-3));
  CHECK(fit.fitted_constant > 0.0);
  CHECK(fit.residual < 0.5);
  FitOptions tail;
  tail.tail_fraction = 0.5;
  CHECK(decay_fit(gauss, tail).fitted_exponent > 10.0);

  KernelSlice flat = gauss;
  for (auto& z : flat.values.values) z = 1.0;
  const auto ff = decay_fit(flat);
  CHECK(ff.fitted_exponent == 0.0);
  CHECK(ff.residual == 0.0);
  CHECK(ff.fitted_constant == doctest::Approx(1.0));

  const auto free = phase_kernel_slice(kFree, std::nullopt, {0.0, 2.0}, 0.0, 1.0, kGrid, 200);
  const auto fe = decay_fit(free);
  CHECK(fe.fitted_exponent >= 4.0);
  CHECK(fe.residual < 0.5);
}

TEST_CASE("decay_fit: insufficient range") {
  KernelSlice spike;
  spike.grid = kGrid;
  spike.values = PhaseField(kGrid);
  spike.values.at(128, 128) = 1.0;
  try {
    decay_fit(spike);
    FAIL("expected InsufficientDecadeRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientDecadeRange);
  }
  // A wide plateau near the image spans less than a decade of 1 + d.
  KernelSlice plateau = spike;
  for (std::size_t m = 124; m < 132; ++m)
    for (std::size_t j = 124; j < 132; ++j) plateau.values.at(j, m) = 1.0;
  plateau.flow_image = PhasePoint(kGrid.x(128), kGrid.xi(128));
  CHECK_THROWS_AS(decay_fit(plateau), Error);
}

TEST_CASE("kq_kernel: constant symbol equals the reproducing kernel") {
  const auto one = parse_symbol("1", 1);
  const auto k = kq_kernel(one, {{{0, 0}, {0, 0}}, {{0, 0}, {4, 0}}, {{0.5, 1}, {-1, 0.3}}});
  const auto column = reproducing_column(kGrid, 128, 128);  // node (0, 0)
  CHECK(std::abs(k[0] / column.at(128, 128) - 1.0) < 1e-4);
  CHECK(std::abs(std::abs(k[1]) - std::exp(-4.0) * std::abs(k[0])) < 1e-4 * std::abs(k[1]));
  CHECK(std::abs(k[2] - reproducing_kernel(0.5, 1, -1, 0.3)) < 1e-12);
}

TEST_CASE("kq_kernel: linearization residuals on the diagonal") {
  const PhasePoint base{0.7, -0.4};
  const auto odd = kq_kernel(parse_symbol("x - 0.7", 1), {{base, base}});
  CHECK(std::abs(odd[0]) < 1e-12);
  // The quadratic residual of the harmonic oscillator averages
  // ((z-x0)^2 + (eta-xi0)^2)/2 against exp(-(z-x0)^2 - (eta-xi0)^2) / (2 pi^2):
  // 1/(4 pi), second order but not zero.
  const auto q = linearization_residual(kOsc, 0.0, base);
  const auto quad = kq_kernel(q, {{base, base}});
  CHECK(quad[0].real() == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-10));
  CHECK(std::abs(quad[0].imag()) < 1e-14);
}

TEST_CASE("kq_kernel: quadrature matches the Weyl-matrix route") {
  const auto a = parse_symbol("xi^2/2 + 0.3*sin(x)", 1);
  const auto q = linearization_residual(a, 0.0, {0.5, 0.8});
  const std::pair<PhasePoint, PhasePoint> probes[] = {
      {{0.5, 0.8}, {0.5, 0.8}}, {{1.0, 0.2}, {0.0, 1.0}}, {{-0.5, 1.5}, {1.5, 0.0}}};
  for (const auto& [X, Y] : probes) {
    const Complex kq = kq_kernel(q, {{X, Y}})[0];
    const Complex weyl = weyl_route_kernel(q, std::nullopt, 0.0, X, Y, kGrid);
    CHECK(std::abs(kq - weyl) < 1e-8 * std::abs(kq));
  }
  const auto qi = parse_symbol("0.2*x*xi", 1);
  const Complex with_im = weyl_route_kernel(q, qi, 0.0, {0.2, 0.1}, {0.0, 0.3}, kGrid);
  const Complex re = kq_kernel(q, {{{0.2, 0.1}, {0.0, 0.3}}})[0];
  const Complex im = kq_kernel(qi, {{{0.2, 0.1}, {0.0, 0.3}}})[0];
  CHECK(std::abs(with_im - (re + Complex(0, 1) * im)) < 1e-8 * std::abs(with_im));
}

TEST_CASE("kq_kernel: window check") {
  KqQuad narrow;
  narrow.width = 2.0;
  try {
    kq_kernel(parse_symbol("1", 1), {{{0, 0}, {0, 0}}}, narrow);
    FAIL("expected WindowTooSmall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kWindowTooSmall);
  }
  CHECK_NOTHROW(kq_kernel(parse_symbol("0", 1), {{{0, 0}, {0, 0}}}, narrow));
}

TEST_CASE("linearization_residual") {
  const PhasePoint base{0.3, -1.2};
  const auto q = linearization_residual(kOsc, 0.0, base);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 20; ++k) {
    const double x = u(rng), xi = u(rng);
    const double expect = ((x - 0.3) * (x - 0.3) + (xi + 1.2) * (xi + 1.2)) / 2;
    CHECK(q.evaluate_1d(0, x, xi) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(linearization_residual(parse_symbol("xi", 1), 0.0, base).is_zero());
  const auto s = linearization_residual(parse_symbol("xi^2/2 + sin(x)", 1), 0.0, {0.0, 0.0});
  for (double x : {-1.0, 0.4, 2.0})
    for (double xi : {-0.5, 1.5})
      CHECK(s.evaluate_1d(0, x, xi) == doctest::Approx(xi * xi / 2 + std::sin(x) - x).epsilon(1e-13));
}

TEST_CASE("property: linearization residual vanishes to second order at the base") {
  const char* symbols[] = {"xi^2/2 + 0.3*sin(x)*t", "sqrt(1 + xi^2) + tanh(x)", "x^3*xi - cos(xi)",
                           "exp(-x^2)*xi^2"};
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const char* text : symbols) {
    const auto a = parse_symbol(text, 1);
    for (int k = 0; k < 10; ++k) {
      const PhasePoint base{u(rng), u(rng)};
      const double t = u(rng);
      const auto q = linearization_residual(a, t, base);
      CHECK(std::abs(q.evaluate(t, base)) < 1e-10);
      CHECK(std::abs(derivative(q, 1).evaluate(t, base)) < 1e-10);
      CHECK(std::abs(derivative(q, 2).evaluate(t, base)) < 1e-10);
    }
  }
  const auto a2 = parse_symbol("x1*xi2 + x2^2*xi1", 2);
  const PhasePoint b2({0.5, -1.0}, {2.0, 0.3});
  const auto q2 = linearization_residual(a2, 0.0, b2);
  CHECK(std::abs(q2.evaluate(0.0, b2)) < 1e-12);
  for (int v = 1; v <= 4; ++v) CHECK(std::abs(derivative(q2, v).evaluate(0.0, b2)) < 1e-12);
}

TEST_CASE("transport_solve: closed-form cases") {
  const auto one = [](const PhasePoint&) { return Complex(1.0, 0.5); };
  const std::vector<PhasePoint> seeds{{0.0, 0.0}, {1.0, -1.0}, {-2.0, 0.5}};
  const auto zero = parse_symbol("0", 1);
  const auto still = transport_solve(zero, std::nullopt, one, std::nullopt, seeds, 0.0, 1.0);
  for (const auto& row : still.values)
    for (const Complex& v : row) CHECK(v == Complex(1.0, 0.5));

  const auto grow = transport_solve(zero, parse_symbol("0.7", 1), one, std::nullopt, seeds, 0.0, 1.0);
  for (const auto& row : grow.values)
    for (std::size_t k = 0; k < row.size(); ++k)
      CHECK(std::abs(std::abs(row[k]) / (std::abs(one({0, 0})) * std::exp(0.7 * grow.times[k])) - 1) < 1e-10);

  // a = xi^2/2: a - xi a_xi = -xi^2/2, so v = v0 exp(i xi^2 t / 2).
  const auto phase = transport_solve(kFree, std::nullopt, one, std::nullopt, seeds, 0.0, 1.0);
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const double xi = seeds[si].xi[0];
    CHECK(std::abs(phase.values[si].back() - one({0, 0}) * std::polar(1.0, xi * xi / 2)) < 1e-10);
  }
}

TEST_CASE("property: transport modulus follows exp(int b) and stays inside the e^M envelope") {
  const auto a = parse_symbol("xi^2/2 + 0.2*cos(x)", 1);
  const auto b = parse_symbol("sin(x + 3*t) - 0.3*xi", 1);
  const auto v0 = [](const PhasePoint& p) { return reproducing_kernel(p.x[0], p.xi[0], 0.2, -0.1) + 0.01; };
  std::vector<PhasePoint> seeds;
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 12; ++k) seeds.emplace_back(u(rng), u(rng));
  const auto sol = transport_solve(a, b, v0, std::nullopt, seeds, 0.0, 1.0);
  for (std::size_t si = 0; si < seeds.size(); ++si)
    for (std::size_t k = 0; k < sol.times.size(); ++k)
      CHECK(std::abs(std::abs(sol.values[si][k]) /
                         (std::abs(sol.values[si][0]) * sol.growth_factors[si][k]) - 1) < 1e-8);

  const double M = growth_constant_M(b, a, seeds);
  const auto f = parse_symbol("0.5*cos(2*x)", 1);
  const auto forced = transport_solve(a, b, v0, f, seeds, 0.0, 1.0, 1e-3, M);
  REQUIRE(forced.envelope_ratio.has_value());
  CHECK(*forced.envelope_ratio <= 1.0 + 1e-6);
  CHECK(*forced.envelope_ratio > 0.0);
}

TEST_CASE("ftc_lemma_ratio") {
  const auto x2 = parse_symbol("x^2", 1);
  const auto r1 = ftc_lemma_ratio(x2, 1.0, 1);
  CHECK(r1.lhs == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r1.rhs == doctest::Approx(4.0).epsilon(1e-12));
  for (double R : {1.0, 2.0, 4.0}) CHECK(std::abs(ftc_lemma_ratio(x2, R, 1).ratio - 1.0 / 6.0) < 1e-6);

  const auto z = ftc_lemma_ratio(parse_symbol("0", 1), 1.0, 1);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  CHECK(z.ratio == 0.0);

  // x^3: (R^4/2) / (R^2 * 6 R^2) = 1/12.
  CHECK(std::abs(ftc_lemma_ratio(parse_symbol("x^3", 1), 1.5, 1).ratio - 1.0 / 12.0) < 1e-6);

  // Two dimensions, |x|^2: (pi R^4 / 2) / (R^3 * 2 * 2 pi R) = 1/8.
  for (double R : {1.0, 3.0})
    CHECK(std::abs(ftc_lemma_ratio(parse_symbol("x1^2 + x2^2", 2), R, 2).ratio - 0.125) < 1e-6);

  try {
    ftc_lemma_ratio(parse_symbol("x + x^2", 1), 1.0, 1);
    FAIL("expected BasePointNotCritical");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBasePointNotCritical);
  }
  CHECK_THROWS_AS(ftc_lemma_ratio(parse_symbol("1 + x^2", 1), 1.0, 1), Error);
  CHECK_THROWS_AS(ftc_lemma_ratio(parse_symbol("xi^2", 1), 1.0, 1), Error);
  CHECK_THROWS_AS(ftc_lemma_ratio(x2, 1.0, 3), Error);
}

TEST_CASE("property: FTC ratio is bounded over a corpus of critical symbols") {
  const char* one_d[] = {"x^2", "x^3", "x^4 - x^2", "cos(x) - 1", "x*sin(x)", "exp(x) - 1 - x",
                         "tanh(x)^2", "x^2*cos(3*x)"};
  double worst1 = 0.0;
  for (const char* text : one_d)
    for (double R : {0.5, 1.0, 2.0}) {
      const auto r = ftc_lemma_ratio(parse_symbol(text, 1), R, 1);
      CHECK(std::isfinite(r.ratio));
      worst1 = std::max(worst1, r.ratio);
    }
  CHECK(worst1 <= 0.5);
  const char* two_d[] = {"x1^2 + x2^2", "x1*x2", "x1^2 - x2^2", "cos(x1) - 1 + x2^3", "x1^2*x2"};
  double worst2 = 0.0;
  for (const char* text : two_d)
    for (double R : {0.5, 1.0, 2.0}) {
      const auto r = ftc_lemma_ratio(parse_symbol(text, 2), R, 2, {400, 128});
      CHECK(std::isfinite(r.ratio));
      worst2 = std::max(worst2, r.ratio);
    }
  CHECK(worst2 <= 0.5);
}

TEST_CASE("e_operator_bound: linear symbols and missing constants") {
  const auto lin = parse_symbol("xi", 1);
  const std::vector<PhasePoint> seeds{{0.5, 0.0}};
  const auto rep = kappa_constants(lin, std::nullopt, 4, seeds);
  const auto r = e_operator_bound(lin, std::nullopt, 1, seeds, kGrid, rep, gaussian_history(false));
  CHECK(r.lhs_estimate == 0.0);
  CHECK(r.ratio == 0.0);
  try {
    e_operator_bound(lin, std::nullopt, 2, seeds, kGrid, rep, gaussian_history(false));
    FAIL("expected MissingConstant");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingConstant);
  }
}

TEST_CASE("e_operator_bound: perturbation scaling and implied-constant window") {
  const std::vector<PhasePoint> seeds{{0.5, 0.0}, {-1.0, 0.5}, {1.0, -0.5}};
  auto run = [&](const char* text) {
    const auto a = parse_symbol(text, 1);
    const auto rep = kappa_constants(a, std::nullopt, 4, seeds);
    return e_operator_bound(a, std::nullopt, 1, seeds, kGrid, rep, gaussian_history(true));
  };
  const auto r1 = run("xi + 0.01*sin(x)");
  const auto r2 = run("xi + 0.02*sin(x)");
  CHECK(r1.lhs_estimate > 0.0);
  const double lhs_scale = r2.lhs_estimate / r1.lhs_estimate;
  CHECK(lhs_scale >= 1.8);
  CHECK(lhs_scale <= 2.2);
  CHECK(std::abs(r2.rhs_bound / r1.rhs_bound - 2.0) < 1e-9);

  const auto a = parse_symbol("xi^2/2 + 0.01*sin(x)", 1);
  const auto rep = kappa_constants(a, std::nullopt, 12, seeds);
  const auto r = e_operator_bound(a, std::nullopt, 3, seeds, kGrid, rep, gaussian_history(false));
  CHECK(std::isfinite(r.ratio));
  CHECK(r.ratio > 0.0);
  CHECK(r.ratio < 100.0);
}

TEST_CASE("slice_history interpolates kernel slices") {
  const auto s0 = phase_kernel_slice(kFree, std::nullopt, {0.0, 0.0}, 0.0, 0.0, kGrid, 1);
  auto s1 = s0;
  s1.t = 1.0;
  for (auto& z : s1.values.values) z *= 3.0;
  const auto hist = slice_history({s1, s0})(Trajectory{});
  const PhasePoint node(kGrid.x(130), kGrid.xi(127));
  CHECK(hist(0.0, node) == s0.values.at(130, 127));
  CHECK(std::abs(hist(0.5, node) - 2.0 * s0.values.at(130, 127)) < 1e-15);
  CHECK(hist(0.0, PhasePoint(50.0, 0.0)) == Complex(0.0));
}
