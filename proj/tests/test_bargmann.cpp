#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "phaseflow/bargmann.hpp"
#include "phaseflow/error.hpp"

using namespace phaseflow;
using std::numbers::pi;

namespace {

const GridSpec kGrid{};  // L = Xi = 12, Nx = Nxi = 256

Signal sample(const GridSpec& g, auto&& fn) {
  Signal f(g);
  for (std::size_t j = 0; j < g.Nx; ++j) f.values[j] = fn(g.x(j));
  return f;
}

double rel_error(const Signal& a, const Signal& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    num += std::norm(a.values[j] - b.values[j]);
    den += std::norm(b.values[j]);
  }
  return std::sqrt(num / den);
}

double sup_diff(const PhaseField& a, const PhaseField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) m = std::max(m, std::abs(a.values[k] - b.values[k]));
  return m;
}

// Sum of three coherent states with random centers |y|, |eta| <= 4 and
// random complex weights.
Signal random_signal(std::mt19937& rng, const GridSpec& g) {
  std::uniform_real_distribution<double> c(-4.0, 4.0), w(-1.0, 1.0);
  Signal f(g);
  for (int k = 0; k < 3; ++k) {
    const auto s = coherent_state(c(rng), c(rng), g);
    const Complex weight(w(rng), w(rng));
    for (std::size_t j = 0; j < g.Nx; ++j) f.values[j] += weight * s.values[j];
  }
  return f;
}

}  // namespace

TEST_CASE("bargmann_forward: zero and Gaussian input") {
  const auto zero = bargmann_forward(Signal(kGrid));
  CHECK(zero.sup_norm() == 0.0);

  // By completing the square, T[exp(-y^2/2)] = c sqrt(pi) exp(-(x^2+xi^2)/4) exp(i x xi/2)
  // with c sqrt(pi) = 2^{-1/2} pi^{-1/4}.
  const auto v = bargmann_forward(sample(kGrid, [](double y) { return std::exp(-y * y / 2); }));
  const double expect_c = 1.0 / (std::sqrt(2.0) * std::pow(pi, 0.25));
  double max_rel = 0.0;
  for (std::size_t m = 0; m < kGrid.Nxi; ++m)
    for (std::size_t j = 0; j < kGrid.Nx; ++j) {
      const double x = kGrid.x(j), xi = kGrid.xi(m);
      const Complex shape = std::polar(std::exp(-(x * x + xi * xi) / 4), x * xi / 2);
      if (std::abs(shape) < 1e-6) continue;
      max_rel = std::max(max_rel, std::abs(v.at(j, m) / shape - expect_c) / expect_c);
    }
  CHECK(max_rel < 1e-10);
}

TEST_CASE("bargmann_forward: modulation moves the peak in xi") {
  const auto v = bargmann_forward(
      sample(kGrid, [](double y) { return std::polar(std::exp(-y * y / 2), 3.0 * y); }));
  std::size_t bj = 0, bm = 0;
  for (std::size_t m = 0; m < kGrid.Nxi; ++m)
    for (std::size_t j = 0; j < kGrid.Nx; ++j)
      if (std::abs(v.at(j, m)) > std::abs(v.at(bj, bm))) bj = j, bm = m;
  CHECK(std::abs(kGrid.x(bj) - 0.0) <= kGrid.dx());
  CHECK(std::abs(kGrid.xi(bm) - 3.0) <= kGrid.dxi());
}

TEST_CASE("bargmann_forward: fast convolution matches direct quadrature") {
  std::mt19937 rng(1);
  for (int k = 0; k < 3; ++k) {
    const auto f = random_signal(rng, kGrid);
    const auto fast = bargmann_forward(f);
    const auto direct = bargmann_forward_direct(f);
    CHECK(sup_diff(fast, direct) < 1e-10);
    const auto back = bargmann_inverse(fast);
    const auto back_direct = bargmann_inverse_direct(fast);
    CHECK(rel_error(back, back_direct) < 1e-10);
  }
}

TEST_CASE("bargmann_inverse: round trips") {
  CHECK(bargmann_inverse(PhaseField(kGrid)).norm() == 0.0);
  const auto g = sample(kGrid, [](double y) { return std::exp(-y * y / 2); });
  CHECK(rel_error(bargmann_inverse(bargmann_forward(g)), g) < 1e-6);
  const auto cs = coherent_state(1.0, -2.0, kGrid);
  CHECK(rel_error(bargmann_inverse(bargmann_forward(cs)), cs) < 1e-6);
}

TEST_CASE("cr_residual") {
  CHECK(cr_residual(PhaseField(kGrid)).sup_norm == 0.0);
  CHECK(cr_residual(PhaseField(kGrid)).rel_norm == 0.0);

  const auto v = bargmann_forward(sample(kGrid, [](double y) { return std::exp(-y * y / 2); }));
  CHECK(cr_residual(v).rel_norm < 1e-6);

  PhaseField one(kGrid);
  for (auto& z : one.values) z = 1.0;
  const auto r = cr_residual(one);
  double worst = 0.0;
  for (std::size_t m = 0; m < kGrid.Nxi; ++m)
    for (std::size_t j = 0; j < kGrid.Nx; ++j)
      worst = std::max(worst, std::abs(r.field.at(j, m) - Complex(0.0, kGrid.xi(m))));
  CHECK(worst < 1e-12);
  CHECK(r.rel_norm > 0.5);
}

TEST_CASE("coherent_state") {
  const auto c0 = coherent_state(0.0, 0.0, kGrid);
  CHECK(std::abs(c0.norm() - 1.0) < 1e-10);
  for (std::size_t j = 0; j < kGrid.Nx; ++j) {
    const double x = kGrid.x(j);
    CHECK(std::abs(c0.values[j] - std::pow(pi, -0.25) * std::exp(-x * x / 2)) < 1e-15);
  }
  const auto c2 = coherent_state(2.0, 0.0, kGrid);
  CHECK(std::abs(std::abs(inner_product(c0, c2)) - std::exp(-1.0)) < 1e-10);
  // Overlap oracle e^{-|Delta|^2/4} with a frequency offset too.
  const auto c3 = coherent_state(1.0, 1.0, kGrid);
  CHECK(std::abs(std::abs(inner_product(c0, c3)) - std::exp(-0.5)) < 1e-10);

  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int k = 0; k < 20; ++k) CHECK(std::abs(coherent_state(u(rng), u(rng), kGrid).norm() - 1.0) < 1e-10);

  CHECK_THROWS_AS(coherent_state(8.5, 0.0, kGrid), Error);
  try {
    coherent_state(0.0, -9.0, kGrid);
    FAIL("expected OutOfWindow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kOutOfWindow);
  }
}

TEST_CASE("boundary checks") {
  Signal flat(kGrid);
  for (auto& z : flat.values) z = 1.0;
  try {
    bargmann_forward(flat);
    FAIL("expected BoundaryMass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBoundaryMass);
  }
  Warnings w;
  bargmann_forward(coherent_state(8.0, 0.0, kGrid), &w);
  CHECK(w.size() == 1);
  w.clear();
  bargmann_forward(coherent_state(0.0, 0.0, kGrid), &w);
  CHECK(w.empty());

  PhaseField flat_field(kGrid);
  for (auto& z : flat_field.values) z = 1.0;
  CHECK_THROWS_AS(bargmann_inverse(flat_field), Error);
  Signal bad(kGrid);
  bad.values[10] = Complex(NAN, 0.0);
  CHECK_THROWS_AS(bargmann_forward(bad), Error);
}

TEST_CASE("property: isometry, inversion and CR relation on random signals") {
  std::mt19937 rng(2026);
  for (int k = 0; k < 20; ++k) {
    const auto f = random_signal(rng, kGrid);
    const auto v = bargmann_forward(f);
    CHECK(std::abs(v.norm() / f.norm() - 1.0) < 1e-6);
    CHECK(rel_error(bargmann_inverse(v), f) < 1e-6);
    CHECK(cr_residual(v).rel_norm < 1e-4);
  }
}

TEST_CASE("property: T T* reproduces the Gaussian kernel") {
  const std::pair<std::size_t, std::size_t> nodes[] = {{128, 128}, {100, 150}, {160, 96}};
  for (const auto& [j, m] : nodes) {
    const auto col = reproducing_column(kGrid, j, m);
    const double y = kGrid.x(j), eta = kGrid.xi(m);
    // Fit the single constant at the peak, then compare pointwise.
    const Complex fitted = col.at(j, m) / reproducing_kernel(y, eta, y, eta);
    CHECK(std::abs(fitted - 1.0) < 1e-8);
    const double peak = std::abs(reproducing_kernel(y, eta, y, eta));
    double worst = 0.0;
    for (std::size_t mm = 0; mm < kGrid.Nxi; ++mm)
      for (std::size_t jj = 0; jj < kGrid.Nx; ++jj) {
        const Complex k = reproducing_kernel(kGrid.x(jj), kGrid.xi(mm), y, eta);
        if (std::abs(k) < 1e-6 * peak) continue;
        worst = std::max(worst, std::abs(col.at(jj, mm) - fitted * k) / std::abs(fitted * k));
      }
    CHECK(worst < 1e-4);
  }
}
