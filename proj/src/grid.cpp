#include "phaseflow/grid.hpp"

#include <algorithm>
#include <cmath>

#include "phaseflow/error.hpp"

namespace phaseflow {

void GridSpec::validate() const {
  auto bad = [](const char* msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (!(L > 0.0) || !std::isfinite(L)) bad("grid: L must be positive");
  if (!(Xi > 0.0) || !std::isfinite(Xi)) bad("grid: Xi must be positive");
  if (Nx < 8 || Nxi < 8) bad("grid: Nx and Nxi must be at least 8");
  if ((Nx & (Nx - 1)) != 0) bad("grid: Nx must be a power of two");
}

double Signal::norm() const {
  double s = 0.0;
  for (const Complex& v : values) s += std::norm(v);
  return std::sqrt(s * grid.dx());
}

Complex inner_product(const Signal& f, const Signal& g) {
  Complex s = 0.0;
  for (std::size_t j = 0; j < f.values.size(); ++j) s += std::conj(f.values[j]) * g.values[j];
  return s * f.grid.dx();
}

double PhaseField::norm() const {
  double s = 0.0;
  for (const Complex& v : values) s += std::norm(v);
  return std::sqrt(s * grid.dx() * grid.dxi());
}

double PhaseField::sup_norm() const {
  double m = 0.0;
  for (const Complex& v : values) m = std::max(m, std::abs(v));
  return m;
}

namespace {
bool on_edge(std::size_t k, std::size_t n, std::size_t width) {
  return k < width || k + width >= n;
}
}  // namespace

double boundary_mass(const Signal& f, std::size_t width) {
  const std::size_t n = f.values.size();
  double total = 0.0, edge = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = std::norm(f.values[k]);
    total += e;
    if (on_edge(k, n, width)) edge += e;
  }
  return total == 0.0 ? 0.0 : edge / total;
}

double edge_ratio(const Signal& f, std::size_t width) {
  const std::size_t n = f.values.size();
  double peak = 0.0, edge = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::abs(f.values[k]);
    peak = std::max(peak, a);
    if (on_edge(k, n, width)) edge = std::max(edge, a);
  }
  return peak == 0.0 ? 0.0 : edge / peak;
}

double boundary_mass(const PhaseField& v, std::size_t width) {
  const std::size_t nx = v.grid.Nx, nxi = v.grid.Nxi;
  double total = 0.0, edge = 0.0;
  for (std::size_t m = 0; m < nxi; ++m)
    for (std::size_t j = 0; j < nx; ++j) {
      const double e = std::norm(v.at(j, m));
      total += e;
      if (on_edge(j, nx, width) || on_edge(m, nxi, width)) edge += e;
    }
  return total == 0.0 ? 0.0 : edge / total;
}

double edge_ratio(const PhaseField& v, std::size_t width) {
  const std::size_t nx = v.grid.Nx, nxi = v.grid.Nxi;
  double peak = 0.0, edge = 0.0;
  for (std::size_t m = 0; m < nxi; ++m)
    for (std::size_t j = 0; j < nx; ++j) {
      const double a = std::abs(v.at(j, m));
      peak = std::max(peak, a);
      if (on_edge(j, nx, width) || on_edge(m, nxi, width)) edge = std::max(edge, a);
    }
  return peak == 0.0 ? 0.0 : edge / peak;
}

}  // namespace phaseflow
