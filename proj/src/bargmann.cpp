#include "phaseflow/bargmann.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "phaseflow/error.hpp"
#include "phaseflow/fft.hpp"
#include "phaseflow/parallel.hpp"

namespace phaseflow {

namespace {

using std::numbers::pi;

// Linear (non-periodic) convolution with exp(-(d dx)^2/2) on Nx samples,
// zero-padded to 2 Nx so the circular product does not wrap.
class GaussConvolution {
 public:
  explicit GaussConvolution(const GridSpec& g) : n_(g.Nx), fft_(2 * g.Nx), kernel_(2 * g.Nx) {
    const std::size_t p = 2 * n_;
    const double dx = g.dx();
    for (std::size_t d = 0; d < n_; ++d) {
      const double w = std::exp(-0.5 * (d * dx) * (d * dx));
      kernel_[d] = w;
      if (d > 0) kernel_[p - d] = w;
    }
    fft_.forward(kernel_);
    for (auto& k : kernel_) k /= static_cast<double>(p);
  }

  // out[j] = sum_l g(j - l) in[l]
  void apply(const Complex* in, Complex* out) const {
    std::vector<Complex> buf(2 * n_);
    std::copy(in, in + n_, buf.begin());
    fft_.forward(buf);
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= kernel_[k];
    fft_.backward(buf);
    std::copy(buf.begin(), buf.begin() + n_, out);
  }

 private:
  std::size_t n_;
  Fft fft_;
  std::vector<Complex> kernel_;
};

std::vector<double> gauss_table(const GridSpec& g) {
  std::vector<double> t(g.Nx);
  for (std::size_t d = 0; d < g.Nx; ++d) t[d] = std::exp(-0.5 * (d * g.dx()) * (d * g.dx()));
  return t;
}

// Phase row e^{i xi_m x_j}, j = 0..Nx-1.
std::vector<Complex> phase_row(const GridSpec& g, std::size_t m, double sign) {
  std::vector<Complex> row(g.Nx);
  for (std::size_t j = 0; j < g.Nx; ++j) row[j] = std::polar(1.0, sign * g.xi(m) * g.x(j));
  return row;
}

std::string ratio_text(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", r);
  return buf;
}

void check_signal(const Signal& f, Warnings* warnings) {
  f.grid.validate();
  if (f.values.size() != f.grid.Nx)
    throw Error(ErrorKind::kInvalidArgument, "signal length does not match grid Nx");
  for (const Complex& z : f.values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw Error(ErrorKind::kInvalidArgument, "signal has non-finite samples");
  const double mass = boundary_mass(f);
  if (mass > kBoundaryMassLimit)
    throw Error(ErrorKind::kBoundaryMass,
                "signal carries " + ratio_text(mass) + " of its mass at the window edge");
  const double edge = edge_ratio(f);
  if (warnings && edge > kSignalEdgeWarning)
    warnings->push_back("signal edge/peak ratio " + ratio_text(edge) + " exceeds 1e-12");
}

void check_field_shape(const PhaseField& v) {
  v.grid.validate();
  if (v.values.size() != v.grid.Nx * v.grid.Nxi)
    throw Error(ErrorKind::kInvalidArgument, "phase field shape does not match grid");
  for (const Complex& z : v.values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw Error(ErrorKind::kInvalidArgument, "phase field has non-finite samples");
}

void check_field(const PhaseField& v, Warnings* warnings) {
  check_field_shape(v);
  const double mass = boundary_mass(v);
  if (mass > kBoundaryMassLimit)
    throw Error(ErrorKind::kBoundaryMass,
                "phase field carries " + ratio_text(mass) + " of its mass at the window edge");
  const double edge = edge_ratio(v);
  if (warnings && edge > kFieldEdgeWarning)
    warnings->push_back("phase field edge/peak ratio " + ratio_text(edge) + " exceeds 1e-10");
}

// Spectral derivative of n samples spaced by h, modes above n/3 removed.
void spectral_derivative(const Fft& fft, std::vector<Complex>& buf, double h) {
  const std::size_t n = buf.size();
  fft.forward(buf);
  for (std::size_t k = 0; k < n; ++k) {
    const long long kk = k < (n + 1) / 2 ? static_cast<long long>(k)
                                         : static_cast<long long>(k) - static_cast<long long>(n);
    if (3 * std::llabs(kk) > static_cast<long long>(n) || 2 * std::llabs(kk) == static_cast<long long>(n))
      buf[k] = 0.0;
    else
      buf[k] *= Complex(0.0, fft_frequency(k, n, h)) / static_cast<double>(n);
  }
  fft.backward(buf);
}

double constant() { return std::pow(2.0, -0.5) * std::pow(pi, -0.75); }

PhaseField forward_rows(const Signal& f) {
  const GridSpec& g = f.grid;
  PhaseField v(g);
  const GaussConvolution conv(g);
  const double scale = constant() * g.dx();
  parallel_for(g.Nxi, [&](std::size_t m) {
    const auto in_phase = phase_row(g, m, -1.0);
    std::vector<Complex> h(g.Nx);
    for (std::size_t l = 0; l < g.Nx; ++l) h[l] = in_phase[l] * f.values[l];
    Complex* row = &v.at(0, m);
    conv.apply(h.data(), row);
    for (std::size_t j = 0; j < g.Nx; ++j) row[j] *= scale * std::conj(in_phase[j]);
  });
  return v;
}

}  // namespace

double bargmann_constant() { return constant(); }

PhaseField bargmann_forward(const Signal& f, Warnings* warnings) {
  check_signal(f, warnings);
  return forward_rows(f);
}

PhaseField bargmann_forward_direct(const Signal& f) {
  check_signal(f, nullptr);
  const GridSpec& g = f.grid;
  PhaseField v(g);
  const auto gauss = gauss_table(g);
  const double scale = bargmann_constant() * g.dx();
  for (std::size_t m = 0; m < g.Nxi; ++m) {
    const auto e = phase_row(g, m, 1.0);
    for (std::size_t j = 0; j < g.Nx; ++j) {
      Complex s = 0.0;
      for (std::size_t l = 0; l < g.Nx; ++l)
        s += gauss[j > l ? j - l : l - j] * e[j] * std::conj(e[l]) * f.values[l];
      v.at(j, m) = scale * s;
    }
  }
  return v;
}

Signal bargmann_inverse(const PhaseField& v, Warnings* warnings) {
  check_field(v, warnings);
  const GridSpec& g = v.grid;
  const GaussConvolution conv(g);
  std::vector<Complex> rows(g.Nx * g.Nxi);
  parallel_for(g.Nxi, [&](std::size_t m) {
    const auto out_phase = phase_row(g, m, 1.0);
    std::vector<Complex> w(g.Nx);
    for (std::size_t j = 0; j < g.Nx; ++j) w[j] = std::conj(out_phase[j]) * v.at(j, m);
    Complex* r = &rows[m * g.Nx];
    conv.apply(w.data(), r);
    for (std::size_t l = 0; l < g.Nx; ++l) r[l] *= out_phase[l];
  });
  Signal f(g);
  const double scale = bargmann_constant() * g.dx() * g.dxi();
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t l = 0; l < g.Nx; ++l) f.values[l] += rows[m * g.Nx + l];
  for (auto& z : f.values) z *= scale;
  return f;
}

Signal bargmann_inverse_direct(const PhaseField& v) {
  check_field(v, nullptr);
  const GridSpec& g = v.grid;
  const auto gauss = gauss_table(g);
  Signal f(g);
  for (std::size_t m = 0; m < g.Nxi; ++m) {
    const auto e = phase_row(g, m, 1.0);
    for (std::size_t l = 0; l < g.Nx; ++l) {
      Complex s = 0.0;
      for (std::size_t j = 0; j < g.Nx; ++j)
        s += gauss[j > l ? j - l : l - j] * e[l] * std::conj(e[j]) * v.at(j, m);
      f.values[l] += s;
    }
  }
  const double scale = bargmann_constant() * g.dx() * g.dxi();
  for (auto& z : f.values) z *= scale;
  return f;
}

CrResidual cr_residual(const PhaseField& v) {
  check_field_shape(v);
  const GridSpec& g = v.grid;
  PhaseField dx(g), dxi(g);
  const Fft fx(g.Nx), fxi(g.Nxi);
  parallel_for(g.Nxi, [&](std::size_t m) {
    std::vector<Complex> buf(&v.at(0, m), &v.at(0, m) + g.Nx);
    spectral_derivative(fx, buf, g.dx());
    std::copy(buf.begin(), buf.end(), &dx.at(0, m));
  });
  parallel_for(g.Nx, [&](std::size_t j) {
    std::vector<Complex> buf(g.Nxi);
    for (std::size_t m = 0; m < g.Nxi; ++m) buf[m] = v.at(j, m);
    spectral_derivative(fxi, buf, g.dxi());
    for (std::size_t m = 0; m < g.Nxi; ++m) dxi.at(j, m) = buf[m];
  });
  CrResidual out{PhaseField(g)};
  double num = 0.0, den = 0.0;
  const Complex i(0.0, 1.0);
  for (std::size_t m = 0; m < g.Nxi; ++m)
    for (std::size_t j = 0; j < g.Nx; ++j) {
      const Complex rhs = dx.at(j, m) - i * g.xi(m) * v.at(j, m);
      const Complex r = i * dxi.at(j, m) - rhs;
      out.field.at(j, m) = r;
      num += std::norm(r);
      den += std::norm(rhs);
    }
  out.sup_norm = out.field.sup_norm();
  out.rel_norm = den == 0.0 ? (num == 0.0 ? 0.0 : INFINITY) : std::sqrt(num / den);
  return out;
}

Signal coherent_state(double y, double eta, const GridSpec& grid) {
  grid.validate();
  if (!std::isfinite(y) || !std::isfinite(eta) || std::abs(y) + 4.0 > grid.L ||
      std::abs(eta) + 4.0 > grid.Xi)
    throw Error(ErrorKind::kOutOfWindow,
                "coherent state center (" + ratio_text(y) + ", " + ratio_text(eta) +
                    ") needs 4 units of margin inside the grid windows");
  Signal f(grid);
  const double c = std::pow(pi, -0.25);
  for (std::size_t j = 0; j < grid.Nx; ++j) {
    const double d = grid.x(j) - y;
    f.values[j] = c * std::exp(-0.5 * d * d) * std::polar(1.0, eta * d);
  }
  return f;
}

PhaseField reproducing_column(const GridSpec& grid, std::size_t j, std::size_t m) {
  grid.validate();
  if (j >= grid.Nx || m >= grid.Nxi)
    throw Error(ErrorKind::kInvalidArgument, "reproducing column index outside the grid");
  // T* of the discrete delta, in closed form; forwarded without the mass
  // check so columns near the edge remain available.
  Signal f(grid);
  const auto gauss = gauss_table(grid);
  for (std::size_t l = 0; l < grid.Nx; ++l)
    f.values[l] = constant() * gauss[j > l ? j - l : l - j] *
                  std::polar(1.0, grid.xi(m) * (grid.x(l) - grid.x(j)));
  return forward_rows(f);
}

Complex reproducing_kernel(double x, double xi, double y, double eta) {
  const double amp = std::exp(-0.25 * ((x - y) * (x - y) + (xi - eta) * (xi - eta))) / (2.0 * pi);
  return std::polar(amp, 0.5 * (x - y) * (xi + eta));
}

}  // namespace phaseflow
