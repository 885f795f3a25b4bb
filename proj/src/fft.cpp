#include "phaseflow/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>
#include <vector>

#include "phaseflow/error.hpp"

namespace phaseflow {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "FFT length must be positive");
  std::vector<std::complex<double>> scratch(n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, flags);
  backward_plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, flags);
}

Fft::~Fft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (backward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

Fft::Fft(Fft&& other) noexcept
    : n_(other.n_), forward_plan_(other.forward_plan_), backward_plan_(other.backward_plan_) {
  other.forward_plan_ = nullptr;
  other.backward_plan_ = nullptr;
}

void Fft::forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw Error(ErrorKind::kInvalidArgument, "FFT length mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), buf, buf);
}

void Fft::backward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw Error(ErrorKind::kInvalidArgument, "FFT length mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), buf, buf);
}

double fft_frequency(std::size_t k, std::size_t n, double step) {
  const double kk = k < (n + 1) / 2 ? static_cast<double>(k)
                                    : static_cast<double>(k) - static_cast<double>(n);
  return 2.0 * std::numbers::pi * kk / (static_cast<double>(n) * step);
}

}  // namespace phaseflow
