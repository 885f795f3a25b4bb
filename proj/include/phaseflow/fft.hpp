#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace phaseflow {

/// In-place complex DFT of a fixed length, backed by FFTW. Plans are built
/// once (under a global lock, FFTW's planner is not reentrant); transform()
/// may then be called concurrently from many threads on distinct buffers.
///
/// forward:  X[k] = sum_j x[j] exp(-2 pi i jk/n)
/// backward: x[j] = sum_k X[k] exp(+2 pi i jk/n)   (unnormalized)
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept;
  Fft& operator=(Fft&&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data) const;
  void backward(std::span<std::complex<double>> data) const;

 private:
  std::size_t n_;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

/// Angular frequency of DFT bin k for samples spaced by `step`:
/// 2 pi k' / (n step) with k' = k for k < n/2 and k - n otherwise.
double fft_frequency(std::size_t k, std::size_t n, double step);

}  // namespace phaseflow
