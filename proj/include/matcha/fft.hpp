#pragma once

// Thin RAII layer over FFTW for complex transforms of any rank.

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <mutex>
#include <vector>

#include "matcha/errors.hpp"

namespace matcha {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Buffer aligned for FFTW.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n) : n_(n), p_(fftw_alloc_complex(n)) {
    if (!p_) throw NumericError("FFTW allocation failed");
    std::memset(static_cast<void*>(p_), 0, n * sizeof(fftw_complex));
  }
  ~FftBuffer() { fftw_free(p_); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::size_t size() const { return n_; }
  fftw_complex* raw() { return p_; }
  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(p_); }
  const std::complex<double>* data() const { return reinterpret_cast<const std::complex<double>*>(p_); }
  std::complex<double>& operator[](std::size_t i) { return data()[i]; }
  void zero() { std::memset(static_cast<void*>(p_), 0, n_ * sizeof(fftw_complex)); }

 private:
  std::size_t n_;
  fftw_complex* p_;
};

/// In-place complex DFT plan. sign = FFTW_FORWARD computes sum x e^{-2 pi i k n / N}.
/// execute(buf) is safe to call concurrently on distinct FFTW-allocated buffers.
class FftPlan {
 public:
  FftPlan(std::vector<int> dims, int sign) : dims_(std::move(dims)) {
    std::size_t total = 1;
    for (int d : dims_) total *= std::size_t(d);
    FftBuffer probe(total);
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft(int(dims_.size()), dims_.data(), probe.raw(), probe.raw(), sign, FFTW_ESTIMATE);
    if (!plan_) throw NumericError("FFTW planning failed");
    size_ = total;
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return size_; }
  void execute(FftBuffer& b) const {
    if (b.size() != size_) throw ConfigError("FFT buffer size does not match plan");
    fftw_execute_dft(plan_, b.raw(), b.raw());
  }

 private:
  std::vector<int> dims_;
  std::size_t size_ = 0;
  fftw_plan plan_ = nullptr;
};

}  // namespace matcha
