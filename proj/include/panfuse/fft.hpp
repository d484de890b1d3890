#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <new>
#include <stdexcept>
#include <vector>

namespace panfuse::detail {

// FFTW plan creation is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_malloc(n)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

/// Unnormalized DCT-II: y_k = 2 * sum_j x_j cos(pi k (2j+1) / (2n)).
inline std::vector<double> dct2(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("dct2: empty input");
  FftwBuffer in(sizeof(double) * n), out(sizeof(double) * n);
  double* pin = static_cast<double*>(in.ptr);
  double* pout = static_cast<double*>(out.ptr);
  std::copy(x.begin(), x.end(), pin);

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_r2r_1d(static_cast<int>(n), pin, pout, FFTW_REDFT10,
                            FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  if (!plan) throw std::runtime_error("dct2: fftw plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return std::vector<double>(pout, pout + n);
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Full linear convolution, length a.size() + b.size() - 1, via zero-padded
/// real FFTs.
inline std::vector<double> convolve_full(const std::vector<double>& a,
                                         const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("convolve_full: empty input");
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  const std::size_t nc = n / 2 + 1;

  FftwBuffer real_buf(sizeof(double) * n);
  FftwBuffer ca_buf(sizeof(fftw_complex) * nc), cb_buf(sizeof(fftw_complex) * nc);
  double* real = static_cast<double*>(real_buf.ptr);
  fftw_complex* ca = static_cast<fftw_complex*>(ca_buf.ptr);
  fftw_complex* cb = static_cast<fftw_complex*>(cb_buf.ptr);

  fftw_plan fwd_a, fwd_b, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_a = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, ca, FFTW_ESTIMATE);
    fwd_b = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, cb, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), ca, real, FFTW_ESTIMATE);
  }
  if (!fwd_a || !fwd_b || !bwd) throw std::runtime_error("convolve_full: fftw plan creation failed");

  std::fill(real, real + n, 0.0);
  std::copy(a.begin(), a.end(), real);
  fftw_execute(fwd_a);
  std::fill(real, real + n, 0.0);
  std::copy(b.begin(), b.end(), real);
  fftw_execute(fwd_b);

  for (std::size_t i = 0; i < nc; ++i) {
    const double re = ca[i][0] * cb[i][0] - ca[i][1] * cb[i][1];
    const double im = ca[i][0] * cb[i][1] + ca[i][1] * cb[i][0];
    ca[i][0] = re;
    ca[i][1] = im;
  }
  fftw_execute(bwd);

  std::vector<double> out(out_len);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = real[i] * scale;

  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_b);
    fftw_destroy_plan(bwd);
  }
  return out;
}

}  // namespace panfuse::detail
