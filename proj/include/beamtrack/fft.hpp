#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace beamtrack {

/// Iterative radix-2 FFT for power-of-two sizes. Twiddles and the
/// bit-reversal permutation are precomputed once per plan; the same plan can
/// be shared by any number of threads since transforms only touch caller
/// buffers.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0) {
      throw std::invalid_argument("Fft: size must be a power of two");
    }
    rev_.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < log2n; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
      }
      rev_[i] = r;
    }
    roots_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      double a = -2.0 * 3.141592653589793238462643383279502884 *
                 static_cast<double>(k) / static_cast<double>(n);
      roots_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  /// X[k] = sum_n x[n] e^{-i 2 pi k n / N}
  void forward(std::complex<double>* x) const { transform(x, false); }

  /// x[t] = sum_k X[k] e^{+i 2 pi k t / N}   (no 1/N factor)
  void inverse(std::complex<double>* x) const { transform(x, true); }

 private:
  void transform(std::complex<double>* x, bool inv) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          std::complex<double> w = roots_[k * stride];
          if (inv) w = std::conj(w);
          std::complex<double> a = x[start + k];
          std::complex<double> b = x[start + k + len / 2] * w;
          x[start + k] = a + b;
          x[start + k + len / 2] = a - b;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<std::complex<double>> roots_;
};

/// One-sided spectrum (N/2+1 bins) of a real frame.
inline std::vector<std::complex<double>> real_spectrum(const double* frame,
                                                       std::size_t n,
                                                       const Fft& plan) {
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = frame[i];
  plan.forward(buf.data());
  buf.resize(n / 2 + 1);
  return buf;
}

/// Evaluates r[tau] = scale * Re( sum_{k=0}^{N-1} S(k) e^{+i 2 pi k tau / N} )
/// where S is the Hermitian extension of the one-sided spectrum `half`
/// (N/2+1 bins). Output has N entries, circular in tau.
inline void half_spectrum_inverse(const std::vector<std::complex<double>>& half,
                                  double* out, std::size_t n, const Fft& plan,
                                  double scale) {
  std::vector<std::complex<double>> full(n);
  full[0] = half[0];
  full[n / 2] = half[n / 2];
  for (std::size_t k = 1; k < n / 2; ++k) {
    full[k] = half[k];
    full[n - k] = std::conj(half[k]);
  }
  plan.inverse(full.data());
  for (std::size_t t = 0; t < n; ++t) out[t] = scale * full[t].real();
}

}  // namespace beamtrack
