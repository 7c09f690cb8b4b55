#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace wtlab {

using cdouble = std::complex<double>;

// Thin wrapper over Eigen's FFT. One engine per thread keeps the plan cache
// private, so the functions below are safe to call concurrently.
namespace fft {

inline Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> e;
  return e;
}

// One-sided spectrum (n/2 + 1 bins) of a real frame; zero-pads to nfft.
inline void rfft(const std::vector<double>& in, std::vector<cdouble>& out, std::size_t nfft) {
  auto& e = engine();
  e.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  if (in.size() == nfft) {
    e.fwd(out, in);
  } else {
    std::vector<double> padded(nfft, 0.0);
    std::copy_n(in.begin(), std::min(in.size(), nfft), padded.begin());
    e.fwd(out, padded);
  }
}

// Inverse of rfft; output has nfft real samples, scaled by 1/nfft.
inline void irfft(const std::vector<cdouble>& in, std::vector<double>& out, std::size_t nfft) {
  auto& e = engine();
  e.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  e.inv(out, in, static_cast<Eigen::Index>(nfft));
}

inline void cfft(const std::vector<cdouble>& in, std::vector<cdouble>& out) {
  auto& e = engine();
  e.ClearFlag(Eigen::FFT<double>::HalfSpectrum);
  e.fwd(out, in);
}

inline void icfft(const std::vector<cdouble>& in, std::vector<cdouble>& out) {
  auto& e = engine();
  e.ClearFlag(Eigen::FFT<double>::HalfSpectrum);
  e.inv(out, in);
}

// Smallest 2^a 3^b 5^c that is >= n.
inline std::size_t fast_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
      std::size_t v = p3;
      while (v < n || v % 2) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

// Linear convolution truncated to out_len samples.
inline std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h,
                                    std::size_t out_len) {
  std::vector<double> y(out_len, 0.0);
  if (x.empty() || h.empty() || out_len == 0) return y;
  // Only the nonzero span of h matters; sparse responses shift a short kernel.
  std::size_t lead = 0, tail = std::min(h.size(), out_len);
  while (lead < tail && h[lead] == 0.0) ++lead;
  while (tail > lead && h[tail - 1] == 0.0) --tail;
  if (lead == tail) return y;
  const std::size_t xl = std::min(x.size(), out_len - lead);
  const std::size_t hl = tail - lead;
  const std::size_t span = std::min(out_len - lead, xl + hl - 1);
  double* out = y.data() + lead;
  if (hl <= 16) {
    for (std::size_t k = 0; k < hl; ++k) {
      const double hk = h[lead + k];
      if (hk == 0.0) continue;
      for (std::size_t n = k; n < span && n - k < xl; ++n) out[n] += hk * x[n - k];
    }
    return y;
  }
  const std::size_t n = fast_size(xl + hl - 1);
  std::vector<double> xs(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(xl));
  std::vector<double> hs(h.begin() + static_cast<std::ptrdiff_t>(lead),
                         h.begin() + static_cast<std::ptrdiff_t>(tail));
  std::vector<cdouble> X, H;
  rfft(xs, X, n);
  rfft(hs, H, n);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  std::vector<double> full;
  irfft(X, full, n);
  std::copy_n(full.begin(), span, out);
  return y;
}

// Convolves one fixed signal with many kernels, caching the signal spectrum
// for each transform size seen.
class Convolver {
 public:
  Convolver(const std::vector<double>& x, std::size_t out_len)
      : x_(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(std::min(x.size(), out_len))),
        out_len_(out_len) {}

  std::vector<double> operator()(const std::vector<double>& h) {
    std::vector<double> y(out_len_, 0.0);
    std::size_t lead = 0, tail = std::min(h.size(), out_len_);
    while (lead < tail && h[lead] == 0.0) ++lead;
    while (tail > lead && h[tail - 1] == 0.0) --tail;
    if (lead == tail || x_.empty()) return y;
    const std::size_t hl = tail - lead;
    const std::size_t n = fast_size(x_.size() + hl - 1);
    if (n != n_) {
      rfft(x_, X_, n);
      n_ = n;
    }
    std::vector<double> hs(h.begin() + static_cast<std::ptrdiff_t>(lead),
                           h.begin() + static_cast<std::ptrdiff_t>(tail));
    std::vector<cdouble> H;
    rfft(hs, H, n);
    for (std::size_t k = 0; k < H.size(); ++k) H[k] *= X_[k];
    std::vector<double> full;
    irfft(H, full, n);
    const std::size_t span = std::min(out_len_ - std::min(lead, out_len_), x_.size() + hl - 1);
    std::copy_n(full.begin(), span, y.begin() + static_cast<std::ptrdiff_t>(lead));
    return y;
  }

 private:
  std::vector<double> x_;
  std::size_t out_len_;
  std::size_t n_ = 0;
  std::vector<cdouble> X_;
};

}  // namespace fft
}  // namespace wtlab
