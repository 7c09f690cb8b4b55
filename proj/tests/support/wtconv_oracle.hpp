#pragma once

#include <string>

#include <Eigen/Dense>

#include "wtlab/net/params.hpp"

namespace wtlab::testing {

using Dense = Eigen::MatrixXd;

// 1-D orthonormal Haar: rows [0, n/2) low-pass, [n/2, n) high-pass.
inline Dense haar_1d(std::size_t n, bool high) {
  Dense a = Dense::Zero(static_cast<Eigen::Index>(n / 2), static_cast<Eigen::Index>(n));
  const double s = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < n / 2; ++i) {
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * i)) = s;
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * i + 1)) = high ? -s : s;
  }
  return a;
}

inline Dense kron(const Dense& a, const Dense& b) {
  Dense out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Subband k of an n x n map (row-major vec): LL, LH (high along rows), HL, HH.
inline Dense band_op(std::size_t n, std::size_t k) {
  const bool hi_rows = k == 1 || k == 3, hi_cols = k == 2 || k == 3;
  return kron(haar_1d(n, hi_rows), haar_1d(n, hi_cols));
}

// Zero-padded "same" 2-D correlation with a 5x5 kernel as a dense matrix.
inline Dense conv_op(std::size_t n, const double* k) {
  const auto N = static_cast<Eigen::Index>(n * n);
  Dense d = Dense::Zero(N, N);
  for (long i = 0; i < static_cast<long>(n); ++i)
    for (long j = 0; j < static_cast<long>(n); ++j)
      for (long a = -2; a <= 2; ++a)
        for (long b = -2; b <= 2; ++b) {
          const long ii = i + a, jj = j + b;
          if (ii < 0 || jj < 0 || ii >= static_cast<long>(n) || jj >= static_cast<long>(n)) continue;
          d(i * static_cast<long>(n) + j, ii * static_cast<long>(n) + jj) = k[(a + 2) * 5 + (b + 2)];
        }
  return d;
}

// Two-level WTConv of x [1, C, n, n] (n divisible by 4) assembled from dense
// Haar and convolution matrices.
inline std::vector<double> dense_wtconv_l2(const ParameterStore<double>& store,
                                           const std::string& p, const Tensor<double>& x) {
  const std::size_t C = x.dim(1), n = x.dim(2), h = n / 2, q = n / 4;
  const auto& bw = store.get(p + ".base.weight");
  const auto& bb = store.get(p + ".base.bias");
  const auto& bs = store.get(p + ".base.scale");
  const auto& w0 = store.get(p + ".level0.weight");
  const auto& s0 = store.get(p + ".level0.scale");
  const auto& w1 = store.get(p + ".level1.weight");
  const auto& s1 = store.get(p + ".level1.scale");
  const auto N = static_cast<Eigen::Index>(n * n), H = static_cast<Eigen::Index>(h * h);
  std::vector<double> y(C * n * n);
  for (std::size_t c = 0; c < C; ++c) {
    Dense rec1 = Dense::Zero(H, H);  // level 1 maps the level-0 LL back to itself
    for (std::size_t k = 0; k < 4; ++k) {
      const Dense a = band_op(h, k);
      rec1 += a.transpose() * (s1[4 * c + k] * conv_op(q, w1.data() + (4 * c + k) * 25)) * a;
    }
    Dense op = bs[c] * conv_op(n, bw.data() + c * 25);
    for (std::size_t k = 0; k < 4; ++k) {
      const Dense a = band_op(n, k);
      Dense inner = s0[4 * c + k] * conv_op(h, w0.data() + (4 * c + k) * 25);
      if (k == 0) inner += rec1;
      op += a.transpose() * inner * a;
    }
    Eigen::VectorXd xv(N);
    for (Eigen::Index i = 0; i < N; ++i) xv[i] = x[c * n * n + static_cast<std::size_t>(i)];
    const Eigen::VectorXd yv = op * xv + Eigen::VectorXd::Constant(N, bs[c] * bb[c]);
    for (Eigen::Index i = 0; i < N; ++i) y[c * n * n + static_cast<std::size_t>(i)] = yv[i];
  }
  return y;
}

}  // namespace wtlab::testing
