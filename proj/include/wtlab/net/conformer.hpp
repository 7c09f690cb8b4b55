#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wtlab/net/grads.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"

namespace wtlab::nn {

struct ConformerConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t conv_kernel = 31;
  double dropout = 0.2;
};

// Batch of N sequences of length L with D features, rows ordered (n, l).
template <typename T>
struct Sequences {
  std::size_t n = 0, len = 0;
  Mat<T> x;
};

// Per-head attention weights, [n * heads] matrices of L x L.
template <typename T>
using AttentionMaps = std::vector<Mat<T>>;

// Half-FFN, MHSA (no positional term), conv module, half-FFN, final norm.
template <typename T>
struct ConformerBlock {
  std::string prefix;
  ConformerConfig cfg;

  std::string name(const std::string& leaf) const { return prefix + "." + leaf; }

  static void add_linear(ParameterStore<T>& s, const std::string& n, std::size_t out,
                         std::size_t in) {
    s.add(n + ".weight", {out, in}, Init::uniform, fan_in_bound(in));
    s.add(n + ".bias", {out}, Init::uniform, fan_in_bound(in));
  }
  static void add_norm(ParameterStore<T>& s, const std::string& n, std::size_t d) {
    s.add(n + ".gamma", {d}, Init::ones);
    s.add(n + ".beta", {d}, Init::zeros);
  }

  static ConformerBlock create(ParameterStore<T>& store, const std::string& prefix,
                               const ConformerConfig& cfg) {
    require(cfg.heads > 0 && cfg.dim % cfg.heads == 0, "conformer: ", cfg.heads,
            " heads do not divide dim ", cfg.dim);
    require(cfg.conv_kernel % 2 == 1, "conformer conv kernel must be odd, got ", cfg.conv_kernel);
    ConformerBlock b{prefix, cfg};
    const std::size_t D = cfg.dim, H = cfg.ffn_mult * D;
    for (const char* f : {"ffn1", "ffn2"}) {
      add_norm(store, b.name(std::string(f) + ".norm"), D);
      add_linear(store, b.name(std::string(f) + ".up"), H, D);
      add_linear(store, b.name(std::string(f) + ".down"), D, H);
    }
    add_norm(store, b.name("mhsa.norm"), D);
    add_linear(store, b.name("mhsa.qkv"), 3 * D, D);
    add_linear(store, b.name("mhsa.out"), D, D);
    add_norm(store, b.name("conv.norm"), D);
    add_linear(store, b.name("conv.pw1"), 2 * D, D);
    store.add(b.name("conv.dw.weight"), {D, cfg.conv_kernel}, Init::uniform,
              fan_in_bound(cfg.conv_kernel));
    store.add(b.name("conv.dw.bias"), {D}, Init::uniform, fan_in_bound(cfg.conv_kernel));
    add_linear(store, b.name("conv.pw2"), D, D);
    add_norm(store, b.name("final_norm"), D);
    return b;
  }

  Mat<T> lin(const ParameterStore<T>& s, const Mat<T>& x, const std::string& n) const {
    return linear(x, s.get(name(n + ".weight")), s.get(name(n + ".bias")));
  }
  void norm(const ParameterStore<T>& s, Mat<T>& x, const std::string& n) const {
    layer_norm(x, s.get(name(n + ".gamma")), s.get(name(n + ".beta")));
  }
  void drop(Mat<T>& x, const Context& ctx) const {
    dropout(std::span<T>(x.data(), static_cast<std::size_t>(x.size())), cfg.dropout, ctx);
  }

  Mat<T> ffn(const ParameterStore<T>& s, const Mat<T>& x, const std::string& f,
             const Context& ctx) const {
    Mat<T> h = x;
    norm(s, h, f + ".norm");
    h = lin(s, h, f + ".up");
    h = h.unaryExpr([](T v) { return swish(v); });
    drop(h, ctx);
    h = lin(s, h, f + ".down");
    drop(h, ctx);
    return h;
  }

  Mat<T> mhsa(const ParameterStore<T>& s, const Sequences<T>& in, const Context& ctx,
              AttentionMaps<T>* maps) const {
    const std::size_t D = cfg.dim, nh = cfg.heads, dk = D / nh, L = in.len;
    Mat<T> h = in.x;
    norm(s, h, "mhsa.norm");
    const Mat<T> qkv = lin(s, h, "mhsa.qkv");
    Mat<T> ctxv(h.rows(), static_cast<Eigen::Index>(D));
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));
    const auto Le = static_cast<Eigen::Index>(L), dke = static_cast<Eigen::Index>(dk);
    if (maps) maps->clear();
    for (std::size_t n = 0; n < in.n; ++n) {
      const auto r0 = static_cast<Eigen::Index>(n * L);
      for (std::size_t hd = 0; hd < nh; ++hd) {
        const auto c0 = static_cast<Eigen::Index>(hd * dk);
        const Mat<T> q = qkv.block(r0, c0, Le, dke);
        const Mat<T> k = qkv.block(r0, static_cast<Eigen::Index>(D) + c0, Le, dke);
        const Mat<T> v = qkv.block(r0, static_cast<Eigen::Index>(2 * D) + c0, Le, dke);
        Mat<T> a = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < Le; ++i) {
          auto row = a.row(i);
          const T mx = row.maxCoeff();
          row = (row.array() - mx).exp();
          row /= row.sum();
        }
        if (maps) maps->push_back(a);
        ctxv.block(r0, c0, Le, dke).noalias() = a * v;
      }
    }
    Mat<T> out = lin(s, ctxv, "mhsa.out");
    drop(out, ctx);
    return out;
  }

  Mat<T> conv_module(const ParameterStore<T>& s, const Sequences<T>& in, const Context& ctx) const {
    const std::size_t D = cfg.dim, L = in.len, K = cfg.conv_kernel;
    const long r = static_cast<long>(K / 2);
    Mat<T> h = in.x;
    norm(s, h, "conv.norm");
    const Mat<T> p = lin(s, h, "conv.pw1");
    const auto De = static_cast<Eigen::Index>(D);
    Mat<T> glu = p.leftCols(De).array() * p.rightCols(De).unaryExpr([](T v) { return sigmoid(v); }).array();
    const auto& w = s.get(name("conv.dw.weight"));
    const auto& b = s.get(name("conv.dw.bias"));
    Mat<T> dw(glu.rows(), De);
    for (std::size_t n = 0; n < in.n; ++n) {
      for (long l = 0; l < static_cast<long>(L); ++l) {
        for (std::size_t d = 0; d < D; ++d) {
          T acc = b[d];
          for (long k = -r; k <= r; ++k) {
            const long j = l + k;
            if (j < 0 || j >= static_cast<long>(L)) continue;
            acc += w[d * K + static_cast<std::size_t>(k + r)] *
                   glu(static_cast<Eigen::Index>(n * L) + j, static_cast<Eigen::Index>(d));
          }
          dw(static_cast<Eigen::Index>(n * L) + l, static_cast<Eigen::Index>(d)) = swish(acc);
        }
      }
    }
    Mat<T> out = lin(s, dw, "conv.pw2");
    drop(out, ctx);
    return out;
  }

  Sequences<T> forward(const ParameterStore<T>& s, Sequences<T> in, const Context& ctx = {},
                       AttentionMaps<T>* maps = nullptr) const {
    require(in.x.cols() == static_cast<Eigen::Index>(cfg.dim), prefix, ": feature width ",
            in.x.cols(), " != model dim ", cfg.dim);
    require(in.x.rows() == static_cast<Eigen::Index>(in.n * in.len), prefix,
            ": row count does not match ", in.n, " sequences of length ", in.len);
    in.x += T(0.5) * ffn(s, in.x, "ffn1", ctx);
    in.x += mhsa(s, in, ctx, maps);
    in.x += conv_module(s, in, ctx);
    in.x += T(0.5) * ffn(s, in.x, "ffn2", ctx);
    norm(s, in.x, "final_norm");
    return in;
  }
};

// Time pass (frequency folded into the batch), then frequency pass (time
// folded into the batch); output = x + gamma * y.
template <typename T>
struct TfConformer {
  std::string prefix;
  ConformerBlock<T> time_block, freq_block;

  static TfConformer create(ParameterStore<T>& store, const std::string& prefix,
                            const ConformerConfig& cfg) {
    TfConformer m{prefix, ConformerBlock<T>::create(store, prefix + ".time", cfg),
                  ConformerBlock<T>::create(store, prefix + ".freq", cfg)};
    store.add(prefix + ".gamma", {1}, Init::ones);
    return m;
  }

  Tensor<T> forward(const ParameterStore<T>& store, const Tensor<T>& x, const Context& ctx = {}) const {
    require_rank4(x, "tf-conformer");
    const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), TT = x.dim(3);
    require(C == time_block.cfg.dim, prefix, ": expected ", time_block.cfg.dim,
            " channels, got ", C);
    Sequences<T> s{B * F, TT, Mat<T>(static_cast<Eigen::Index>(B * F * TT), static_cast<Eigen::Index>(C))};
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t)
            s.x(static_cast<Eigen::Index>((b * F + f) * TT + t), static_cast<Eigen::Index>(c)) = x(b, c, f, t);
    s = time_block.forward(store, std::move(s), ctx);
    Sequences<T> q{B * TT, F, Mat<T>(s.x.rows(), s.x.cols())};
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < TT; ++t)
          q.x.row(static_cast<Eigen::Index>((b * TT + t) * F + f)) =
              s.x.row(static_cast<Eigen::Index>((b * F + f) * TT + t));
    q = freq_block.forward(store, std::move(q), ctx);
    const T gamma = store.get(prefix + ".gamma")[0];
    Tensor<T> y = x;
    if (gamma == T(0)) return y;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t)
            y(b, c, f, t) += gamma * q.x(static_cast<Eigen::Index>((b * TT + t) * F + f), static_cast<Eigen::Index>(c));
    return y;
  }
};

}  // namespace wtlab::nn
