#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wtlab/eval/si_snr.hpp"
#include "wtlab/loss/loss.hpp"
#include "wtlab/net/grads.hpp"
#include "wtlab/net/lstm.hpp"
#include "wtlab/net/mca.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"
#include "wtlab/net/wtconv.hpp"
#include "wtlab/rng.hpp"

namespace wtlab::nn {

inline constexpr double kFdStep = 1e-4;
inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kLinearTolerance = 1e-6;
inline constexpr std::size_t kMinCoords = 100;
// Denominator floor: near-zero derivatives are compared on an absolute scale.
inline constexpr double kRelFloor = 1e-6;

struct GradCheckResult {
  std::string block;
  Shape input_shape;
  double max_rel_error = 0.0;
  double tolerance = kGradTolerance;
  std::size_t coords = 0;
  std::string worst;  // coordinate with the largest error, or the non-finite one
  bool finite = true;

  GradCheckResult() = default;
  GradCheckResult(std::string b, Shape s, double tol = kGradTolerance)
      : block(std::move(b)), input_shape(std::move(s)), tolerance(tol) {}

  bool passed() const { return finite && coords >= kMinCoords && max_rel_error < tolerance; }
};

inline const std::vector<std::string>& gradcheck_blocks() {
  static const std::vector<std::string> blocks{"wtconv",         "mca",    "cirm_tail",
                                               "si_snr_loss",    "l_total", "depthwise_conv"};
  return blocks;
}

namespace detail {

struct Coord {
  std::string label;
  double* value;
  double analytic;
};

// Picks up to k distinct indices of a tensor-sized range.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(std::min(n, k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline void add_coords(std::vector<Coord>& out, const std::string& label, Tensor<double>& value,
                       const Tensor<double>& grad, std::size_t k, Rng& rng) {
  for (std::size_t i : sample_indices(value.size(), k, rng)) {
    out.push_back({label + "[" + std::to_string(i) + "]", &value[i], grad[i]});
  }
}

inline void run_fd(GradCheckResult& r, const std::vector<Coord>& coords,
                   const std::function<double()>& loss) {
  r.coords = coords.size();
  for (const auto& c : coords) {
    const double v = *c.value;
    *c.value = v + kFdStep;
    const double up = loss();
    *c.value = v - kFdStep;
    const double down = loss();
    *c.value = v;
    const double numeric = (up - down) / (2.0 * kFdStep);
    if (!std::isfinite(numeric) || !std::isfinite(c.analytic)) {
      r.finite = false;
      r.worst = c.label;
      return;
    }
    const double denom = std::max({std::abs(numeric), std::abs(c.analytic), kRelFloor});
    const double err = std::abs(numeric - c.analytic) / denom;
    if (err > r.max_rel_error || r.worst.empty()) {
      r.max_rel_error = std::max(r.max_rel_error, err);
      r.worst = c.label;
    }
  }
}

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.vec()) v = scale * rng.normal();
  return t;
}

inline double probe(const Tensor<double>& y, const Tensor<double>& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
  return acc;
}

// Gathers coordinates from the input and every parameter of a store, topping
// up from the input until at least kMinCoords are present.
inline std::vector<Coord> gather(ParameterStore<double>& store, const Grads<double>& g,
                                 Tensor<double>& x, const Tensor<double>& gx, Rng& rng) {
  std::vector<Coord> coords;
  std::size_t param_coords = 0;
  for (auto& e : store.entries()) {
    if (e.buffer) continue;
    const std::size_t before = coords.size();
    add_coords(coords, e.name, e.value, g.at(e.name), 12, rng);
    param_coords += coords.size() - before;
  }
  const std::size_t want = param_coords >= kMinCoords ? 64 : kMinCoords - param_coords + 16;
  add_coords(coords, "input", x, gx, want, rng);
  return coords;
}

// Parameters start from their init, then every tensor gets a random
// perturbation so constant-initialized scales are exercised off their defaults.
inline void jitter(ParameterStore<double>& store, Rng& rng, double scale) {
  for (auto& e : store.entries()) {
    for (auto& v : e.value.vec()) v += scale * rng.normal();
  }
}

}  // namespace detail

inline GradCheckResult gradcheck_wtconv(const Shape& shape, std::uint64_t seed, std::size_t levels = 2) {
  GradCheckResult r{"wtconv", shape};
  Rng rng(mix_seed(seed, 1));
  ParameterStore<double> store(seed);
  const auto m = WtConv<double>::create(store, "wtconv", shape.at(1), levels);
  detail::jitter(store, rng, 0.1);
  Tensor<double> x = detail::random_tensor(shape, rng);
  const Tensor<double> w = detail::random_tensor(shape, rng);
  WtConv<double>::Cache cache;
  m.forward(store, x, &cache);
  Grads<double> g;
  const Tensor<double> gx = m.backward(store, cache, w, g);
  auto coords = detail::gather(store, g, x, gx, rng);
  detail::run_fd(r, coords, [&] { return detail::probe(m.forward(store, x), w); });
  return r;
}

inline GradCheckResult gradcheck_mca(const Shape& shape, std::uint64_t seed) {
  GradCheckResult r{"mca", shape};
  Rng rng(mix_seed(seed, 2));
  ParameterStore<double> store(seed);
  const auto m = Mca<double>::create(store, "mca", shape.at(1), shape.at(2), shape.at(3));
  detail::jitter(store, rng, 0.3);
  Tensor<double> x = detail::random_tensor(shape, rng);
  const Tensor<double> w = detail::random_tensor(shape, rng);
  Mca<double>::Cache cache;
  m.forward(store, x, &cache);
  Grads<double> g;
  const Tensor<double> gx = m.backward(store, cache, w, g);
  auto coords = detail::gather(store, g, x, gx, rng);
  detail::run_fd(r, coords, [&] { return detail::probe(m.forward(store, x), w); });
  return r;
}

inline GradCheckResult gradcheck_depthwise(const Shape& shape, std::uint64_t seed) {
  GradCheckResult r{"depthwise_conv", shape, kLinearTolerance};
  Rng rng(mix_seed(seed, 3));
  ParameterStore<double> store(seed);
  store.add("dw.weight", {shape.at(1), 1, 5, 5}, Init::uniform, 0.2);
  store.add("dw.bias", {shape.at(1)}, Init::uniform, 0.2);
  Tensor<double> x = detail::random_tensor(shape, rng);
  const Tensor<double> w = detail::random_tensor(shape, rng);
  auto fwd = [&] { return depthwise_conv2d(x, store.get("dw.weight"), store.get("dw.bias")); };
  Grads<double> g;
  const Tensor<double> gx = depthwise_conv2d_backward(
      x, store.get("dw.weight"), w, g("dw.weight", store.get("dw.weight").shape()),
      &g("dw.bias", {shape.at(1)}));
  auto coords = detail::gather(store, g, x, gx, rng);
  detail::run_fd(r, coords, [&] { return detail::probe(fwd(), w); });
  return r;
}

// Mask head (linear, optional K * tanh) followed by complex masking; input
// shape is [M, F, T, H] with H the head input width.
inline GradCheckResult gradcheck_cirm_tail(const Shape& shape, std::uint64_t seed,
                                           double mask_bound = 0.0) {
  GradCheckResult r{"cirm_tail", shape};
  require(shape.size() == 4, "cirm_tail expects [M, F, T, H], got ", shape_str(shape));
  const std::size_t M = shape[0], F = shape[1], TT = shape[2], H = shape[3];
  Rng rng(mix_seed(seed, 4));
  ParameterStore<double> store(seed);
  store.add("head.weight", {2 * M, H}, Init::uniform, fan_in_bound(H));
  store.add("head.bias", {2 * M}, Init::uniform, fan_in_bound(H));
  Tensor<double> h = detail::random_tensor({F * TT, H}, rng);
  Tensor<double> y_ri = detail::random_tensor({M, 2 * F, TT}, rng);
  const Tensor<double> w = detail::random_tensor({M, 2 * F, TT}, rng);

  struct Fwd {
    Mat<double> raw;
    ComplexMask mask;
    Spectrogram noisy, out;
  };
  auto fwd = [&] {
    Fwd f;
    Mat<double> hm = CMatMap<double>(h.data(), static_cast<Eigen::Index>(F * TT), static_cast<Eigen::Index>(H));
    f.raw = linear(hm, store.get("head.weight"), store.get("head.bias"));
    f.mask = ComplexMask(M, F, TT);
    f.noisy = Spectrogram(M, F, TT);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t fi = 0; fi < F; ++fi)
        for (std::size_t t = 0; t < TT; ++t) {
          const auto row = static_cast<Eigen::Index>(fi * TT + t);
          f.mask.at(m, fi, t) = {mask_squash(f.raw(row, static_cast<Eigen::Index>(m)), mask_bound),
                                 mask_squash(f.raw(row, static_cast<Eigen::Index>(M + m)), mask_bound)};
          f.noisy.at(m, fi, t) = {y_ri[(m * 2 * F + fi) * TT + t], y_ri[(m * 2 * F + F + fi) * TT + t]};
        }
    f.out = apply_cirm(f.mask, f.noisy);
    return f;
  };
  auto loss_of = [&](const Spectrogram& s) {
    double acc = 0.0;
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t fi = 0; fi < F; ++fi)
        for (std::size_t t = 0; t < TT; ++t) {
          acc += w[(m * 2 * F + fi) * TT + t] * s.at(m, fi, t).real() +
                 w[(m * 2 * F + F + fi) * TT + t] * s.at(m, fi, t).imag();
        }
    return acc;
  };

  const Fwd f = fwd();
  Spectrogram g_out(M, F, TT);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t fi = 0; fi < F; ++fi)
      for (std::size_t t = 0; t < TT; ++t)
        g_out.at(m, fi, t) = {w[(m * 2 * F + fi) * TT + t], w[(m * 2 * F + F + fi) * TT + t]};
  const CirmGrad cg = apply_cirm_backward(f.mask, f.noisy, g_out);

  Mat<double> g_raw(f.raw.rows(), f.raw.cols());
  Tensor<double> g_y({M, 2 * F, TT});
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t fi = 0; fi < F; ++fi)
      for (std::size_t t = 0; t < TT; ++t) {
        const auto row = static_cast<Eigen::Index>(fi * TT + t);
        const auto gm = cg.mask.at(m, fi, t);
        g_raw(row, static_cast<Eigen::Index>(m)) =
            gm.real() * mask_squash_grad(f.raw(row, static_cast<Eigen::Index>(m)), mask_bound);
        g_raw(row, static_cast<Eigen::Index>(M + m)) =
            gm.imag() * mask_squash_grad(f.raw(row, static_cast<Eigen::Index>(M + m)), mask_bound);
        g_y[(m * 2 * F + fi) * TT + t] = cg.noisy.at(m, fi, t).real();
        g_y[(m * 2 * F + F + fi) * TT + t] = cg.noisy.at(m, fi, t).imag();
      }
  Grads<double> g;
  const auto& W = store.get("head.weight");
  CMatMap<double> wm(W.data(), static_cast<Eigen::Index>(2 * M), static_cast<Eigen::Index>(H));
  CMatMap<double> hm(h.data(), static_cast<Eigen::Index>(F * TT), static_cast<Eigen::Index>(H));
  const Mat<double> gW = g_raw.transpose() * hm;
  const Mat<double> gh = g_raw * wm;
  auto& gw = g("head.weight", W.shape());
  std::copy_n(gW.data(), gW.size(), gw.data());
  auto& gb = g("head.bias", {2 * M});
  for (Eigen::Index j = 0; j < g_raw.cols(); ++j) gb[static_cast<std::size_t>(j)] = g_raw.col(j).sum();
  Tensor<double> gh_t({F * TT, H});
  std::copy_n(gh.data(), gh.size(), gh_t.data());

  std::vector<detail::Coord> coords;
  for (auto& e : store.entries()) detail::add_coords(coords, e.name, e.value, g.at(e.name), 24, rng);
  detail::add_coords(coords, "features", h, gh_t, 40, rng);
  detail::add_coords(coords, "noisy", y_ri, g_y, 40, rng);
  detail::run_fd(r, coords, [&] { return loss_of(fwd().out); });
  return r;
}

// Negative mean SI-SNR against a fixed target; input shape [M, N].
inline GradCheckResult gradcheck_si_snr(const Shape& shape, std::uint64_t seed) {
  GradCheckResult r{"si_snr_loss", shape};
  require(shape.size() == 2, "si_snr_loss expects [M, N], got ", shape_str(shape));
  Rng rng(mix_seed(seed, 5));
  MultichannelWaveform target(shape[0], shape[1]), enh(shape[0], shape[1]);
  for (std::size_t m = 0; m < shape[0]; ++m)
    for (std::size_t n = 0; n < shape[1]; ++n) {
      target.at(m, n) = rng.normal();
      enh.at(m, n) = target.at(m, n) + 0.5 * rng.normal();
    }
  const auto g = l_ns_grad(enh, target);
  std::vector<detail::Coord> coords;
  const auto n_total = shape[0] * shape[1];
  for (std::size_t i : detail::sample_indices(n_total, std::max<std::size_t>(kMinCoords, 128), rng)) {
    const std::size_t m = i / shape[1], n = i % shape[1];
    coords.push_back({"enhanced[" + std::to_string(m) + "," + std::to_string(n) + "]", &enh.at(m, n),
                      g.at(m, n)});
  }
  detail::run_fd(r, coords, [&] { return l_ns(enh, target); });
  return r;
}

// Total loss derivatives with respect to (L_ns, L_ps, log sigma1, log sigma2)
// at 25 random operating points per weighting form.
inline GradCheckResult gradcheck_l_total(std::uint64_t seed) {
  GradCheckResult r{"l_total", {4}};
  Rng rng(mix_seed(seed, 6));
  for (bool literal : {false, true}) {
    for (int k = 0; k < 25; ++k) {
      double v[4] = {rng.uniform(-20.0, 5.0), rng.uniform(0.0, 0.2), rng.uniform(-1.0, 1.0),
                     rng.uniform(-1.0, 1.0)};
      auto value = [&] {
        return l_total(v[0], v[1], LossWeights{v[2], v[3], literal});
      };
      const auto g = l_total_grad(v[0], v[1], LossWeights{v[2], v[3], literal});
      const double an[4] = {g.d_lns, g.d_lps, g.d_log_sigma1, g.d_log_sigma2};
      static const char* names[4] = {"l_ns", "l_ps", "log_sigma1", "log_sigma2"};
      std::vector<detail::Coord> coords;
      for (int i = 0; i < 4; ++i) {
        coords.push_back({std::string(literal ? "literal." : "") + names[i], &v[i], an[i]});
      }
      GradCheckResult part;
      detail::run_fd(part, coords, value);
      r.coords += part.coords;
      r.finite = r.finite && part.finite;
      if (part.max_rel_error >= r.max_rel_error) {
        r.max_rel_error = part.max_rel_error;
        r.worst = part.worst;
      }
    }
  }
  return r;
}

inline Shape default_gradcheck_shape(const std::string& block) {
  if (block == "wtconv") return {1, 4, 16, 16};
  if (block == "mca") return {1, 8, 10, 12};
  if (block == "cirm_tail") return {8, 6, 5, 12};
  if (block == "si_snr_loss") return {8, 256};
  if (block == "depthwise_conv") return {1, 3, 9, 11};
  if (block == "l_total") return {4};
  fail("unknown gradcheck block '", block, "'");
}

inline GradCheckResult grad_check(const std::string& block, const Shape& shape, std::uint64_t seed,
                                  double mask_bound = 0.0) {
  if (block == "wtconv") return gradcheck_wtconv(shape, seed);
  if (block == "mca") return gradcheck_mca(shape, seed);
  if (block == "cirm_tail") return gradcheck_cirm_tail(shape, seed, mask_bound);
  if (block == "si_snr_loss") return gradcheck_si_snr(shape, seed);
  if (block == "depthwise_conv") return gradcheck_depthwise(shape, seed);
  if (block == "l_total") return gradcheck_l_total(seed);
  fail("unknown gradcheck block '", block, "'; expected one of wtconv, mca, cirm_tail, "
       "si_snr_loss, l_total, depthwise_conv");
}

}  // namespace wtlab::nn
