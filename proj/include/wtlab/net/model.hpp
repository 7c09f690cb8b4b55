#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "wtlab/net/conformer.hpp"
#include "wtlab/net/lstm.hpp"
#include "wtlab/net/mca.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"
#include "wtlab/net/wtconv.hpp"
#include "wtlab/signal/stft.hpp"

namespace wtlab::nn {

struct ModelConfig {
  std::size_t mics = 8;
  std::size_t bins = 161;    // nominal F
  std::size_t frames = 401;  // nominal T, sizes the MCA time kernel
  std::array<std::size_t, 3> widths{24, 48, 64};
  std::array<std::array<std::size_t, 2>, 3> kernels{{{6, 2}, {7, 2}, {7, 2}}};  // (freq, time)
  std::array<std::size_t, 2> stride{2, 1};
  std::array<std::size_t, 3> freq_pads{2, 2, 3};
  std::size_t time_pad = 1;  // causal, left only
  std::array<std::size_t, 3> enc_wt_levels{2, 1, 1};
  std::array<std::size_t, 3> dec_wt_levels{1, 1, 2};  // dec3, dec2, dec1
  std::size_t wt_kernel = 5;
  std::size_t decoder_out = 16;
  double dropout = 0.2;
  ConformerConfig conformer{};
  McaPooling mca_pooling = McaPooling::avg_std;
  std::size_t lstm_hidden = 208;
  double mask_bound = 0.0;  // > 0 selects K * tanh(v / K)
  std::uint64_t seed = 0;

  void validate() const {
    for (auto w : widths) require(w > 0, "model: channel widths must be positive");
    require(mics > 0 && decoder_out > 0 && lstm_hidden > 0, "model: sizes must be positive");
    require(conformer.heads > 0 && conformer.dim % conformer.heads == 0, "model: ",
            conformer.heads, " heads do not divide conformer dim ", conformer.dim);
    require(widths[2] == conformer.dim, "model: bottleneck width ", widths[2],
            " must equal conformer dim ", conformer.dim);
    require(stride[1] == 1, "model: time stride must be 1, got ", stride[1]);
    require(dropout >= 0.0 && dropout < 1.0, "model: dropout must be in [0, 1), got ", dropout);
  }
};

// Frequency extents through the encoder, and the transposed-conv output
// padding that brings each decoder stage back to its skip size.
struct ShapePlan {
  std::array<std::size_t, 4> enc_freq{};   // input, after enc1, enc2, enc3
  std::array<std::size_t, 3> out_pad{};    // dec1, dec2, dec3
};

inline ShapePlan shape_plan(const ModelConfig& cfg, std::size_t packed_freq) {
  ShapePlan p;
  p.enc_freq[0] = packed_freq;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t in = p.enc_freq[s] + 2 * cfg.freq_pads[s];
    require(in >= cfg.kernels[s][0], "model stage enc", s + 1, ": frequency extent ",
            p.enc_freq[s], " is smaller than the kernel");
    p.enc_freq[s + 1] = (in - cfg.kernels[s][0]) / cfg.stride[0] + 1;
  }
  for (std::size_t s = 0; s < 3; ++s) {
    const long base = static_cast<long>((p.enc_freq[s + 1] - 1) * cfg.stride[0] + cfg.kernels[s][0]) -
                      2 * static_cast<long>(cfg.freq_pads[s]);
    const long op = static_cast<long>(p.enc_freq[s]) - base;
    require(op >= 0 && op < static_cast<long>(cfg.stride[0]), "model stage dec", s + 1,
            ": cannot restore frequency extent ", p.enc_freq[s], " from ", p.enc_freq[s + 1]);
    p.out_pad[s] = static_cast<std::size_t>(op);
  }
  return p;
}

// Conv2d (or transposed) -> batch norm -> dropout -> PReLU -> WTConv.
template <typename T>
struct WtBlock {
  std::string prefix;
  bool transposed = false;
  std::size_t in = 0, out = 0, kf = 0, kt = 0, stride_f = 1, pad_f = 0, pad_t = 0;
  double drop_p = 0.0;
  WtConv<T> wt;

  std::string name(const std::string& leaf) const { return prefix + "." + leaf; }

  static WtBlock create(ParameterStore<T>& store, const std::string& prefix, bool transposed,
                        std::size_t in, std::size_t out, std::array<std::size_t, 2> kernel,
                        std::size_t stride_f, std::size_t pad_f, std::size_t pad_t,
                        std::size_t levels, std::size_t wt_kernel, double dropout) {
    WtBlock b{prefix, transposed, in, out, kernel[0], kernel[1], stride_f, pad_f, pad_t, dropout, {}};
    const std::size_t fan_in = (transposed ? out : in) * kernel[0] * kernel[1];
    const Shape w = transposed ? Shape{in, out, kernel[0], kernel[1]} : Shape{out, in, kernel[0], kernel[1]};
    store.add(b.name("conv.weight"), w, Init::uniform, fan_in_bound(fan_in));
    store.add(b.name("conv.bias"), {out}, Init::uniform, fan_in_bound(fan_in));
    store.add(b.name("bn.gamma"), {out}, Init::ones);
    store.add(b.name("bn.beta"), {out}, Init::zeros);
    store.add(b.name("bn.running_mean"), {out}, Init::zeros, 0.0, true);
    store.add(b.name("bn.running_var"), {out}, Init::ones, 0.0, true);
    store.add(b.name("prelu.slope"), {out}, Init::constant, 0.25);
    b.wt = WtConv<T>::create(store, b.name("wtconv"), out, levels, wt_kernel);
    return b;
  }

  Tensor<T> forward(const ParameterStore<T>& s, const Tensor<T>& x, const Context& ctx,
                    std::size_t out_pad = 0) const {
    require_rank4(x, prefix.c_str());
    require(x.dim(1) == in, "model stage ", prefix, ": expected ", in, " channels, got ", x.dim(1));
    Tensor<T> y;
    if (transposed) {
      y = conv_transpose2d(x, s.get(name("conv.weight")), s.get(name("conv.bias")), stride_f, 1,
                           pad_f, 0, out_pad, 0);
      y = crop_time(y, x.dim(3));
    } else {
      y = conv2d(x, s.get(name("conv.weight")), s.get(name("conv.bias")), stride_f, 1,
                 Pad2d{pad_f, pad_f, pad_t, 0});
    }
    batch_norm(y, s.get(name("bn.gamma")), s.get(name("bn.beta")), s.get(name("bn.running_mean")),
               s.get(name("bn.running_var")), ctx);
    dropout(y.span(), drop_p, ctx);
    prelu(y, s.get(name("prelu.slope")));
    return wt.forward(s, y);
  }
};

template <typename T>
struct ModelOutput {
  Spectrogram enhanced;
  ComplexMask mask;
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg), store_(cfg.seed) {
    cfg_.validate();
    const auto plan = shape_plan(cfg_, 2 * cfg_.bins);
    const std::array<std::size_t, 4> ch{cfg_.mics, cfg_.widths[0], cfg_.widths[1], cfg_.widths[2]};
    const std::array<std::size_t, 3> dec_out{cfg_.decoder_out, cfg_.widths[0], cfg_.widths[1]};
    for (std::size_t s = 0; s < 3; ++s) {
      enc_[s] = WtBlock<T>::create(store_, "enc" + std::to_string(s + 1), false, ch[s], ch[s + 1],
                                   cfg_.kernels[s], cfg_.stride[0], cfg_.freq_pads[s],
                                   cfg_.time_pad, cfg_.enc_wt_levels[s], cfg_.wt_kernel,
                                   cfg_.dropout);
      mca_[s] = Mca<T>::create(store_, "mca" + std::to_string(s + 1), ch[s + 1],
                               plan.enc_freq[s + 1], cfg_.frames, cfg_.mca_pooling);
    }
    tfc_ = TfConformer<T>::create(store_, "tfconformer", conformer_cfg());
    for (std::size_t s = 3; s-- > 0;) {
      dec_[s] = WtBlock<T>::create(store_, "dec" + std::to_string(s + 1), true, 2 * ch[s + 1],
                                   dec_out[s], cfg_.kernels[s], cfg_.stride[0], cfg_.freq_pads[s],
                                   0, cfg_.dec_wt_levels[2 - s], cfg_.wt_kernel, cfg_.dropout);
    }
    maskgen_ = MaskGenerator<T>::create(store_, "maskgen", cfg_.decoder_out, cfg_.lstm_hidden,
                                        cfg_.mics, cfg_.mask_bound);
    store_.add("loss.log_sigma1", {1}, Init::zeros);
    store_.add("loss.log_sigma2", {1}, Init::zeros);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }
  const MaskGenerator<T>& mask_generator() const { return maskgen_; }

  // Decoder output [B, C_d, 2F, T] for packed input [B, M, 2F, T].
  Tensor<T> decode(const Tensor<T>& packed, const Context& ctx = {}) const {
    require_rank4(packed, "model input");
    require(packed.dim(1) == cfg_.mics, "model input: expected ", cfg_.mics, " channels, got ",
            packed.dim(1));
    const auto plan = shape_plan(cfg_, packed.dim(2));
    std::array<Tensor<T>, 3> enc;
    const Tensor<T>* cur = &packed;
    for (std::size_t s = 0; s < 3; ++s) {
      enc[s] = enc_[s].forward(store_, *cur, ctx);
      require(enc[s].dim(2) == plan.enc_freq[s + 1] && enc[s].dim(3) == packed.dim(3),
              "model stage enc", s + 1, ": produced ", shape_str(enc[s].shape()));
      cur = &enc[s];
    }
    Tensor<T> d = tfc_.forward(store_, enc[2], ctx);
    for (std::size_t s = 3; s-- > 0;) {
      const Tensor<T> skip = mca_[s].forward(store_, enc[s]);
      require(skip.dim(2) == d.dim(2) && skip.dim(3) == d.dim(3), "model stage dec", s + 1,
              ": skip ", shape_str(skip.shape()), " does not match ", shape_str(d.shape()));
      d = dec_[s].forward(store_, concat_channels(d, skip), ctx, plan.out_pad[s]);
      const std::size_t want = s == 0 ? packed.dim(2) : enc[s - 1].dim(2);
      require(d.dim(2) == want && d.dim(3) == packed.dim(3), "model stage dec", s + 1,
              ": produced ", shape_str(d.shape()), ", expected frequency extent ", want);
    }
    return d;
  }

  ComplexMask mask(const Spectrogram& noisy, const Context& ctx = {}) const {
    const Tensor<T> packed = pack_ri<T>(noisy);
    return unpack_ri(maskgen_.forward(store_, decode(packed, ctx)), noisy.params());
  }

  ModelOutput<T> forward(const Spectrogram& noisy, const Context& ctx = {}) const {
    require(noisy.channels() == cfg_.mics, "model: expected ", cfg_.mics, " channels, got ",
            noisy.channels());
    ModelOutput<T> out;
    out.mask = mask(noisy, ctx);
    out.enhanced = apply_cirm(out.mask, noisy);
    return out;
  }

 private:
  ConformerConfig conformer_cfg() const {
    ConformerConfig c = cfg_.conformer;
    c.dropout = cfg_.dropout;
    return c;
  }

  ModelConfig cfg_;
  ParameterStore<T> store_;
  std::array<WtBlock<T>, 3> enc_{}, dec_{};
  std::array<Mca<T>, 3> mca_{};
  TfConformer<T> tfc_;
  MaskGenerator<T> maskgen_;
};

template <typename T>
ModelOutput<T> model_forward(const Model<T>& model, const Spectrogram& noisy, const Context& ctx = {}) {
  return model.forward(noisy, ctx);
}

}  // namespace wtlab::nn
