#pragma once

// Fully-connected auto-encoder with a self-expression layer between encoder
// and decoder, plus a softmax classifier head reading the latent codes.
// Samples are columns throughout: X is d x n, Z is latent x n.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "pssc/binio.hpp"
#include "pssc/errors.hpp"
#include "pssc/linalg.hpp"

namespace pssc {

struct LayerParams {
  Mat W;                  // out x in
  std::vector<double> b;  // out

  std::size_t in() const noexcept { return W.cols(); }
  std::size_t out() const noexcept { return W.rows(); }
  bool operator==(const LayerParams&) const = default;
};

struct PsscParams {
  std::vector<LayerParams> encoder;
  std::vector<LayerParams> decoder;
  Mat C;  // n x n self-expression coefficients, zero diagonal
  LayerParams classifier;

  // Encoder widths, input first, latent last.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    if (encoder.empty()) return w;
    w.push_back(encoder.front().in());
    for (const auto& l : encoder) w.push_back(l.out());
    return w;
  }
  std::size_t n() const noexcept { return C.rows(); }
  std::size_t num_classes() const noexcept { return classifier.out(); }
  std::size_t latent_dim() const noexcept { return encoder.empty() ? 0 : encoder.back().out(); }

  bool operator==(const PsscParams&) const = default;
};

// Gradients share the parameter layout.
using Grads = PsscParams;

// Every trainable tensor as a flat span, in a fixed order: encoder (W, b per
// layer), decoder (W, b per layer), C, classifier W, classifier b.
inline std::vector<std::span<double>> param_blocks(PsscParams& p) {
  std::vector<std::span<double>> out;
  for (auto& l : p.encoder) {
    out.emplace_back(l.W.data());
    out.emplace_back(l.b);
  }
  for (auto& l : p.decoder) {
    out.emplace_back(l.W.data());
    out.emplace_back(l.b);
  }
  out.emplace_back(p.C.data());
  out.emplace_back(p.classifier.W.data());
  out.emplace_back(p.classifier.b);
  return out;
}

inline std::vector<std::span<const double>> param_blocks(const PsscParams& p) {
  std::vector<std::span<const double>> out;
  for (auto& blk : param_blocks(const_cast<PsscParams&>(p))) out.emplace_back(blk);
  return out;
}

inline PsscParams zeros_like(const PsscParams& p) {
  PsscParams z = p;
  for (auto blk : param_blocks(z)) std::fill(blk.begin(), blk.end(), 0.0);
  return z;
}

inline void zero_diagonal(Mat& c) {
  for (std::size_t i = 0; i < std::min(c.rows(), c.cols()); ++i) c(i, i) = 0.0;
}

inline double max_abs_diagonal(const Mat& c) {
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(c.rows(), c.cols()); ++i) m = std::max(m, std::abs(c(i, i)));
  return m;
}

namespace detail {

inline LayerParams init_layer(std::size_t in, std::size_t out, SeededRng& rng) {
  // LeCun-uniform: variance 1/fan_in.
  const double bound = std::sqrt(3.0 / static_cast<double>(in));
  return LayerParams{random_uniform(out, in, rng, -bound, bound), std::vector<double>(out, 0.0)};
}

}  // namespace detail

inline constexpr double kCoeffInitStd = 1e-4;

inline PsscParams init_params(std::span<const std::size_t> widths, std::size_t n, std::size_t num_classes,
                              SeededRng& rng) {
  detail::require(widths.size() >= 2, "init_params: need at least input and latent widths");
  for (std::size_t w : widths) detail::require(w > 0, "init_params: zero layer width");
  detail::require(n >= 2, "init_params: need n >= 2");
  detail::require(num_classes >= 2, "init_params: need K >= 2");

  PsscParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    p.encoder.push_back(detail::init_layer(widths[l], widths[l + 1], rng));
  for (std::size_t l = widths.size() - 1; l > 0; --l)
    p.decoder.push_back(detail::init_layer(widths[l], widths[l - 1], rng));
  p.classifier = detail::init_layer(widths.back(), num_classes, rng);
  p.C = random_normal(n, n, rng, kCoeffInitStd);
  zero_diagonal(p.C);
  return p;
}

enum class ForwardMode { pretrain, full };

struct ForwardCache {
  ForwardMode mode = ForwardMode::full;
  std::vector<Mat> enc_in, enc_pre;  // per encoder layer: input and W·h + b
  Mat Z;                             // latent x n
  Mat ZC;                            // Z·C (full mode only)
  std::vector<Mat> dec_in, dec_pre;
  Mat Xhat;                          // d x n
  Mat logits;                        // K x n
  Mat F;                             // n x K, row-wise softmax

  const Mat& decoder_input() const { return dec_in.front(); }
};

inline Mat affine(const LayerParams& l, const Mat& h) {
  detail::require(h.rows() == l.in(), "layer input has " + std::to_string(h.rows()) +
                                          " rows, expected " + std::to_string(l.in()));
  Mat a = matmul(l.W, h);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (double& v : a.row(r)) v += l.b[r];
  return a;
}

inline Mat relu(Mat a) {
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

namespace detail {

// Runs a stack with ReLU on every layer but the last.
inline Mat run_stack(const std::vector<LayerParams>& layers, Mat h, std::vector<Mat>& ins,
                     std::vector<Mat>& pres) {
  ins.clear();
  pres.clear();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ins.push_back(h);
    Mat a = affine(layers[l], h);
    pres.push_back(a);
    h = l + 1 < layers.size() ? relu(std::move(a)) : std::move(a);
  }
  return h;
}

}  // namespace detail

inline Mat encode(const PsscParams& p, const Mat& x) {
  std::vector<Mat> ins, pres;
  return detail::run_stack(p.encoder, x, ins, pres);
}

inline ForwardCache forward(const PsscParams& p, const Mat& x, ForwardMode mode) {
  detail::require(!p.encoder.empty(), "forward: empty encoder");
  detail::require(x.rows() == p.encoder.front().in(),
                  "forward: X has " + std::to_string(x.rows()) + " features, model expects " +
                      std::to_string(p.encoder.front().in()));
  if (mode == ForwardMode::full)
    detail::require(x.cols() == p.n(), "forward: X has " + std::to_string(x.cols()) +
                                           " samples but C is " + shape_str(p.C));
  ForwardCache c;
  c.mode = mode;
  c.Z = detail::run_stack(p.encoder, x, c.enc_in, c.enc_pre);
  Mat u = c.Z;
  if (mode == ForwardMode::full) {
    c.ZC = matmul(c.Z, p.C);
    u = c.ZC;
  }
  c.Xhat = detail::run_stack(p.decoder, std::move(u), c.dec_in, c.dec_pre);
  c.logits = affine(p.classifier, c.Z);
  c.F = softmax_rows(transpose(c.logits));
  return c;
}

struct PseudoLabels {
  std::vector<std::size_t> y;     // argmax class per sample
  std::vector<double> p;          // its probability
  std::vector<std::uint8_t> V;    // 1 when p >= thres
  double thres = 0.8;

  std::size_t confident() const {
    std::size_t c = 0;
    for (auto v : V) c += v;
    return c;
  }
};

inline PseudoLabels pseudo_labels(const Mat& f, double thres) {
  PseudoLabels out;
  out.thres = thres;
  out.y.resize(f.rows());
  out.p.resize(f.rows());
  out.V.resize(f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < f.cols(); ++k)
      if (f(i, k) > f(i, best)) best = k;
    out.y[i] = best;
    out.p[i] = f(i, best);
    out.V[i] = out.p[i] >= thres ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file, little-endian:
//   "PSCK"  u32 version (1)
//   u64 L (number of encoder widths), then L x u64 widths (input .. latent)
//   u64 n, u64 K
//   f64 payload: for each encoder layer W (row-major) then b; the same for
//   each decoder layer; C (n x n, row-major); classifier W then b.

inline constexpr std::string_view kCheckpointMagic = "PSCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const PsscParams& p) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  binio::put_u32(os, kCheckpointVersion);
  const auto w = p.widths();
  binio::put_u64(os, w.size());
  for (auto v : w) binio::put_u64(os, v);
  binio::put_u64(os, p.n());
  binio::put_u64(os, p.num_classes());
  for (auto blk : param_blocks(p))
    for (double v : blk) binio::put_f64(os, v);
}

inline PsscParams read_checkpoint(std::istream& is) {
  binio::Reader r(is);
  r.expect_magic(kCheckpointMagic);
  const std::size_t vat = r.offset();
  if (r.u32("version") != kCheckpointVersion) throw IngestionError("unsupported checkpoint version", vat);
  const std::size_t wat = r.offset();
  const std::uint64_t nw = r.u64("width count");
  if (nw < 2 || nw > 64) throw IngestionError("implausible width count", wat);
  std::vector<std::size_t> widths(nw);
  for (auto& w : widths) {
    const std::size_t at = r.offset();
    w = r.u64("width");
    if (w == 0 || w > (1u << 24)) throw IngestionError("implausible layer width", at);
  }
  const std::size_t nat = r.offset();
  const std::uint64_t n = r.u64("n");
  const std::uint64_t k = r.u64("K");
  if (n < 2 || n > (1u << 20) || k < 2 || k > (1u << 20)) throw IngestionError("implausible n or K", nat);

  SeededRng dummy(0);
  PsscParams p = init_params(widths, n, k, dummy);
  for (auto blk : param_blocks(p)) {
    for (double& v : blk) {
      const std::size_t at = r.offset();
      v = r.f64("parameters");
      if (!std::isfinite(v)) throw IngestionError("non-finite parameter", at);
    }
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const PsscParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, p);
}

inline PsscParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open " + path, 0);
  return read_checkpoint(is);
}

}  // namespace pssc
