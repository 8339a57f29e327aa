#pragma once

// Loss terms of the joint objective and their reverse-mode gradients.
//
//   total = ‖X − X̂‖² + 2⟨L_n, XᵀX̂⟩ + γ1‖Z − ZC‖² + γ2 L_graph + γ3 L_label
//
// L_n and the pseudo-graph S̄ are functions of C, so unless the graph is
// frozen their gradients flow back into C through
//   C → S = ½(|C| + |C|ᵀ) → (S_n, L_n) → S̄ = S_n / max(S_n).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pssc/errors.hpp"
#include "pssc/graph.hpp"
#include "pssc/linalg.hpp"
#include "pssc/model.hpp"

namespace pssc {

struct LossConfig {
  double gamma1 = 1.0;
  double gamma2 = 0.1;
  double gamma3 = 0.1;
  double margin = 1.0;
  bool freeze_laplacian = false;     // treat L_n and S̄ as constants
  bool normalize_pair_losses = true; // mean over pairs / confident samples
  double degree_eps = kDegreeEps;
};

struct LossBreakdown {
  double recon = 0.0;     // ‖X − X̂‖²
  double locality = 0.0;  // 2⟨L_n, XᵀX̂⟩
  double selfexpr = 0.0;  // ‖Z − ZC‖²
  double graph = 0.0;
  double label = 0.0;
  double total = 0.0;
};

inline constexpr double kLogClamp = 1e-12;

inline double loss_recon(const Mat& x, const Mat& xhat) {
  detail::require(x.same_shape(xhat), "loss_recon: X is " + shape_str(x) + ", X̂ is " + shape_str(xhat));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x.data()[i] - xhat.data()[i];
    s += e * e;
  }
  return s;
}

// 2⟨L_n, XᵀX̂⟩ alone.
inline double locality_term(const Mat& x, const Mat& xhat, const Mat& ln) {
  detail::require(x.same_shape(xhat), "locality: X is " + shape_str(x) + ", X̂ is " + shape_str(xhat));
  detail::require(ln.is_square() && ln.rows() == x.cols(),
                  "locality: L_n is " + shape_str(ln) + " for " + std::to_string(x.cols()) + " samples");
  return 2.0 * frob_dot(ln, matmul_tn(x, xhat));
}

// ‖X − X̂‖² + 2 Tr(Xᵀ L_n X̂), samples as columns.
inline double loss_locality(const Mat& x, const Mat& xhat, const Mat& ln) {
  detail::require(is_symmetric(ln, 1e-10 * std::max(1.0, max_abs(ln))), "loss_locality: L_n not symmetric");
  return loss_recon(x, xhat) + locality_term(x, xhat, ln);
}

inline double loss_selfexpr(const Mat& z, const Mat& c) {
  detail::require(c.is_square() && c.rows() == z.cols(),
                  "loss_selfexpr: C is " + shape_str(c) + " for Z " + shape_str(z));
  detail::require(max_abs_diagonal(c) == 0.0, "loss_selfexpr: diag(C) must be zero");
  return frob_norm_sq(z - matmul(z, c));
}

namespace detail {

inline void check_pseudo_graph(const Mat& f, const Mat& sbar) {
  require(sbar.is_square() && sbar.rows() == f.rows(),
          "loss_graph: S̄ is " + shape_str(sbar) + " for " + std::to_string(f.rows()) + " samples");
  for (double v : sbar.data())
    require(v >= 0.0 && v <= 1.0, "loss_graph: S̄ entry " + std::to_string(v) + " outside [0,1]");
}

inline double pair_count(std::size_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

// Accumulates d/dF (scaled) into gf and, when gsbar is non-null, d/dS̄ into
// its upper triangle. Returns the unscaled pair sum.
inline double graph_pairs(const Mat& f, const Mat& sbar, double margin, double scale, Mat* gf, Mat* gsbar) {
  const std::size_t n = f.rows();
  const std::size_t k = f.cols();
  std::vector<double> diff(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        diff[t] = f(i, t) - f(j, t);
        d2 += diff[t] * diff[t];
      }
      const double d = std::sqrt(d2);
      const double hinge = std::max(0.0, margin - d);
      const double s = sbar(i, j);
      sum += s * d2 + (1.0 - s) * hinge * hinge;
      if (gsbar) (*gsbar)(i, j) += scale * (d2 - hinge * hinge);
      if (gf) {
        double coef = 2.0 * s;
        if (hinge > 0.0 && d > 0.0) coef -= 2.0 * (1.0 - s) * hinge / d;
        coef *= scale;
        for (std::size_t t = 0; t < k; ++t) {
          (*gf)(i, t) += coef * diff[t];
          (*gf)(j, t) -= coef * diff[t];
        }
      }
    }
  }
  return sum;
}

inline double label_normalizer(const PseudoLabels& labels, bool normalize) {
  return normalize ? std::max<double>(1.0, static_cast<double>(labels.confident())) : 1.0;
}

}  // namespace detail

// Soft-weighted contrastive pair loss over i < j, by default averaged over
// the n(n−1)/2 pairs.
inline double loss_graph(const Mat& f, const Mat& sbar, double margin, bool normalize = true) {
  detail::check_pseudo_graph(f, sbar);
  const std::size_t n = f.rows();
  if (n < 2) return 0.0;
  const double sum = detail::graph_pairs(f, sbar, margin, 1.0, nullptr, nullptr);
  return normalize ? sum / detail::pair_count(n) : sum;
}

// Masked cross-entropy against the pseudo-labels, by default averaged over
// the confident samples.
inline double loss_label(const Mat& f, const PseudoLabels& labels, bool normalize = true) {
  detail::require(labels.y.size() == f.rows() && labels.V.size() == f.rows(),
                  "loss_label: label count does not match F rows");
  double s = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i)
    if (labels.V[i]) s -= std::log(std::max(f(i, labels.y[i]), kLogClamp));
  return s / detail::label_normalizer(labels, normalize);
}

namespace detail {

// Backward through a stack built by run_stack. Returns d/d(stack input) when
// want_input_grad is set, else an empty matrix.
inline Mat backward_stack(const std::vector<LayerParams>& layers, const std::vector<Mat>& ins,
                          const std::vector<Mat>& pres, Mat g, std::vector<LayerParams>& grads,
                          bool want_input_grad) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      const Mat& pre = pres[l];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(pre.data()[i] > 0.0)) g.data()[i] = 0.0;
    }
    grads[l].W += matmul_nt(g, ins[l]);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double s = 0.0;
      for (double v : g.row(r)) s += v;
      grads[l].b[r] += s;
    }
    if (l > 0 || want_input_grad) g = matmul_tn(layers[l].W, g);
  }
  return want_input_grad ? g : Mat();
}

// d/dC of a scalar that depends on C only through S = ½(|C|+|C|ᵀ), given
// d/dS with S treated as a general (entrywise independent) matrix.
inline void accumulate_coeff_grad_from_similarity(const Mat& c, const Mat& gs, Mat& gc) {
  const std::size_t n = c.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || c(i, j) == 0.0) continue;
      const double sgn = c(i, j) > 0.0 ? 1.0 : -1.0;
      gc(i, j) += 0.5 * sgn * (gs(i, j) + gs(j, i));
    }
}

// d/dS given d/dL_n and d/dS_n, through the degree normalization.
inline Mat similarity_grad_from_normalized(const SimilarityGraph& g, const Mat& g_ln, const Mat& g_sn,
                                           double eps) {
  const std::size_t n = g.S.rows();
  const auto& r = g.inv_sqrt;
  const Mat h = g_sn - g_ln;
  std::vector<double> g_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += (h(i, j) + h(j, i)) * r[j] * g.S(i, j);
    const double r2 = r[i] * r[i];
    g_deg[i] = g_ln(i, i) * eps * r2 * r2 - 0.5 * r2 * r[i] * acc;
  }
  Mat gs(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) gs(i, j) = h(i, j) * r[i] * r[j] + g_deg[i];
  return gs;
}

// d/dS_n given d/dS̄ for S̄ = S_n / max_upper(S_n).
inline Mat normalized_grad_from_pseudo_graph(const SimilarityGraph& g, const Mat& g_sbar) {
  const MaxEntry mx = max_offdiag_upper(g.S_n);
  if (mx.value <= 0.0) return g_sbar;
  Mat g_sn = g_sbar * (1.0 / mx.value);
  g_sn(mx.row, mx.col) -= frob_dot(g_sbar, g.S_n) / (mx.value * mx.value);
  return g_sn;
}

inline void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw DivergenceError(term, std::string("non-finite loss term: ") + term);
}

}  // namespace detail

struct LossAndGrads {
  LossBreakdown loss;
  Grads grads;
  ForwardCache cache;
};

// Plain auto-encoder objective ‖X − X̂‖² with the self-expression layer
// bypassed. C and classifier gradients are zero.
inline LossAndGrads recon_loss_and_grads(const PsscParams& p, const Mat& x) {
  LossAndGrads out;
  out.cache = forward(p, x, ForwardMode::pretrain);
  const ForwardCache& fc = out.cache;
  out.loss.recon = loss_recon(x, fc.Xhat);
  out.loss.total = out.loss.recon;
  detail::check_finite(out.loss.recon, "recon");

  out.grads = zeros_like(p);
  Mat g_xhat = (fc.Xhat - x) * 2.0;
  Mat g_z = detail::backward_stack(p.decoder, fc.dec_in, fc.dec_pre, std::move(g_xhat), out.grads.decoder, true);
  detail::backward_stack(p.encoder, fc.enc_in, fc.enc_pre, std::move(g_z), out.grads.encoder, false);
  return out;
}

// Full objective and its exact gradient. `labels` must come from an earlier
// forward pass; y and V are constants here. When `frozen` is given, its L_n
// and pseudo-graph are used and no gradient flows from them into C.
inline LossAndGrads total_loss_and_grads(const PsscParams& p, const Mat& x, const LossConfig& cfg,
                                         const PseudoLabels& labels,
                                         const SimilarityGraph* frozen = nullptr) {
  LossAndGrads out;
  out.cache = forward(p, x, ForwardMode::full);
  const ForwardCache& fc = out.cache;
  const std::size_t n = x.cols();
  detail::require(labels.y.size() == n, "total_loss_and_grads: pseudo-labels sized for a different n");

  std::optional<SimilarityGraph> own;
  if (!frozen) own = normalized_laplacian(similarity_from_coeff(p.C), cfg.degree_eps);
  const SimilarityGraph& graph = frozen ? *frozen : *own;
  const bool graph_const = frozen != nullptr || cfg.freeze_laplacian;
  const bool use_graph = cfg.gamma2 != 0.0;
  const bool use_label = cfg.gamma3 != 0.0;
  const Mat sbar = use_graph ? pseudo_graph(graph) : Mat();

  LossBreakdown& L = out.loss;
  L.recon = loss_recon(x, fc.Xhat);
  const Mat gram = matmul_tn(x, fc.Xhat);
  L.locality = 2.0 * frob_dot(graph.L_n, gram);
  const Mat resid = fc.Z - fc.ZC;
  L.selfexpr = frob_norm_sq(resid);
  L.graph = use_graph ? loss_graph(fc.F, sbar, cfg.margin, cfg.normalize_pair_losses) : 0.0;
  L.label = use_label ? loss_label(fc.F, labels, cfg.normalize_pair_losses) : 0.0;
  L.total = L.recon + L.locality + cfg.gamma1 * L.selfexpr + cfg.gamma2 * L.graph + cfg.gamma3 * L.label;
  detail::check_finite(L.recon, "recon");
  detail::check_finite(L.locality, "locality");
  detail::check_finite(L.selfexpr, "selfexpr");
  detail::check_finite(L.graph, "graph");
  detail::check_finite(L.label, "label");
  detail::check_finite(L.total, "total");

  Grads& G = out.grads;
  G = zeros_like(p);

  // Decoder, entered through U = ZC.
  Mat g_xhat = (fc.Xhat - x) * 2.0;
  g_xhat += matmul(x, graph.L_n) * 2.0;
  const Mat g_u = detail::backward_stack(p.decoder, fc.dec_in, fc.dec_pre, std::move(g_xhat), G.decoder, true);
  Mat g_z = matmul_nt(g_u, p.C);
  G.C += matmul_tn(fc.Z, g_u);

  // Self-expression residual E = Z − ZC.
  if (cfg.gamma1 != 0.0) {
    const double w = 2.0 * cfg.gamma1;
    g_z += (resid - matmul_nt(resid, p.C)) * w;
    G.C -= matmul_tn(fc.Z, resid) * w;
  }

  // Classifier head.
  Mat g_sbar;
  if (use_graph || use_label) {
    Mat g_f(n, fc.F.cols());
    if (use_graph) {
      const double scale = cfg.gamma2 / (cfg.normalize_pair_losses && n > 1 ? detail::pair_count(n) : 1.0);
      if (!graph_const) g_sbar = Mat(n, n);
      detail::graph_pairs(fc.F, sbar, cfg.margin, scale, &g_f, graph_const ? nullptr : &g_sbar);
    }
    if (use_label) {
      const double scale = cfg.gamma3 / detail::label_normalizer(labels, cfg.normalize_pair_losses);
      for (std::size_t i = 0; i < n; ++i) {
        if (!labels.V[i]) continue;
        const double fy = fc.F(i, labels.y[i]);
        if (fy > kLogClamp) g_f(i, labels.y[i]) -= scale / fy;
      }
    }
    // Softmax backward, one sample (row of F, column of logits) at a time.
    Mat g_logits(fc.logits.rows(), n);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < fc.F.cols(); ++k) dot += g_f(i, k) * fc.F(i, k);
      for (std::size_t k = 0; k < fc.F.cols(); ++k) g_logits(k, i) = fc.F(i, k) * (g_f(i, k) - dot);
    }
    std::vector<LayerParams> head{G.classifier};
    detail::backward_stack({p.classifier}, {fc.Z}, {fc.logits}, g_logits, head, false);
    G.classifier = std::move(head.front());
    g_z += matmul_tn(p.classifier.W, g_logits);
  }

  detail::backward_stack(p.encoder, fc.enc_in, fc.enc_pre, std::move(g_z), G.encoder, false);

  // Graph path into C.
  if (!graph_const) {
    const Mat g_ln = gram * 2.0;
    const Mat g_sn = use_graph ? detail::normalized_grad_from_pseudo_graph(graph, g_sbar) : Mat(n, n);
    const Mat g_s = detail::similarity_grad_from_normalized(graph, g_ln, g_sn, cfg.degree_eps);
    detail::accumulate_coeff_grad_from_similarity(p.C, g_s, G.C);
  }
  zero_diagonal(G.C);
  return out;
}

}  // namespace pssc
