#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"

namespace mlfa::loss {

/// Constants of the false-alarm-aware objective.
struct FaConfig {
  double gamma = 7.0;     // sigmoid steepness
  double delta = 0.035;   // sigmoid offset
  double alpha = 0.9;     // precision floor
  double lambda = 10.0;   // margin weight
  double epsilon = 1e-7;  // precision denominator guard
};

/// Per-term loss values for one batch plus gradients accumulated per
/// named parameter. l_total is the equal-weight sum of the six terms.
struct LossReport {
  double l_utt = 0.0;
  double l_phon = 0.0;
  double l_ctc = 0.0;
  double l_pcl = 0.0;
  double l_ucl = 0.0;
  double l_fa = 0.0;
  double l_total = 0.0;
  std::map<std::string, Matrix> gradients;
};

struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;  // d(value)/d(input_i)
};

struct MatrixValueGrad {
  double value = 0.0;
  Matrix grad;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Mean binary cross-entropy. Predictions clamped to [1e-7, 1-1e-7] before
/// the logs; gradient is zero where the clamp is active.
inline ValueGrad bce(const std::vector<double>& pred, const std::vector<double>& label) {
  if (pred.size() != label.size()) throw LengthMismatch("bce");
  if (pred.empty()) throw EmptyBatch("bce");
  constexpr double kClamp = 1e-7;
  const double n = static_cast<double>(pred.size());
  ValueGrad out;
  out.grad.assign(pred.size(), 0.0);
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kClamp, 1.0 - kClamp);
    const double y = label[i];
    out.value += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) / n;
    if (pred[i] > kClamp && pred[i] < 1.0 - kClamp)
      out.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  return out;
}

/// Phoneme-level contrastive loss over alignment confidences:
/// (1/N) sum_i [ m_i (1-s_i)^2 + (1-m_i) s_i^2 ].
inline ValueGrad pcl_loss(const std::vector<double>& s, const std::vector<double>& m) {
  if (s.size() != m.size()) throw LengthMismatch("pcl_loss");
  if (s.empty()) throw EmptyBatch("pcl_loss");
  const double n = static_cast<double>(s.size());
  ValueGrad out;
  out.grad.assign(s.size(), 0.0);
  for (size_t i = 0; i < s.size(); ++i) {
    const double d = m[i] > 0.5 ? 1.0 - s[i] : s[i];
    out.value += d * d / n;
    out.grad[i] = (m[i] > 0.5 ? -2.0 * (1.0 - s[i]) : 2.0 * s[i]) / n;
  }
  return out;
}

/// Utterance-level contrastive loss over an MxM similarity matrix with a
/// binary match mask. Both traversal directions are averaged; each is
/// -(1/M) sum_{v,r} [ m log(sig(s)) + (1-m) log(1-sig(s)) ], with the sigmoid
/// input clamped to +-30 before the logs.
inline MatrixValueGrad ucl_loss(const Matrix& s, const Matrix& mask) {
  if (s.rows() != s.cols()) throw NotSquare("ucl_loss");
  if (!s.same_shape(mask)) throw ShapeMismatch("ucl_loss mask");
  if (s.rows() == 0) throw EmptyBatch("ucl_loss");
  const int m_sz = s.rows();
  constexpr double kClamp = 30.0;
  MatrixValueGrad out;
  out.grad = Matrix(m_sz, m_sz);

  auto cell_loss = [&](int v, int r, double& grad_out) {
    const double raw = s(v, r);
    const double x = std::clamp(raw, -kClamp, kClamp);
    const double p = sigmoid(x);
    const double m = mask(v, r);
    // d/dx of -[m log p + (1-m) log(1-p)] is (p - m)
    grad_out = (raw > -kClamp && raw < kClamp) ? (p - m) / m_sz : 0.0;
    return -(m * std::log(p) + (1.0 - m) * std::log(1.0 - p)) / m_sz;
  };

  double l_text = 0.0, l_audio = 0.0;
  for (int v = 0; v < m_sz; ++v)
    for (int r = 0; r < m_sz; ++r) {
      double g = 0.0;
      l_audio += cell_loss(v, r, g);
      out.grad(v, r) += 0.5 * g;
    }
  for (int r = 0; r < m_sz; ++r)
    for (int v = 0; v < m_sz; ++v) {
      double g = 0.0;
      l_text += cell_loss(v, r, g);
      out.grad(v, r) += 0.5 * g;
    }
  out.value = 0.5 * (l_text + l_audio);
  return out;
}

/// Smooth sigmoid bounds on TP / FP counts with per-element gradients.
struct SmoothCounts {
  double tp = 0.0;
  double fp = 0.0;
  std::vector<double> dtp_dx;
  std::vector<double> dfp_dx;
};

/// TP = sum (1+gd) sig(g x - d) x_true;  FP = sum (1+gd) sig(g x + d) (1 - x_true).
inline SmoothCounts smooth_counts(const std::vector<double>& x, const std::vector<double>& x_true,
                                  const FaConfig& cfg = {}) {
  if (x.size() != x_true.size()) throw LengthMismatch("smooth_counts");
  const double g = cfg.gamma, d = cfg.delta, c = 1.0 + g * d;
  SmoothCounts out;
  out.dtp_dx.assign(x.size(), 0.0);
  out.dfp_dx.assign(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    if (x_true[i] > 0.5) {
      const double sg = sigmoid(g * x[i] - d);
      out.tp += c * sg;
      out.dtp_dx[i] = c * g * sg * (1.0 - sg);
    } else {
      const double sg = sigmoid(g * x[i] + d);
      out.fp += c * sg;
      out.dfp_dx[i] = c * g * sg * (1.0 - sg);
    }
  }
  return out;
}

/// -log(P) + lambda * max(0, alpha - P) with subgradient 0 at the kink.
inline double fa_loss_from_precision(double precision, const FaConfig& cfg = {}) {
  return -std::log(precision) + cfg.lambda * std::max(0.0, cfg.alpha - precision);
}

inline double fa_loss_precision_derivative(double precision, const FaConfig& cfg = {}) {
  return -1.0 / precision + (precision < cfg.alpha ? -cfg.lambda : 0.0);
}

/// Precision-constrained false-alarm loss over scores x with binary truth:
/// Precision = TP / (TP + FP + eps).
inline ValueGrad fa_loss(const std::vector<double>& x, const std::vector<double>& x_true,
                         const FaConfig& cfg = {}) {
  const SmoothCounts sc = smooth_counts(x, x_true, cfg);
  const double denom = sc.tp + sc.fp + cfg.epsilon;
  const double p = sc.tp / denom;
  ValueGrad out;
  out.value = fa_loss_from_precision(p, cfg);
  out.grad.assign(x.size(), 0.0);
  const double dl_dp = fa_loss_precision_derivative(p, cfg);
  const double dp_dtp = (sc.fp + cfg.epsilon) / (denom * denom);
  const double dp_dfp = -sc.tp / (denom * denom);
  for (size_t i = 0; i < x.size(); ++i)
    out.grad[i] = dl_dp * (dp_dtp * sc.dtp_dx[i] + dp_dfp * sc.dfp_dx[i]);
  return out;
}

/// Equal-weight sum of the six terms; per-parameter gradient maps from the
/// terms are accumulated additively into the report.
inline LossReport total_loss(double l_utt, double l_phon, double l_ctc, double l_pcl,
                             double l_ucl, double l_fa,
                             const std::vector<std::map<std::string, Matrix>>& term_grads = {}) {
  for (double v : {l_utt, l_phon, l_ctc, l_pcl, l_ucl, l_fa})
    if (!std::isfinite(v)) throw NonFiniteTerm("total_loss");
  LossReport r;
  r.l_utt = l_utt;
  r.l_phon = l_phon;
  r.l_ctc = l_ctc;
  r.l_pcl = l_pcl;
  r.l_ucl = l_ucl;
  r.l_fa = l_fa;
  r.l_total = l_utt + l_phon + l_ctc + l_pcl + l_ucl + l_fa;
  for (const auto& grads : term_grads)
    for (const auto& [name, g] : grads) {
      auto it = r.gradients.find(name);
      if (it == r.gradients.end())
        r.gradients.emplace(name, g);
      else
        it->second += g;
    }
  return r;
}

}  // namespace mlfa::loss
