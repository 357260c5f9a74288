#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"

namespace mlfa::align {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Phoneme-ID target sequence, no blanks.
struct CtcTarget {
  std::vector<int> y;
};

/// Viterbi decode: frame-to-extended-label indices, the path's
/// log-probability, and the length-normalized confidence
/// s = exp(logprob / T_a) in (0, 1].
struct AlignmentResult {
  std::vector<int> path;  // indices into the blank-interleaved label lattice
  double logprob_path = 0.0;
  double confidence = 0.0;
};

struct CtcResult {
  double loss = 0.0;
  Matrix grad_z;  // d(loss)/d(logits)
};

struct ConfidenceResult {
  AlignmentResult alignment;
  Matrix grad_z;  // d(confidence)/d(logits)
};

namespace detail {

inline double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double lse3(double a, double b, double c) { return lse2(lse2(a, b), c); }

/// Row-wise log-softmax of logits.
inline Matrix log_softmax_rows(const Matrix& z) {
  Matrix lp = z;
  for (int t = 0; t < z.rows(); ++t) {
    double mx = z(t, 0);
    for (int k = 1; k < z.cols(); ++k) mx = std::max(mx, z(t, k));
    double acc = 0.0;
    for (int k = 0; k < z.cols(); ++k) acc += std::exp(z(t, k) - mx);
    const double lz = mx + std::log(acc);
    for (int k = 0; k < z.cols(); ++k) lp(t, k) = z(t, k) - lz;
  }
  return lp;
}

/// Blank-interleaved extended label [b, y1, b, y2, ..., yU, b].
inline std::vector<int> extended_labels(const CtcTarget& y, int blank_id) {
  std::vector<int> ext(2 * y.y.size() + 1, blank_id);
  for (size_t i = 0; i < y.y.size(); ++i) ext[2 * i + 1] = y.y[i];
  return ext;
}

inline int adjacent_repeats(const std::vector<int>& y) {
  int reps = 0;
  for (size_t i = 1; i < y.size(); ++i)
    if (y[i] == y[i - 1]) ++reps;
  return reps;
}

inline void validate(const Matrix& z, const CtcTarget& y, int blank_id) {
  if (z.rows() < 1) throw InfeasibleTarget("empty logits");
  if (y.y.empty()) throw InfeasibleTarget("empty target");
  for (int id : y.y) {
    if (id == blank_id) throw InfeasibleTarget("target contains blank");
    if (id < 0 || id >= z.cols()) throw InfeasibleTarget("target id out of vocabulary");
  }
}

}  // namespace detail

inline bool feasible(int t_a, const CtcTarget& y) {
  return t_a >= static_cast<int>(y.y.size()) + detail::adjacent_repeats(y.y);
}

/// -log of the total probability over all valid blank-interleaved alignments,
/// with the gradient w.r.t. the logits from the backward recursion. All
/// recursions stay in log space.
inline CtcResult ctc_loss(const Matrix& z, const CtcTarget& y, int blank_id) {
  detail::validate(z, y, blank_id);
  const int t_n = z.rows();
  if (!feasible(t_n, y))
    throw InfeasibleTarget("T_a=" + std::to_string(t_n) + " too short for U=" +
                           std::to_string(y.y.size()) + " with " +
                           std::to_string(detail::adjacent_repeats(y.y)) + " repeats");
  const Matrix lp = detail::log_softmax_rows(z);
  const std::vector<int> ext = detail::extended_labels(y, blank_id);
  const int s_n = static_cast<int>(ext.size());

  auto can_skip = [&](int s) { return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2]; };

  Matrix alpha(t_n, s_n, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (s_n > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < t_n; ++t)
    for (int s = 0; s < s_n; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = detail::lse2(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = detail::lse2(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, ext[s]);
    }

  const double log_z = s_n > 1 ? detail::lse2(alpha(t_n - 1, s_n - 1), alpha(t_n - 1, s_n - 2))
                               : alpha(t_n - 1, s_n - 1);

  Matrix beta(t_n, s_n, kNegInf);
  beta(t_n - 1, s_n - 1) = lp(t_n - 1, ext[s_n - 1]);
  if (s_n > 1) beta(t_n - 1, s_n - 2) = lp(t_n - 1, ext[s_n - 2]);
  for (int t = t_n - 2; t >= 0; --t)
    for (int s = 0; s < s_n; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < s_n) acc = detail::lse2(acc, beta(t + 1, s + 1));
      if (s + 2 < s_n && can_skip(s + 2)) acc = detail::lse2(acc, beta(t + 1, s + 2));
      beta(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, ext[s]);
    }

  // Posterior over lattice states: gamma(t,s) = exp(alpha + beta - lp - logZ),
  // since both recursions include the frame emission at t.
  CtcResult out;
  out.loss = -log_z;
  out.grad_z = Matrix(t_n, z.cols());
  for (int t = 0; t < t_n; ++t) {
    std::vector<double> label_post(z.cols(), 0.0);
    for (int s = 0; s < s_n; ++s) {
      const double a = alpha(t, s), b = beta(t, s);
      if (a == kNegInf || b == kNegInf) continue;
      label_post[ext[s]] += std::exp(a + b - lp(t, ext[s]) - log_z);
    }
    for (int k = 0; k < z.cols(); ++k)
      out.grad_z(t, k) = std::exp(lp(t, k)) - label_post[k];
  }
  return out;
}

/// Max-product decode over the same lattice; confidence is the per-frame
/// geometric mean of the best path probability.
inline AlignmentResult viterbi_align(const Matrix& z, const CtcTarget& y, int blank_id) {
  detail::validate(z, y, blank_id);
  const int t_n = z.rows();
  if (!feasible(t_n, y))
    throw InfeasibleTarget("T_a=" + std::to_string(t_n) + " too short for target");
  const Matrix lp = detail::log_softmax_rows(z);
  const std::vector<int> ext = detail::extended_labels(y, blank_id);
  const int s_n = static_cast<int>(ext.size());

  auto can_skip = [&](int s) { return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2]; };

  Matrix delta(t_n, s_n, kNegInf);
  std::vector<std::vector<int>> from(t_n, std::vector<int>(s_n, -1));
  delta(0, 0) = lp(0, ext[0]);
  if (s_n > 1) delta(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < t_n; ++t)
    for (int s = 0; s < s_n; ++s) {
      double best = delta(t - 1, s);
      int arg = s;
      if (s >= 1 && delta(t - 1, s - 1) > best) {
        best = delta(t - 1, s - 1);
        arg = s - 1;
      }
      if (can_skip(s) && delta(t - 1, s - 2) > best) {
        best = delta(t - 1, s - 2);
        arg = s - 2;
      }
      if (best == kNegInf) continue;
      delta(t, s) = best + lp(t, ext[s]);
      from[t][s] = arg;
    }

  int end = s_n - 1;
  if (s_n > 1 && delta(t_n - 1, s_n - 2) > delta(t_n - 1, s_n - 1)) end = s_n - 2;

  AlignmentResult out;
  out.logprob_path = delta(t_n - 1, end);
  out.path.assign(t_n, 0);
  int s = end;
  for (int t = t_n - 1; t >= 0; --t) {
    out.path[t] = s;
    if (t > 0) s = from[t][s];
  }
  out.confidence = std::exp(out.logprob_path / t_n);
  return out;
}

/// Viterbi confidence with d(confidence)/d(logits), the decoded path treated
/// as locally constant.
inline ConfidenceResult viterbi_confidence(const Matrix& z, const CtcTarget& y, int blank_id) {
  ConfidenceResult out;
  out.alignment = viterbi_align(z, y, blank_id);
  const Matrix lp = detail::log_softmax_rows(z);
  const std::vector<int> ext = detail::extended_labels(y, blank_id);
  const int t_n = z.rows();
  // d logprob / dz(t,k) = [k == path label at t] - softmax(z_t)[k]
  out.grad_z = Matrix(t_n, z.cols());
  const double scale = out.alignment.confidence / t_n;
  for (int t = 0; t < t_n; ++t) {
    const int lab = ext[out.alignment.path[t]];
    for (int k = 0; k < z.cols(); ++k)
      out.grad_z(t, k) = scale * ((k == lab ? 1.0 : 0.0) - std::exp(lp(t, k)));
  }
  return out;
}

struct ConfidencePair {
  const Matrix* z = nullptr;
  CtcTarget y;
  int match = 0;
};

/// Per-pair Viterbi confidences feeding the PCL term. Infeasible negatives
/// score 0 by convention; infeasible matched pairs are an error.
inline std::vector<double> batch_confidences(const std::vector<ConfidencePair>& pairs,
                                             int blank_id) {
  std::vector<double> s;
  s.reserve(pairs.size());
  for (const auto& pr : pairs) {
    if (!feasible(pr.z->rows(), pr.y)) {
      if (pr.match) throw InfeasibleTarget("matched pair with infeasible target length");
      s.push_back(0.0);
      continue;
    }
    s.push_back(viterbi_align(*pr.z, pr.y, blank_id).confidence);
  }
  return s;
}

}  // namespace mlfa::align
