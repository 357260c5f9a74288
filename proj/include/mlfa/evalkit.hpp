#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mlfa/datakit.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/model.hpp"

namespace mlfa::eval {

/// One scored detection trial.
struct TrialScore {
  std::string audio_id;
  std::string keyword_id;
  double score = 0.0;  // q_utt in [0, 1]
  int label = 0;       // 1 = the audio contains the keyword
};

/// Detection metrics at a fixed operating threshold plus threshold-free ones.
struct MetricReport {
  bool has_auc = false;
  double auc = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double threshold = 0.5;
  bool has_far = false;
  double far_at_threshold = 0.0;
  bool has_acc = false;
  double acc_n = 0.0;  // closed-set argmax accuracy
  int n_pos = 0;
  int n_neg = 0;
  int n_groups = 0;
};

namespace detail {
inline void require_both_classes(const std::vector<TrialScore>& scores) {
  int pos = 0, neg = 0;
  for (const auto& s : scores) (s.label ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw DegenerateLabels("need both classes, got " + std::to_string(pos) + " positives and " +
                           std::to_string(neg) + " negatives");
}
}  // namespace detail

/// Probability that a random positive outscores a random negative, ties
/// counted half (Mann-Whitney rank formulation).
inline double auc(const std::vector<TrialScore>& scores) {
  detail::require_both_classes(scores);
  std::vector<int> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return scores[a].score < scores[b].score; });
  // Tie-averaged ranks (1-based).
  std::vector<double> rank(scores.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]].score == scores[idx[i]].score) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  double rank_sum = 0.0;
  long long n_pos = 0, n_neg = 0;
  for (size_t k = 0; k < scores.size(); ++k) {
    if (scores[k].label) {
      rank_sum += rank[k];
      ++n_pos;
    } else {
      ++n_neg;
    }
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// False alarm rate at a threshold; a negative trial fires when score >= t.
inline double far(const std::vector<TrialScore>& scores, double threshold) {
  long long n_neg = 0, fired = 0;
  for (const auto& s : scores) {
    if (s.label) continue;
    ++n_neg;
    if (s.score >= threshold) ++fired;
  }
  if (n_neg == 0) throw NoNegatives("far needs at least one negative trial");
  return static_cast<double>(fired) / static_cast<double>(n_neg);
}

namespace detail {
inline double frr(const std::vector<TrialScore>& scores, double threshold) {
  long long n_pos = 0, missed = 0;
  for (const auto& s : scores) {
    if (!s.label) continue;
    ++n_pos;
    if (s.score < threshold) ++missed;
  }
  return static_cast<double>(missed) / static_cast<double>(n_pos);
}
}  // namespace detail

/// Equal error rate: thresholds swept at score midpoints, with linear
/// interpolation where the FAR and FRR step curves cross. Returns
/// (rate, threshold).
inline std::pair<double, double> eer(const std::vector<TrialScore>& scores) {
  detail::require_both_classes(scores);
  std::vector<double> s;
  s.reserve(scores.size());
  for (const auto& t : scores) s.push_back(t.score);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());

  std::vector<double> cand;
  cand.push_back(s.front() - 0.5);
  for (size_t i = 0; i + 1 < s.size(); ++i) cand.push_back(0.5 * (s[i] + s[i + 1]));
  cand.push_back(s.back() + 0.5);

  double prev_t = cand[0];
  double prev_far = far(scores, prev_t), prev_frr = detail::frr(scores, prev_t);
  for (size_t i = 1; i < cand.size(); ++i) {
    const double t = cand[i];
    const double f = far(scores, t), r = detail::frr(scores, t);
    if (r >= f) {
      if (r == f) return {f, t};
      const double d1 = prev_far - prev_frr;  // > 0 before the crossing
      const double d2 = r - f;                // > 0 after it
      const double alpha = d1 / (d1 + d2);
      return {prev_far + alpha * (f - prev_far), prev_t + alpha * (t - prev_t)};
    }
    prev_t = t;
    prev_far = f;
    prev_frr = r;
  }
  // FAR hits 0 and FRR 1 above the top score, so the sweep always crosses.
  return {prev_far, prev_t};
}

/// Per-audio candidate scores for closed-set accuracy.
struct CandidateScores {
  std::string audio_id;
  std::vector<double> scores;  // one per candidate keyword, shared order
  int truth = 0;               // index of the true keyword
};

/// Fraction of audios whose true keyword attains the strict maximum score.
/// Exact ties count as errors.
inline double acc_n(const std::vector<CandidateScores>& groups) {
  if (groups.empty()) throw EmptyBatch("acc_n: no score groups");
  const size_t n = groups.front().scores.size();
  long long correct = 0;
  for (const auto& g : groups) {
    if (g.scores.size() != n)
      throw InconsistentCandidates(g.audio_id + ": expected " + std::to_string(n) +
                                   " candidate scores, got " + std::to_string(g.scores.size()));
    if (g.truth < 0 || g.truth >= static_cast<int>(n))
      throw InconsistentCandidates(g.audio_id + ": truth index out of range");
    bool strict_max = true;
    for (size_t i = 0; i < n; ++i) {
      if (static_cast<int>(i) == g.truth) continue;
      if (g.scores[i] >= g.scores[g.truth]) {
        strict_max = false;
        break;
      }
    }
    if (strict_max) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(groups.size());
}

/// AUC / EER / FAR bundle; fields degrade to "absent" when a class is missing.
inline MetricReport compute_metrics(const std::vector<TrialScore>& scores, double threshold = 0.5) {
  MetricReport r;
  r.threshold = threshold;
  for (const auto& s : scores) (s.label ? r.n_pos : r.n_neg)++;
  if (r.n_pos > 0 && r.n_neg > 0) {
    r.has_auc = true;
    r.auc = auc(scores);
    std::tie(r.eer, r.eer_threshold) = eer(scores);
  }
  if (r.n_neg > 0) {
    r.has_far = true;
    r.far_at_threshold = far(scores, threshold);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Score CSV: audio_id,keyword_id,score,label (scores round-trip exactly).
// ---------------------------------------------------------------------------

inline constexpr const char* kScoresCsvHeader = "audio_id,keyword_id,score,label";

inline void write_scores_csv(const std::string& path, const std::vector<TrialScore>& scores) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write scores file: " + path);
  os << kScoresCsvHeader << '\n';
  char num[40];
  for (const auto& s : scores) {
    std::snprintf(num, sizeof(num), "%.17g", s.score);
    os << s.audio_id << ',' << s.keyword_id << ',' << num << ',' << s.label << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<TrialScore> read_scores_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scores file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw BadFormat(path + ": empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoresCsvHeader)
    throw BadFormat(path + ": expected header '" + std::string(kScoresCsvHeader) + "'");
  std::vector<TrialScore> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = data::detail::split_csv_line(line);
    if (f.size() != 4) throw BadFormat(path + ": expected 4 fields in '" + line + "'");
    TrialScore s;
    s.audio_id = f[0];
    s.keyword_id = f[1];
    try {
      s.score = std::stod(f[2]);
    } catch (const std::exception&) {
      throw BadFormat(path + ": bad score '" + f[2] + "'");
    }
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0)
      throw BadFormat(path + ": score outside [0, 1]: " + f[2]);
    if (f[3] == "1")
      s.label = 1;
    else if (f[3] == "0")
      s.label = 0;
    else
      throw BadFormat(path + ": label must be 0 or 1, got '" + f[3] + "'");
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_metrics_json(const MetricReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write metrics file: " + path);
  const auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "{\n";
  os << "  \"auc\": " << (r.has_auc ? num(r.auc) : "\"n/a\"") << ",\n";
  os << "  \"eer\": " << (r.has_auc ? num(r.eer) : "\"n/a\"") << ",\n";
  os << "  \"eer_threshold\": " << (r.has_auc ? num(r.eer_threshold) : "\"n/a\"") << ",\n";
  os << "  \"threshold\": " << num(r.threshold) << ",\n";
  os << "  \"far_at_threshold\": " << (r.has_far ? num(r.far_at_threshold) : "\"n/a\"") << ",\n";
  os << "  \"acc_n\": " << (r.has_acc ? num(r.acc_n) : "\"n/a\"") << ",\n";
  os << "  \"n_pos\": " << r.n_pos << ",\n";
  os << "  \"n_neg\": " << r.n_neg << ",\n";
  os << "  \"n_groups\": " << r.n_groups << "\n";
  os << "}\n";
  if (!os) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Figure emitters: CSV + SVG heatmaps.
// ---------------------------------------------------------------------------

namespace detail {

/// White-to-deep-blue ramp; u in [0, 1], higher = darker.
inline std::string ramp_color(double u) {
  u = std::clamp(u, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 + u * (8.0 - 255.0)));
  const int g = static_cast<int>(std::lround(255.0 + u * (48.0 - 255.0)));
  const int b = static_cast<int>(std::lround(255.0 + u * (107.0 - 255.0)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

inline void write_labeled_csv(const std::string& path, const Matrix& m,
                              const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write csv: " + path);
  for (const auto& c : col_labels) os << ',' << c;
  os << '\n';
  char num[32];
  for (int r = 0; r < m.rows(); ++r) {
    os << row_labels[r];
    for (int c = 0; c < m.cols(); ++c) {
      std::snprintf(num, sizeof(num), "%.6f", m(r, c));
      os << ',' << num;
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

/// Cell intensity u(r,c) must already be in [0, 1].
inline void write_svg_heatmap(const std::string& path, const Matrix& u,
                              const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels) {
  const int cell = 24, left = 90, top = 60;
  const int w = left + cell * u.cols() + 10;
  const int h = top + cell * u.rows() + 10;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write svg: " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"monospace\" font-size=\"11\">\n";
  for (int c = 0; c < u.cols(); ++c)
    os << "  <text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top - 8
       << "\" text-anchor=\"middle\" transform=\"rotate(-45 " << left + c * cell + cell / 2 << ' '
       << top - 8 << ")\">" << col_labels[c] << "</text>\n";
  for (int r = 0; r < u.rows(); ++r) {
    os << "  <text x=\"" << left - 6 << "\" y=\"" << top + r * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << row_labels[r] << "</text>\n";
    for (int c = 0; c < u.cols(); ++c)
      os << "  <rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\""
         << cell << "\" height=\"" << cell << "\" fill=\"" << ramp_color(u(r, c))
         << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "</svg>\n";
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace detail

/// Cosine similarities between rows of `a` and rows of `b` (zero-norm rows
/// score 0 against everything).
inline Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("cosine_matrix");
  Matrix out(a.rows(), b.rows());
  std::vector<double> na(a.rows()), nb(b.rows());
  for (int r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) s += a(r, c) * a(r, c);
    na[r] = std::sqrt(s);
  }
  for (int r = 0; r < b.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < b.cols(); ++c) s += b(r, c) * b(r, c);
    nb[r] = std::sqrt(s);
  }
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j) {
      double dot = 0.0;
      for (int c = 0; c < a.cols(); ++c) dot += a(i, c) * b(j, c);
      out(i, j) = (na[i] > 0.0 && nb[j] > 0.0) ? dot / (na[i] * nb[j]) : 0.0;
    }
  return out;
}

/// Write a square similarity matrix as <base>.csv and <base>.svg. The SVG
/// colors cells by min-max normalized value (diagonal of an identity-like
/// matrix comes out darkest).
inline void emit_similarity_matrix(const Matrix& values, const std::vector<std::string>& labels,
                                   const std::string& path_base) {
  if (values.rows() != values.cols()) throw NotSquare("similarity matrix must be square");
  if (static_cast<int>(labels.size()) != values.rows())
    throw ShapeMismatch("similarity labels must match matrix size");
  detail::write_labeled_csv(path_base + ".csv", values, labels, labels);
  double mn = values(0, 0), mx = values(0, 0);
  for (size_t i = 0; i < values.size(); ++i) {
    mn = std::min(mn, values.data()[i]);
    mx = std::max(mx, values.data()[i]);
  }
  Matrix u(values.rows(), values.cols(), 0.5);
  if (mx > mn)
    for (size_t i = 0; i < values.size(); ++i) u.data()[i] = (values.data()[i] - mn) / (mx - mn);
  detail::write_svg_heatmap(path_base + ".svg", u, labels, labels);
}

/// Parse a matrix CSV written by the emitters (labels + 6-decimal values).
inline Matrix parse_matrix_csv(const std::string& path, std::vector<std::string>* row_labels = nullptr,
                               std::vector<std::string>* col_labels = nullptr) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(is, line)) throw BadFormat(path + ": empty csv");
  auto head = data::detail::split_csv_line(line);
  if (head.size() < 2 || !head[0].empty()) throw BadFormat(path + ": bad header row");
  if (col_labels) col_labels->assign(head.begin() + 1, head.end());
  const int cols = static_cast<int>(head.size()) - 1;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = data::detail::split_csv_line(line);
    if (static_cast<int>(f.size()) != cols + 1) throw BadFormat(path + ": ragged csv row");
    if (row_labels) row_labels->push_back(f[0]);
    std::vector<double> vals;
    for (int c = 1; c <= cols; ++c) vals.push_back(std::stod(f[c]));
    rows.push_back(std::move(vals));
  }
  Matrix m(static_cast<int>(rows.size()), cols);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  return m;
}

/// Phoneme-to-frame attention heatmap as <base>.csv and <base>.svg. Attention
/// weights are already in [0, 1], so cells map directly (a single-frame axis
/// renders fully saturated, uniform attention renders uniform).
inline void emit_alignment_heatmap(const Matrix& attn, const std::vector<std::string>& phoneme_labels,
                                   const std::string& path_base) {
  if (static_cast<int>(phoneme_labels.size()) != attn.rows())
    throw ShapeMismatch("heatmap labels must match attention rows");
  std::vector<std::string> col_labels;
  for (int c = 0; c < attn.cols(); ++c) col_labels.push_back("t" + std::to_string(c));
  detail::write_labeled_csv(path_base + ".csv", attn, phoneme_labels, col_labels);
  detail::write_svg_heatmap(path_base + ".svg", attn, phoneme_labels, col_labels);
}

/// Mean Shannon entropy of attention rows (nats); lower = sharper alignment.
inline double attention_row_entropy(const Matrix& attn) {
  if (attn.rows() == 0) throw EmptyBatch("attention_row_entropy");
  double total = 0.0;
  for (int r = 0; r < attn.rows(); ++r) {
    double h = 0.0;
    for (int c = 0; c < attn.cols(); ++c) {
      const double p = attn(r, c);
      if (p > 0.0) h -= p * std::log(p);
    }
    total += h;
  }
  return total / attn.rows();
}

// ---------------------------------------------------------------------------
// Model-on-dataset scoring
// ---------------------------------------------------------------------------

/// Time-averaged audio embedding (1 x emb_dim) for one log-mel clip.
inline Matrix pooled_audio_embedding(const model::System& sys, const Matrix& logmel) {
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  auto [audio, z] = enc::encode_audio(tape, logmel, bind, sys.cfg);
  return ad::mean_rows(audio.e_a).value();
}

/// q_utt for every (clip, keyword) combination; encodes each clip once.
inline Matrix score_all_pairs(const model::System& sys, const data::Dataset& ds) {
  Matrix s(static_cast<int>(ds.clip_ids.size()), static_cast<int>(ds.keywords.size()));
  for (int c = 0; c < s.rows(); ++c) {
    ad::Tape tape;
    ParamBinder bind(tape, sys.params);
    auto [audio, z] = enc::encode_audio(tape, ds.clip_logmel[c], bind, sys.cfg);
    for (int k = 0; k < s.cols(); ++k) {
      auto query = enc::encode_text(tape, ds.keyword_phonemes[k], bind, sys.cfg);
      auto joint = match::cross_attend(tape, query, audio, bind, sys.cfg);
      auto out = match::discriminate(tape, joint, bind, sys.cfg);
      s(c, k) = out.q_utt.scalar();
    }
  }
  return s;
}

/// Score the dataset's trial list (one TrialScore per trial).
inline std::vector<TrialScore> score_dataset(const model::System& sys, const data::Dataset& ds) {
  const Matrix s = score_all_pairs(sys, ds);
  std::vector<TrialScore> out;
  out.reserve(ds.trials.size());
  for (const auto& t : ds.trials)
    out.push_back({ds.clip_ids[t.clip], ds.keywords[t.kw], s(t.clip, t.kw), t.match});
  return out;
}

/// Closed-set candidate groups from all-pairs scores (truth = source keyword).
inline std::vector<CandidateScores> candidate_groups(const Matrix& all_pairs,
                                                     const data::Dataset& ds) {
  std::vector<CandidateScores> groups;
  for (int c = 0; c < all_pairs.rows(); ++c) {
    if (ds.clip_kw[c] < 0) continue;  // provenance unknown; cannot define truth
    CandidateScores g;
    g.audio_id = ds.clip_ids[c];
    g.truth = ds.clip_kw[c];
    for (int k = 0; k < all_pairs.cols(); ++k) g.scores.push_back(all_pairs(c, k));
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace mlfa::eval
