#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mlfa/autodiff.hpp"
#include "mlfa/encoders.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/params.hpp"

namespace mlfa::match {

/// Cross-attention output: attended audio content per query phoneme, with the
/// attention weights retained for alignment heatmaps.
struct JointRepresentation {
  ad::Var e_joint;  // t_t x emb_dim
  ad::Var attn;     // t_t x t_a, rows sum to 1
};

/// Discriminator outputs: one utterance-level and t_t phoneme-level
/// match probabilities, all in (0, 1).
struct MatchOutput {
  ad::Var q_utt;   // 1 x 1
  ad::Var q_phon;  // t_t x 1
};

/// Pairwise pooled-embedding scores for a batch of M (audio, text) pairs.
/// Row v, column r scores audio v against text r; match_mask marks which
/// pairings share a keyword.
struct SimilarityMatrix {
  ad::Var s_utt;     // M x M raw scores
  Matrix match_mask; // M x M in {0, 1}
};

inline void init_matcher_params(ParamStore& store, const enc::ModelConfig& cfg, Rng& rng) {
  const int d = cfg.emb_dim;
  const int h = cfg.gru_hidden;
  store.add("match.attn.wq", xavier_uniform(d, d, rng));
  store.add("match.attn.wk", xavier_uniform(d, d, rng));
  store.add("match.attn.wv", xavier_uniform(d, d, rng));
  for (const char* gate : {"z", "r", "n"}) {
    store.add(std::string("match.gru.wx") + gate, xavier_uniform(d, h, rng));
    store.add(std::string("match.gru.wh") + gate, xavier_uniform(h, h, rng));
    store.add(std::string("match.gru.b") + gate, Matrix(1, h));
  }
  store.add("match.head_utt.w", xavier_uniform(h, 1, rng));
  store.add("match.head_utt.b", Matrix(1, 1));
  store.add("match.head_phon.w", xavier_uniform(h, 1, rng));
  store.add("match.head_phon.b", Matrix(1, 1));
}

/// Single-head scaled dot-product attention from phoneme queries onto audio
/// frames: attn = softmax(QWq (KWk)^T / sqrt(d)) row-wise, e_joint = attn (VWv).
inline JointRepresentation cross_attend(ad::Tape& tape, const enc::PhonemeQuery& text,
                                        const enc::AudioEmbedding& audio, ParamBinder& p,
                                        const enc::ModelConfig& cfg) {
  if (text.e_t.cols() != cfg.emb_dim || audio.e_a.cols() != cfg.emb_dim)
    throw ShapeMismatch("cross_attend: embeddings must be " + std::to_string(cfg.emb_dim) + "-d");
  ad::Var q = ad::matmul(text.e_t, p("match.attn.wq"));
  ad::Var k = ad::matmul(audio.e_a, p("match.attn.wk"));
  ad::Var v = ad::matmul(audio.e_a, p("match.attn.wv"));
  ad::Var scores = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(cfg.emb_dim)));
  ad::Var attn = ad::softmax_rows(scores);
  ad::Var e_joint = ad::matmul(attn, v);
  (void)tape;
  return JointRepresentation{e_joint, attn};
}

/// GRU scan over the joint representation in query order. Update gate z
/// interpolates toward the candidate state: h' = (1-z) * h + z * n with
/// n = tanh(x Wxn + (r * h) Whn + bn). Heads are sigmoid-affine maps of the
/// final hidden state (utterance) and of every step's hidden state (phoneme).
inline MatchOutput discriminate(ad::Tape& tape, const JointRepresentation& j, ParamBinder& p,
                                const enc::ModelConfig& cfg) {
  if (j.e_joint.cols() != cfg.emb_dim)
    throw ShapeMismatch("discriminate: joint representation must be " +
                        std::to_string(cfg.emb_dim) + "-d");
  const int t_t = j.e_joint.rows();
  ad::Var h = tape.constant(Matrix(1, cfg.gru_hidden));
  std::vector<ad::Var> states;
  states.reserve(t_t);
  for (int t = 0; t < t_t; ++t) {
    ad::Var x = ad::slice_rows(j.e_joint, t, t + 1);
    ad::Var z = ad::sigmoid(ad::add_rowvec(
        ad::add(ad::matmul(x, p("match.gru.wxz")), ad::matmul(h, p("match.gru.whz"))),
        p("match.gru.bz")));
    ad::Var r = ad::sigmoid(ad::add_rowvec(
        ad::add(ad::matmul(x, p("match.gru.wxr")), ad::matmul(h, p("match.gru.whr"))),
        p("match.gru.br")));
    ad::Var n = ad::tanh_v(ad::add_rowvec(
        ad::add(ad::matmul(x, p("match.gru.wxn")), ad::matmul(ad::mul(r, h), p("match.gru.whn"))),
        p("match.gru.bn")));
    ad::Var keep = ad::affine(z, -1.0, 1.0);  // 1 - z
    h = ad::add(ad::mul(keep, h), ad::mul(z, n));
    states.push_back(h);
  }
  ad::Var all_h = ad::concat_rows(states);  // t_t x hidden
  ad::Var q_utt = ad::sigmoid(
      ad::add_rowvec(ad::matmul(h, p("match.head_utt.w")), p("match.head_utt.b")));
  ad::Var q_phon = ad::sigmoid(
      ad::add_rowvec(ad::matmul(all_h, p("match.head_phon.w")), p("match.head_phon.b")));
  return MatchOutput{q_utt, q_phon};
}

/// Raw pooled-embedding similarity matrix for M (audio, text) pairs:
/// s[v][r] = dot(mean(E_a^v), mean(E_t^r)) / sqrt(d). The caller supplies the
/// keyword-equality mask; by default only the diagonal pairs match.
inline SimilarityMatrix pooled_similarity(ad::Tape& tape,
                                          const std::vector<enc::AudioEmbedding>& audio_batch,
                                          const std::vector<enc::PhonemeQuery>& text_batch,
                                          const enc::ModelConfig& cfg,
                                          const Matrix* match_mask = nullptr) {
  if (audio_batch.empty() || text_batch.empty())
    throw EmptyBatch("pooled_similarity: empty batch");
  if (audio_batch.size() != text_batch.size())
    throw ShapeMismatch("pooled_similarity: batch sizes differ");
  const int m = static_cast<int>(audio_batch.size());
  std::vector<ad::Var> pooled_a, pooled_t;
  pooled_a.reserve(m);
  pooled_t.reserve(m);
  for (const auto& a : audio_batch) pooled_a.push_back(ad::mean_rows(a.e_a));
  for (const auto& t : text_batch) pooled_t.push_back(ad::mean_rows(t.e_t));
  ad::Var pa = ad::concat_rows(pooled_a);  // M x d
  ad::Var pt = ad::concat_rows(pooled_t);  // M x d
  ad::Var s = ad::scale(ad::matmul_nt(pa, pt), 1.0 / std::sqrt(static_cast<double>(cfg.emb_dim)));

  Matrix mask(m, m);
  if (match_mask) {
    if (match_mask->rows() != m || match_mask->cols() != m)
      throw ShapeMismatch("pooled_similarity: mask shape mismatch");
    mask = *match_mask;
  } else {
    for (int i = 0; i < m; ++i) mask(i, i) = 1.0;
  }
  (void)tape;
  return SimilarityMatrix{s, mask};
}

}  // namespace mlfa::match
