#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mlfa/autodiff.hpp"
#include "mlfa/dsp.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/params.hpp"
#include "mlfa/rng.hpp"

namespace mlfa::enc {

/// Width and vocabulary settings shared by every network component.
struct ModelConfig {
  int n_mels = dsp::kDefaultMels;
  int v_phon = 39;       // phoneme vocabulary; CTC blank uses id v_phon
  int table_dim = 64;    // phoneme embedding table width
  int conv1_ch = 64;     // first temporal conv width
  int conv2_ch = 160;    // second temporal conv width
  int stream_a_dim = 96;
  int stream_b_dim = 32;
  int emb_dim = 128;     // stream_a_dim + stream_b_dim; joint embedding width
  int gru_hidden = 128;
};

// Temporal geometry of the audio encoder. The strided cascade
// (6,2) -> (5,2) -> (17,2) over 10 ms mel frames realizes an effective
// receptive field of 775 ms advanced by 80 ms per output frame, so the
// output length is floor((t_f*10 - 775)/80) + 1 for any t_f >= 78.
inline constexpr int kConv1Kernel = 6, kConv1Stride = 2;
inline constexpr int kConv2Kernel = 5, kConv2Stride = 2;
inline constexpr int kConv3Kernel = 17, kConv3Stride = 2;
inline constexpr int kStreamBKernel = 3, kStreamBStride = 1;
inline constexpr int kStreamBPoolWindow = 76, kStreamBPoolStride = 8;
inline constexpr int kMinMelFrames = 78;
inline constexpr int kAudioWindowMs = 775;
inline constexpr int kAudioHopMs = 80;

/// Audio embedding frames produced from t_f mel frames. Inputs shorter than
/// the 775 ms receptive field are padded internally up to one output frame.
inline int audio_frame_count(int t_f) {
  if (t_f < kMinMelFrames) t_f = kMinMelFrames;
  return (t_f - kMinMelFrames) / kStreamBPoolStride + 1;
}

/// Sequence of audio embedding frames, one row per 80 ms step.
struct AudioEmbedding {
  ad::Var e_a;  // t_a x emb_dim
};

/// Per-frame CTC logits over the phoneme vocabulary plus blank.
struct CtcLogits {
  ad::Var z;     // t_a x (v_phon + 1)
  int blank_id;  // == v_phon
};

/// Embedded phoneme query, one row per phoneme.
struct PhonemeQuery {
  std::vector<int> phoneme_ids;
  ad::Var e_t;  // t_t x emb_dim
};

/// Fixed sinusoidal position code: PE[p, 2i] = sin(p / 10000^(2i/dim)),
/// PE[p, 2i+1] = cos(p / 10000^(2i/dim)).
inline Matrix positional_encoding(int length, int dim) {
  if (dim % 2 != 0) throw OddDim("positional encoding needs even dim, got " + std::to_string(dim));
  Matrix pe(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = p * std::exp(-std::log(10000.0) * (2.0 * i) / dim);
      pe(p, 2 * i) = std::sin(angle);
      pe(p, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

inline void init_encoder_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  auto add = [&](const std::string& name, int r, int c) {
    store.add(name, xavier_uniform(r, c, rng));
  };
  add("enc.conv1.w", kConv1Kernel * cfg.n_mels, cfg.conv1_ch);
  store.add("enc.conv1.b", Matrix(1, cfg.conv1_ch));
  add("enc.conv2.w", kConv2Kernel * cfg.conv1_ch, cfg.conv2_ch);
  store.add("enc.conv2.b", Matrix(1, cfg.conv2_ch));
  add("enc.conv3.w", kConv3Kernel * cfg.conv2_ch, cfg.stream_a_dim);
  store.add("enc.conv3.b", Matrix(1, cfg.stream_a_dim));
  add("enc.convb.w", kStreamBKernel * cfg.n_mels, cfg.stream_b_dim);
  store.add("enc.convb.b", Matrix(1, cfg.stream_b_dim));
  add("enc.ctc.w", cfg.emb_dim, cfg.v_phon + 1);
  store.add("enc.ctc.b", Matrix(1, cfg.v_phon + 1));
  add("enc.table", cfg.v_phon, cfg.table_dim);
  add("enc.fc.w", cfg.table_dim, cfg.emb_dim);
  store.add("enc.fc.b", Matrix(1, cfg.emb_dim));
}

/// Two-stream audio encoder over log-mel frames.
///
/// Stream A: three strided temporal convs (ReLU between them) summarizing
/// 775 ms of context per output frame. Stream B: a narrow k=3 conv mean-pooled
/// onto the same 80 ms output grid. The concatenation feeds the CTC head
/// before position codes are added; the returned embedding has them added.
inline std::pair<AudioEmbedding, CtcLogits> encode_audio(ad::Tape& tape, const Matrix& logmel,
                                                         ParamBinder& p, const ModelConfig& cfg,
                                                         bool add_posenc = true) {
  if (logmel.cols() != cfg.n_mels)
    throw ShapeMismatch("encode_audio: expected " + std::to_string(cfg.n_mels) + " mel bands, got " +
                        std::to_string(logmel.cols()));
  Matrix mel = logmel;
  if (mel.rows() < kMinMelFrames) {
    // Pad short inputs with silence frames (the log of the energy floor).
    Matrix padded(kMinMelFrames, mel.cols(), std::log(dsp::kEnergyFloor));
    for (int r = 0; r < mel.rows(); ++r)
      for (int c = 0; c < mel.cols(); ++c) padded(r, c) = mel(r, c);
    mel = std::move(padded);
  }

  ad::Var x = tape.constant(mel);
  ad::Var a1 = ad::relu(ad::conv1d(x, p("enc.conv1.w"), p("enc.conv1.b"), kConv1Kernel, kConv1Stride));
  ad::Var a2 = ad::relu(ad::conv1d(a1, p("enc.conv2.w"), p("enc.conv2.b"), kConv2Kernel, kConv2Stride));
  ad::Var a3 = ad::conv1d(a2, p("enc.conv3.w"), p("enc.conv3.b"), kConv3Kernel, kConv3Stride);

  ad::Var b1 = ad::conv1d(x, p("enc.convb.w"), p("enc.convb.b"), kStreamBKernel, kStreamBStride);
  ad::Var b2 = ad::mean_pool_windows(b1, kStreamBPoolWindow, kStreamBPoolStride);

  ad::Var pre = ad::concat_cols(a3, b2);  // t_a x emb_dim, before position codes
  ad::Var z = ad::add_rowvec(ad::matmul(pre, p("enc.ctc.w")), p("enc.ctc.b"));

  ad::Var e_a = pre;
  if (add_posenc) {
    ad::Var pe = tape.constant(positional_encoding(pre.rows(), cfg.emb_dim));
    e_a = ad::add(pre, pe);
  }
  return {AudioEmbedding{e_a}, CtcLogits{z, cfg.v_phon}};
}

/// Phoneme-sequence encoder: table lookup, one ReLU projection to the joint
/// width, then position codes.
inline PhonemeQuery encode_text(ad::Tape& tape, const std::vector<int>& phoneme_ids, ParamBinder& p,
                                const ModelConfig& cfg, bool add_posenc = true) {
  if (phoneme_ids.empty()) throw EmptyBatch("encode_text: empty phoneme sequence");
  for (int id : phoneme_ids)
    if (id < 0 || id >= cfg.v_phon)
      throw UnknownPhonemeId("encode_text: phoneme id " + std::to_string(id) + " outside [0, " +
                             std::to_string(cfg.v_phon) + ")");
  ad::Var emb = ad::gather_rows(p("enc.table"), phoneme_ids);
  ad::Var h = ad::relu(ad::add_rowvec(ad::matmul(emb, p("enc.fc.w")), p("enc.fc.b")));
  ad::Var e_t = h;
  if (add_posenc) {
    ad::Var pe = tape.constant(positional_encoding(static_cast<int>(phoneme_ids.size()), cfg.emb_dim));
    e_t = ad::add(h, pe);
  }
  return PhonemeQuery{phoneme_ids, e_t};
}

}  // namespace mlfa::enc
