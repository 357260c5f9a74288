#pragma once

#include <vector>

#include "mlfa/autodiff.hpp"
#include "mlfa/encoders.hpp"
#include "mlfa/matcher.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/params.hpp"
#include "mlfa/rng.hpp"

namespace mlfa::model {

/// Full parameter set plus the width configuration it was built with.
struct System {
  enc::ModelConfig cfg;
  ParamStore params;
};

inline System init_system(uint64_t seed, const enc::ModelConfig& cfg = {}) {
  System sys;
  sys.cfg = cfg;
  Rng rng(split_seed(seed, seedstream::kInit));
  enc::init_encoder_params(sys.params, cfg, rng);
  match::init_matcher_params(sys.params, cfg, rng);
  return sys;
}

/// Everything one (audio, keyword) pair produces in a single forward pass.
struct PairForward {
  enc::AudioEmbedding audio;
  enc::CtcLogits ctc;
  enc::PhonemeQuery query;
  match::JointRepresentation joint;
  match::MatchOutput out;
};

inline PairForward forward_pair(ad::Tape& tape, ParamBinder& bind, const Matrix& logmel,
                                const std::vector<int>& phoneme_ids, const enc::ModelConfig& cfg) {
  auto [audio, ctc] = enc::encode_audio(tape, logmel, bind, cfg);
  enc::PhonemeQuery query = enc::encode_text(tape, phoneme_ids, bind, cfg);
  match::JointRepresentation joint = match::cross_attend(tape, query, audio, bind, cfg);
  match::MatchOutput out = match::discriminate(tape, joint, bind, cfg);
  return PairForward{audio, ctc, query, joint, out};
}

/// Utterance-level match probability for one pair (inference only).
inline double score_pair(const System& sys, const Matrix& logmel, const std::vector<int>& phoneme_ids) {
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  PairForward f = forward_pair(tape, bind, logmel, phoneme_ids, sys.cfg);
  return f.out.q_utt.scalar();
}

/// Attention weights for one pair (for heatmaps and entropy probes).
inline Matrix attention_for_pair(const System& sys, const Matrix& logmel,
                                 const std::vector<int>& phoneme_ids) {
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  PairForward f = forward_pair(tape, bind, logmel, phoneme_ids, sys.cfg);
  return f.joint.attn.value();
}

}  // namespace mlfa::model
