#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mlfa/alignment.hpp"
#include "mlfa/autodiff.hpp"
#include "mlfa/binio.hpp"
#include "mlfa/datakit.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/losses.hpp"
#include "mlfa/matcher.hpp"
#include "mlfa/model.hpp"
#include "mlfa/params.hpp"

namespace mlfa::train {

/// Optimization schedule and term switches. Dropping the phoneme-level
/// contrastive term also drops its CTC supervision (they form one
/// alignment-training branch).
struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 64;    // N; desk-scale default
  int ucl_minibatch = 5;  // M, size of each contrastive sub-group
  uint64_t seed = 1;
  loss::FaConfig fa;
  bool use_pcl = true;  // phoneme-level confidence-contrast term (CTC stays on)
  bool use_ucl = true;
  bool use_fa = true;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::map<std::string, Matrix> m, v;
  long long t = 0;
};

/// Standard bias-corrected Adam. Parameters without a gradient entry this
/// step update with a zero gradient (their moments keep decaying), which
/// keeps the step count global and the update deterministic.
inline void adam_step(ParamStore& params, const std::map<std::string, Matrix>& grads,
                      AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params) {
    Matrix& m = state.m[name];
    Matrix& v = state.v[name];
    if (m.size() == 0) m = Matrix(p.rows(), p.cols());
    if (v.size() == 0) v = Matrix(p.rows(), p.cols());
    const Matrix* g = nullptr;
    if (auto it = grads.find(name); it != grads.end()) {
      if (!it->second.same_shape(p)) throw ShapeMismatch("adam_step: gradient shape for " + name);
      g = &it->second;
    }
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? g->data()[i] : 0.0;
      m.data()[i] = beta1 * m.data()[i] + (1.0 - beta1) * gi;
      v.data()[i] = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint: "MLFA" magic, u32 version, u32 tensor count, per tensor
// (u16 name length, name, u8 rank, u32 dims, LE f32 payload), trailing CRC32.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  ParamStore tensors;
};

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ostringstream body(std::ios::binary);
  body.write("MLFA", 4);
  binio::write_u32(body, c.version);
  binio::write_u32(body, static_cast<uint32_t>(c.tensors.size()));
  for (const auto& [name, m] : c.tensors) {
    if (name.size() > 0xFFFF) throw BadCheckpoint("tensor name too long: " + name);
    binio::write_u16(body, static_cast<uint16_t>(name.size()));
    body.write(name.data(), static_cast<std::streamsize>(name.size()));
    body.put(static_cast<char>(2));  // rank: all tensors are matrices
    binio::write_u32(body, static_cast<uint32_t>(m.rows()));
    binio::write_u32(body, static_cast<uint32_t>(m.cols()));
    for (size_t i = 0; i < m.size(); ++i) binio::write_f32(body, static_cast<float>(m.data()[i]));
  }
  const std::string bytes = body.str();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  binio::write_u32(os, binio::crc32_of(bytes));
  if (!os) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string all = buf.str();
  if (all.size() < 4 || all.compare(0, 4, "MLFA") != 0)
    throw BadMagic(path + ": not a checkpoint file");
  if (all.size() < 16) throw BadCheckpoint(path + ": truncated file");

  const std::string body = all.substr(0, all.size() - 4);
  std::istringstream tail(all.substr(all.size() - 4));
  const uint32_t stored = binio::read_u32(tail);
  if (binio::crc32_of(body) != stored) throw CrcMismatch(path + ": checksum mismatch");

  std::istringstream bs(body, std::ios::binary);
  bs.ignore(4);  // magic
  Checkpoint c;
  c.version = binio::read_u32(bs);
  if (c.version != kCheckpointVersion)
    throw VersionUnsupported(path + ": version " + std::to_string(c.version));
  const uint32_t count = binio::read_u32(bs);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = binio::read_u16(bs);
    std::string name(len, '\0');
    if (!bs.read(name.data(), len)) throw BadCheckpoint(path + ": truncated tensor name");
    const int rank = bs.get();
    if (rank != 2) throw BadCheckpoint(path + ": tensor '" + name + "' has rank " + std::to_string(rank));
    const uint32_t rows = binio::read_u32(bs);
    const uint32_t cols = binio::read_u32(bs);
    if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1u << 27))
      throw BadCheckpoint(path + ": tensor '" + name + "' has implausible shape");
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (size_t j = 0; j < m.size(); ++j) m.data()[j] = static_cast<double>(binio::read_f32(bs));
    c.tensors.add(name, std::move(m));
  }
  if (bs.peek() != std::istringstream::traits_type::eof())
    throw BadCheckpoint(path + ": trailing bytes after tensor table");
  return c;
}

/// Scalar count over model tensors (reserved "__"-prefixed metadata entries
/// are bookkeeping, not parameters).
inline size_t total_param_count(const Checkpoint& c) {
  size_t n = 0;
  for (const auto& [name, m] : c.tensors)
    if (name.rfind("__", 0) != 0) n += m.size();
  return n;
}

// Config snapshot rides along as reserved 1x1 tensors; the u64 seed is split
// into four 16-bit chunks so every value survives the f32 payload exactly.
namespace detail {
inline void put_meta(Checkpoint& c, const std::string& key, double v) {
  c.tensors.add("__cfg." + key, Matrix::scalar(v));
}

inline double get_meta(const Checkpoint& c, const std::string& key, double fallback) {
  const std::string name = "__cfg." + key;
  return c.tensors.has(name) ? c.tensors.at(name)(0, 0) : fallback;
}
}  // namespace detail

inline void embed_config(Checkpoint& c, const TrainConfig& tc, const enc::ModelConfig& mc,
                         int epoch) {
  using detail::put_meta;
  put_meta(c, "epochs", tc.epochs);
  put_meta(c, "lr", tc.learning_rate);
  put_meta(c, "batch", tc.batch_size);
  put_meta(c, "ucl_m", tc.ucl_minibatch);
  for (int i = 0; i < 4; ++i)
    put_meta(c, "seed" + std::to_string(i), static_cast<double>((tc.seed >> (16 * i)) & 0xFFFF));
  put_meta(c, "fa.gamma", tc.fa.gamma);
  put_meta(c, "fa.delta", tc.fa.delta);
  put_meta(c, "fa.alpha", tc.fa.alpha);
  put_meta(c, "fa.lambda", tc.fa.lambda);
  put_meta(c, "fa.epsilon", tc.fa.epsilon);
  put_meta(c, "use_pcl", tc.use_pcl ? 1 : 0);
  put_meta(c, "use_ucl", tc.use_ucl ? 1 : 0);
  put_meta(c, "use_fa", tc.use_fa ? 1 : 0);
  put_meta(c, "epoch", epoch);
  put_meta(c, "n_mels", mc.n_mels);
  put_meta(c, "v_phon", mc.v_phon);
  put_meta(c, "table_dim", mc.table_dim);
  put_meta(c, "conv1_ch", mc.conv1_ch);
  put_meta(c, "conv2_ch", mc.conv2_ch);
  put_meta(c, "stream_a", mc.stream_a_dim);
  put_meta(c, "stream_b", mc.stream_b_dim);
  put_meta(c, "emb_dim", mc.emb_dim);
  put_meta(c, "gru_hidden", mc.gru_hidden);
}

inline TrainConfig extract_train_config(const Checkpoint& c) {
  using detail::get_meta;
  TrainConfig tc;
  tc.epochs = static_cast<int>(get_meta(c, "epochs", tc.epochs));
  tc.learning_rate = get_meta(c, "lr", tc.learning_rate);
  tc.batch_size = static_cast<int>(get_meta(c, "batch", tc.batch_size));
  tc.ucl_minibatch = static_cast<int>(get_meta(c, "ucl_m", tc.ucl_minibatch));
  uint64_t seed = 0;
  for (int i = 0; i < 4; ++i)
    seed |= static_cast<uint64_t>(get_meta(c, "seed" + std::to_string(i), 0)) << (16 * i);
  tc.seed = seed;
  tc.fa.gamma = get_meta(c, "fa.gamma", tc.fa.gamma);
  tc.fa.delta = get_meta(c, "fa.delta", tc.fa.delta);
  tc.fa.alpha = get_meta(c, "fa.alpha", tc.fa.alpha);
  tc.fa.lambda = get_meta(c, "fa.lambda", tc.fa.lambda);
  tc.fa.epsilon = get_meta(c, "fa.epsilon", tc.fa.epsilon);
  tc.use_pcl = get_meta(c, "use_pcl", 1) != 0;
  tc.use_ucl = get_meta(c, "use_ucl", 1) != 0;
  tc.use_fa = get_meta(c, "use_fa", 1) != 0;
  return tc;
}

inline enc::ModelConfig extract_model_config(const Checkpoint& c) {
  using detail::get_meta;
  enc::ModelConfig mc;
  mc.n_mels = static_cast<int>(get_meta(c, "n_mels", mc.n_mels));
  mc.v_phon = static_cast<int>(get_meta(c, "v_phon", mc.v_phon));
  mc.table_dim = static_cast<int>(get_meta(c, "table_dim", mc.table_dim));
  mc.conv1_ch = static_cast<int>(get_meta(c, "conv1_ch", mc.conv1_ch));
  mc.conv2_ch = static_cast<int>(get_meta(c, "conv2_ch", mc.conv2_ch));
  mc.stream_a_dim = static_cast<int>(get_meta(c, "stream_a", mc.stream_a_dim));
  mc.stream_b_dim = static_cast<int>(get_meta(c, "stream_b", mc.stream_b_dim));
  mc.emb_dim = static_cast<int>(get_meta(c, "emb_dim", mc.emb_dim));
  mc.gru_hidden = static_cast<int>(get_meta(c, "gru_hidden", mc.gru_hidden));
  return mc;
}

inline int extract_epoch(const Checkpoint& c) {
  return static_cast<int>(detail::get_meta(c, "epoch", 0));
}

inline Checkpoint checkpoint_of(const model::System& sys, const TrainConfig& tc, int epoch) {
  Checkpoint c;
  for (const auto& [name, m] : sys.params) c.tensors.add(name, m);
  embed_config(c, tc, sys.cfg, epoch);
  return c;
}

inline model::System system_from_checkpoint(const Checkpoint& c) {
  model::System sys;
  sys.cfg = extract_model_config(c);
  for (const auto& [name, m] : c.tensors)
    if (name.rfind("__", 0) != 0) sys.params.add(name, m);
  if (!sys.params.has("enc.conv1.w") || !sys.params.has("match.attn.wq"))
    throw BadCheckpoint("checkpoint is missing model tensors");
  return sys;
}

// ---------------------------------------------------------------------------
// Batch loss assembly
// ---------------------------------------------------------------------------

struct BatchLoss {
  ad::Var total;
  loss::LossReport values;  // term values; gradients filled by the caller
};

/// Forward the batch through every module and assemble the six-term training
/// objective on the tape. Analytic-gradient pieces (CTC, Viterbi confidence,
/// batch losses) enter as custom scalar nodes.
///
/// Batch conventions: CTC runs on matched pairs only; Viterbi confidences
/// feed the phoneme contrastive term for every pair (infeasible negatives
/// score 0); the utterance contrastive term partitions the batch's matched
/// pairs into disjoint groups of `ucl_minibatch` (remainder dropped); the
/// false-alarm term is skipped in batches with no positive labels.
inline BatchLoss batch_loss(ad::Tape& tape, ParamBinder& bind, const enc::ModelConfig& mcfg,
                            const data::Dataset& ds, const std::vector<int>& trial_idx,
                            const TrainConfig& cfg) {
  if (trial_idx.empty()) throw EmptyBatch("batch_loss");
  const int n = static_cast<int>(trial_idx.size());

  // Encode each distinct clip and keyword once.
  std::map<int, int> clip_slot, kw_slot;
  std::vector<enc::AudioEmbedding> audio;
  std::vector<enc::CtcLogits> logits;
  std::vector<enc::PhonemeQuery> query;
  for (int i : trial_idx) {
    const auto& tr = ds.trials[i];
    if (!clip_slot.count(tr.clip)) {
      clip_slot[tr.clip] = static_cast<int>(audio.size());
      auto [a, z] = enc::encode_audio(tape, ds.clip_logmel[tr.clip], bind, mcfg);
      audio.push_back(a);
      logits.push_back(z);
    }
    if (!kw_slot.count(tr.kw)) {
      kw_slot[tr.kw] = static_cast<int>(query.size());
      query.push_back(enc::encode_text(tape, ds.keyword_phonemes[tr.kw], bind, mcfg));
    }
  }

  std::vector<ad::Var> q_utts, q_phons;
  std::vector<double> labels;
  q_utts.reserve(n);
  q_phons.reserve(n);
  for (int i : trial_idx) {
    const auto& tr = ds.trials[i];
    auto joint = match::cross_attend(tape, query[kw_slot[tr.kw]], audio[clip_slot[tr.clip]], bind, mcfg);
    auto out = match::discriminate(tape, joint, bind, mcfg);
    q_utts.push_back(out.q_utt);
    q_phons.push_back(out.q_phon);
    labels.push_back(static_cast<double>(tr.match));
  }

  ad::Var zero = tape.constant(Matrix::scalar(0.0));

  // Utterance-level BCE.
  std::vector<double> pred_utt(n);
  for (int i = 0; i < n; ++i) pred_utt[i] = q_utts[i].scalar();
  const auto bce_utt = loss::bce(pred_utt, labels);
  std::vector<Matrix> g_utt(n);
  for (int i = 0; i < n; ++i) g_utt[i] = Matrix::scalar(bce_utt.grad[i]);
  ad::Var l_utt = ad::custom_scalar(tape, q_utts, bce_utt.value, std::move(g_utt));

  // Phoneme-level BCE: every position inherits the utterance label.
  std::vector<double> flat_pred, flat_label;
  for (int i = 0; i < n; ++i) {
    const Matrix& qp = q_phons[i].value();
    for (int r = 0; r < qp.rows(); ++r) {
      flat_pred.push_back(qp(r, 0));
      flat_label.push_back(labels[i]);
    }
  }
  const auto bce_phon = loss::bce(flat_pred, flat_label);
  std::vector<Matrix> g_phon;
  size_t at = 0;
  for (int i = 0; i < n; ++i) {
    Matrix g(q_phons[i].rows(), 1);
    for (int r = 0; r < g.rows(); ++r) g(r, 0) = bce_phon.grad[at++];
    g_phon.push_back(std::move(g));
  }
  ad::Var l_phon = ad::custom_scalar(tape, q_phons, bce_phon.value, std::move(g_phon));

  // CTC supervision of the frame logits on matched pairs. Part of the base
  // objective: the contrastive ablation drops only the confidence term below.
  ad::Var l_ctc = zero, l_pcl = zero;
  {
    std::vector<ad::Var> ctc_in;
    std::vector<Matrix> ctc_g;
    double ctc_sum = 0.0;
    for (int i : trial_idx) {
      const auto& tr = ds.trials[i];
      if (!tr.match) continue;
      const align::CtcTarget y{ds.keyword_phonemes[tr.kw]};
      const ad::Var z = logits[clip_slot.at(tr.clip)].z;
      if (!align::feasible(z.rows(), y)) continue;  // synthetic clips make this unreachable
      auto res = align::ctc_loss(z.value(), y, mcfg.v_phon);
      ctc_sum += res.loss;
      ctc_in.push_back(z);
      ctc_g.push_back(std::move(res.grad_z));
    }
    if (!ctc_in.empty()) {
      const double inv = 1.0 / static_cast<double>(ctc_in.size());
      for (auto& g : ctc_g) g *= inv;
      l_ctc = ad::custom_scalar(tape, ctc_in, ctc_sum * inv, std::move(ctc_g));
    }
  }

  // Viterbi-confidence contrastive term on all pairs.
  if (cfg.use_pcl) {
    std::vector<double> s(n, 0.0);
    std::vector<int> s_slot(n, -1);  // local logits slot when feasible
    std::vector<Matrix> s_grad(n);
    for (int b = 0; b < n; ++b) {
      const auto& tr = ds.trials[trial_idx[b]];
      const align::CtcTarget y{ds.keyword_phonemes[tr.kw]};
      const ad::Var z = logits[clip_slot.at(tr.clip)].z;
      if (!align::feasible(z.rows(), y)) {
        if (tr.match) throw InfeasibleTarget("matched pair with target longer than the frame axis");
        continue;  // infeasible negative: confidence 0 with no gradient
      }
      auto conf = align::viterbi_confidence(z.value(), y, mcfg.v_phon);
      s[b] = conf.alignment.confidence;
      s_slot[b] = clip_slot.at(tr.clip);
      s_grad[b] = std::move(conf.grad_z);
    }
    const auto pcl = loss::pcl_loss(s, labels);
    std::vector<ad::Var> pcl_in;
    std::vector<Matrix> pcl_g;
    for (int b = 0; b < n; ++b) {
      if (s_slot[b] < 0) continue;
      pcl_in.push_back(logits[s_slot[b]].z);
      Matrix g = std::move(s_grad[b]);
      g *= pcl.grad[b];
      pcl_g.push_back(std::move(g));
    }
    l_pcl = ad::custom_scalar(tape, pcl_in, pcl.value, std::move(pcl_g));
  }

  // Utterance-level contrastive term over groups of matched pairs.
  ad::Var l_ucl = zero;
  if (cfg.use_ucl) {
    std::vector<int> matched;  // positions within the batch
    for (int b = 0; b < n; ++b)
      if (ds.trials[trial_idx[b]].match) matched.push_back(b);
    const int m = cfg.ucl_minibatch;
    const int groups = static_cast<int>(matched.size()) / m;
    std::vector<ad::Var> group_losses;
    for (int g = 0; g < groups; ++g) {
      std::vector<enc::AudioEmbedding> ga;
      std::vector<enc::PhonemeQuery> gt;
      std::vector<int> gkw;
      for (int j = 0; j < m; ++j) {
        const auto& tr = ds.trials[trial_idx[matched[g * m + j]]];
        ga.push_back(audio[clip_slot.at(tr.clip)]);
        gt.push_back(query[kw_slot.at(tr.kw)]);
        gkw.push_back(tr.kw);
      }
      Matrix mask(m, m);
      for (int v = 0; v < m; ++v)
        for (int r = 0; r < m; ++r) mask(v, r) = (gkw[v] == gkw[r]) ? 1.0 : 0.0;
      auto sim = match::pooled_similarity(tape, ga, gt, mcfg, &mask);
      const auto u = loss::ucl_loss(sim.s_utt.value(), sim.match_mask);
      group_losses.push_back(ad::custom_scalar(tape, {sim.s_utt}, u.value, {u.grad}));
    }
    if (!group_losses.empty()) {
      ad::Var sum = group_losses[0];
      for (size_t g = 1; g < group_losses.size(); ++g) sum = ad::add(sum, group_losses[g]);
      l_ucl = ad::scale(sum, 1.0 / static_cast<double>(group_losses.size()));
    }
  }

  // False-alarm-aware precision term over the batch's utterance scores.
  ad::Var l_fa = zero;
  const bool any_pos = std::any_of(labels.begin(), labels.end(), [](double v) { return v > 0.5; });
  if (cfg.use_fa && any_pos) {
    const auto fa = loss::fa_loss(pred_utt, labels, cfg.fa);
    std::vector<Matrix> g_fa(n);
    for (int i = 0; i < n; ++i) g_fa[i] = Matrix::scalar(fa.grad[i]);
    l_fa = ad::custom_scalar(tape, q_utts, fa.value, std::move(g_fa));
  }

  BatchLoss out{ad::add(ad::add(ad::add(l_utt, l_phon), ad::add(l_ctc, l_pcl)),
                        ad::add(l_ucl, l_fa)),
                {}};
  out.values = loss::total_loss(l_utt.scalar(), l_phon.scalar(), l_ctc.scalar(), l_pcl.scalar(),
                                l_ucl.scalar(), l_fa.scalar());
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<loss::LossReport> epoch_log;  // per-epoch means of the terms
};

namespace detail {
inline void write_log_line(std::ostream& os, int epoch, const loss::LossReport& r) {
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "{\"epoch\":" << epoch << ",\"l_utt\":" << num(r.l_utt) << ",\"l_phon\":" << num(r.l_phon)
     << ",\"l_ctc\":" << num(r.l_ctc) << ",\"l_pcl\":" << num(r.l_pcl)
     << ",\"l_ucl\":" << num(r.l_ucl) << ",\"l_fa\":" << num(r.l_fa)
     << ",\"l_total\":" << num(r.l_total) << "}\n";
}
}  // namespace detail

/// Full training run: seeded shuffling, batch assembly, reverse sweep, Adam.
/// Emits one JSON object per epoch to `log` (term means) when given.
inline TrainResult train(const TrainConfig& cfg, const data::Dataset& ds,
                         const enc::ModelConfig& mcfg = {}, std::ostream* log = nullptr) {
  if (cfg.learning_rate <= 0.0) throw BadConfig("learning_rate must be positive");
  if (cfg.ucl_minibatch < 1 || cfg.ucl_minibatch > cfg.batch_size)
    throw BadConfig("ucl_minibatch must be in [1, batch_size]");
  if (cfg.epochs < 0) throw BadConfig("epochs must be nonnegative");
  if (ds.trials.empty()) throw DataExhausted("corpus has no trials");

  model::System sys = model::init_system(cfg.seed, mcfg);
  AdamState adam;
  TrainResult out;

  std::vector<int> order(ds.trials.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(split_seed(split_seed(cfg.seed, seedstream::kShuffle), epoch));
    shuffle_rng.shuffle(order);

    loss::LossReport mean;
    int batches = 0;
    for (size_t beg = 0; beg < order.size(); beg += cfg.batch_size) {
      const size_t end = std::min(beg + cfg.batch_size, order.size());
      const std::vector<int> idx(order.begin() + beg, order.begin() + end);

      ad::Tape tape;
      ParamBinder bind(tape, sys.params);
      BatchLoss bl = [&]() -> BatchLoss {
        try {
          return batch_loss(tape, bind, sys.cfg, ds, idx, cfg);
        } catch (const NonFiniteTerm& e) {
          throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + ": " + e.what());
        }
      }();
      tape.backward(bl.total);

      std::map<std::string, Matrix> grads;
      for (const auto& [name, g] : tape.named_grads()) grads.emplace(name, *g);
      adam_step(sys.params, grads, adam, cfg.learning_rate);

      mean.l_utt += bl.values.l_utt;
      mean.l_phon += bl.values.l_phon;
      mean.l_ctc += bl.values.l_ctc;
      mean.l_pcl += bl.values.l_pcl;
      mean.l_ucl += bl.values.l_ucl;
      mean.l_fa += bl.values.l_fa;
      mean.l_total += bl.values.l_total;
      ++batches;
    }
    for (double* v : {&mean.l_utt, &mean.l_phon, &mean.l_ctc, &mean.l_pcl, &mean.l_ucl, &mean.l_fa,
                      &mean.l_total})
      *v /= batches;
    out.epoch_log.push_back(mean);
    if (log) detail::write_log_line(*log, epoch + 1, mean);
  }

  out.checkpoint = checkpoint_of(sys, cfg, cfg.epochs);
  return out;
}

}  // namespace mlfa::train
