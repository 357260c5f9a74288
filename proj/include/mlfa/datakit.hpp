#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mlfa/binio.hpp"
#include "mlfa/dsp.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/rng.hpp"

namespace mlfa::data {

// ---------------------------------------------------------------------------
// Phoneme inventory: 39 ARPAbet-style symbols, ids in alphabetical order.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& phoneme_inventory() {
  static const std::vector<std::string> inv = {
      "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
      "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY",
      "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};
  return inv;
}

inline constexpr int kPhonemeCount = 39;

/// Id of a phoneme symbol, or -1 if the symbol is not in the inventory.
inline int phoneme_id(const std::string& symbol) {
  const auto& inv = phoneme_inventory();
  for (int i = 0; i < static_cast<int>(inv.size()); ++i)
    if (inv[i] == symbol) return i;
  return -1;
}

inline const std::string& phoneme_name(int id) {
  const auto& inv = phoneme_inventory();
  if (id < 0 || id >= static_cast<int>(inv.size()))
    throw UnknownPhonemeId("phoneme id " + std::to_string(id) + " outside inventory");
  return inv[id];
}

// ---------------------------------------------------------------------------
// Lexicon: case-insensitive word -> phoneme-id map, the G2P substitute.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}
}  // namespace detail

class Lexicon {
 public:
  void add(const std::string& word, std::vector<int> ids) {
    for (int id : ids)
      if (id < 0 || id >= kPhonemeCount)
        throw UnknownPhonemeId("lexicon entry '" + word + "' uses phoneme id " + std::to_string(id));
    entries_[detail::upper(word)] = std::move(ids);
  }

  bool contains(const std::string& word) const { return entries_.count(detail::upper(word)) > 0; }

  const std::vector<int>& at(const std::string& word) const {
    auto it = entries_.find(detail::upper(word));
    if (it == entries_.end()) throw OutOfVocabulary(word);
    return it->second;
  }

  size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Parse "WORD P1 P2 ..." lines; '#' comments and blank lines are skipped.
  static Lexicon parse(std::istream& is) {
    Lexicon lex;
    std::string line;
    while (std::getline(is, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      auto toks = detail::split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() < 2) throw BadFormat("lexicon line with no phonemes: '" + line + "'");
      std::vector<int> ids;
      for (size_t i = 1; i < toks.size(); ++i) {
        const int id = phoneme_id(detail::upper(toks[i]));
        if (id < 0) throw OutOfVocabulary(toks[i]);
        ids.push_back(id);
      }
      lex.add(toks[0], std::move(ids));
    }
    return lex;
  }

  static Lexicon from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open lexicon file: " + path);
    return parse(is);
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write lexicon file: " + path);
    for (const auto& [word, ids] : entries_) {
      os << word;
      for (int id : ids) os << ' ' << phoneme_name(id);
      os << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
  }

  static const Lexicon& builtin();

 private:
  std::map<std::string, std::vector<int>> entries_;
};

/// Phoneme sequence for a word or phrase. Direct notation "/P1 P2 .../"
/// bypasses the lexicon; otherwise each whitespace token is looked up and the
/// per-word sequences are concatenated.
inline std::vector<int> to_phonemes(const std::string& text, const Lexicon& lex) {
  std::string s = text;
  // Trim outer whitespace.
  const auto first = s.find_first_not_of(" \t\r\n");
  const auto last = s.find_last_not_of(" \t\r\n");
  s = (first == std::string::npos) ? "" : s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '/' && s.back() == '/') {
    std::vector<int> ids;
    for (const auto& tok : detail::split_ws(s.substr(1, s.size() - 2))) {
      const int id = phoneme_id(detail::upper(tok));
      if (id < 0) throw OutOfVocabulary(tok);
      ids.push_back(id);
    }
    if (ids.empty()) throw OutOfVocabulary("empty phoneme notation: " + text);
    return ids;
  }
  std::vector<int> ids;
  const auto words = detail::split_ws(s);
  if (words.empty()) throw OutOfVocabulary("empty keyword text");
  for (const auto& w : words) {
    if (!lex.contains(w)) throw OutOfVocabulary(w);
    const auto& part = lex.at(w);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  return ids;
}

// ---------------------------------------------------------------------------
// WAV file IO: RIFF/WAVE, PCM16, mono, 16 kHz only.
// ---------------------------------------------------------------------------

inline void save_wav(const std::string& path, const dsp::Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write wav file: " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  binio::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::write_u32(os, 16);
  binio::write_u16(os, 1);  // PCM
  binio::write_u16(os, 1);  // mono
  binio::write_u32(os, static_cast<uint32_t>(w.sample_rate));
  binio::write_u32(os, static_cast<uint32_t>(w.sample_rate * 2));
  binio::write_u16(os, 2);   // block align
  binio::write_u16(os, 16);  // bits per sample
  os.write("data", 4);
  binio::write_u32(os, data_bytes);
  for (int16_t s : w.samples) binio::write_u16(os, static_cast<uint16_t>(s));
  if (!os) throw IoError("write failed: " + path);
}

inline dsp::Waveform load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav file: " + path);
  char tag[4];
  if (!is.read(tag, 4) || std::string(tag, 4) != "RIFF") throw BadFormat(path + ": not a RIFF file");
  binio::read_u32(is);  // overall size, unused
  if (!is.read(tag, 4) || std::string(tag, 4) != "WAVE") throw BadFormat(path + ": not a WAVE file");

  bool have_fmt = false;
  dsp::Waveform w;
  while (is.read(tag, 4)) {
    const uint32_t chunk = binio::read_u32(is);
    const std::string id(tag, 4);
    if (id == "fmt ") {
      if (chunk < 16) throw BadFormat(path + ": fmt chunk too small");
      const uint16_t format = binio::read_u16(is);
      const uint16_t channels = binio::read_u16(is);
      const uint32_t rate = binio::read_u32(is);
      binio::read_u32(is);  // byte rate
      binio::read_u16(is);  // block align
      const uint16_t bits = binio::read_u16(is);
      if (format != 1) throw BadFormat(path + ": not PCM");
      if (channels != 1) throw NotMono(path + ": has " + std::to_string(channels) + " channels");
      if (rate != static_cast<uint32_t>(dsp::kSampleRate))
        throw BadSampleRate(path + ": expected 16000 Hz, got " + std::to_string(rate));
      if (bits != 16) throw BadFormat(path + ": expected 16-bit samples, got " + std::to_string(bits));
      is.ignore(chunk - 16);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw BadFormat(path + ": data chunk before fmt chunk");
      const uint32_t n = chunk / 2;
      w.samples.resize(n);
      for (uint32_t i = 0; i < n; ++i)
        w.samples[i] = static_cast<int16_t>(binio::read_u16(is));
      return w;
    } else {
      is.ignore(chunk + (chunk % 2));  // chunks are word-aligned
    }
    if (!is) throw BadFormat(path + ": truncated chunk");
  }
  throw BadFormat(path + ": no data chunk");
}

// ---------------------------------------------------------------------------
// Deterministic synthetic speech: per-phoneme band-limited tone complexes.
// ---------------------------------------------------------------------------

/// Corpus-generation knobs. Per-phoneme spectral templates are fixed
/// functions of the phoneme id (see band_centers); everything random flows
/// from `seed`.
struct SynthSpec {
  std::vector<std::string> keywords;
  double phoneme_ms_min = 80.0;
  double phoneme_ms_max = 120.0;
  double snr_db = 20.0;
  int clip_ms = 1600;  // keyword is embedded in a noise clip of this length
  uint64_t seed = 1;
};

inline int band_count(int id) { return 2 + (id % 3); }

/// Formant-like band centers in Hz, pairwise distinct across the inventory
/// (the (id mod 7, (id/7) mod 6) pair is unique for id < 42).
inline std::array<double, 4> band_centers(int id) {
  return {300.0 + 100.0 * (id % 7), 1150.0 + 180.0 * ((id / 7) % 6),
          2600.0 + 240.0 * (id % 5), 5200.0 + 300.0 * (id % 4)};
}

namespace detail {

inline void validate_ids(const std::vector<int>& ids) {
  if (ids.empty()) throw UnknownPhonemeId("empty phoneme sequence");
  for (int id : ids)
    if (id < 0 || id >= kPhonemeCount)
      throw UnknownPhonemeId("phoneme id " + std::to_string(id) + " outside inventory");
}

/// Clean (noise-free) utterance signal in [-1, 1]: per phoneme, a tone
/// complex over its template bands with jittered duration and 5 ms
/// raised-cosine edges.
inline std::vector<double> utterance_signal(const std::vector<int>& ids, const SynthSpec& spec,
                                            Rng& rng) {
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  constexpr double kAmplitude = 0.25;
  const int edge = dsp::kSampleRate / 200;  // 5 ms ramp
  std::vector<double> signal;
  for (int id : ids) {
    const double dur_ms = rng.uniform(spec.phoneme_ms_min, spec.phoneme_ms_max);
    const int n = static_cast<int>(std::lround(dur_ms * dsp::kSampleRate / 1000.0));
    const int nb = band_count(id);
    const auto centers = band_centers(id);
    std::array<double, 4> phase{};
    for (int b = 0; b < nb; ++b) phase[b] = rng.uniform(0.0, kTwoPi);
    for (int i = 0; i < n; ++i) {
      double x = 0.0;
      for (int b = 0; b < nb; ++b)
        x += std::sin(kTwoPi * centers[b] * i / dsp::kSampleRate + phase[b]);
      x *= kAmplitude / nb;
      if (i < edge) x *= 0.5 - 0.5 * std::cos(kTwoPi * i / (2.0 * edge));
      const int from_end = n - 1 - i;
      if (from_end < edge) x *= 0.5 - 0.5 * std::cos(kTwoPi * from_end / (2.0 * edge));
      signal.push_back(x);
    }
  }
  return signal;
}

inline double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : std::sqrt(acc / v.size());
}

inline int16_t to_i16(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return static_cast<int16_t>(std::lround(c * 32767.0));
}

}  // namespace detail

/// Exactly the jittered phoneme tones plus white noise at the spec SNR.
/// Deterministic per (ids, seed).
inline dsp::Waveform synth_utterance(const std::vector<int>& ids, const SynthSpec& spec,
                                     uint64_t seed) {
  detail::validate_ids(ids);
  Rng rng(split_seed(seed, 0xA0));
  const auto signal = detail::utterance_signal(ids, spec, rng);
  const double noise_rms = detail::rms(signal) * std::pow(10.0, -spec.snr_db / 20.0);
  dsp::Waveform w;
  w.samples.reserve(signal.size());
  for (double x : signal) w.samples.push_back(detail::to_i16(x + noise_rms * rng.normal()));
  return w;
}

/// The utterance embedded at a seeded offset inside a noise-filled clip of
/// spec.clip_ms (grown if the utterance is longer). Clips give the audio
/// encoder enough context frames and keep CTC targets feasible.
inline dsp::Waveform synth_clip(const std::vector<int>& ids, const SynthSpec& spec, uint64_t seed) {
  detail::validate_ids(ids);
  Rng rng(split_seed(seed, 0xA1));
  const auto signal = detail::utterance_signal(ids, spec, rng);
  const int total = std::max(static_cast<int>(signal.size()),
                             static_cast<int>(std::lround(spec.clip_ms * dsp::kSampleRate / 1000.0)));
  const int offset = rng.uniform_int(0, total - static_cast<int>(signal.size()));
  const double noise_rms = detail::rms(signal) * std::pow(10.0, -spec.snr_db / 20.0);
  std::vector<double> mix(total, 0.0);
  for (int i = 0; i < total; ++i) mix[i] = noise_rms * rng.normal();
  for (size_t i = 0; i < signal.size(); ++i) mix[offset + i] += signal[i];
  dsp::Waveform w;
  w.samples.reserve(mix.size());
  for (double x : mix) w.samples.push_back(detail::to_i16(x));
  return w;
}

// ---------------------------------------------------------------------------
// Trial construction with hard negatives.
// ---------------------------------------------------------------------------

/// One scored (audio, keyword) pairing.
struct TrialPair {
  std::string audio_id;  // wav filename within the corpus
  std::string keyword;
  std::vector<int> phoneme_ids;
  int match = 0;
  bool hard_negative = false;
};

/// Levenshtein distance over phoneme-id sequences (unit costs).
inline int phoneme_edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::string clip_id(int kw, int rep) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "kw%02d_%03d.wav", kw, rep);
  return buf;
}

/// Positive pairs for every keyword clip plus negatives: easy negatives pair
/// a clip with a random other keyword, hard negatives with the keyword at
/// minimal phoneme edit distance (> 0; ties broken by keyword order).
inline std::vector<TrialPair> build_trials(const std::vector<std::string>& keywords, int n_per_kw,
                                           double neg_ratio, double hard_neg_fraction, uint64_t seed,
                                           const Lexicon& lex) {
  const int n_kw = static_cast<int>(keywords.size());
  if (n_kw < 2) throw InsufficientKeywords("need at least 2 keywords, got " + std::to_string(n_kw));
  std::vector<std::vector<int>> phon(n_kw);
  for (int k = 0; k < n_kw; ++k) phon[k] = to_phonemes(keywords[k], lex);

  std::vector<int> hard_partner(n_kw, -1);
  for (int k = 0; k < n_kw; ++k) {
    int best = -1, best_d = 0;
    for (int o = 0; o < n_kw; ++o) {
      if (o == k) continue;
      const int d = phoneme_edit_distance(phon[k], phon[o]);
      if (d == 0) continue;  // identical pronunciations are not negatives
      if (best < 0 || d < best_d) best = o, best_d = d;
    }
    if (best < 0) throw DegenerateLabels("all keywords share one pronunciation");
    hard_partner[k] = best;
  }

  std::vector<TrialPair> trials;
  for (int k = 0; k < n_kw; ++k)
    for (int j = 0; j < n_per_kw; ++j)
      trials.push_back({clip_id(k, j), keywords[k], phon[k], 1, false});

  const int n_pos = n_kw * n_per_kw;
  const int n_neg = static_cast<int>(std::llround(n_pos * neg_ratio));
  Rng rng(split_seed(seed, seedstream::kTrials));
  for (int i = 0; i < n_neg; ++i) {
    const int src = i % n_pos;
    const int k = src / n_per_kw;
    const bool hard = rng.uniform() < hard_neg_fraction;
    int other;
    if (hard) {
      other = hard_partner[k];
    } else {
      other = rng.uniform_int(0, n_kw - 2);
      if (other >= k) ++other;
    }
    trials.push_back({trials[src].audio_id, keywords[other], phon[other], 0, hard});
  }
  return trials;
}

// ---------------------------------------------------------------------------
// Trial CSV: header audio_path,keyword,phonemes,match.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string quote_field(const std::string& s) {
  if (s.find('"') != std::string::npos || s.find('\n') != std::string::npos)
    throw BadFormat("CSV field may not contain quotes or newlines: " + s);
  return '"' + s + '"';
}

/// Split one CSV line honoring double-quoted fields (no escaped quotes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw BadFormat("unterminated quote in CSV line: " + line);
  fields.push_back(cur);
  return fields;
}
}  // namespace detail

inline constexpr const char* kTrialsCsvHeader = "audio_path,keyword,phonemes,match";

inline void write_trials_csv(const std::string& path, const std::vector<TrialPair>& trials) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write trials file: " + path);
  os << kTrialsCsvHeader << '\n';
  for (const auto& t : trials) {
    std::string phon;
    for (size_t i = 0; i < t.phoneme_ids.size(); ++i) {
      if (i) phon += ' ';
      phon += phoneme_name(t.phoneme_ids[i]);
    }
    os << t.audio_id << ',' << detail::quote_field(t.keyword) << ',' << detail::quote_field(phon)
       << ',' << t.match << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<TrialPair> read_trials_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open trials file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw BadFormat(path + ": empty trials file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrialsCsvHeader)
    throw BadFormat(path + ": expected header '" + kTrialsCsvHeader + "', got '" + line + "'");
  std::vector<TrialPair> trials;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw BadFormat(path + ": expected 4 fields, got line '" + line + "'");
    TrialPair t;
    t.audio_id = f[0];
    t.keyword = f[1];
    for (const auto& sym : detail::split_ws(f[2])) {
      const int id = phoneme_id(sym);
      if (id < 0) throw OutOfVocabulary(sym);
      t.phoneme_ids.push_back(id);
    }
    if (f[3] == "1")
      t.match = 1;
    else if (f[3] == "0")
      t.match = 0;
    else
      throw BadFormat(path + ": match flag must be 0 or 1, got '" + f[3] + "'");
    trials.push_back(std::move(t));
  }
  return trials;
}

// ---------------------------------------------------------------------------
// Dataset: synthesized corpus in memory (log-mels precomputed) or on disk.
// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<std::string> keywords;
  std::vector<std::vector<int>> keyword_phonemes;
  std::vector<std::string> clip_ids;
  std::vector<Matrix> clip_logmel;
  std::vector<int> clip_kw;  // source keyword per clip; -1 if unknown
  struct Trial {
    int clip;
    int kw;
    int match;
    bool hard;
  };
  std::vector<Trial> trials;
};

/// Deterministic per-clip synthesis seed.
inline uint64_t clip_seed(const SynthSpec& spec, int kw, int rep) {
  return split_seed(split_seed(spec.seed, seedstream::kCorpus),
                    static_cast<uint64_t>(kw) * 1000003ULL + static_cast<uint64_t>(rep));
}

/// Synthesize the full corpus in memory: one clip per positive trial, log-mel
/// features precomputed, trials resolved to indices.
inline Dataset build_dataset(const SynthSpec& spec, int n_per_kw, double neg_ratio,
                             double hard_neg_fraction, const Lexicon& lex) {
  const auto trials = build_trials(spec.keywords, n_per_kw, neg_ratio, hard_neg_fraction, spec.seed, lex);
  Dataset ds;
  ds.keywords = spec.keywords;
  for (const auto& kw : spec.keywords) ds.keyword_phonemes.push_back(to_phonemes(kw, lex));

  const int n_kw = static_cast<int>(spec.keywords.size());
  std::map<std::string, int> clip_index;
  for (int k = 0; k < n_kw; ++k) {
    for (int j = 0; j < n_per_kw; ++j) {
      const auto wav = synth_clip(ds.keyword_phonemes[k], spec, clip_seed(spec, k, j));
      clip_index[clip_id(k, j)] = static_cast<int>(ds.clip_ids.size());
      ds.clip_ids.push_back(clip_id(k, j));
      ds.clip_logmel.push_back(dsp::compute_logmel(wav).frames);
      ds.clip_kw.push_back(k);
    }
  }

  std::map<std::string, int> kw_index;
  for (int k = 0; k < n_kw; ++k) kw_index[spec.keywords[k]] = k;
  for (const auto& t : trials)
    ds.trials.push_back({clip_index.at(t.audio_id), kw_index.at(t.keyword), t.match, t.hard_negative});
  return ds;
}

/// Write the corpus to disk: WAV files, trials.csv, and a lexicon snapshot.
inline void write_corpus(const std::string& dir, const SynthSpec& spec, int n_per_kw,
                         double neg_ratio, double hard_neg_fraction, const Lexicon& lex) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus dir: " + dir + " (" + ec.message() + ")");
  const auto trials = build_trials(spec.keywords, n_per_kw, neg_ratio, hard_neg_fraction, spec.seed, lex);

  std::vector<std::vector<int>> phon;
  for (const auto& kw : spec.keywords) phon.push_back(to_phonemes(kw, lex));
  for (int k = 0; k < static_cast<int>(spec.keywords.size()); ++k)
    for (int j = 0; j < n_per_kw; ++j)
      save_wav(dir + "/" + clip_id(k, j), synth_clip(phon[k], spec, clip_seed(spec, k, j)));

  write_trials_csv(dir + "/trials.csv", trials);
  lex.save(dir + "/lexicon.txt");
}

/// Load a corpus written by write_corpus (or hand-assembled in its layout).
inline Dataset load_corpus(const std::string& dir) {
  const auto trials = read_trials_csv(dir + "/trials.csv");
  Dataset ds;
  std::map<std::string, int> kw_index, clip_index;
  for (const auto& t : trials) {
    if (!kw_index.count(t.keyword)) {
      kw_index[t.keyword] = static_cast<int>(ds.keywords.size());
      ds.keywords.push_back(t.keyword);
      ds.keyword_phonemes.push_back(t.phoneme_ids);
    }
    if (!clip_index.count(t.audio_id)) {
      clip_index[t.audio_id] = static_cast<int>(ds.clip_ids.size());
      ds.clip_ids.push_back(t.audio_id);
      ds.clip_logmel.push_back(dsp::compute_logmel(load_wav(dir + "/" + t.audio_id)).frames);
      ds.clip_kw.push_back(-1);
    }
  }
  for (const auto& t : trials) {
    const int c = clip_index.at(t.audio_id);
    const int k = kw_index.at(t.keyword);
    if (t.match == 1) ds.clip_kw[c] = k;
    ds.trials.push_back({c, k, t.match, false});
  }
  return ds;
}

/// Ten phonetically spread default keywords, all in the builtin lexicon.
inline const std::vector<std::string>& default_keywords() {
  static const std::vector<std::string> kw = {"hello",  "weather", "music",  "kitchen", "computer",
                                              "morning", "purple",  "window", "seven",   "goodbye"};
  return kw;
}

// ---------------------------------------------------------------------------
// Builtin lexicon: ~200 common command/control words, ARPAbet without stress.
// ---------------------------------------------------------------------------

inline const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = [] {
    static const char* kText = R"(
A AH
ABOUT AH B AW T
AFTER AE F T ER
AGAIN AH G EH N
ALARM AH L AA R M
ALL AO L
ANSWER AE N S ER
APPLE AE P AH L
AREA EH R IY AH
ARM AA R M
ARTIST AA R T AH S T
ASSISTANT AH S IH S T AH N T
BACK B AE K
BACKWARD B AE K W ER D
BATHROOM B AE TH R UW M
BED B EH D
BEDROOM B EH D R UW M
BEGIN B IH G IH N
BELL B EH L
BIRD B ER D
BLACK B L AE K
BLUE B L UW
BOOK B UH K
BOOST B UW S T
BOTTOM B AA T AH M
BRIGHT B R AY T
BRIGHTNESS B R AY T N AH S
BROWN B R AW N
CALL K AO L
CAMERA K AE M ER AH
CANCEL K AE N S AH L
CANDLE K AE N D AH L
CAR K AA R
CAT K AE T
CEILING S IY L IH NG
CHAIR CH EH R
CHANGE CH EY N JH
CHANNEL CH AE N AH L
CHECK CH EH K
CHIME CH AY M
CIRCLE S ER K AH L
CLEAN K L IY N
CLOCK K L AA K
CLOSE K L OW Z
COFFEE K AO F IY
COLD K OW L D
COLOR K AH L ER
COMPUTER K AH M P Y UW T ER
CONFIRM K AH N F ER M
CONTINUE K AH N T IH N Y UW
COOL K UW L
CURTAIN K ER T AH N
DARK D AA R K
DAY D EY
DELETE D IH L IY T
DESK D EH S K
DEVICE D IH V AY S
DIM D IH M
DINNER D IH N ER
DOG D AO G
DOOR D AO R
DOWN D AW N
DOWNSTAIRS D AW N S T EH R Z
EIGHT EY T
EMAIL IY M EY L
END EH N D
ENTER EH N T ER
EVENING IY V N IH NG
EXIT EH G Z IH T
FAN F AE N
FAST F AE S T
FIVE F AY V
FOLLOW F AA L OW
FORWARD F AO R W ER D
FOUR F AO R
GAME G EY M
GARAGE G ER AA ZH
GO G OW
GOODBYE G UH D B AY
GREEN G R IY N
HALLWAY HH AO L W EY
HAPPY HH AE P IY
HEAT HH IY T
HELLO HH AH L OW
HELP HH EH L P
HEY HH EY
HOME HH OW M
HOT HH AA T
HOUSE HH AW S
HUNDRED HH AH N D R AH D
JUMP JH AH M P
KITCHEN K IH CH AH N
LAMP L AE M P
LEARN L ER N
LEFT L EH F T
LIGHT L AY T
LISTEN L IH S AH N
LOCATE L OW K EY T
LOCK L AA K
LOUD L AW D
LOUDER L AW D ER
LOWER L OW ER
LUNCH L AH N CH
MARVIN M AA R V IH N
MAXIMUM M AE K S AH M AH M
MEETING M IY T IH NG
MENU M EH N Y UW
MESSAGE M EH S AH JH
MINIMUM M IH N AH M AH M
MORNING M AO R N IH NG
MOVE M UW V
MOVIE M UW V IY
MUSIC M Y UW Z IH K
MUTE M Y UW T
NEWS N UW Z
NEXT N EH K S T
NIGHT N AY T
NINE N AY N
NO N OW
NOISE N OY Z
NORTH N AO R TH
NOTIFY N OW T AH F AY
OFF AO F
OFFICE AO F AH S
OKAY OW K EY
ON AA N
ONE W AH N
OPEN OW P AH N
ORANGE AO R AH N JH
OUTSIDE AW T S AY D
PAUSE P AO Z
PHONE F OW N
PLAY P L EY
PLEASE P L IY Z
PORCH P AO R CH
POWER P AW ER
PROJECTOR P R AH JH EH K T ER
PURPLE P ER P AH L
QUESTION K W EH S CH AH N
QUIET K W AY AH T
QUIETER K W AY AH T ER
RADIO R EY D IY OW
RAISE R EY Z
READ R IY D
RECORD R EH K ER D
RED R EH D
REMIND R IH M AY N D
REPEAT R IH P IY T
RESET R IY S EH T
RESTART R IY S T AA R T
RESUME R IH Z UW M
RIGHT R AY T
ROOM R UW M
RUN R AH N
SCENE S IY N
SCREEN S K R IY N
SEARCH S ER CH
SECOND S EH K AH N D
SEND S EH N D
SET S EH T
SEVEN S EH V AH N
SHEILA SH IY L AH
SHOW SH OW
SHUFFLE SH AH F AH L
SILENCE S AY L AH N S
SING S IH NG
SIX S IH K S
SKIP S K IH P
SLEEP S L IY P
SLOW S L OW
SNOOZE S N UW Z
SOFTER S AO F T ER
SONG S AO NG
SOUND S AW N D
SOUTH S AW TH
SPEAKER S P IY K ER
STAIRS S T EH R Z
START S T AA R T
STATION S T EY SH AH N
STOP S T AA P
STORY S T AO R IY
STUDIO S T UW D IY OW
SWITCH S W IH CH
TABLE T EY B AH L
TELEVISION T EH L AH V IH ZH AH N
TEMPERATURE T EH M P R AH CH ER
TEN T EH N
THANKS TH AE NG K S
THERMOSTAT TH ER M AH S T AE T
THREE TH R IY
TIME T AY M
TIMER T AY M ER
TODAY T AH D EY
TOMORROW T AH M AA R OW
TREE T R IY
TURN T ER N
TWO T UW
UP AH P
UPSTAIRS AH P S T EH R Z
VACUUM V AE K Y UW M
VISUAL V IH ZH UW AH L
VOLUME V AA L Y UW M
WAKE W EY K
WALL W AO L
WARM W AO R M
WATCH W AA CH
WEATHER W EH DH ER
WHITE W AY T
WINDOW W IH N D OW
WOW W AW
YES Y EH S
YESTERDAY Y EH S T ER D EY
ZERO Z IH R OW
)";
    std::istringstream is(kText);
    return Lexicon::parse(is);
  }();
  return lex;
}

}  // namespace mlfa::data
