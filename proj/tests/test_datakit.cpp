#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mlfa/datakit.hpp"
#include "mlfa/dsp.hpp"

using namespace mlfa;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() / ("mlfa_datakit_" + std::to_string(++counter));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Time-averaged, mean-centered log-mel vector of a waveform.
std::vector<double> mel_profile(const dsp::Waveform& w) {
  const auto mel = dsp::compute_logmel(w);
  std::vector<double> avg(mel.frames.cols(), 0.0);
  for (int r = 0; r < mel.frames.rows(); ++r)
    for (int c = 0; c < mel.frames.cols(); ++c) avg[c] += mel.frames(r, c) / mel.frames.rows();
  double mean = 0.0;
  for (double v : avg) mean += v / avg.size();
  for (double& v : avg) v -= mean;
  return avg;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("phoneme inventory") {
  const auto& inv = data::phoneme_inventory();
  REQUIRE(inv.size() == 39);
  REQUIRE(data::phoneme_id("AA") == 0);
  REQUIRE(data::phoneme_id("ZH") == 38);
  REQUIRE(data::phoneme_id("HH") >= 0);
  REQUIRE(data::phoneme_id("QQ") == -1);
  REQUIRE(data::phoneme_name(data::phoneme_id("UW")) == "UW");
  REQUIRE_THROWS_AS(data::phoneme_name(39), UnknownPhonemeId);
  std::set<std::string> unique(inv.begin(), inv.end());
  REQUIRE(unique.size() == 39);
}

TEST_CASE("lexicon lookup and parsing") {
  const auto& lex = data::Lexicon::builtin();
  REQUIRE_NOTHROW(lex.at("HELLO"));
  REQUIRE(lex.at("hello") == lex.at("HELLO"));  // case-insensitive
  REQUIRE_THROWS_AS(lex.at("zzyx"), OutOfVocabulary);

  std::istringstream lex_text("# comment\nHEY HH EY\n\nGO G OW\n");
  const auto parsed = data::Lexicon::parse(lex_text);
  REQUIRE(parsed.at("hey") == std::vector<int>{data::phoneme_id("HH"), data::phoneme_id("EY")});
  REQUIRE(parsed.at("GO").size() == 2);

  const auto dir = temp_dir();
  parsed.save((dir / "lex.txt").string());
  const auto reloaded = data::Lexicon::from_file((dir / "lex.txt").string());
  REQUIRE(reloaded.at("hey") == parsed.at("hey"));
}

TEST_CASE("builtin lexicon covers the default keywords and full inventory") {
  const auto& lex = data::Lexicon::builtin();
  for (const auto& kw : data::default_keywords()) REQUIRE_NOTHROW(lex.at(kw));
  std::set<int> used;
  for (const auto& kw : data::default_keywords())
    for (int id : lex.at(kw)) used.insert(id);
  REQUIRE(used.size() >= 20);  // phonetically spread defaults
}

TEST_CASE("to_phonemes handles notation, phrases, and unknown words") {
  const auto& lex = data::Lexicon::builtin();
  REQUIRE(data::to_phonemes("/HH EY/", lex) ==
          std::vector<int>{data::phoneme_id("HH"), data::phoneme_id("EY")});
  const auto phrase = data::to_phonemes("hello seven", lex);
  auto expected = lex.at("hello");
  for (int id : lex.at("seven")) expected.push_back(id);
  REQUIRE(phrase == expected);
  try {
    data::to_phonemes("hello zzyx", lex);
    FAIL("expected OutOfVocabulary");
  } catch (const OutOfVocabulary& e) {
    REQUIRE(std::string(e.what()).find("zzyx") != std::string::npos);
  }
  REQUIRE_THROWS_AS(data::to_phonemes("/HH QQ/", lex), OutOfVocabulary);
}

TEST_CASE("wav round-trip and rejection of foreign formats") {
  const auto dir = temp_dir();
  dsp::Waveform w;
  w.samples = {0, 1000, -1000, 32767, -32768, 12345};
  const auto path = (dir / "a.wav").string();
  data::save_wav(path, w);
  const auto r = data::load_wav(path);
  REQUIRE(r.sample_rate == 16000);
  REQUIRE(r.samples == w.samples);

  // Stereo: patch channel count (offset 22) and block align/byte rate.
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    bytes[22] = 2;
    std::ofstream os((dir / "stereo.wav").string(), std::ios::binary);
    os << bytes;
  }
  REQUIRE_THROWS_AS(data::load_wav((dir / "stereo.wav").string()), NotMono);

  // 44.1 kHz: patch the sample-rate field (offset 24, little-endian).
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    const uint32_t rate = 44100;
    for (int i = 0; i < 4; ++i) bytes[24 + i] = static_cast<char>((rate >> (8 * i)) & 0xff);
    std::ofstream os((dir / "fast.wav").string(), std::ios::binary);
    os << bytes;
  }
  REQUIRE_THROWS_AS(data::load_wav((dir / "fast.wav").string()), BadSampleRate);

  {
    std::ofstream os((dir / "junk.wav").string(), std::ios::binary);
    os << "not a riff file at all";
  }
  REQUIRE_THROWS_AS(data::load_wav((dir / "junk.wav").string()), BadFormat);
  REQUIRE_THROWS_AS(data::load_wav((dir / "missing.wav").string()), IoError);
}

TEST_CASE("synthetic templates are pairwise distinct") {
  std::set<std::vector<double>> seen;
  for (int id = 0; id < 39; ++id) {
    const auto centers = data::band_centers(id);
    std::vector<double> key(centers.begin(), centers.begin() + data::band_count(id));
    REQUIRE(seen.insert(key).second);
  }
}

TEST_CASE("synth_utterance is deterministic with bounded duration") {
  const auto& lex = data::Lexicon::builtin();
  const auto ids = lex.at("hello");  // 4 phonemes
  data::SynthSpec spec;
  spec.keywords = {"hello"};
  const auto w1 = data::synth_utterance(ids, spec, 42);
  const auto w2 = data::synth_utterance(ids, spec, 42);
  REQUIRE(w1.samples == w2.samples);
  const auto w3 = data::synth_utterance(ids, spec, 43);
  REQUIRE(w1.samples != w3.samples);

  const double n = static_cast<double>(w1.samples.size());
  const double k = static_cast<double>(ids.size());
  REQUIRE(n >= k * 0.080 * 16000 - k);  // per-phoneme duration in [80, 120] ms
  REQUIRE(n <= k * 0.120 * 16000 + k);
  REQUIRE_THROWS_AS(data::synth_utterance({}, spec, 1), UnknownPhonemeId);
}

TEST_CASE("distinct phonemes render spectrally distinct audio") {
  data::SynthSpec spec;
  spec.snr_db = 40.0;  // measure the templates, not the noise
  double worst = 1.0;
  const std::vector<int> probe{0, 5, 11, 17, 23, 29, 35};
  for (size_t i = 0; i < probe.size(); ++i)
    for (size_t j = i + 1; j < probe.size(); ++j) {
      // Render each phoneme three times back to back for a stable estimate.
      const auto a = mel_profile(data::synth_utterance({probe[i], probe[i], probe[i]}, spec, 7));
      const auto b = mel_profile(data::synth_utterance({probe[j], probe[j], probe[j]}, spec, 7));
      worst = std::min(worst, 1.0 - cosine(a, b));
    }
  REQUIRE(worst > 0.1);  // cosine distance of mean-centered log-mel profiles
}

TEST_CASE("synth_clip embeds the utterance in a fixed-length noise bed") {
  data::SynthSpec spec;
  const auto ids = data::Lexicon::builtin().at("seven");
  const auto clip = data::synth_clip(ids, spec, 5);
  REQUIRE(clip.samples.size() == static_cast<size_t>(spec.clip_ms * 16));
  REQUIRE(clip.samples == data::synth_clip(ids, spec, 5).samples);
}

TEST_CASE("phoneme edit distance is a metric") {
  using data::phoneme_edit_distance;
  REQUIRE(phoneme_edit_distance({1, 2, 3}, {1, 2, 3}) == 0);
  REQUIRE(phoneme_edit_distance({1, 2}, {2, 1}) == 2);
  REQUIRE(phoneme_edit_distance({}, {1, 2, 3}) == 3);
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const auto draw = [&rng]() {
      std::vector<int> v(static_cast<size_t>(rng.uniform_int(0, 5)));
      for (auto& x : v) x = rng.uniform_int(0, 4);
      return v;
    };
    const auto a = draw(), b = draw(), c = draw();
    const int ab = phoneme_edit_distance(a, b);
    REQUIRE(ab == phoneme_edit_distance(b, a));                      // symmetry
    REQUIRE((ab == 0) == (a == b));                                  // identity
    REQUIRE(ab <= phoneme_edit_distance(a, c) + phoneme_edit_distance(c, b));  // triangle
  }
}

TEST_CASE("build_trials counts, labels, and determinism") {
  const auto& lex = data::Lexicon::builtin();
  const std::vector<std::string> kws{"hello", "weather", "music", "kitchen", "seven"};

  const auto pos_only = data::build_trials(kws, 4, 0.0, 0.5, 1, lex);
  REQUIRE(pos_only.size() == 20);
  for (const auto& t : pos_only) REQUIRE(t.match == 1);

  const auto both = data::build_trials(kws, 10, 1.0, 0.5, 1, lex);
  REQUIRE(both.size() == 100);  // 50 positives + 50 negatives
  int n_pos = 0;
  for (const auto& t : both) n_pos += t.match;
  REQUIRE(n_pos == 50);

  const auto again = data::build_trials(kws, 10, 1.0, 0.5, 1, lex);
  for (size_t i = 0; i < both.size(); ++i) {
    REQUIRE(both[i].audio_id == again[i].audio_id);
    REQUIRE(both[i].keyword == again[i].keyword);
    REQUIRE(both[i].match == again[i].match);
    REQUIRE(both[i].hard_negative == again[i].hard_negative);
  }

  REQUIRE_THROWS_AS(data::build_trials({"hello"}, 4, 1.0, 0.5, 1, lex), InsufficientKeywords);
}

TEST_CASE("negatives never pair a clip with its own keyword") {
  const auto& lex = data::Lexicon::builtin();
  const auto trials = data::build_trials(data::default_keywords(), 6, 2.0, 0.5, 9, lex);
  // Positive trials bind audio ids to their source keyword.
  std::map<std::string, std::string> source;
  for (const auto& t : trials)
    if (t.match == 1) source[t.audio_id] = t.keyword;
  for (const auto& t : trials)
    if (t.match == 0) REQUIRE(source.at(t.audio_id) != t.keyword);
}

TEST_CASE("hard negatives pair minimal-edit-distance keywords") {
  const auto& lex = data::Lexicon::builtin();
  // Two confusable keywords plus one distant one.
  const std::vector<std::string> kws{"/HH EY/", "/HH AY/", "/M Y UW Z IH K/"};
  const auto trials = data::build_trials(kws, 6, 1.0, 1.0, 3, lex);
  std::map<std::string, std::string> source;
  for (const auto& t : trials)
    if (t.match == 1) source[t.audio_id] = t.keyword;
  for (const auto& t : trials) {
    if (t.match != 0) continue;
    REQUIRE(t.hard_negative);
    if (source.at(t.audio_id) == "/HH EY/") REQUIRE(t.keyword == "/HH AY/");
    if (source.at(t.audio_id) == "/HH AY/") REQUIRE(t.keyword == "/HH EY/");
  }
}

TEST_CASE("all keywords identical is degenerate") {
  const auto& lex = data::Lexicon::builtin();
  REQUIRE_THROWS_AS(data::build_trials({"/HH EY/", "/HH EY/"}, 2, 1.0, 1.0, 1, lex),
                    DegenerateLabels);
}

TEST_CASE("trials CSV round-trip") {
  const auto dir = temp_dir();
  const auto& lex = data::Lexicon::builtin();
  const auto trials = data::build_trials({"hello", "seven", "purple"}, 3, 1.0, 0.5, 2, lex);
  const auto path = (dir / "trials.csv").string();
  data::write_trials_csv(path, trials);

  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  REQUIRE(header == data::kTrialsCsvHeader);

  const auto back = data::read_trials_csv(path);
  REQUIRE(back.size() == trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    REQUIRE(back[i].audio_id == trials[i].audio_id);
    REQUIRE(back[i].keyword == trials[i].keyword);
    REQUIRE(back[i].phoneme_ids == trials[i].phoneme_ids);
    REQUIRE(back[i].match == trials[i].match);
  }

  std::ofstream bad((dir / "bad.csv").string());
  bad << "audio_path,keyword,phonemes,match\nx.wav,\"a\",\"AA\",2\n";
  bad.close();
  REQUIRE_THROWS_AS(data::read_trials_csv((dir / "bad.csv").string()), BadFormat);
  std::ofstream wrong((dir / "wrong.csv").string());
  wrong << "nope\n";
  wrong.close();
  REQUIRE_THROWS_AS(data::read_trials_csv((dir / "wrong.csv").string()), BadFormat);
}

TEST_CASE("corpus write/load round-trip") {
  const auto dir = temp_dir();
  data::SynthSpec spec;
  spec.keywords = {"hello", "music", "seven"};
  spec.seed = 11;
  data::write_corpus(dir.string(), spec, 3, 1.0, 0.5, data::Lexicon::builtin());

  const auto ds = data::load_corpus(dir.string());
  REQUIRE(ds.keywords == spec.keywords);
  REQUIRE(ds.clip_ids.size() == 9);
  REQUIRE(ds.trials.size() == 18);
  REQUIRE(ds.clip_logmel.size() == 9);
  for (int kw : ds.clip_kw) REQUIRE(kw >= 0);
  for (const auto& t : ds.trials) {
    REQUIRE(t.clip >= 0);
    REQUIRE(t.clip < 9);
    REQUIRE((t.match == 0 || t.match == 1));
    if (t.match == 1) REQUIRE(ds.clip_kw[t.clip] == t.kw);
  }
  // Loaded log-mels match direct synthesis of the same clip.
  const auto wav = data::load_wav((dir / data::clip_id(1, 2)).string());
  REQUIRE(ds.clip_logmel[5] == dsp::compute_logmel(wav).frames);

  // In-memory construction agrees with the disk round-trip.
  const auto direct = data::build_dataset(spec, 3, 1.0, 0.5, data::Lexicon::builtin());
  REQUIRE(direct.trials.size() == ds.trials.size());
  for (size_t i = 0; i < ds.trials.size(); ++i) {
    REQUIRE(direct.trials[i].clip == ds.trials[i].clip);
    REQUIRE(direct.trials[i].kw == ds.trials[i].kw);
    REQUIRE(direct.trials[i].match == ds.trials[i].match);
  }
}
