#include <catch_amalgamated.hpp>

#include <cmath>

#include "mlfa/encoders.hpp"
#include "mlfa/model.hpp"
#include "mlfa/rng.hpp"
#include "test_util.hpp"

using namespace mlfa;

namespace {

model::System zeroed_system() {
  model::System sys = model::init_system(1);
  for (auto& [name, m] : sys.params)
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = 0.0;
  return sys;
}

Matrix random_mel(uint64_t seed, int t_f) {
  Rng rng(seed);
  Matrix m(t_f, 40);
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-23.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("positional encoding formula") {
  const Matrix pe = enc::positional_encoding(3, 128);
  REQUIRE(pe(0, 0) == 0.0);  // sin(0)
  REQUIRE(pe(0, 1) == 1.0);  // cos(0)
  REQUIRE_THAT(pe(1, 0),
               Catch::Matchers::WithinAbs(0.84147098480789650665250232163, 1e-15));  // sin(1)
  REQUIRE_THAT(pe(1, 1), Catch::Matchers::WithinAbs(std::cos(1.0), 1e-15));
  // Channel pair i uses angular frequency 10000^(-2i/dim).
  const double ang = 2.0 / std::pow(10000.0, 2.0 / 128.0);
  REQUIRE_THAT(pe(2, 2), Catch::Matchers::WithinAbs(std::sin(ang), 1e-15));
  REQUIRE_THAT(pe(2, 3), Catch::Matchers::WithinAbs(std::cos(ang), 1e-15));
  for (size_t i = 0; i < pe.size(); ++i) {
    REQUIRE(pe.data()[i] >= -1.0);
    REQUIRE(pe.data()[i] <= 1.0);
  }
  REQUIRE_THROWS_AS(enc::positional_encoding(4, 5), OddDim);
}

TEST_CASE("embedding frame count realizes the 775 ms window / 80 ms hop") {
  // Oracle straight from the stated geometry over 10 ms mel frames.
  const auto oracle = [](int t_f) { return (t_f * 10 - 775) / 80 + 1; };
  REQUIRE(enc::audio_frame_count(98) == 3);  // 1 s of audio
  REQUIRE(enc::audio_frame_count(98) == oracle(98));
  for (int t_f : {78, 79, 85, 86, 100, 158, 250, 399, 997})
    REQUIRE(enc::audio_frame_count(t_f) == oracle(t_f));
  // Short inputs are padded up to the minimum window.
  REQUIRE(enc::audio_frame_count(5) == 1);
}

TEST_CASE("encode_audio output shapes") {
  model::System sys = model::init_system(3);
  for (int t_f : {5, 78, 98, 158}) {
    ad::Tape tape;
    ParamBinder bind(tape, sys.params);
    auto [audio, ctc] = enc::encode_audio(tape, random_mel(t_f, t_f), bind, sys.cfg);
    const int t_a = enc::audio_frame_count(t_f);
    REQUIRE(audio.e_a.rows() == t_a);
    REQUIRE(audio.e_a.cols() == 128);
    REQUIRE(ctc.z.rows() == t_a);  // CTC logits share the embedding frame rate
    REQUIRE(ctc.z.cols() == 40);
    REQUIRE(ctc.blank_id == 39);
    REQUIRE(audio.e_a.value().all_finite());
  }
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  REQUIRE_THROWS_AS(enc::encode_audio(tape, Matrix(98, 41), bind, sys.cfg), ShapeMismatch);
}

TEST_CASE("zero weights leave only the positional encoding") {
  model::System sys = zeroed_system();
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  const Matrix mel(98, 40, std::log(1e-10));
  auto [audio, ctc] = enc::encode_audio(tape, mel, bind, sys.cfg);
  const Matrix pe = enc::positional_encoding(audio.e_a.rows(), 128);
  REQUIRE(audio.e_a.value() == pe);
  for (size_t i = 0; i < ctc.z.value().size(); ++i) REQUIRE(ctc.z.value().data()[i] == 0.0);
}

TEST_CASE("encode_text embeds table rows deterministically") {
  model::System sys = model::init_system(5);
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  // Repeated phoneme, positional encoding disabled: identical rows.
  auto q = enc::encode_text(tape, {7, 7}, bind, sys.cfg, /*add_posenc=*/false);
  REQUIRE(q.e_t.rows() == 2);
  REQUIRE(q.e_t.cols() == 128);
  for (int c = 0; c < 128; ++c) REQUIRE(q.e_t.value()(0, c) == q.e_t.value()(1, c));

  // Permutation equivariance before positional encoding.
  auto a = enc::encode_text(tape, {3, 11, 25}, bind, sys.cfg, false);
  auto b = enc::encode_text(tape, {25, 3, 11}, bind, sys.cfg, false);
  for (int c = 0; c < 128; ++c) {
    REQUIRE(a.e_t.value()(0, c) == b.e_t.value()(1, c));
    REQUIRE(a.e_t.value()(1, c) == b.e_t.value()(2, c));
    REQUIRE(a.e_t.value()(2, c) == b.e_t.value()(0, c));
  }
}

TEST_CASE("text encoder ReLU clamps a forced-negative projection") {
  model::System sys = model::init_system(5);
  Matrix& table = sys.params.at("enc.table");
  for (size_t i = 0; i < table.size(); ++i) table.data()[i] = 1.0;
  Matrix& w = sys.params.at("enc.fc.w");
  for (size_t i = 0; i < w.size(); ++i) w.data()[i] = -1.0;
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  auto q = enc::encode_text(tape, {0, 19}, bind, sys.cfg, false);
  for (size_t i = 0; i < q.e_t.value().size(); ++i) REQUIRE(q.e_t.value().data()[i] == 0.0);
  // With posenc back on, position 0 contributes sin(0)=0 / cos(0)=1 additively.
  auto qp = enc::encode_text(tape, {0}, bind, sys.cfg, true);
  REQUIRE(qp.e_t.value()(0, 0) == 0.0);
  REQUIRE(qp.e_t.value()(0, 1) == 1.0);
}

TEST_CASE("encode_text input validation") {
  model::System sys = model::init_system(5);
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  REQUIRE_THROWS_AS(enc::encode_text(tape, {}, bind, sys.cfg), EmptyBatch);
  REQUIRE_THROWS_AS(enc::encode_text(tape, {39}, bind, sys.cfg), UnknownPhonemeId);
  REQUIRE_THROWS_AS(enc::encode_text(tape, {-1}, bind, sys.cfg), UnknownPhonemeId);
}

TEST_CASE("parameter counting") {
  ParamStore empty;
  REQUIRE(empty.param_count() == 0);
  ParamStore small;
  small.add("a", Matrix(3, 4));
  small.add("b", Matrix(1, 4));
  REQUIRE(small.param_count() == 16);

  const model::System sys = model::init_system(1);
  const size_t total = sys.params.param_count();
  REQUIRE(total >= 400'000);
  REQUIRE(total <= 1'000'000);
  REQUIRE(total == sys.params.param_count("enc.") + sys.params.param_count("match."));
}

TEST_CASE("short mel inputs are padded to the minimum window") {
  model::System sys = model::init_system(9);
  ad::Tape tape;
  ParamBinder bind(tape, sys.params);
  auto [audio, ctc] = enc::encode_audio(tape, random_mel(42, 10), bind, sys.cfg);
  REQUIRE(audio.e_a.rows() == 1);
  // Padding rows carry the energy floor, so the single frame must match a
  // mel explicitly padded to 78 rows with log(1e-10).
  Matrix padded(78, 40, std::log(1e-10));
  const Matrix small = random_mel(42, 10);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 40; ++c) padded(r, c) = small(r, c);
  ad::Tape tape2;
  ParamBinder bind2(tape2, sys.params);
  auto [audio2, ctc2] = enc::encode_audio(tape2, padded, bind2, sys.cfg);
  REQUIRE(audio.e_a.value() == audio2.e_a.value());
}
