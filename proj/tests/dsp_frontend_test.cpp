#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kws/dsp_frontend.hpp"
#include "kws/fft.hpp"

using kws::AudioBuffer;
using kws::FeatureVector;

namespace {

AudioBuffer random_audio(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  AudioBuffer a;
  a.samples.resize(n);
  for (auto& s : a.samples) s = dist(rng);
  return a;
}

}  // namespace

TEST_SUITE("dsp_frontend") {

TEST_CASE("frame counts follow floor((len - frame)/hop) + 1") {
  SUBCASE("100 ms audio, 30 ms frame, 10 ms hop -> 8 frames of 480 samples") {
    const auto seq = kws::frame_signal(random_audio(1600, 1), 30.0, 10.0);
    CHECK(seq.size() == 8);
    CHECK(seq.frame_len == 480);
    CHECK(seq.hop == 160);
  }
  SUBCASE("exactly one frame") {
    const auto seq = kws::frame_signal(random_audio(480, 2), 30.0, 10.0);
    CHECK(seq.size() == 1);
  }
  SUBCASE("shorter than a frame -> empty, not an error") {
    const auto seq = kws::frame_signal(random_audio(400, 3), 30.0, 10.0);
    CHECK(seq.size() == 0);
  }
  SUBCASE("bad geometry throws") {
    CHECK_THROWS_AS(kws::frame_signal(random_audio(1600, 4), 30.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(kws::frame_signal(random_audio(1600, 5), 10.0, 30.0), std::invalid_argument);
  }
}

TEST_CASE("framing reuses input samples bit-exactly at k*hop") {
  const AudioBuffer audio = random_audio(4321, 6);
  const auto seq = kws::frame_signal(audio, 30.0, 10.0);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto frame = seq.frame(k);
    for (std::size_t i = 0; i < frame.size(); ++i)
      CHECK(frame[i] == audio.samples[k * seq.hop + i]);
  }
}

TEST_CASE("log filterbank floors silence at log(1e-10)") {
  const std::vector<double> zeros(480, 0.0);
  const FeatureVector fv = kws::log_filterbank(zeros, 16000, 40);
  REQUIRE(fv.dim() == 40);
  for (const double v : fv.values) CHECK(v == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("1 kHz sine peaks in the band that owns bin 32") {
  // 1000 Hz at 16 kHz with a 512-point transform lands exactly on bin 32.
  std::vector<double> frame(480);
  for (std::size_t i = 0; i < frame.size(); ++i)
    frame[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0);

  const kws::MelFilterbank bank(16000, 512, 40);
  int expected = 0;
  double best = -1.0;
  for (int m = 0; m < bank.n_filters(); ++m) {
    const double w = bank.weights()[static_cast<std::size_t>(m)][32];
    if (w > best) {
      best = w;
      expected = m;
    }
  }
  REQUIRE(best > 0.0);

  const FeatureVector fv = kws::log_filterbank(frame, 16000, 40);
  int peak = 0;
  for (int m = 1; m < 40; ++m)
    if (fv.values[static_cast<std::size_t>(m)] > fv.values[static_cast<std::size_t>(peak)]) peak = m;
  CHECK(peak == expected);
}

TEST_CASE("white noise outputs stay finite and within 3 orders of magnitude") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 0.25);
  const kws::MelFilterbank bank(16000, 512, 40);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> frame(480);
    for (auto& s : frame) s = gauss(rng);
    const FeatureVector fv = kws::log_filterbank(bank, frame);
    double lo = fv.values[0], hi = fv.values[0];
    for (const double v : fv.values) {
      CHECK(std::isfinite(v));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(hi - lo < std::log(1000.0));
  }
}

TEST_CASE("filterbank rows sum positive and jointly cover interior bins") {
  const kws::MelFilterbank bank(16000, 512, 40);
  const auto& w = bank.weights();
  for (int m = 0; m < bank.n_filters(); ++m) {
    double row = 0.0;
    for (const double x : w[static_cast<std::size_t>(m)]) row += x;
    CHECK(row > 0.0);
  }
  // every bin strictly between the outermost filter edges has support
  const double low_mel = kws::MelFilterbank::hz_to_mel(20.0);
  const double high_mel = kws::MelFilterbank::hz_to_mel(8000.0);
  for (std::size_t k = 0; k < 257; ++k) {
    const double f = 16000.0 / 512.0 * static_cast<double>(k);
    const double mel = kws::MelFilterbank::hz_to_mel(f);
    if (mel <= low_mel || mel >= high_mel) continue;
    double support = 0.0;
    for (int m = 0; m < bank.n_filters(); ++m) support += w[static_cast<std::size_t>(m)][k];
    CHECK(support > 0.0);
  }
}

TEST_CASE("mfcc deltas vanish on constant input") {
  AudioBuffer audio;
  audio.samples.assign(1600, 0.3);
  const auto seq = kws::frame_signal(audio, 30.0, 10.0);
  const auto feats = kws::mfcc_with_deltas(seq);
  REQUIRE(feats.size() == 8);
  for (const auto& fv : feats) {
    REQUIRE(fv.dim() == 26);
    for (int d = 13; d < 26; ++d) CHECK(fv.values[static_cast<std::size_t>(d)] == 0.0);
  }
}

TEST_CASE("single frame input has zero deltas") {
  const auto seq = kws::frame_signal(random_audio(480, 11), 30.0, 10.0);
  const auto feats = kws::mfcc_with_deltas(seq);
  REQUIRE(feats.size() == 1);
  for (int d = 13; d < 26; ++d) CHECK(feats[0].values[static_cast<std::size_t>(d)] == 0.0);
}

TEST_CASE("two-frame deltas follow the regression formula and negate on swap") {
  // non-overlapping frames (hop == frame length) so the frame contents can be
  // swapped exactly by swapping sample ranges
  AudioBuffer ab = random_audio(960, 12);
  AudioBuffer ba;
  ba.samples.resize(960);
  std::copy_n(ab.samples.begin() + 480, 480, ba.samples.begin());
  std::copy_n(ab.samples.begin(), 480, ba.samples.begin() + 480);

  const auto feats = kws::mfcc_with_deltas(kws::frame_signal(ab, 30.0, 30.0));
  const auto swapped = kws::mfcc_with_deltas(kws::frame_signal(ba, 30.0, 30.0));
  REQUIRE(feats.size() == 2);

  // direct evaluation: with 2 frames and edge clamping, delta_t = 3*(c1-c0)/10
  // for t = 0 and t = 1 alike
  for (int d = 0; d < 13; ++d) {
    const double c0 = feats[0].values[static_cast<std::size_t>(d)];
    const double c1 = feats[1].values[static_cast<std::size_t>(d)];
    const double expect = 3.0 * (c1 - c0) / 10.0;
    CHECK(feats[0].values[static_cast<std::size_t>(13 + d)] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(feats[1].values[static_cast<std::size_t>(13 + d)] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(swapped[0].values[static_cast<std::size_t>(13 + d)] ==
          doctest::Approx(-expect).epsilon(1e-12));
  }
}

TEST_CASE("stack_context geometry and edge replication") {
  std::vector<FeatureVector> feats(41);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::size_t j = 0; j < feats.size(); ++j) {
    feats[j].frame_index = static_cast<int>(j);
    feats[j].values.resize(40);
    for (auto& v : feats[j].values) v = dist(rng);
  }

  SUBCASE("41 frames, center 30: 1640 dims, no replication") {
    const auto stacked = kws::stack_context(feats, 30, 30, 10);
    REQUIRE(stacked.values.size() == 1640);
    for (int i = 0; i < 41; ++i)
      for (int d = 0; d < 40; ++d)
        CHECK(stacked.values[static_cast<std::size_t>(i * 40 + d)] ==
              feats[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(d)]);
  }
  SUBCASE("center 0 replicates frame 0 into all past slots") {
    const auto stacked = kws::stack_context(feats, 0, 30, 10);
    for (int i = 0; i < 31; ++i)  // 30 past + the center itself
      for (int d = 0; d < 40; ++d)
        CHECK(stacked.values[static_cast<std::size_t>(i * 40 + d)] ==
              feats[0].values[static_cast<std::size_t>(d)]);
  }
  SUBCASE("clamped index identity at every slot") {
    for (std::size_t center : {0u, 7u, 30u, 40u}) {
      const auto stacked = kws::stack_context(feats, center, 30, 10);
      for (int i = 0; i < 41; ++i) {
        const auto src = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(center) - 30 + i, 0, 40));
        for (int d = 0; d < 40; ++d)
          CHECK(stacked.values[static_cast<std::size_t>(i * 40 + d)] ==
                feats[src].values[static_cast<std::size_t>(d)]);
      }
    }
  }
  SUBCASE("identical frames tile") {
    std::vector<FeatureVector> same(5, feats[0]);
    const auto stacked = kws::stack_context(same, 2, 30, 10);
    for (std::size_t i = 0; i < 41; ++i)
      for (std::size_t d = 0; d < 40; ++d)
        CHECK(stacked.values[i * 40 + d] == feats[0].values[d]);
  }
  SUBCASE("center out of range throws") {
    CHECK_THROWS_AS(kws::stack_context(feats, 41, 30, 10), std::invalid_argument);
  }
}

TEST_CASE("stacking never looks past center + future frames") {
  std::vector<FeatureVector> feats(60);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& fv : feats) {
    fv.values.resize(8);
    for (auto& v : fv.values) v = dist(rng);
  }
  const std::size_t center = 20;
  const auto full = kws::stack_context(feats, center, 30, 10);

  auto mutated = feats;
  for (std::size_t j = center + 11; j < mutated.size(); ++j)
    for (auto& v : mutated[j].values) v += 100.0;
  const auto same = kws::stack_context(mutated, center, 30, 10);
  CHECK(full.values == same.values);
}

TEST_CASE("pre-emphasis follows y[i] = x[i] - c*x[i-1]") {
  const AudioBuffer audio = random_audio(64, 17);
  const AudioBuffer emph = kws::pre_emphasize(audio, 0.97);
  CHECK(emph.samples[0] == audio.samples[0]);
  for (std::size_t i = 1; i < audio.samples.size(); ++i)
    CHECK(emph.samples[i] == doctest::Approx(audio.samples[i] - 0.97 * audio.samples[i - 1]));
}

}  // TEST_SUITE
