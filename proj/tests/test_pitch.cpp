#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "prosody/error.hpp"
#include "prosody/pitch.hpp"
#include "prosody/wav.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace prosody;
using namespace prosody::pitch;

namespace {

wav::Audio make_audio(std::vector<float> samples, std::uint32_t sr = 16000)
{
    wav::Audio a;
    a.sample_rate = sr;
    a.samples = std::move(samples);
    return a;
}

std::vector<double> voiced_values(const F0Track& t)
{
    std::vector<double> v;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t.voiced[i])
            v.push_back(t.values_hz[i]);
    return v;
}

F0Track track(std::vector<double> hz, double hop = 0.01)
{
    F0Track t;
    t.hop_s = hop;
    t.values_hz = hz;
    for (double v : hz)
        t.voiced.push_back(v > 0);
    return t;
}

} // namespace

TEST_CASE("YIN on synthetic sines")
{
    for (double f : {100.0, 220.0}) {
        CAPTURE(f);
        const auto t = estimate_f0(make_audio(oracle::sine(f, 1.0, 16000)));
        CHECK(t.size() == 100);
        CHECK(t.hop_s == doctest::Approx(0.01));
        const auto v = voiced_values(t);
        CHECK(v.size() >= 95);
        for (double hz : v)
            CHECK(std::abs(hz - f) <= 1.0);
    }
}

TEST_CASE("YIN median within 1% over 80-400 Hz")
{
    for (double f = 80.0; f <= 400.0; f += 17.0) {
        CAPTURE(f);
        const auto v = voiced_values(estimate_f0(make_audio(oracle::sine(f, 0.5, 16000, 0.3))));
        REQUIRE(!v.empty());
        CHECK(std::abs(oracle::median(v) - f) <= 0.01 * f);
    }
}

TEST_CASE("silence and noise are unvoiced")
{
    CHECK(estimate_f0(make_audio(std::vector<float>(16000, 0.0f))).voiced_count() == 0);

    std::mt19937 rng(3);
    std::normal_distribution<float> noise(0.0f, 0.2f);
    std::vector<float> x(16000);
    for (auto& s : x)
        s = noise(rng);
    const auto t = estimate_f0(make_audio(x));
    CHECK(static_cast<double>(t.voiced_count()) <= 0.01 * static_cast<double>(t.size()));
}

TEST_CASE("estimate_f0 preconditions")
{
    CHECK_THROWS_AS(estimate_f0(make_audio(std::vector<float>(100, 0.1f))), Error);
    CHECK_THROWS_AS(estimate_f0(make_audio(std::vector<float>(8000, 0.1f), 4000)), Error);
    YinConfig bad;
    bad.min_hz = 30.0; // below 1 / 25 ms
    CHECK_THROWS_AS(estimate_f0(make_audio(std::vector<float>(16000, 0.1f)), bad), Error);
}

TEST_CASE("F0 track files")
{
    const auto t = parse_f0_track("hop_s=0.01\n120.0,v\n0.0,u\n");
    CHECK(t.hop_s == 0.01);
    REQUIRE(t.size() == 2);
    CHECK(t.voiced[0]);
    CHECK(t.values_hz[0] == 120.0);
    CHECK_FALSE(t.voiced[1]);

    std::vector<std::string> warnings;
    const auto coerced = parse_f0_track("hop_s=0.005\n-1,v\n", "x.f0", &warnings);
    CHECK_FALSE(coerced.voiced[0]);
    CHECK(warnings.size() == 1);
    CHECK_NOTHROW(validate(coerced));

    CHECK(parse_f0_track("hop_s=0.01\n").size() == 0);
    CHECK_THROWS_AS(parse_f0_track("hop_s=0\n"), Error);
    CHECK_THROWS_AS(parse_f0_track("hop_s=-0.01\n1,v\n"), Error);
    CHECK_THROWS_AS(parse_f0_track("120,v\n"), ParseError);
    CHECK_THROWS_AS(parse_f0_track("hop_s=0.01\n120,x\n"), ParseError);

    const auto rt = parse_f0_track(serialize_f0_track(track({0, 101.25, 99.999999, 0, 250}, 0.0125)));
    CHECK(rt.values_hz == std::vector<double>{0, 101.25, 99.999999, 0, 250});
    CHECK(rt.hop_s == 0.0125);
}

TEST_CASE("speaker_stats")
{
    auto m = fixture::manifest({fixture::utterance("a1", "A", "s1"), fixture::utterance("a2", "A", "s2"),
                                fixture::utterance("b1", "B", "s1"), fixture::utterance("c1", "C", "s1")});
    std::map<std::string, F0Track> tracks{{"a1", track({100, 100, 0})}, {"a2", track({100})}};
    auto r = speaker_stats(tracks, m);
    REQUIRE(r.stats.contains("A"));
    CHECK(r.stats["A"].mean_log_f0 == doctest::Approx(std::log(100.0)));
    CHECK(r.stats["A"].std_log_f0 == 0.0);
    CHECK(r.stats["A"].n_voiced_frames == 3);
    CHECK(r.excluded == std::vector<std::string>{"B", "C"});

    tracks = {{"a1", track({std::exp(1.0), std::exp(3.0)})}, {"b1", track({150, 300})}};
    r = speaker_stats(tracks, m);
    CHECK(r.stats["A"].mean_log_f0 == doctest::Approx(2.0));
    CHECK(r.stats["A"].std_log_f0 == doctest::Approx(1.0));
    const auto b_before = r.stats["B"];
    tracks.erase("a1");
    CHECK(speaker_stats(tracks, m).stats["B"] == b_before);
}

TEST_CASE("normalize_track")
{
    const SpeakerF0Stats s{"A", std::log(200.0), 0.5, 10};
    auto z = normalize_track(track({200, 0, 200}), s);
    CHECK(*z[0] == doctest::Approx(0.0));
    CHECK_FALSE(z[1].has_value());
    z = normalize_track(track({200 * std::exp(0.5)}), s);
    CHECK(*z[0] == doctest::Approx(1.0));

    const SpeakerF0Stats flat{"F", std::log(120.0), 0.0, 5};
    for (const auto& v : normalize_track(track({120, 120, 120}), flat))
        CHECK(*v == doctest::Approx(0.0));
}

TEST_CASE("self-normalization and scale invariance")
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> hz(80, 300);
    auto m = fixture::manifest({fixture::utterance("a1", "A", "s1"), fixture::utterance("a2", "A", "s2")});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v1, v2;
        for (int i = 0; i < 50; ++i)
            v1.push_back(i % 7 == 0 ? 0.0 : hz(rng));
        for (int i = 0; i < 30; ++i)
            v2.push_back(hz(rng));
        std::map<std::string, F0Track> tracks{{"a1", track(v1)}, {"a2", track(v2)}};
        const auto s = speaker_stats(tracks, m).stats.at("A");

        std::vector<double> all;
        for (const auto& [id, t] : tracks)
            for (const auto& z : normalize_track(t, s))
                if (z)
                    all.push_back(*z);
        double mean = 0;
        for (double x : all)
            mean += x;
        mean /= static_cast<double>(all.size());
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(oracle::population_std(all) - 1.0) < 1e-6);

        const double c = 1.37 + trial * 0.1;
        std::map<std::string, F0Track> scaled = tracks;
        for (auto& [id, t] : scaled)
            for (auto& x : t.values_hz)
                x *= c;
        const auto s2 = speaker_stats(scaled, m).stats.at("A");
        const auto z1 = normalize_track(tracks.at("a1"), s);
        const auto z2 = normalize_track(scaled.at("a1"), s2);
        for (std::size_t i = 0; i < z1.size(); ++i) {
            REQUIRE(z1[i].has_value() == z2[i].has_value());
            if (z1[i])
                CHECK(std::abs(*z1[i] - *z2[i]) < 1e-9);
        }
    }
}

TEST_CASE("phone_contour")
{
    // phones of 100 ms at 10 ms hop: frames 0-9, 10-19, 20-29
    auto u = fixture::utterance("u", "A", "s", 3);
    ZTrack z(30);
    z[10] = 0.5;
    z[11] = 1.5;
    z[25] = -2.0;
    const auto c = phone_contour(u, z, 0.01);
    CHECK(c.values == std::vector<double>{1.0, -2.0});
    CHECK(c.phone_indices == std::vector<std::size_t>{1, 2});

    CHECK(phone_contour(u, ZTrack(30), 0.01).values.empty());

    // frame centre exactly on a boundary belongs to the later phone
    ZTrack edge(30);
    edge[10] = 4.0;
    CHECK(phone_contour(u, edge, 0.01).phone_indices == std::vector<std::size_t>{1});
}

TEST_CASE("phone_contour ignores unvoiced frame values")
{
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> hz(90, 250);
    auto u = fixture::utterance("u", "A", "s", 8);
    const SpeakerF0Stats s{"A", std::log(150.0), 0.3, 100};
    for (int trial = 0; trial < 20; ++trial) {
        F0Track t;
        t.hop_s = 0.01;
        for (int i = 0; i < 85; ++i) {
            t.values_hz.push_back(hz(rng));
            t.voiced.push_back(rng() % 3 != 0);
        }
        auto other = t;
        for (std::size_t i = 0; i < other.size(); ++i)
            if (!other.voiced[i])
                other.values_hz[i] = hz(rng) * 3;
        CHECK(phone_contour(u, normalize_track(t, s), 0.01) == phone_contour(u, normalize_track(other, s), 0.01));
    }
}

TEST_CASE("WAV codec")
{
    auto a = make_audio(oracle::sine(440, 0.1, 8000), 8000);
    const auto bytes = wav::encode(a);
    const auto back = wav::decode(std::string_view(bytes.data(), bytes.size()));
    CHECK(back.sample_rate == 8000);
    REQUIRE(back.samples.size() == a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - a.samples[i]) <= 1.0f / 32768.0f);

    auto stereo = bytes;
    stereo[22] = 2; // channel count
    try {
        wav::decode(std::string_view(stereo.data(), stereo.size()));
        FAIL("stereo accepted");
    } catch (const Error& e) {
        CHECK(e.code() == "unsupported_wav");
    }
    CHECK_THROWS_AS(wav::decode("RIFF0000WAVX"), Error);
}
