#pragma once

#include "prosody/corpus.hpp"
#include "prosody/wav.hpp"
#include "support/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

namespace corpus_gen {

// Writes `wav/*.wav` and `manifest.jsonl` under `root`: every speaker reads
// every sentence as a gliding tone. Speakers differ in level, sentences in
// contour shape and phone count. Returns the manifest path.
inline std::filesystem::path write_parallel_corpus(const std::filesystem::path& root, int n_sentences,
                                                   int n_speakers, double sample_rate = 16000.0)
{
    std::filesystem::create_directories(root / "wav");
    std::vector<prosody::corpus::Utterance> utts;
    for (int s = 0; s < n_sentences; ++s) {
        const std::size_t n_phones = 4 + static_cast<std::size_t>(s % 5);
        const double rate = 1.0 + 0.37 * s, phase = 0.9 * s;
        for (int p = 0; p < n_speakers; ++p) {
            const std::string id = "spk" + std::to_string(p) + "_sent" + std::to_string(s);
            auto u = fixture::utterance(id, "spk" + std::to_string(p), "sent" + std::to_string(s), n_phones,
                                        "sentence number " + std::to_string(s));
            const double base = 110.0 + 35.0 * p;
            prosody::wav::Audio a{static_cast<std::uint32_t>(sample_rate), {}};
            const auto n = static_cast<std::size_t>(u.duration_s * sample_rate);
            double ph = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sample_rate;
                const double f = base * (1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * rate * t + phase));
                ph += 2.0 * std::numbers::pi * f / sample_rate;
                a.samples.push_back(static_cast<float>(0.4 * std::sin(ph)));
            }
            prosody::wav::write(root / u.audio_path, a);
            utts.push_back(std::move(u));
        }
    }
    auto m = fixture::manifest(std::move(utts));
    m.root_dir = root;
    const auto path = root / "manifest.jsonl";
    prosody::corpus::write_manifest(m, path);
    return path;
}

} // namespace corpus_gen
