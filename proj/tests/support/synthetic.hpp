#pragma once

#include "prosody/corpus.hpp"
#include "prosody/pitch.hpp"
#include "support/fixtures.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>

namespace synthetic {

struct TwinCorpus
{
    prosody::corpus::CorpusManifest manifest;
    std::map<std::string, prosody::pitch::PhoneContour> contours;
    std::map<std::string, std::string> twin_of;
};

// 2 * n_pairs utterances; each pair shares a smooth random contour, each copy
// with its own i.i.d. Gaussian noise of standard deviation `noise`.
inline TwinCorpus twin_corpus(std::size_t n_pairs, double noise, std::uint32_t seed)
{
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> len(20, 60);
    std::uniform_real_distribution<double> amp(0.3, 1.5), freq(0.05, 0.6), phase(0.0, 6.283), offset(-0.8, 0.8);
    std::normal_distribution<double> jitter(0.0, noise);

    TwinCorpus c;
    std::vector<prosody::corpus::Utterance> utts;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const auto n = static_cast<std::size_t>(len(rng));
        std::vector<double> base(n);
        const double a1 = amp(rng), f1 = freq(rng), ph1 = phase(rng), a2 = amp(rng) * 0.5, f2 = freq(rng) * 2,
                     ph2 = phase(rng), off = offset(rng);
        for (std::size_t i = 0; i < n; ++i)
            base[i] = off + a1 * std::sin(f1 * static_cast<double>(i) + ph1) +
                      a2 * std::sin(f2 * static_cast<double>(i) + ph2);
        const std::string ids[2] = {"p" + std::to_string(p) + "a", "p" + std::to_string(p) + "b"};
        for (int k = 0; k < 2; ++k) {
            prosody::pitch::PhoneContour pc;
            pc.utterance_id = ids[k];
            for (std::size_t i = 0; i < n; ++i) {
                pc.values.push_back(base[i] + jitter(rng));
                pc.phone_indices.push_back(i);
            }
            c.contours[ids[k]] = pc;
            utts.push_back(fixture::utterance(ids[k], "spk" + std::to_string((p * 2 + k) % 11),
                                              "sent" + std::to_string(p * 2 + k), n));
        }
        c.twin_of[ids[0]] = ids[1];
        c.twin_of[ids[1]] = ids[0];
    }
    c.manifest = fixture::manifest(std::move(utts));
    return c;
}

} // namespace synthetic
