#pragma once

#include "prosody/wav.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace prosody::delexify {

struct FilterSpec
{
    double cutoff_hz = 200.0;
    double rolloff_db_per_octave = 24.0; // 6 dB per order
    double output_peak_dbfs = -3.0;

    int order() const;
};

// Normalized second-order section: y = b0 x + b1 x1 + b2 x2 - a1 y1 - a2 y2.
struct Biquad
{
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

using Cascade = std::vector<Biquad>;

// Butterworth low-pass via the bilinear transform with the cutoff pre-warped,
// so the -3 dB point lands exactly on cutoff_hz. Even orders only.
Cascade design_lowpass(const FilterSpec& spec, double sample_rate);

// |H(e^{jw})| in dB of the cascade at `freq_hz`.
double magnitude_db(const Cascade& filter, double freq_hz, double sample_rate);

// Causal single pass, transposed direct form II, zero initial state.
std::vector<double> filter_signal(const Cascade& filter, std::span<const double> x);

struct DelexifyResult
{
    wav::Audio audio;
    bool silent = false; // input was all zeros; written as silence
};

// Low-pass then peak-normalize to spec.output_peak_dbfs.
DelexifyResult delexify(const wav::Audio& in, const FilterSpec& spec);

// Returns false (after writing silence) for an all-zero input.
bool delexify_wav(const std::filesystem::path& in_path, const std::filesystem::path& out_path, const FilterSpec& spec);

// Every *.wav in `in_dir` becomes `<stem>.delex.wav` in `out_dir`. Returns
// the written paths, sorted.
std::vector<std::filesystem::path> delexify_directory(const std::filesystem::path& in_dir,
                                                      const std::filesystem::path& out_dir, const FilterSpec& spec,
                                                      unsigned threads = 0);

} // namespace prosody::delexify
