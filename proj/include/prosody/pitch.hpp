#pragma once

#include "prosody/corpus.hpp"
#include "prosody/wav.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prosody::pitch {

// Framewise pitch. Frame i is centred at time i * hop_s.
struct F0Track
{
    double hop_s = 0.01;
    std::vector<double> values_hz;
    std::vector<bool> voiced;

    std::size_t size() const { return values_hz.size(); }
    double frame_time(std::size_t i) const { return static_cast<double>(i) * hop_s; }
    std::size_t voiced_count() const;
};

// Throws if the lengths differ, hop_s <= 0, or a voiced frame is not > 0 Hz.
void validate(const F0Track& t);

struct YinConfig
{
    double frame_s = 0.025; // integration window
    double hop_s = 0.010;
    double min_hz = 50.0;
    double max_hz = 500.0;
    double threshold = 0.15; // cumulative-mean-normalized difference
};

F0Track estimate_f0(const wav::Audio& audio, const YinConfig& cfg = {});

// "hop_s=<float>" header, then one "<value_hz>,v|u" row per frame.
F0Track parse_f0_track(std::string_view text, const std::string& source_name = "<f0>",
                       std::vector<std::string>* warnings = nullptr);
F0Track load_f0_track(const std::filesystem::path& path);
std::string serialize_f0_track(const F0Track& t);
void write_f0_track(const std::filesystem::path& path, const F0Track& t);

struct SpeakerF0Stats
{
    std::string speaker_id;
    double mean_log_f0 = 0.0; // natural log of Hz
    double std_log_f0 = 0.0;  // population standard deviation
    std::size_t n_voiced_frames = 0;

    bool operator==(const SpeakerF0Stats&) const = default;
};

struct SpeakerStatsResult
{
    std::map<std::string, SpeakerF0Stats> stats;
    std::vector<std::string> excluded; // speakers without a single voiced frame
};

// Pools the voiced frames of all of a speaker's tracks.
SpeakerStatsResult speaker_stats(const std::map<std::string, F0Track>& tracks, const corpus::CorpusManifest& m);

inline constexpr double kStdFloor = 1e-6;

// One entry per frame; unvoiced frames are empty.
using ZTrack = std::vector<std::optional<double>>;

ZTrack normalize_track(const F0Track& t, const SpeakerF0Stats& s);

struct PhoneContour
{
    std::string utterance_id;
    std::vector<double> values;
    std::vector<std::size_t> phone_indices;

    std::size_t size() const { return values.size(); }
    bool operator==(const PhoneContour&) const = default;
};

// Mean z over the voiced frames whose centre falls in each phone's
// [start_s, end_s). Phones without voiced frames are left out.
PhoneContour phone_contour(const corpus::Utterance& u, const ZTrack& z, double hop_s);

// Line-delimited JSON files written by the `pitch` step.
std::string serialize_contours(const std::map<std::string, PhoneContour>& contours);
std::map<std::string, PhoneContour> parse_contours(std::string_view text, const std::string& source_name = "<contours>");
std::string serialize_speaker_stats(const std::map<std::string, SpeakerF0Stats>& stats);
std::map<std::string, SpeakerF0Stats> parse_speaker_stats(std::string_view text,
                                                          const std::string& source_name = "<stats>");

} // namespace prosody::pitch
