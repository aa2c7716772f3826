#include "prosody/pitch.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>

namespace prosody::pitch {

using nlohmann::json;

std::size_t F0Track::voiced_count() const
{
    return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

void validate(const F0Track& t)
{
    if (!(t.hop_s > 0.0))
        throw Error("invalid_track", "hop_s must be > 0");
    if (t.values_hz.size() != t.voiced.size())
        throw Error("invalid_track", "values_hz and voiced differ in length");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.voiced[i] && !(t.values_hz[i] > 0.0))
            throw Error("invalid_track", "voiced frame " + std::to_string(i) + " has non-positive F0");
    }
}

// ---------------------------------------------------------------------------
// YIN

namespace {

// Squared-difference function of one analysis window, lags 0..max_lag.
void difference(std::span<const float> x, std::size_t window, std::size_t max_lag, std::vector<double>& d)
{
    d.assign(max_lag + 1, 0.0);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) {
            const double diff = static_cast<double>(x[j]) - x[j + lag];
            acc += diff * diff;
        }
        d[lag] = acc;
    }
}

} // namespace

F0Track estimate_f0(const wav::Audio& audio, const YinConfig& cfg)
{
    const double sr = audio.sample_rate;
    if (sr < 8000)
        throw Error("invalid_argument", "sample rate must be >= 8000 Hz");
    if (!(cfg.frame_s > 0) || !(cfg.hop_s > 0))
        throw Error("invalid_argument", "frame_s and hop_s must be > 0");
    if (!(cfg.min_hz > 1.0 / cfg.frame_s) || !(cfg.max_hz < sr / 4) || !(cfg.min_hz < cfg.max_hz))
        throw Error("invalid_argument", "F0 search range must lie within (1/frame length, sample rate/4)");

    const auto window = static_cast<std::size_t>(std::lround(cfg.frame_s * sr));
    const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop_s * sr)));
    const auto min_lag = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / cfg.max_hz)));
    const auto max_lag = static_cast<std::size_t>(std::ceil(sr / cfg.min_hz));
    if (audio.samples.size() < window)
        throw Error("audio_too_short", "audio is shorter than one analysis frame");

    const std::size_t n = audio.samples.size();
    const std::size_t n_frames = (n + hop - 1) / hop;
    const std::size_t span_len = window + max_lag + 1;
    const auto half = static_cast<std::ptrdiff_t>(window / 2);

    F0Track track;
    track.hop_s = static_cast<double>(hop) / sr;
    track.values_hz.assign(n_frames, 0.0);
    track.voiced.assign(n_frames, false);

    std::vector<float> buf(span_len);
    std::vector<double> d;
    std::vector<double> cmnd(max_lag + 1);
    for (std::size_t f = 0; f < n_frames; ++f) {
        // windows that would run past either end are shifted inside the signal
        auto start = static_cast<std::ptrdiff_t>(f * hop) - half;
        if (n >= span_len)
            start = std::clamp<std::ptrdiff_t>(start, 0, static_cast<std::ptrdiff_t>(n - span_len));
        else
            start = 0;
        double energy = 0.0;
        for (std::size_t j = 0; j < span_len; ++j) {
            const auto idx = start + static_cast<std::ptrdiff_t>(j);
            buf[j] = (idx >= 0 && static_cast<std::size_t>(idx) < n) ? audio.samples[static_cast<std::size_t>(idx)] : 0.0f;
            energy += static_cast<double>(buf[j]) * buf[j];
        }
        if (energy < 1e-10 * static_cast<double>(span_len))
            continue;

        difference(buf, window, max_lag, d);
        cmnd[0] = 1.0;
        double running = 0.0;
        for (std::size_t lag = 1; lag <= max_lag; ++lag) {
            running += d[lag];
            cmnd[lag] = running > 0.0 ? d[lag] * static_cast<double>(lag) / running : 1.0;
        }

        std::size_t best = 0;
        for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
            if (cmnd[lag] < cfg.threshold) {
                while (lag + 1 <= max_lag && cmnd[lag + 1] < cmnd[lag])
                    ++lag;
                best = lag;
                break;
            }
        }
        if (best == 0)
            continue;

        double period = static_cast<double>(best);
        if (best > 1 && best < max_lag) {
            const double a = d[best - 1], b = d[best], c = d[best + 1];
            const double denom = a - 2 * b + c;
            if (denom > 0.0)
                period += 0.5 * (a - c) / denom;
        }
        const double hz = sr / period;
        if (hz < cfg.min_hz || hz > cfg.max_hz)
            continue;
        track.values_hz[f] = hz;
        track.voiced[f] = true;
    }
    return track;
}

// ---------------------------------------------------------------------------
// F0 track files

F0Track parse_f0_track(std::string_view text, const std::string& source_name, std::vector<std::string>* warnings)
{
    const auto lines = io::split_lines(text);
    F0Track t;
    std::size_t line_no = 0;
    bool have_header = false;
    for (auto line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        if (!have_header) {
            constexpr std::string_view key = "hop_s=";
            if (line.substr(0, key.size()) != key)
                throw ParseError(source_name, line_no, "expected hop_s=<float> header");
            auto value = line.substr(key.size());
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), t.hop_s);
            if (ec != std::errc{} || ptr != value.data() + value.size())
                throw ParseError(source_name, line_no, "malformed hop_s");
            if (!(t.hop_s > 0.0))
                throw Error("invalid_track", source_name + ":" + std::to_string(line_no) + ": hop_s must be > 0");
            have_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string_view::npos)
            throw ParseError(source_name, line_no, "expected <value_hz>,v|u");
        double hz = 0.0;
        auto value = line.substr(0, comma);
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), hz);
        if (ec != std::errc{} || ptr != value.data() + value.size())
            throw ParseError(source_name, line_no, "malformed F0 value");
        const auto flag = line.substr(comma + 1);
        bool voiced;
        if (flag == "v")
            voiced = true;
        else if (flag == "u")
            voiced = false;
        else
            throw ParseError(source_name, line_no, "voicing flag must be v or u");
        if (voiced && !(hz > 0.0)) {
            voiced = false;
            const auto msg = source_name + ":" + std::to_string(line_no) + ": non-positive F0 flagged voiced; treated as unvoiced";
            spdlog::warn("{}", msg);
            if (warnings)
                warnings->push_back(msg);
        }
        t.values_hz.push_back(hz);
        t.voiced.push_back(voiced);
    }
    if (!have_header)
        throw ParseError(source_name, line_no == 0 ? 1 : line_no, "missing hop_s header");
    return t;
}

F0Track load_f0_track(const std::filesystem::path& path)
{
    return parse_f0_track(io::read_file(path), path.string());
}

std::string serialize_f0_track(const F0Track& t)
{
    validate(t);
    std::string out = "hop_s=" + io::format_double(t.hop_s) + "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += io::format_double(t.values_hz[i]);
        out += t.voiced[i] ? ",v\n" : ",u\n";
    }
    return out;
}

void write_f0_track(const std::filesystem::path& path, const F0Track& t)
{
    io::write_file_atomic(path, serialize_f0_track(t));
}

// ---------------------------------------------------------------------------
// Speaker normalization

SpeakerStatsResult speaker_stats(const std::map<std::string, F0Track>& tracks, const corpus::CorpusManifest& m)
{
    std::map<std::string, std::vector<double>> logs;
    for (const auto& speaker : m.speakers)
        logs[speaker];
    for (const auto& [id, track] : tracks) {
        const auto& u = m.at(id);
        auto& dst = logs[u.speaker_id];
        for (std::size_t i = 0; i < track.size(); ++i) {
            if (track.voiced[i])
                dst.push_back(std::log(track.values_hz[i]));
        }
    }

    SpeakerStatsResult result;
    for (const auto& [speaker, values] : logs) {
        if (values.empty()) {
            result.excluded.push_back(speaker);
            continue;
        }
        const double n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        result.stats[speaker] = {speaker, mean, std::sqrt(ss / n), values.size()};
    }
    return result;
}

ZTrack normalize_track(const F0Track& t, const SpeakerF0Stats& s)
{
    const double scale = std::max(s.std_log_f0, kStdFloor);
    ZTrack z(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.voiced[i])
            z[i] = (std::log(t.values_hz[i]) - s.mean_log_f0) / scale;
    }
    return z;
}

PhoneContour phone_contour(const corpus::Utterance& u, const ZTrack& z, double hop_s)
{
    PhoneContour c;
    c.utterance_id = u.id;
    std::size_t frame = 0;
    for (std::size_t k = 0; k < u.phones.size(); ++k) {
        const auto& phone = u.phones[k];
        while (frame < z.size() && static_cast<double>(frame) * hop_s < phone.start_s)
            ++frame;
        double sum = 0.0;
        std::size_t count = 0;
        std::size_t i = frame;
        for (; i < z.size() && static_cast<double>(i) * hop_s < phone.end_s; ++i) {
            if (z[i]) {
                sum += *z[i];
                ++count;
            }
        }
        frame = i;
        if (count > 0) {
            c.values.push_back(sum / static_cast<double>(count));
            c.phone_indices.push_back(k);
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Contour and stats files

std::string serialize_contours(const std::map<std::string, PhoneContour>& contours)
{
    std::string out;
    for (const auto& [id, c] : contours) {
        json j = {{"utterance_id", id}, {"values", c.values}, {"phone_indices", c.phone_indices}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, PhoneContour> parse_contours(std::string_view text, const std::string& source_name)
{
    std::map<std::string, PhoneContour> out;
    std::size_t line_no = 0;
    for (auto line : io::split_lines(text)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        try {
            const auto j = json::parse(line);
            PhoneContour c;
            c.utterance_id = j.at("utterance_id").get<std::string>();
            c.values = j.at("values").get<std::vector<double>>();
            c.phone_indices = j.at("phone_indices").get<std::vector<std::size_t>>();
            if (c.values.size() != c.phone_indices.size())
                throw ParseError(source_name, line_no, "values and phone_indices differ in length");
            for (std::size_t k = 1; k < c.phone_indices.size(); ++k) {
                if (c.phone_indices[k] <= c.phone_indices[k - 1])
                    throw ParseError(source_name, line_no, "phone_indices must be strictly increasing");
            }
            auto id = c.utterance_id;
            if (!out.emplace(id, std::move(c)).second)
                throw Error("duplicate_id", source_name + ":" + std::to_string(line_no) + ": duplicate contour " + id);
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        }
    }
    return out;
}

std::string serialize_speaker_stats(const std::map<std::string, SpeakerF0Stats>& stats)
{
    std::string out;
    for (const auto& [id, s] : stats) {
        json j = {{"speaker_id", id},
                  {"mean_log_f0", s.mean_log_f0},
                  {"std_log_f0", s.std_log_f0},
                  {"n_voiced_frames", s.n_voiced_frames}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, SpeakerF0Stats> parse_speaker_stats(std::string_view text, const std::string& source_name)
{
    std::map<std::string, SpeakerF0Stats> out;
    std::size_t line_no = 0;
    for (auto line : io::split_lines(text)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        try {
            const auto j = json::parse(line);
            SpeakerF0Stats s{j.at("speaker_id").get<std::string>(), j.at("mean_log_f0").get<double>(),
                             j.at("std_log_f0").get<double>(), j.at("n_voiced_frames").get<std::size_t>()};
            if (s.std_log_f0 < 0)
                throw ParseError(source_name, line_no, "std_log_f0 must be >= 0");
            out[s.speaker_id] = s;
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        }
    }
    return out;
}

} // namespace prosody::pitch
