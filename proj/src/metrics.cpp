#include "prosody/metrics.hpp"

#include "prosody/dtw.hpp"
#include "prosody/error.hpp"
#include "prosody/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace prosody::metrics {

namespace {

std::vector<double> voiced_log_z(const pitch::F0Track& t, const char* which)
{
    std::vector<double> v;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.voiced[i])
            v.push_back(std::log(t.values_hz[i]));
    }
    if (v.empty())
        throw Error("no_voiced_frames", std::string(which) + " track has no voiced frames");
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    const double scale = std::max(std::sqrt(ss / n), pitch::kStdFloor);
    for (double& x : v)
        x = (x - mean) / scale;
    return v;
}

const std::vector<std::string> kColumns = {"pair_id", "system", "f0_dtw_error_raw", "f0_dtw_error_norm",
                                           "mean_f0_target_error_hz"};

} // namespace

double f0_dtw_error(const pitch::F0Track& output, const pitch::F0Track& reference)
{
    const auto a = voiced_log_z(output, "output");
    const auto b = voiced_log_z(reference, "reference");
    return pairing::dtw_distance(a, b);
}

std::vector<double> normalize_batch(std::span<const double> raw)
{
    if (raw.empty())
        throw Error("invalid_argument", "normalize_batch needs a non-empty batch");
    const double top = *std::max_element(raw.begin(), raw.end());
    std::vector<double> out(raw.size(), 0.0);
    if (top > 0.0) {
        for (std::size_t i = 0; i < raw.size(); ++i)
            out[i] = raw[i] / top;
    }
    return out;
}

double mean_f0_error(const pitch::F0Track& output, double reference_hz)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        if (output.voiced[i]) {
            sum += output.values_hz[i];
            ++n;
        }
    }
    if (n == 0)
        throw Error("no_voiced_frames", "output track has no voiced frames");
    return std::abs(sum / static_cast<double>(n) - reference_hz);
}

double mean_f0_target_error(const pitch::F0Track& output, const pitch::SpeakerF0Stats& target_stats)
{
    return mean_f0_error(output, std::exp(target_stats.mean_log_f0));
}

std::vector<MetricReport> evaluate_batch(std::span<const MetricInput> inputs)
{
    std::vector<MetricReport> rows;
    std::vector<double> raw;
    for (const auto& in : inputs) {
        MetricReport r;
        r.pair_id = in.pair_id;
        r.system = in.system;
        r.f0_dtw_error_raw = f0_dtw_error(in.output, in.reference);
        r.mean_f0_target_error_hz = mean_f0_error(in.output, in.target_level_hz);
        raw.push_back(r.f0_dtw_error_raw);
        rows.push_back(std::move(r));
    }
    if (!rows.empty()) {
        const auto norm = normalize_batch(raw);
        for (std::size_t i = 0; i < rows.size(); ++i)
            rows[i].f0_dtw_error_norm = norm[i];
    }
    return rows;
}

std::string serialize_metric_report(std::span<const MetricReport> rows)
{
    std::string out;
    for (std::size_t c = 0; c < kColumns.size(); ++c)
        out += kColumns[c] + (c + 1 < kColumns.size() ? "\t" : "\n");

    struct Sum
    {
        double raw = 0, norm = 0, hz = 0;
        std::size_t n = 0;
    };
    std::map<std::string, Sum> per_system;
    for (const auto& r : rows) {
        out += r.pair_id + "\t" + r.system + "\t" + io::format_double(r.f0_dtw_error_raw) + "\t" +
               io::format_double(r.f0_dtw_error_norm) + "\t" + io::format_double(r.mean_f0_target_error_hz) + "\n";
        auto& s = per_system[r.system];
        s.raw += r.f0_dtw_error_raw;
        s.norm += r.f0_dtw_error_norm;
        s.hz += r.mean_f0_target_error_hz;
        ++s.n;
    }
    for (const auto& [system, s] : per_system) {
        const double n = static_cast<double>(s.n);
        out += "#mean\t" + system + "\t" + io::format_double(s.raw / n) + "\t" + io::format_double(s.norm / n) +
               "\t" + io::format_double(s.hz / n) + "\n";
    }
    return out;
}

std::vector<MetricReport> parse_metric_report(std::string_view text)
{
    std::vector<MetricReport> rows;
    std::size_t line_no = 0;
    auto number = [&](std::string_view s) {
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ParseError("<metrics>", line_no, "malformed number '" + std::string(s) + "'");
        return v;
    };
    for (auto line : io::split_lines(text)) {
        ++line_no;
        if (line_no == 1 || line.empty() || line.starts_with("#"))
            continue;
        std::vector<std::string_view> cells;
        std::size_t pos = 0;
        while (true) {
            auto tab = line.find('\t', pos);
            cells.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
            if (tab == std::string_view::npos)
                break;
            pos = tab + 1;
        }
        if (cells.size() != kColumns.size())
            throw ParseError("<metrics>", line_no, "expected " + std::to_string(kColumns.size()) + " columns");
        rows.push_back({std::string(cells[0]), std::string(cells[1]), number(cells[2]), number(cells[3]),
                        number(cells[4])});
    }
    return rows;
}

} // namespace prosody::metrics
