#pragma once

#include "prosody/pitch.hpp"

#include <span>
#include <string>
#include <vector>

namespace prosody::metrics {

// DTW distance between the voiced-frame log-F0 contours of two tracks, each
// z-scored by its own voiced mean and standard deviation. Level and range
// differences cancel; only contour shape is compared.
double f0_dtw_error(const pitch::F0Track& output, const pitch::F0Track& reference);

// Divides by the batch maximum; an all-zero batch stays all zero.
std::vector<double> normalize_batch(std::span<const double> raw);

// |mean voiced Hz of output - reference_hz|.
double mean_f0_error(const pitch::F0Track& output, double reference_hz);

// Against the target speaker's level, taken as exp(mean_log_f0).
double mean_f0_target_error(const pitch::F0Track& output, const pitch::SpeakerF0Stats& target_stats);

struct MetricReport
{
    std::string pair_id;
    std::string system;
    double f0_dtw_error_raw = 0.0;
    double f0_dtw_error_norm = 0.0;
    double mean_f0_target_error_hz = 0.0;
};

struct MetricInput
{
    std::string pair_id;
    std::string system;
    pitch::F0Track output;
    pitch::F0Track reference;
    double target_level_hz = 0.0;
};

// Computes every row and normalizes the raw DTW errors over the whole batch.
std::vector<MetricReport> evaluate_batch(std::span<const MetricInput> inputs);

// Tab-separated table, one row per pair, then one "#mean" row per system.
std::string serialize_metric_report(std::span<const MetricReport> rows);
std::vector<MetricReport> parse_metric_report(std::string_view text);

} // namespace prosody::metrics
