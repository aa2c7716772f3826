#pragma once

#include "prosody/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prosody::report {

struct Table
{
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct ReportOptions
{
    std::string baseline_system = "shuffle"; // paired t-tests compare against it
    double alpha = 0.05;
};

// Tables built from a study export:
//   mos         mean +- 95% CI of per-screen MOS, per system and category
//   mushra      mean +- 95% CI of per-screen MUSHRA scores, plus the AXY
//               target-speaker classification accuracy of the same system
//   preference  share of delexified-preference choices per system
// and, when metric rows are given, an objective table of per-system means.
std::vector<Table> build_report(const nlohmann::json& exported, const ReportOptions& opts = {},
                                std::span<const metrics::MetricReport> metric_rows = {});

enum class Format { csv, jsonl };

Format parse_format(std::string_view s);
std::string render(const Table& t, Format f);

// Writes `<name>.csv` or `<name>.jsonl` per table into `dir`.
std::vector<std::filesystem::path> write_report(const std::vector<Table>& tables, const std::filesystem::path& dir,
                                                Format f);

nlohmann::json to_json(const std::vector<Table>& tables);

} // namespace prosody::report
