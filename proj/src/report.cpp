#include "prosody/report.hpp"

#include "prosody/error.hpp"
#include "prosody/evalstats.hpp"
#include "prosody/io.hpp"
#include "prosody/listensvc.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>

namespace prosody::report {

using nlohmann::json;

namespace {

using Key = std::pair<std::string, std::string>; // (system, category)

std::string fixed(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string general(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double mean(const std::vector<double>& v)
{
    double s = 0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

// Per-screen means keyed by pairing item, for one (system, category) cell.
struct Cell
{
    std::map<std::string, double> item_means;
    std::size_t n_ratings = 0;

    std::vector<double> values() const
    {
        std::vector<double> v;
        for (const auto& [item, m] : item_means)
            v.push_back(m);
        return v;
    }
};

void append_significance(std::vector<std::string>& row, const std::map<Key, Cell>& cells, const Key& key,
                         const ReportOptions& opts)
{
    const Key base{opts.baseline_system, key.second};
    auto it = cells.find(base);
    if (key.first == opts.baseline_system || it == cells.end()) {
        row.insert(row.end(), {"", "", ""});
        return;
    }
    std::vector<double> a, b;
    for (const auto& [item, m] : cells.at(key).item_means) {
        if (auto jt = it->second.item_means.find(item); jt != it->second.item_means.end()) {
            a.push_back(m);
            b.push_back(jt->second);
        }
    }
    if (a.size() < 2) {
        row.insert(row.end(), {"", "", ""});
        return;
    }
    const auto r = evalstats::paired_t_test(a, b, opts.alpha);
    row.push_back(general(r.t));
    row.push_back(general(r.p));
    row.push_back(r.significant ? "yes" : "no");
}

} // namespace

std::vector<Table> build_report(const json& exported, const ReportOptions& opts,
                                std::span<const metrics::MetricReport> metric_rows)
{
    std::map<std::string, listensvc::Screen> screens;
    try {
        for (const auto& sj : exported.at("screens")) {
            auto s = listensvc::screen_from_json(sj);
            screens.emplace(s.id, std::move(s));
        }
    } catch (const json::exception& e) {
        throw Error("invalid_export", std::string("malformed export: ") + e.what());
    }

    std::map<std::string, std::vector<json>> by_screen;
    for (const auto& r : exported.at("responses"))
        by_screen[r.at("screen_id").get<std::string>()].push_back(r.at("payload"));

    std::map<Key, Cell> mos, mushra;
    std::map<Key, std::vector<evalstats::AxyChoice>> axy;
    std::map<std::string, std::vector<std::string>> preference; // category -> chosen systems
    std::map<std::string, std::set<std::string>> preference_systems;

    for (const auto& [sid, screen] : screens) {
        const auto& answers = by_screen[sid];
        const auto item = screen.item.empty() ? screen.id : screen.item;
        switch (screen.kind) {
        case listensvc::ScreenKind::mos: {
            if (answers.empty())
                break;
            std::vector<double> v;
            for (const auto& p : answers)
                v.push_back(p.get<double>());
            auto& cell = mos[{screen.system_labels[0], screen.category}];
            cell.item_means[item] = mean(v);
            cell.n_ratings += v.size();
            break;
        }
        case listensvc::ScreenKind::mushra: {
            if (answers.empty())
                break;
            for (std::size_t slot = 1; slot < screen.system_labels.size(); ++slot) {
                std::vector<double> v;
                for (const auto& p : answers)
                    v.push_back(p.at(slot - 1).get<double>());
                auto& cell = mushra[{screen.system_labels[slot], screen.category}];
                cell.item_means[screen.id] = mean(v);
                cell.n_ratings += v.size();
            }
            break;
        }
        case listensvc::ScreenKind::axy: {
            auto& choices = axy[{screen.system_labels[0], screen.category}];
            for (const auto& p : answers)
                choices.push_back(p == "X" ? evalstats::AxyChoice::X : evalstats::AxyChoice::Y);
            break;
        }
        case listensvc::ScreenKind::preference: {
            for (std::size_t slot = 1; slot < screen.system_labels.size(); ++slot) {
                preference_systems[screen.category].insert(screen.system_labels[slot]);
                preference_systems["all"].insert(screen.system_labels[slot]);
            }
            for (const auto& p : answers) {
                const auto& chosen = screen.system_labels[1 + p.get<std::size_t>()];
                preference[screen.category].push_back(chosen);
                preference["all"].push_back(chosen);
            }
            break;
        }
        }
    }

    std::vector<Table> tables;

    Table mos_table{"mos", {"system", "category", "n_screens", "n_ratings", "mean", "ci95", "t_vs_baseline",
                            "p_vs_baseline", "significant"}, {}};
    for (const auto& [key, cell] : mos) {
        const auto s = evalstats::mean_ci95(cell.values());
        std::vector<std::string> row{key.first, key.second, std::to_string(s.n), std::to_string(cell.n_ratings),
                                     fixed(s.mean), fixed(s.ci95_halfwidth)};
        append_significance(row, mos, key, opts);
        mos_table.rows.push_back(std::move(row));
    }
    tables.push_back(std::move(mos_table));

    Table mushra_table{"mushra", {"system", "category", "n_screens", "n_ratings", "mean", "ci95", "t_vs_baseline",
                                  "p_vs_baseline", "significant", "n_axy", "speaker_accuracy"}, {}};
    std::set<Key> keys;
    for (const auto& [k, v] : mushra)
        keys.insert(k);
    for (const auto& [k, v] : axy)
        keys.insert(k);
    for (const auto& key : keys) {
        std::vector<std::string> row{key.first, key.second};
        if (auto it = mushra.find(key); it != mushra.end()) {
            const auto s = evalstats::mean_ci95(it->second.values());
            row.insert(row.end(), {std::to_string(s.n), std::to_string(it->second.n_ratings), fixed(s.mean),
                                   fixed(s.ci95_halfwidth)});
            append_significance(row, mushra, key, opts);
        } else {
            row.insert(row.end(), {"0", "0", "", "", "", "", ""});
        }
        if (auto it = axy.find(key); it != axy.end() && !it->second.empty()) {
            row.push_back(std::to_string(it->second.size()));
            row.push_back(fixed(evalstats::axy_accuracy(it->second)));
        } else {
            row.insert(row.end(), {"0", ""});
        }
        mushra_table.rows.push_back(std::move(row));
    }
    tables.push_back(std::move(mushra_table));

    Table pref_table{"preference", {"category", "system", "count", "n", "proportion"}, {}};
    for (const auto& [category, systems_set] : preference_systems) {
        const std::vector<std::string> systems(systems_set.begin(), systems_set.end());
        const auto& chosen = preference[category];
        if (chosen.empty())
            continue;
        std::vector<int> indices;
        for (const auto& c : chosen)
            indices.push_back(static_cast<int>(std::find(systems.begin(), systems.end(), c) - systems.begin()));
        const auto props = evalstats::preference_proportions(indices, static_cast<int>(systems.size()));
        for (std::size_t k = 0; k < systems.size(); ++k) {
            const auto count = std::count(indices.begin(), indices.end(), static_cast<int>(k));
            pref_table.rows.push_back(
                {category, systems[k], std::to_string(count), std::to_string(chosen.size()), fixed(props[k])});
        }
    }
    tables.push_back(std::move(pref_table));

    if (!metric_rows.empty()) {
        Table obj{"objective", {"system", "n", "f0_dtw_error_raw", "f0_dtw_error_norm", "mean_f0_target_error_hz"}, {}};
        std::map<std::string, std::vector<const metrics::MetricReport*>> per_system;
        for (const auto& r : metric_rows)
            per_system[r.system].push_back(&r);
        for (const auto& [system, rows] : per_system) {
            double raw = 0, norm = 0, hz = 0;
            for (const auto* r : rows) {
                raw += r->f0_dtw_error_raw;
                norm += r->f0_dtw_error_norm;
                hz += r->mean_f0_target_error_hz;
            }
            const double n = static_cast<double>(rows.size());
            obj.rows.push_back({system, std::to_string(rows.size()), fixed(raw / n), fixed(norm / n), fixed(hz / n, 2)});
        }
        tables.push_back(std::move(obj));
    }
    return tables;
}

Format parse_format(std::string_view s)
{
    if (s == "csv")
        return Format::csv;
    if (s == "jsonl")
        return Format::jsonl;
    throw Error("invalid_argument", "format must be csv or jsonl");
}

namespace {

std::string csv_cell(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

json typed_cell(const std::string& s)
{
    if (s.empty())
        return nullptr;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && p == s.data() + s.size())
        return v;
    return s;
}

} // namespace

std::string render(const Table& t, Format f)
{
    std::string out;
    if (f == Format::csv) {
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            out += csv_cell(t.columns[c]) + (c + 1 < t.columns.size() ? "," : "\n");
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c)
                out += csv_cell(row[c]) + (c + 1 < row.size() ? "," : "\n");
        }
        return out;
    }
    for (const auto& row : t.rows) {
        json j = json::object();
        for (std::size_t c = 0; c < row.size(); ++c)
            j[t.columns[c]] = typed_cell(row[c]);
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> write_report(const std::vector<Table>& tables, const std::filesystem::path& dir,
                                                Format f)
{
    std::vector<std::filesystem::path> written;
    for (const auto& t : tables) {
        const auto path = dir / (t.name + (f == Format::csv ? ".csv" : ".jsonl"));
        io::write_file_atomic(path, render(t, f));
        written.push_back(path);
    }
    return written;
}

json to_json(const std::vector<Table>& tables)
{
    json out = json::object();
    for (const auto& t : tables) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json j = json::object();
            for (std::size_t c = 0; c < row.size(); ++c)
                j[t.columns[c]] = typed_cell(row[c]);
            rows.push_back(std::move(j));
        }
        out[t.name] = std::move(rows);
    }
    return out;
}

} // namespace prosody::report
