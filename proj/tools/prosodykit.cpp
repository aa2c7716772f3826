// prosodykit: corpus pairing, objective metrics, delexification and the
// listening-test service behind one command.

#include "prosody/corpus.hpp"
#include "prosody/delexify.hpp"
#include "prosody/error.hpp"
#include "prosody/http_api.hpp"
#include "prosody/io.hpp"
#include "prosody/listensvc.hpp"
#include "prosody/metrics.hpp"
#include "prosody/pairing.hpp"
#include "prosody/pitch.hpp"
#include "prosody/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prosody;

namespace {

// Files produced by a subcommand so far; removed again unless commit() is
// reached, so a failed run leaves no partial artifacts behind.
class Outputs
{
public:
    ~Outputs()
    {
        if (committed_)
            return;
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

    void write(const fs::path& path, std::string_view bytes)
    {
        io::write_file_atomic(path, bytes);
        written_.push_back(path);
    }
    void add(const fs::path& path) { written_.push_back(path); }
    void commit() { committed_ = true; }

private:
    std::vector<fs::path> written_;
    bool committed_ = false;
};

void require_file(const fs::path& p, const char* what)
{
    if (!fs::is_regular_file(p))
        throw Error("missing_input", std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what)
{
    if (!fs::is_directory(p))
        throw Error("missing_input", std::string(what) + " not found: " + p.string());
}

std::string safe_file_name(const std::string& id)
{
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs
{
    fs::path manifest, out;
    std::size_t max_chars = 200;
};

void run_ingest(const IngestArgs& a)
{
    require_file(a.manifest, "manifest");
    const auto m = corpus::load_manifest(a.manifest);
    auto filtered = corpus::filter_by_char_length(m, a.max_chars);
    // keep audio/f0 paths valid relative to the new manifest location
    const auto out_root = fs::absolute(a.out).parent_path();
    const auto in_root = fs::absolute(m.root_dir);
    if (fs::weakly_canonical(out_root) != fs::weakly_canonical(in_root)) {
        for (auto& u : filtered.utterances) {
            u.audio_path = fs::relative(in_root / u.audio_path, out_root).generic_string();
            if (u.f0_path)
                u.f0_path = fs::relative(in_root / *u.f0_path, out_root).generic_string();
        }
    }
    Outputs out;
    out.write(a.out, corpus::serialize_manifest(filtered));
    out.commit();
    spdlog::info("ingest: {} utterances, {} kept (<= {} chars), {} speakers, {} sentences, {} warnings",
                 m.utterances.size(), filtered.utterances.size(), a.max_chars, filtered.speakers.size(),
                 filtered.sentences.size(), m.warnings.size());
}

// ---------------------------------------------------------------------------

struct PitchArgs
{
    fs::path manifest, out;
    pitch::YinConfig yin;
};

void run_pitch(const PitchArgs& a)
{
    require_file(a.manifest, "manifest");
    const auto m = corpus::load_manifest(a.manifest);
    Outputs out;
    fs::create_directories(a.out);

    std::map<std::string, pitch::F0Track> tracks;
    for (const auto& u : m.utterances) {
        if (u.f0_path) {
            tracks[u.id] = pitch::load_f0_track(m.root_dir / *u.f0_path);
            continue;
        }
        const auto audio_path = m.root_dir / u.audio_path;
        if (!fs::exists(audio_path)) {
            spdlog::warn("pitch: {} has neither an F0 file nor audio; skipped", u.id);
            continue;
        }
        auto track = pitch::estimate_f0(wav::read(audio_path), a.yin);
        out.write(a.out / "f0" / (safe_file_name(u.id) + ".f0"), pitch::serialize_f0_track(track));
        tracks[u.id] = std::move(track);
    }

    const auto stats = pitch::speaker_stats(tracks, m);
    for (const auto& s : stats.excluded)
        spdlog::warn("pitch: speaker {} has no voiced frames; excluded", s);

    std::map<std::string, pitch::PhoneContour> contours;
    for (const auto& [id, track] : tracks) {
        const auto& u = m.at(id);
        auto it = stats.stats.find(u.speaker_id);
        if (it == stats.stats.end())
            continue;
        contours[id] = pitch::phone_contour(u, pitch::normalize_track(track, it->second), track.hop_s);
    }
    out.write(a.out / "speaker_stats.jsonl", pitch::serialize_speaker_stats(stats.stats));
    out.write(a.out / "contours.jsonl", pitch::serialize_contours(contours));
    out.commit();
    spdlog::info("pitch: {} tracks, {} speakers, {} contours", tracks.size(), stats.stats.size(), contours.size());
}

// ---------------------------------------------------------------------------

struct PairArgs
{
    std::string strategy = "f0";
    fs::path manifest, contours, out, skip_report;
    pairing::PairingConfig cfg;
    std::size_t max_candidates = 0;
};

void run_pair(PairArgs a)
{
    const auto strategy = pairing::parse_strategy(a.strategy);
    require_file(a.manifest, "manifest");
    if (strategy == pairing::Strategy::f0) {
        if (a.contours.empty())
            throw Error("missing_input", "--contours is required for the f0 strategy");
        require_dir(a.contours, "contour directory");
        require_file(a.contours / "contours.jsonl", "contour file");
    }
    if (a.max_candidates > 0)
        a.cfg.max_candidates = a.max_candidates;
    pairing::validate(a.cfg);

    const auto m = corpus::load_manifest(a.manifest);
    pairing::PairingResult result;
    switch (strategy) {
    case pairing::Strategy::f0: {
        const auto path = a.contours / "contours.jsonl";
        const auto contours = pitch::parse_contours(io::read_file(path), path.string());
        result = pairing::select_f0_pairs(contours, m, a.cfg);
        break;
    }
    case pairing::Strategy::text:
        result = pairing::select_text_pairs(m, a.cfg);
        break;
    case pairing::Strategy::shuffle:
        result = pairing::select_shuffle_pairs(m, a.cfg);
        break;
    }

    const auto skip_path = a.skip_report.empty() ? fs::path(a.out.string() + ".skipped.tsv") : a.skip_report;
    Outputs out;
    out.write(a.out, pairing::serialize_pairs(result.pairs));
    out.write(skip_path, pairing::serialize_skip_report(result.skipped));
    out.commit();
    if (result.cutoff_threshold)
        spdlog::info("pair: distance cutoff {:.6f}", *result.cutoff_threshold);
    spdlog::info("pair: {} pairs, {} targets skipped", result.pairs.size(), result.skipped.size());
}

// ---------------------------------------------------------------------------

struct EvalsetArgs
{
    fs::path manifest, out;
    std::vector<fs::path> pairs;
    std::size_t n_sentences = 60;
    double same_text_fraction = 0.5;
    std::uint64_t seed = 0;
};

void run_evalset(const EvalsetArgs& a)
{
    require_file(a.manifest, "manifest");
    for (const auto& p : a.pairs)
        require_file(p, "pair manifest");
    const auto m = corpus::load_manifest(a.manifest);
    std::vector<pairing::PairRecord> training;
    for (const auto& p : a.pairs) {
        auto recs = pairing::parse_pairs(io::read_file(p), p.string());
        training.insert(training.end(), recs.begin(), recs.end());
    }
    const auto set = pairing::build_evaluation_set(m, training, a.n_sentences, a.same_text_fraction, a.seed);
    Outputs out;
    out.write(a.out, pairing::serialize_evaluation_set(set));
    out.commit();
    spdlog::info("evalset: {} same-text + {} different-text entries", set.n_same_text, set.n_different_text);
}

// ---------------------------------------------------------------------------

struct MetricsArgs
{
    fs::path input, speaker_stats, out;
    std::string level = "speaker";
};

void run_metrics(const MetricsArgs& a)
{
    require_file(a.input, "metric input list");
    if (a.level != "speaker" && a.level != "utterance")
        throw Error("invalid_argument", "--target-level must be speaker or utterance");
    if (a.level == "speaker")
        require_file(a.speaker_stats, "speaker stats");

    std::map<std::string, pitch::SpeakerF0Stats> stats;
    if (a.level == "speaker")
        stats = pitch::parse_speaker_stats(io::read_file(a.speaker_stats), a.speaker_stats.string());

    const auto root = a.input.parent_path();
    std::vector<metrics::MetricInput> inputs;
    std::size_t line_no = 0;
    const auto text = io::read_file(a.input);
    for (auto line : io::split_lines(text)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(a.input.string(), line_no, e.what());
        }
        metrics::MetricInput in;
        in.pair_id = j.at("pair_id").get<std::string>();
        in.system = j.value("system", std::string("system"));
        in.output = pitch::load_f0_track(root / j.at("output_f0").get<std::string>());
        in.reference = pitch::load_f0_track(root / j.at("reference_f0").get<std::string>());
        if (a.level == "speaker") {
            const auto speaker = j.at("target_speaker").get<std::string>();
            auto it = stats.find(speaker);
            if (it == stats.end())
                throw Error("unknown_speaker", "no F0 statistics for speaker '" + speaker + "'");
            in.target_level_hz = std::exp(it->second.mean_log_f0);
        } else {
            const auto target = pitch::load_f0_track(root / j.at("target_f0").get<std::string>());
            double sum = 0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < target.size(); ++i) {
                if (target.voiced[i]) {
                    sum += target.values_hz[i];
                    ++n;
                }
            }
            if (n == 0)
                throw Error("no_voiced_frames", in.pair_id + ": target track has no voiced frames");
            in.target_level_hz = sum / static_cast<double>(n);
        }
        inputs.push_back(std::move(in));
    }
    if (inputs.empty())
        throw Error("empty_input", "metric input list is empty");
    const auto rows = metrics::evaluate_batch(inputs);
    Outputs out;
    out.write(a.out, metrics::serialize_metric_report(rows));
    out.commit();
    spdlog::info("metrics: {} pairs", rows.size());
}

// ---------------------------------------------------------------------------

struct DelexifyArgs
{
    fs::path in, out;
    delexify::FilterSpec spec;
    unsigned threads = 0;
};

void run_delexify(const DelexifyArgs& a)
{
    if (fs::is_directory(a.in)) {
        const auto written = delexify::delexify_directory(a.in, a.out, a.spec, a.threads);
        spdlog::info("delexify: {} files written to {}", written.size(), a.out.string());
        return;
    }
    require_file(a.in, "input WAV");
    delexify::delexify_wav(a.in, a.out, a.spec);
}

// ---------------------------------------------------------------------------

struct ServeArgs
{
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path journal = "studies.journal";
    fs::path audio_dir, static_dir, create_study;
};

listensvc::HttpServer* g_server = nullptr;

void run_serve(const ServeArgs& a)
{
    if (!a.audio_dir.empty())
        require_dir(a.audio_dir, "audio directory");
    if (!a.static_dir.empty())
        require_dir(a.static_dir, "static directory");
    if (!a.create_study.empty())
        require_file(a.create_study, "study definition");

    listensvc::StudyService service(a.journal);
    if (!a.create_study.empty()) {
        const auto body = json::parse(io::read_file(a.create_study));
        std::vector<listensvc::Screen> screens;
        for (const auto& s : body.at("screens"))
            screens.push_back(listensvc::screen_from_json(s));
        std::optional<std::string> id;
        if (body.contains("study_id"))
            id = body.at("study_id").get<std::string>();
        if (!id || !std::ranges::count(service.study_ids(), *id)) {
            const auto created =
                service.create_study(std::move(screens), listensvc::config_from_json(body.value("config", json::object())), id);
            spdlog::info("serve: created study {}", created);
        }
    }

    listensvc::ServerOptions opts;
    if (!a.audio_dir.empty())
        opts.audio_dir = a.audio_dir;
    if (!a.static_dir.empty())
        opts.static_dir = a.static_dir;
    listensvc::HttpServer server(service, opts);
    const int port = server.bind(a.host, a.port);
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
    spdlog::info("serve: listening on http://{}:{} (journal {})", a.host, port, a.journal.string());
    server.serve();
    g_server = nullptr;
}

// ---------------------------------------------------------------------------

struct ReportArgs
{
    fs::path export_path, out = "report", metrics_path;
    std::string format = "csv";
    report::ReportOptions opts;
};

void run_report(const ReportArgs& a)
{
    require_file(a.export_path, "study export");
    if (!a.metrics_path.empty())
        require_file(a.metrics_path, "metric report");
    const auto format = report::parse_format(a.format);
    const auto exported = json::parse(io::read_file(a.export_path));
    std::vector<metrics::MetricReport> rows;
    if (!a.metrics_path.empty())
        rows = metrics::parse_metric_report(io::read_file(a.metrics_path));
    const auto tables = report::build_report(exported, a.opts, rows);
    Outputs out;
    for (const auto& t : tables)
        out.write(a.out / (t.name + (format == report::Format::csv ? ".csv" : ".jsonl")), report::render(t, format));
    out.commit();
    spdlog::info("report: {} tables written to {}", tables.size(), a.out.string());
}

void configure_logging()
{
    auto logger = spdlog::stderr_color_mt("prosodykit");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("PROSODYKIT_LOG"))
        spdlog::set_level(spdlog::level::from_str(env));
}

} // namespace

int main(int argc, char** argv)
{
    configure_logging();

    CLI::App app{"prosodykit: prosody-transfer corpus pairing, F0 metrics, delexification and listening tests"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    std::function<void()> action;

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate a corpus manifest and drop over-long sentences");
    c_ingest->add_option("--manifest", ingest.manifest, "Input manifest (JSON Lines)")->required();
    c_ingest->add_option("--out", ingest.out, "Filtered manifest to write")->required();
    c_ingest->add_option("--max-chars", ingest.max_chars, "Keep texts of at most this many characters")
        ->check(CLI::PositiveNumber);
    c_ingest->callback([&] { action = [&] { run_ingest(ingest); }; });

    PitchArgs pitch_args;
    auto* c_pitch = app.add_subcommand("pitch", "F0 tracks, per-speaker log-F0 stats and per-phone contours");
    c_pitch->add_option("--manifest", pitch_args.manifest, "Corpus manifest")->required();
    c_pitch->add_option("--out", pitch_args.out, "Output directory")->required();
    c_pitch->add_option("--frame-s", pitch_args.yin.frame_s, "Estimator integration window (s)");
    c_pitch->add_option("--hop-s", pitch_args.yin.hop_s, "Frame hop (s)");
    c_pitch->add_option("--min-hz", pitch_args.yin.min_hz, "Lowest F0 searched");
    c_pitch->add_option("--max-hz", pitch_args.yin.max_hz, "Highest F0 searched");
    c_pitch->add_option("--threshold", pitch_args.yin.threshold, "Voicing threshold on the normalized difference");
    c_pitch->callback([&] { action = [&] { run_pitch(pitch_args); }; });

    PairArgs pair;
    auto* c_pair = app.add_subcommand("pair", "Select (reference, target) training pairs");
    c_pair->add_option("--strategy", pair.strategy, "text | f0 | shuffle")
        ->check(CLI::IsMember({"text", "f0", "shuffle"}));
    c_pair->add_option("--manifest", pair.manifest, "Corpus manifest")->required();
    c_pair->add_option("--contours", pair.contours, "Directory written by `pitch` (f0 strategy)");
    c_pair->add_option("--out", pair.out, "Pair manifest to write")->required();
    c_pair->add_option("--skip-report", pair.skip_report, "Skipped targets (default: <out>.skipped.tsv)");
    c_pair->add_option("--seed", pair.cfg.rng_seed, "Random seed");
    c_pair->add_option("--length-tolerance", pair.cfg.length_tolerance, "Allowed relative phone-count difference");
    c_pair->add_option("--cutoff-sigmas", pair.cfg.cutoff_sigmas, "Drop pairs above mean + k sigma of DTW distance");
    c_pair->add_option("--max-candidates", pair.max_candidates, "Cap on candidates per target (0: all)");
    c_pair->add_option("--threads", pair.cfg.threads, "Worker threads (0: all cores)");
    c_pair->callback([&] { action = [&] { run_pair(pair); }; });

    EvalsetArgs evalset;
    auto* c_eval = app.add_subcommand("evalset", "Build the held-out evaluation set");
    c_eval->add_option("--manifest", evalset.manifest, "Corpus manifest")->required();
    c_eval->add_option("--pairs", evalset.pairs, "Training pair manifests (repeatable)");
    c_eval->add_option("--out", evalset.out, "Evaluation set to write")->required();
    c_eval->add_option("--n-sentences", evalset.n_sentences, "Number of test sentences")->check(CLI::PositiveNumber);
    c_eval->add_option("--same-text-fraction", evalset.same_text_fraction, "Share of same-text references")
        ->check(CLI::Range(0.0, 1.0));
    c_eval->add_option("--seed", evalset.seed, "Random seed");
    c_eval->callback([&] { action = [&] { run_evalset(evalset); }; });

    MetricsArgs metrics_args;
    auto* c_metrics = app.add_subcommand("metrics", "Objective F0 metrics for synthesized outputs");
    c_metrics->add_option("--input", metrics_args.input,
                          "JSON Lines: pair_id, system, output_f0, reference_f0, target_speaker | target_f0")
        ->required();
    c_metrics->add_option("--speaker-stats", metrics_args.speaker_stats, "speaker_stats.jsonl written by `pitch`");
    c_metrics->add_option("--target-level", metrics_args.level, "speaker | utterance");
    c_metrics->add_option("--out", metrics_args.out, "Metric table to write")->required();
    c_metrics->callback([&] { action = [&] { run_metrics(metrics_args); }; });

    DelexifyArgs delex;
    auto* c_delex = app.add_subcommand("delexify", "Low-pass filter stimuli (file or directory)");
    c_delex->add_option("--in", delex.in, "Input WAV or directory")->required();
    c_delex->add_option("--out", delex.out, "Output WAV or directory")->required();
    c_delex->add_option("--cutoff-hz", delex.spec.cutoff_hz, "Cut-off frequency (Hz)");
    c_delex->add_option("--rolloff-db", delex.spec.rolloff_db_per_octave, "Roll-off (dB per octave, multiple of 12)");
    c_delex->add_option("--peak-dbfs", delex.spec.output_peak_dbfs, "Output peak level (dBFS)");
    c_delex->add_option("--threads", delex.threads, "Worker threads (0: all cores)");
    c_delex->callback([&] { action = [&] { run_delexify(delex); }; });

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Run the listening-test service");
    c_serve->add_option("--host", serve.host, "Bind address");
    c_serve->add_option("--port", serve.port, "Port (0: ephemeral)");
    c_serve->add_option("--journal", serve.journal, "Append-only event journal");
    c_serve->add_option("--audio-dir", serve.audio_dir, "Directory served under /audio/");
    c_serve->add_option("--static-dir", serve.static_dir, "Browser client assets served under /");
    c_serve->add_option("--create-study", serve.create_study, "Study definition to create at start-up if absent");
    c_serve->callback([&] { action = [&] { run_serve(serve); }; });

    ReportArgs rep;
    auto* c_report = app.add_subcommand("report", "Result tables from a study export");
    c_report->add_option("--export", rep.export_path, "Study export (JSON)")->required();
    c_report->add_option("--out", rep.out, "Output directory");
    c_report->add_option("--format", rep.format, "csv | jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    c_report->add_option("--metrics", rep.metrics_path, "Metric table from `metrics`");
    c_report->add_option("--baseline", rep.opts.baseline_system, "System the paired t-tests compare against");
    c_report->add_option("--alpha", rep.opts.alpha, "Significance level");
    c_report->callback([&] { action = [&] { run_report(rep); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        action();
    } catch (const Error& e) {
        spdlog::error("{} ({})", e.what(), e.code());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
