#include "prosody/pairing.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"
#include "prosody/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

namespace prosody::pairing {

using nlohmann::json;

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::text: return "text";
    case Strategy::f0: return "f0";
    case Strategy::shuffle: return "shuffle";
    }
    return "?";
}

Strategy parse_strategy(std::string_view s)
{
    if (s == "text")
        return Strategy::text;
    if (s == "f0")
        return Strategy::f0;
    if (s == "shuffle")
        return Strategy::shuffle;
    throw Error("invalid_argument", "unknown strategy '" + std::string(s) + "'");
}

std::string_view to_string(Condition c)
{
    return c == Condition::same_text ? "same_text" : "different_text";
}

void validate(const PairingConfig& cfg)
{
    if (!(cfg.length_tolerance > 0.0 && cfg.length_tolerance < 1.0))
        throw Error("invalid_argument", "length_tolerance must be in (0, 1)");
    if (!(cfg.cutoff_sigmas >= 0.0))
        throw Error("invalid_argument", "cutoff_sigmas must be >= 0");
    if (cfg.max_candidates && *cfg.max_candidates == 0)
        throw Error("invalid_argument", "max_candidates must be > 0");
}

bool within_length_tolerance(std::size_t target_len, std::size_t candidate_len, double tolerance)
{
    // the epsilon keeps 0.15 * 100 from landing at 14.999...
    const auto allowed = static_cast<std::size_t>(std::floor(tolerance * static_cast<double>(target_len) + 1e-9));
    const auto diff = target_len > candidate_len ? target_len - candidate_len : candidate_len - target_len;
    return diff <= allowed;
}

// ---------------------------------------------------------------------------
// F0-based selection

namespace {

struct Candidate
{
    const std::string* id;
    const std::vector<double>* values;
};

struct Nearest
{
    std::optional<std::size_t> index;
    double distance = std::numeric_limits<double>::infinity();
};

Nearest nearest_reference(std::size_t target, const std::vector<Candidate>& pool, const PairingConfig& cfg)
{
    const auto& tv = *pool[target].values;
    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (k != target && within_length_tolerance(tv.size(), pool[k].values->size(), cfg.length_tolerance))
            eligible.push_back(k);
    }
    if (cfg.max_candidates && eligible.size() > *cfg.max_candidates) {
        auto gap = [&](std::size_t k) {
            const auto n = pool[k].values->size();
            return n > tv.size() ? n - tv.size() : tv.size() - n;
        };
        std::stable_sort(eligible.begin(), eligible.end(),
                         [&](std::size_t x, std::size_t y) { return gap(x) < gap(y); });
        eligible.resize(*cfg.max_candidates);
    }

    Nearest best;
    for (auto k : eligible) {
        const double d = dtw_distance_bounded(tv, *pool[k].values, best.distance);
        if (d < best.distance || (d == best.distance && best.index && *pool[k].id < *pool[*best.index].id)) {
            best.distance = d;
            best.index = k;
        }
    }
    return best;
}

unsigned worker_count(const PairingConfig& cfg, std::size_t jobs)
{
    unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, jobs)));
}

} // namespace

CutoffResult apply_distance_cutoff(std::vector<PairRecord> selected, double cutoff_sigmas)
{
    CutoffResult out;
    if (selected.empty())
        return out;
    double mean = 0.0;
    for (const auto& p : selected)
        mean += p.dtw_distance.value();
    mean /= static_cast<double>(selected.size());
    double ss = 0.0;
    for (const auto& p : selected)
        ss += (*p.dtw_distance - mean) * (*p.dtw_distance - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(selected.size()));
    out.threshold = mean + cutoff_sigmas * sigma;
    for (auto& p : selected) {
        if (*p.dtw_distance > out.threshold)
            out.removed.push_back(std::move(p));
        else
            out.kept.push_back(std::move(p));
    }
    return out;
}

PairingResult select_f0_pairs(const std::map<std::string, pitch::PhoneContour>& contours,
                              const corpus::CorpusManifest& m, const PairingConfig& cfg)
{
    validate(cfg);
    PairingResult result;

    std::vector<const corpus::Utterance*> ordered;
    for (const auto& u : m.utterances)
        ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->id < y->id; });

    std::vector<Candidate> pool;
    for (const auto* u : ordered) {
        auto it = contours.find(u->id);
        if (it == contours.end())
            result.skipped.push_back({u->id, "no_contour"});
        else if (it->second.values.empty())
            result.skipped.push_back({u->id, "empty_contour"});
        else
            pool.push_back({&u->id, &it->second.values});
    }

    std::vector<Nearest> nearest(pool.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < pool.size(); t = next++)
            nearest[t] = nearest_reference(t, pool, cfg);
    };
    const unsigned n_workers = worker_count(cfg, pool.size());
    std::vector<std::jthread> workers;
    for (unsigned w = 1; w < n_workers; ++w)
        workers.emplace_back(work);
    work();
    workers.clear();

    std::vector<PairRecord> selected;
    for (std::size_t t = 0; t < pool.size(); ++t) {
        if (!nearest[t].index) {
            result.skipped.push_back({*pool[t].id, "no_candidate_within_length_tolerance"});
            continue;
        }
        selected.push_back({*pool[t].id, *pool[*nearest[t].index].id, Strategy::f0, nearest[t].distance});
    }

    if (!selected.empty()) {
        auto cut = apply_distance_cutoff(std::move(selected), cfg.cutoff_sigmas);
        result.cutoff_threshold = cut.threshold;
        result.pairs = std::move(cut.kept);
        for (const auto& p : cut.removed)
            result.skipped.push_back({p.target_id, "above_distance_cutoff"});
    }
    std::sort(result.skipped.begin(), result.skipped.end(),
              [](const SkipEntry& x, const SkipEntry& y) { return x.target_id < y.target_id; });
    return result;
}

// ---------------------------------------------------------------------------
// Text-based and shuffle selection

namespace {

std::vector<const corpus::Utterance*> sorted_by_id(const corpus::CorpusManifest& m)
{
    std::vector<const corpus::Utterance*> out;
    for (const auto& u : m.utterances)
        out.push_back(&u);
    std::sort(out.begin(), out.end(), [](auto* x, auto* y) { return x->id < y->id; });
    return out;
}

} // namespace

PairingResult select_text_pairs(const corpus::CorpusManifest& m, const PairingConfig& cfg)
{
    validate(cfg);
    auto rng = seeded_rng(cfg.rng_seed, "text");
    PairingResult result;
    for (const auto* u : sorted_by_id(m)) {
        auto candidates = corpus::parallel_renditions(m, u->sentence_id, u->speaker_id);
        if (candidates.empty()) {
            result.skipped.push_back({u->id, "no_other_speaker_rendition"});
            continue;
        }
        std::sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
        const auto& ref = candidates[uniform_index(rng, candidates.size())];
        result.pairs.push_back({u->id, ref.id, Strategy::text, std::nullopt});
    }
    return result;
}

PairingResult select_shuffle_pairs(const corpus::CorpusManifest& m, const PairingConfig& cfg)
{
    validate(cfg);
    if (m.utterances.size() < 2)
        throw Error("insufficient_data", "shuffle pairing needs at least 2 utterances");
    auto rng = seeded_rng(cfg.rng_seed, "shuffle");
    const auto ordered = sorted_by_id(m);
    PairingResult result;
    for (std::size_t t = 0; t < ordered.size(); ++t) {
        auto k = static_cast<std::size_t>(uniform_index(rng, ordered.size() - 1));
        if (k >= t)
            ++k;
        result.pairs.push_back({ordered[t]->id, ordered[k]->id, Strategy::shuffle, std::nullopt});
    }
    return result;
}

// ---------------------------------------------------------------------------
// Pair manifest files

std::string serialize_pairs(std::vector<PairRecord> pairs)
{
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const PairRecord& x, const PairRecord& y) { return x.target_id < y.target_id; });
    std::string out;
    for (const auto& p : pairs) {
        json j = {{"target_id", p.target_id},
                  {"reference_id", p.reference_id},
                  {"strategy", to_string(p.strategy)},
                  {"dtw_distance", p.dtw_distance ? json(*p.dtw_distance) : json(nullptr)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<PairRecord> parse_pairs(std::string_view text, const std::string& source_name)
{
    std::vector<PairRecord> out;
    std::size_t line_no = 0;
    for (auto line : io::split_lines(text)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;
        try {
            const auto j = json::parse(line);
            PairRecord p;
            p.target_id = j.at("target_id").get<std::string>();
            p.reference_id = j.at("reference_id").get<std::string>();
            p.strategy = parse_strategy(j.at("strategy").get<std::string>());
            if (auto it = j.find("dtw_distance"); it != j.end() && it->is_number())
                p.dtw_distance = it->get<double>();
            if (p.target_id == p.reference_id)
                throw ParseError(source_name, line_no, "target_id equals reference_id");
            if (p.strategy == Strategy::f0 && (!p.dtw_distance || !std::isfinite(*p.dtw_distance)))
                throw ParseError(source_name, line_no, "f0 pair without a finite dtw_distance");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source_name, line_no, e.what());
        }
    }
    return out;
}

std::string serialize_skip_report(const std::vector<SkipEntry>& skipped)
{
    std::string out = "target_id\treason\n";
    for (const auto& s : skipped)
        out += s.target_id + "\t" + s.reason + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation set

EvaluationSet build_evaluation_set(const corpus::CorpusManifest& m, const std::vector<PairRecord>& training_pairs,
                                   std::size_t n_sentences, double same_text_fraction, std::uint64_t rng_seed)
{
    if (n_sentences == 0)
        throw Error("invalid_argument", "n_sentences must be > 0");
    if (!(same_text_fraction >= 0.0 && same_text_fraction <= 1.0))
        throw Error("invalid_argument", "same_text_fraction must be in [0, 1]");

    std::set<std::string> seen_sentences;
    for (const auto& p : training_pairs) {
        for (const auto* id : {&p.target_id, &p.reference_id}) {
            if (const auto* u = m.find(*id))
                seen_sentences.insert(u->sentence_id);
        }
    }

    std::vector<std::string> unseen;
    for (const auto& [sid, ids] : m.sentences) {
        if (!seen_sentences.contains(sid))
            unseen.push_back(sid);
    }
    auto rng = seeded_rng(rng_seed, "evalset");
    shuffle(std::span(unseen), rng);

    const auto n_same = static_cast<std::size_t>(std::llround(static_cast<double>(n_sentences) * same_text_fraction));
    const auto n_diff = n_sentences - n_same;

    auto speakers_of = [&](const std::string& sid) {
        std::set<std::string> s;
        for (const auto& id : m.sentences.at(sid))
            s.insert(m.at(id).speaker_id);
        return s;
    };

    std::vector<std::string> same, diff, reserve;
    std::vector<bool> used(unseen.size(), false);
    for (std::size_t i = 0; i < unseen.size() && same.size() < n_same; ++i) {
        if (speakers_of(unseen[i]).size() >= 2) {
            same.push_back(unseen[i]);
            used[i] = true;
        }
    }
    for (std::size_t i = 0; i < unseen.size(); ++i) {
        if (used[i])
            continue;
        if (diff.size() < n_diff)
            diff.push_back(unseen[i]);
        else
            reserve.push_back(unseen[i]);
    }
    if (same.size() < n_same || diff.size() < n_diff)
        throw Error("insufficient_data", "only " + std::to_string(unseen.size()) + " unseen sentences (" +
                                             std::to_string(same.size()) + " with two or more speakers) for " +
                                             std::to_string(n_sentences) + " test sentences");

    std::vector<std::string> reserve_utts;
    std::sort(reserve.begin(), reserve.end());
    for (const auto& sid : reserve) {
        auto ids = m.sentences.at(sid);
        std::sort(ids.begin(), ids.end());
        reserve_utts.insert(reserve_utts.end(), ids.begin(), ids.end());
    }
    if (reserve_utts.size() < n_diff)
        throw Error("insufficient_data", "not enough unseen renditions left for different-text references");

    EvaluationSet set;
    for (const auto& sid : same) {
        const auto speaker_set = speakers_of(sid);
        const std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
        const auto& target = speakers[uniform_index(rng, speakers.size())];
        auto refs = corpus::parallel_renditions(m, sid, target);
        std::sort(refs.begin(), refs.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
        set.entries.push_back({sid, target, refs[uniform_index(rng, refs.size())].id, Condition::same_text});
    }
    for (const auto& sid : diff) {
        const auto speaker_set = speakers_of(sid);
        const std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
        const auto& target = speakers[uniform_index(rng, speakers.size())];
        const auto k = static_cast<std::size_t>(uniform_index(rng, reserve_utts.size()));
        set.entries.push_back({sid, target, reserve_utts[k], Condition::different_text});
        reserve_utts.erase(reserve_utts.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(set.entries.begin(), set.entries.end(),
              [](const EvalEntry& x, const EvalEntry& y) { return x.sentence_id < y.sentence_id; });
    set.n_same_text = same.size();
    set.n_different_text = diff.size();
    return set;
}

std::string serialize_evaluation_set(const EvaluationSet& set)
{
    std::string out;
    for (const auto& e : set.entries) {
        json j = {{"sentence_id", e.sentence_id},
                  {"target_speaker", e.target_speaker},
                  {"reference_id", e.reference_id},
                  {"condition", to_string(e.condition)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace prosody::pairing
