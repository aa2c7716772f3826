#pragma once

#include "prosody/corpus.hpp"
#include "prosody/dtw.hpp"
#include "prosody/pitch.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prosody::pairing {

enum class Strategy { text, f0, shuffle };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct PairRecord
{
    std::string target_id;
    std::string reference_id;
    Strategy strategy = Strategy::text;
    std::optional<double> dtw_distance; // present iff strategy == f0

    bool operator==(const PairRecord&) const = default;
};

struct PairingConfig
{
    double length_tolerance = 0.15; // relative to the target's contour length
    double cutoff_sigmas = 1.0;     // drop pairs above mean + k * sigma
    std::uint64_t rng_seed = 0;
    std::optional<std::size_t> max_candidates;
    unsigned threads = 0; // 0: hardware concurrency
};

void validate(const PairingConfig& cfg);

struct SkipEntry
{
    std::string target_id;
    std::string reason;

    bool operator==(const SkipEntry&) const = default;
};

struct PairingResult
{
    std::vector<PairRecord> pairs; // sorted by target_id
    std::vector<SkipEntry> skipped;
    std::optional<double> cutoff_threshold; // f0 only
};

// |candidate - target| <= floor(tolerance * target), so 100 admits 85..115.
bool within_length_tolerance(std::size_t target_len, std::size_t candidate_len, double tolerance);

struct CutoffResult
{
    std::vector<PairRecord> kept;
    std::vector<PairRecord> removed;
    double threshold = 0.0; // mean + k * population sigma of the input distances
};

// Removes pairs whose dtw_distance is strictly above the threshold.
CutoffResult apply_distance_cutoff(std::vector<PairRecord> selected, double cutoff_sigmas);

// Nearest reference (any speaker, any text) by DTW over per-phone contours,
// among candidates passing the length window; ties go to the smallest id.
// Selected pairs whose distance exceeds mean + cutoff_sigmas * sigma
// (population sigma over all selected pairs) are then removed.
PairingResult select_f0_pairs(const std::map<std::string, pitch::PhoneContour>& contours,
                              const corpus::CorpusManifest& m, const PairingConfig& cfg);

// Same sentence, different speaker, chosen uniformly with cfg.rng_seed.
PairingResult select_text_pairs(const corpus::CorpusManifest& m, const PairingConfig& cfg);

// Any other utterance, chosen uniformly with cfg.rng_seed.
PairingResult select_shuffle_pairs(const corpus::CorpusManifest& m, const PairingConfig& cfg);

std::string serialize_pairs(std::vector<PairRecord> pairs);
std::vector<PairRecord> parse_pairs(std::string_view text, const std::string& source_name = "<pairs>");
std::string serialize_skip_report(const std::vector<SkipEntry>& skipped);

// ---------------------------------------------------------------------------
// Held-out evaluation set

enum class Condition { same_text, different_text };

std::string_view to_string(Condition c);

struct EvalEntry
{
    std::string sentence_id;
    std::string target_speaker;
    std::string reference_id;
    Condition condition = Condition::same_text;

    bool operator==(const EvalEntry&) const = default;
};

struct EvaluationSet
{
    std::vector<EvalEntry> entries; // sorted by sentence_id
    std::size_t n_same_text = 0;
    std::size_t n_different_text = 0;
};

// Picks n_sentences sentences none of whose renditions occur in
// training_pairs. round(n * same_text_fraction) of them get another
// speaker's rendition of the same sentence as reference; the rest get a
// rendition of a further unseen sentence that is not itself a test sentence.
EvaluationSet build_evaluation_set(const corpus::CorpusManifest& m, const std::vector<PairRecord>& training_pairs,
                                   std::size_t n_sentences, double same_text_fraction, std::uint64_t rng_seed);

std::string serialize_evaluation_set(const EvaluationSet& set);

} // namespace prosody::pairing
