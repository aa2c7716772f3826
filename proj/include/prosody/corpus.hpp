#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace prosody::corpus {

struct PhoneInterval
{
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;

    bool operator==(const PhoneInterval&) const = default;
};

struct Utterance
{
    std::string id;
    std::string speaker_id;
    std::string sentence_id;
    std::string text;
    std::size_t char_len = 0; // Unicode scalar values in `text`
    std::vector<PhoneInterval> phones;
    std::string audio_path;               // relative to the manifest root
    std::optional<std::string> f0_path;   // relative to the manifest root
    double duration_s = 0.0;

    bool operator==(const Utterance&) const = default;
};

// Validated, immutable-after-load view of a corpus. `sentences` and
// `speakers` are always derived from `utterances`; use rebuild_index() after
// editing the utterance list by hand.
struct CorpusManifest
{
    std::filesystem::path root_dir;
    std::vector<Utterance> utterances;
    std::set<std::string> speakers;
    std::map<std::string, std::vector<std::string>> sentences; // sentence_id -> utterance ids
    std::vector<std::string> warnings;                         // e.g. missing audio files

    const Utterance* find(std::string_view id) const;
    const Utterance& at(std::string_view id) const;
    void rebuild_index();

private:
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Number of Unicode scalar values in a UTF-8 string; throws on malformed input.
std::size_t utf8_length(std::string_view text);

// Checks every per-utterance invariant (phones sorted and non-overlapping,
// durations positive, char_len consistent). Throws prosody::Error.
void validate(const Utterance& u);

CorpusManifest load_manifest(const std::filesystem::path& path);
CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& root_dir,
                              const std::string& source_name = "<manifest>");
std::string serialize_manifest(const CorpusManifest& m);
void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);

// Keeps utterances with char_len <= max_chars (texts "longer than" the limit go).
CorpusManifest filter_by_char_length(const CorpusManifest& m, std::size_t max_chars);

std::vector<Utterance> parallel_renditions(const CorpusManifest& m, std::string_view sentence_id,
                                           std::optional<std::string_view> exclude_speaker = {});

} // namespace prosody::corpus
