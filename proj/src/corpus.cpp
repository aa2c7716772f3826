#include "prosody/corpus.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <sstream>

namespace prosody::corpus {

using nlohmann::json;

namespace {

constexpr double kDurationSlack = 0.01;
constexpr int kManifestVersion = 1;

Utterance utterance_from_json(const json& j)
{
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.speaker_id = j.at("speaker_id").get<std::string>();
    u.sentence_id = j.at("sentence_id").get<std::string>();
    u.text = j.at("text").get<std::string>();
    u.audio_path = j.at("audio_path").get<std::string>();
    if (auto it = j.find("f0_path"); it != j.end() && !it->is_null())
        u.f0_path = it->get<std::string>();
    u.duration_s = j.at("duration_s").get<double>();
    for (const auto& p : j.at("phones")) {
        if (!p.is_array() || p.size() != 3)
            throw Error("parse_error", "phone entries must be [label, start_s, end_s]");
        u.phones.push_back({p[0].get<std::string>(), p[1].get<double>(), p[2].get<double>()});
    }
    u.char_len = utf8_length(u.text);
    return u;
}

json utterance_to_json(const Utterance& u)
{
    json phones = json::array();
    for (const auto& p : u.phones)
        phones.push_back(json::array({p.label, p.start_s, p.end_s}));
    json j = {{"id", u.id},
              {"speaker_id", u.speaker_id},
              {"sentence_id", u.sentence_id},
              {"text", u.text},
              {"audio_path", u.audio_path},
              {"duration_s", u.duration_s},
              {"phones", std::move(phones)}};
    if (u.f0_path)
        j["f0_path"] = *u.f0_path;
    return j;
}

bool is_header(const json& j)
{
    return j.is_object() && j.contains("manifest_version") && !j.contains("id");
}

} // namespace

std::size_t utf8_length(std::string_view text)
{
    std::size_t count = 0;
    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t extra;
        if (c < 0x80)
            extra = 0;
        else if ((c & 0xE0) == 0xC0 && c >= 0xC2)
            extra = 1;
        else if ((c & 0xF0) == 0xE0)
            extra = 2;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4)
            extra = 3;
        else
            throw Error("invalid_utf8", "malformed UTF-8 lead byte");
        for (std::size_t k = 1; k <= extra; ++k) {
            if (i + k >= text.size() || (static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80)
                throw Error("invalid_utf8", "truncated or malformed UTF-8 sequence");
        }
        i += extra + 1;
        ++count;
    }
    return count;
}

void validate(const Utterance& u)
{
    if (u.id.empty())
        throw Error("invalid_utterance", "empty utterance id");
    if (!(u.duration_s > 0.0))
        throw Error("invalid_utterance", u.id + ": duration_s must be > 0");
    if (u.char_len != utf8_length(u.text))
        throw Error("invalid_utterance", u.id + ": char_len does not match text");
    for (std::size_t k = 0; k < u.phones.size(); ++k) {
        const auto& p = u.phones[k];
        if (!(p.start_s >= 0.0))
            throw Error("invalid_phone", u.id + ": phone " + std::to_string(k) + " starts before 0");
        if (!(p.end_s > p.start_s))
            throw Error("invalid_phone", u.id + ": phone " + std::to_string(k) + " has end_s <= start_s");
        if (k > 0 && p.start_s < u.phones[k - 1].end_s)
            throw Error("overlapping_phones",
                        u.id + ": phone " + std::to_string(k) + " overlaps or precedes phone " + std::to_string(k - 1));
    }
    if (!u.phones.empty() && u.phones.back().end_s > u.duration_s + kDurationSlack)
        throw Error("invalid_utterance", u.id + ": phones extend past duration_s");
}

const Utterance* CorpusManifest::find(std::string_view id) const
{
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &utterances[it->second];
}

const Utterance& CorpusManifest::at(std::string_view id) const
{
    if (const auto* u = find(id))
        return *u;
    throw Error("unknown_utterance", "unknown utterance id '" + std::string(id) + "'");
}

void CorpusManifest::rebuild_index()
{
    by_id_.clear();
    speakers.clear();
    sentences.clear();
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        const auto& u = utterances[i];
        if (!by_id_.emplace(u.id, i).second)
            throw Error("duplicate_id", "duplicate utterance id '" + u.id + "'");
        speakers.insert(u.speaker_id);
        sentences[u.sentence_id].push_back(u.id);
    }
}

CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& root_dir,
                              const std::string& source_name)
{
    CorpusManifest m;
    m.root_dir = root_dir;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos)
            continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source_name, line_no, e.what());
        }
        if (is_header(j)) {
            if (j["manifest_version"] != kManifestVersion)
                throw ParseError(source_name, line_no, "unsupported manifest_version");
            continue;
        }
        Utterance u;
        try {
            u = utterance_from_json(j);
            validate(u);
        } catch (const json::exception& e) {
            throw ParseError(source_name, line_no, e.what());
        } catch (const Error& e) {
            if (e.code() == "parse_error")
                throw ParseError(source_name, line_no, e.what());
            throw Error(e.code(), source_name + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(u.id).second)
            throw Error("duplicate_id", source_name + ":" + std::to_string(line_no) +
                                            ": duplicate utterance id '" + u.id + "'");
        m.utterances.push_back(std::move(u));
    }
    m.rebuild_index();

    for (const auto& u : m.utterances) {
        if (!std::filesystem::exists(m.root_dir / u.audio_path))
            m.warnings.push_back("missing audio for " + u.id + ": " + u.audio_path);
    }
    return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path)
{
    auto m = parse_manifest(io::read_file(path), path.parent_path(), path.string());
    if (!m.warnings.empty())
        spdlog::warn("{}: {} utterance(s) with missing audio, e.g. {}", path.string(), m.warnings.size(),
                     m.warnings.front());
    return m;
}

std::string serialize_manifest(const CorpusManifest& m)
{
    std::ostringstream out;
    out << json{{"manifest_version", kManifestVersion}}.dump() << '\n';
    for (const auto& u : m.utterances)
        out << utterance_to_json(u).dump() << '\n';
    return std::move(out).str();
}

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path)
{
    io::write_file_atomic(path, serialize_manifest(m));
}

CorpusManifest filter_by_char_length(const CorpusManifest& m, std::size_t max_chars)
{
    if (max_chars == 0)
        throw Error("invalid_argument", "max_chars must be > 0");
    CorpusManifest out;
    out.root_dir = m.root_dir;
    out.warnings = m.warnings;
    std::copy_if(m.utterances.begin(), m.utterances.end(), std::back_inserter(out.utterances),
                 [&](const Utterance& u) { return u.char_len <= max_chars; });
    out.rebuild_index();
    return out;
}

std::vector<Utterance> parallel_renditions(const CorpusManifest& m, std::string_view sentence_id,
                                           std::optional<std::string_view> exclude_speaker)
{
    auto it = m.sentences.find(std::string(sentence_id));
    if (it == m.sentences.end())
        throw Error("unknown_sentence", "unknown sentence id '" + std::string(sentence_id) + "'");
    std::vector<Utterance> out;
    for (const auto& id : it->second) {
        const auto& u = m.at(id);
        if (exclude_speaker && u.speaker_id == *exclude_speaker)
            continue;
        out.push_back(u);
    }
    return out;
}

} // namespace prosody::corpus
