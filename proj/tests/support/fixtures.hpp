#pragma once

#include "prosody/corpus.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixture {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("prosodykit-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Utterance with `n_phones` back-to-back 100 ms phones.
inline prosody::corpus::Utterance utterance(std::string id, std::string speaker, std::string sentence,
                                            std::size_t n_phones = 5, std::string text = "hello world")
{
    prosody::corpus::Utterance u;
    u.id = std::move(id);
    u.speaker_id = std::move(speaker);
    u.sentence_id = std::move(sentence);
    u.text = std::move(text);
    u.char_len = prosody::corpus::utf8_length(u.text);
    for (std::size_t k = 0; k < n_phones; ++k)
        u.phones.push_back({"p" + std::to_string(k), 0.1 * static_cast<double>(k), 0.1 * static_cast<double>(k + 1)});
    u.audio_path = "wav/" + u.id + ".wav";
    u.duration_s = 0.1 * static_cast<double>(n_phones) + 0.05;
    return u;
}

inline prosody::corpus::CorpusManifest manifest(std::vector<prosody::corpus::Utterance> utts)
{
    prosody::corpus::CorpusManifest m;
    m.utterances = std::move(utts);
    m.rebuild_index();
    return m;
}

} // namespace fixture
