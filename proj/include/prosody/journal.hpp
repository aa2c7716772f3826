#pragma once

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace prosody::listensvc {

// Append-only event log: one JSON object per line. append() returns only
// after the line has been written and fsync'ed.
class Journal
{
public:
    explicit Journal(const std::filesystem::path& path);
    ~Journal();
    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    void append(const nlohmann::json& event);
    const std::filesystem::path& path() const { return path_; }

    // All complete events in order. A torn final line (crash during append,
    // never acknowledged) is ignored; corruption anywhere else throws.
    static std::vector<nlohmann::json> replay(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace prosody::listensvc
