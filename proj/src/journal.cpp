#include "prosody/journal.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"

#include <spdlog/spdlog.h>

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <unistd.h>

namespace prosody::listensvc {

Journal::Journal(const std::filesystem::path& path) : path_(path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    if (std::filesystem::exists(path)) {
        // drop a torn tail so the next append starts on a fresh line
        const auto text = io::read_file(path);
        if (!text.empty() && text.back() != '\n') {
            const auto keep = text.rfind('\n');
            std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
        }
    }
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw Error("io_error", "cannot open journal " + path.string() + ": " + std::strerror(errno));
}

Journal::~Journal()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void Journal::append(const nlohmann::json& event)
{
    const std::string line = event.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw Error("io_error", "journal write failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0)
        throw Error("io_error", "journal fsync failed: " + std::string(std::strerror(errno)));
}

std::vector<nlohmann::json> Journal::replay(const std::filesystem::path& path)
{
    std::vector<nlohmann::json> events;
    if (!std::filesystem::exists(path))
        return events;
    const auto text = io::read_file(path);
    const auto lines = io::split_lines(text);
    const bool ends_clean = text.empty() || text.back() == '\n';
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        try {
            events.push_back(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::parse_error& e) {
            if (i + 1 == lines.size() && !ends_clean) {
                spdlog::warn("{}: ignoring torn final journal line", path.string());
                break;
            }
            throw ParseError(path.string(), i + 1, e.what());
        }
    }
    return events;
}

} // namespace prosody::listensvc
