#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prosody {

// Every failure carries a short machine-readable code ("duplicate_id",
// "parse_error", ...) next to the human message. The HTTP layer and the CLI
// both surface the code verbatim.
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error("parse_error", file + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace prosody
