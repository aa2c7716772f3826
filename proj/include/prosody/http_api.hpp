#pragma once

#include "prosody/listensvc.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace prosody::listensvc {

struct ServerOptions
{
    std::optional<std::filesystem::path> audio_dir;  // GET /audio/{stimulus_id}
    std::optional<std::filesystem::path> static_dir; // browser client, mounted at /
};

// HTTP front end over a StudyService:
//   POST /studies                              create a study
//   POST /studies/import                       import an export
//   POST /studies/{id}/listeners               register a listener
//   GET  /studies/{id}/listeners/{lid}/next    current screen (blinded)
//   POST /studies/{id}/responses               submit an answer
//   POST /studies/{id}/close                   stop accepting listeners
//   GET  /studies/{id}/export                  unblinded results
//   GET  /studies/{id}/stats                   report tables as JSON
//   GET  /audio/{stimulus_id}                  WAV bytes, Range supported
// Errors are {"error": <code>, "message": <text>}.
class HttpServer
{
public:
    HttpServer(StudyService& service, ServerOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Returns the bound port (an ephemeral one when port == 0).
    int bind(const std::string& host, int port);
    // Blocks until stop().
    bool serve();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HTTP status for an error code.
int http_status(const std::string& code);

} // namespace prosody::listensvc
