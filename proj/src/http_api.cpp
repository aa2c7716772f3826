#include "prosody/http_api.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"
#include "prosody/report.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace prosody::listensvc {

using nlohmann::json;

int http_status(const std::string& code)
{
    if (code == "unknown_study" || code == "unknown_listener" || code == "not_found")
        return 404;
    if (code == "duplicate_study" || code == "already_answered" || code == "wrong_screen" || code == "study_closed")
        return 409;
    if (code == "io_error" || code == "internal_error")
        return 500;
    return 400;
}

struct HttpServer::Impl
{
    StudyService& service;
    ServerOptions options;
    httplib::Server server;
    std::atomic<bool> bound{false};

    Impl(StudyService& s, ServerOptions o) : service(s), options(std::move(o)) { install(); }

    static void send_json(httplib::Response& res, int status, const json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, const std::string& code, const std::string& message)
    {
        send_json(res, http_status(code), {{"error", code}, {"message", message}});
    }

    // Runs a handler, mapping exceptions onto JSON error responses.
    template <typename F>
    static httplib::Server::Handler guarded(F&& f)
    {
        return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const json::exception& e) {
                send_error(res, "invalid_request", e.what());
            } catch (const std::exception& e) {
                spdlog::error("unhandled error on {} {}: {}", req.method, req.path, e.what());
                send_error(res, "internal_error", e.what());
            }
        };
    }

    static json body_of(const httplib::Request& req)
    {
        if (req.body.empty())
            return json::object();
        try {
            return json::parse(req.body);
        } catch (const json::parse_error& e) {
            throw Error("invalid_request", std::string("request body is not JSON: ") + e.what());
        }
    }

    void install()
    {
        server.Post("/studies/import", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto id = service.import_study(body_of(req));
                        send_json(res, 201, {{"study_id", id}});
                    }));

        server.Post("/studies", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = body_of(req);
                        std::vector<Screen> screens;
                        for (const auto& s : body.at("screens"))
                            screens.push_back(screen_from_json(s));
                        const auto config = config_from_json(body.value("config", json::object()));
                        std::optional<std::string> id;
                        if (body.contains("study_id"))
                            id = body.at("study_id").get<std::string>();
                        send_json(res, 201, {{"study_id", service.create_study(std::move(screens), config, id)}});
                    }));

        server.Post(R"(/studies/([^/]+)/listeners)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = body_of(req);
                        std::optional<std::string> lid;
                        if (body.contains("listener_id"))
                            lid = body.at("listener_id").get<std::string>();
                        const auto a = service.register_listener(req.matches[1], lid,
                                                                 body.value("metadata", json::object()));
                        send_json(res, 201, {{"listener_id", a.listener_id},
                                             {"total", a.screen_ids.size()},
                                             {"completed", a.cursor}});
                    }));

        server.Get(R"(/studies/([^/]+)/listeners/([^/]+)/next)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, to_json(service.next_screen(req.matches[1], req.matches[2])));
                   }));

        server.Post(R"(/studies/([^/]+)/responses)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = body_of(req);
                        if (!body.contains("payload"))
                            throw Error("payload_mismatch", "missing payload");
                        const auto ack =
                            service.submit_response(req.matches[1], body.at("listener_id").get<std::string>(),
                                                    body.at("screen_id").get<std::string>(), body.at("payload"));
                        send_json(res, 200, {{"accepted", true},
                                             {"screen_id", ack.screen_id},
                                             {"completed", ack.completed},
                                             {"total", ack.total}});
                    }));

        server.Post(R"(/studies/([^/]+)/close)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        service.close_study(req.matches[1]);
                        send_json(res, 200, {{"closed", true}});
                    }));

        server.Get(R"(/studies/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, service.export_results(req.matches[1]));
                   }));

        server.Get(R"(/studies/([^/]+)/stats)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto tables = report::build_report(service.export_results(req.matches[1]));
                       send_json(res, 200, report::to_json(tables));
                   }));

        server.Get(R"(/audio/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       serve_audio(req.matches[1], res);
                   }));

        if (options.static_dir && !server.set_mount_point("/", options.static_dir->string()))
            throw Error("missing_input", "static directory not found: " + options.static_dir->string());
    }

    void serve_audio(const std::string& stimulus_id, httplib::Response& res)
    {
        if (!options.audio_dir)
            throw Error("not_found", "no audio directory configured");
        const std::filesystem::path rel(stimulus_id);
        if (rel.is_absolute() || stimulus_id.find("..") != std::string::npos)
            throw Error("invalid_request", "invalid stimulus id");
        const auto path = *options.audio_dir / rel;
        if (!std::filesystem::is_regular_file(path))
            throw Error("not_found", "unknown stimulus '" + stimulus_id + "'");
        // httplib slices the body and answers 206 when a Range header is present
        res.set_content(io::read_file(path), "audio/wav");
        res.set_header("Accept-Ranges", "bytes");
    }
};

HttpServer::HttpServer(StudyService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options)))
{
}

HttpServer::~HttpServer()
{
    stop();
}

int HttpServer::bind(const std::string& host, int port)
{
    int bound_port = port;
    if (port == 0)
        bound_port = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port))
        bound_port = -1;
    if (bound_port < 0)
        throw Error("io_error", "cannot bind " + host + ":" + std::to_string(port));
    impl_->bound = true;
    return bound_port;
}

bool HttpServer::serve()
{
    return impl_->server.listen_after_bind();
}

void HttpServer::stop()
{
    if (impl_)
        impl_->server.stop();
}

bool HttpServer::running() const
{
    return impl_->server.is_running();
}

} // namespace prosody::listensvc
