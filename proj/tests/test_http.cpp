#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "prosody/http_api.hpp"
#include "prosody/io.hpp"
#include "support/fixtures.hpp"
#include "support/studies.hpp"

#include <httplib.h>

#include <thread>

using namespace prosody;
using namespace prosody::listensvc;
using nlohmann::json;

namespace {

struct LiveServer
{
    fixture::TempDir dir{"http"};
    StudyService service;
    std::unique_ptr<HttpServer> server;
    std::jthread thread;
    int port = 0;

    LiveServer()
    {
        std::filesystem::create_directories(dir.path() / "audio" / "sub");
        std::filesystem::create_directories(dir.path() / "static");
        std::string bytes(1000, '\0');
        for (std::size_t i = 0; i < bytes.size(); ++i)
            bytes[i] = static_cast<char>(i % 251);
        io::write_file_atomic(dir.path() / "audio" / "sub" / "a.wav", bytes);
        io::write_file_atomic(dir.path() / "static" / "index.html", "<html>client</html>");
        server = std::make_unique<HttpServer>(service, ServerOptions{dir.path() / "audio", dir.path() / "static"});
        port = server->bind("127.0.0.1", 0);
        thread = std::jthread([this] { server->serve(); });
        for (int i = 0; i < 200 && !server->running(); ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ~LiveServer()
    {
        server->stop();
    }

    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect)
{
    const auto r = c.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
}

json get(httplib::Client& c, const std::string& path, int expect)
{
    const auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
}

} // namespace

TEST_CASE("full listener flow over HTTP")
{
    LiveServer live;
    auto c = live.client();

    json screens = json::array();
    for (const auto& s : {studies::mushra("m1", "pt"), studies::mos("s1", "nat"), studies::axy("x1", "spk")})
        screens.push_back(to_json(s));
    const json create{{"study_id", "web"}, {"screens", screens}, {"config", {{"screens_per_listener", 3}}}};
    CHECK(post(c, "/studies", create, 201).at("study_id") == "web");
    CHECK(post(c, "/studies", create, 409).at("error") == "duplicate_study");

    const auto reg = post(c, "/studies/web/listeners", {{"listener_id", "amy"}, {"metadata", {{"lang", "en"}}}}, 201);
    CHECK(reg.at("listener_id") == "amy");
    CHECK(reg.at("total") == 3);
    CHECK(post(c, "/studies/nope/listeners", json::object(), 404).at("error") == "unknown_study");
    CHECK(get(c, "/studies/web/listeners/ghost/next", 404).at("error") == "unknown_listener");

    std::size_t answered = 0;
    for (;;) {
        const auto next = get(c, "/studies/web/listeners/amy/next", 200);
        CHECK(next.dump().find("system_labels") == std::string::npos);
        if (next.at("done") == true) {
            CHECK_FALSE(next.at("completion_code").get<std::string>().empty());
            break;
        }
        const auto& screen = next;
        const auto kind = parse_screen_kind(screen.at("kind").get<std::string>());
        CHECK(screen.at("stimuli").size() == slot_count(kind));
        const json bad{{"listener_id", "amy"}, {"screen_id", screen.at("screen_id")}, {"payload", "?"}};
        CHECK(post(c, "/studies/web/responses", bad, 400).at("error") == "payload_mismatch");
        const json ok{{"listener_id", "amy"}, {"screen_id", screen.at("screen_id")}, {"payload", studies::valid_payload(kind)}};
        CHECK(post(c, "/studies/web/responses", ok, 200).at("completed") == ++answered);
        CHECK(post(c, "/studies/web/responses", ok, 409).at("error") == "already_answered");
    }
    CHECK(answered == 3);

    const auto exported = get(c, "/studies/web/export", 200);
    CHECK(exported.at("responses").size() == 3);
    const auto stats = get(c, "/studies/web/stats", 200);
    CHECK(stats.is_object());

    CHECK(post(c, "/studies/web/close", json::object(), 200).at("closed") == true);
    CHECK(post(c, "/studies/web/listeners", json::object(), 409).at("error") == "study_closed");

    // a second server imports the export
    LiveServer other;
    auto c2 = other.client();
    CHECK(post(c2, "/studies/import", exported, 201).at("study_id") == "web");
    CHECK(get(c2, "/studies/web/export", 200).dump() == exported.dump());
}

TEST_CASE("malformed requests get machine-readable errors")
{
    LiveServer live;
    auto c = live.client();
    const auto r = c.Post("/studies", "{not json", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(json::parse(r->body).at("error") == "invalid_request");

    json bad_screen = to_json(studies::mushra("m", "c"));
    bad_screen["stimulus_refs"] = json::array({"a", "b", "c"});
    CHECK(post(c, "/studies", {{"screens", json::array({bad_screen})}}, 400).at("error") == "invalid_screen");
    CHECK(get(c, "/studies/missing/export", 404).at("error") == "unknown_study");
}

TEST_CASE("audio and static files")
{
    LiveServer live;
    auto c = live.client();
    const auto whole = c.Get("/audio/sub/a.wav");
    REQUIRE(whole);
    CHECK(whole->status == 200);
    CHECK(whole->body.size() == 1000);
    CHECK(whole->get_header_value("Content-Type") == "audio/wav");

    const auto part = c.Get("/audio/sub/a.wav", httplib::Headers{{"Range", "bytes=100-199"}});
    REQUIRE(part);
    CHECK(part->status == 206);
    REQUIRE(part->body.size() == 100);
    CHECK(part->body == whole->body.substr(100, 100));
    CHECK(part->get_header_value("Content-Range") == "bytes 100-199/1000");

    CHECK(c.Get("/audio/missing.wav")->status == 404);
    CHECK(c.Get("/audio/sub/../../static/index.html")->status != 200);

    const auto index = c.Get("/index.html");
    REQUIRE(index);
    CHECK(index->status == 200);
    CHECK(index->body == "<html>client</html>");
}

TEST_CASE("error code to status mapping")
{
    CHECK(http_status("unknown_study") == 404);
    CHECK(http_status("already_answered") == 409);
    CHECK(http_status("wrong_screen") == 409);
    CHECK(http_status("out_of_range") == 400);
    CHECK(http_status("internal_error") == 500);
}
