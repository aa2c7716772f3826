#pragma once

#include "prosody/journal.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace prosody::listensvc {

enum class ScreenKind { mos, mushra, axy, preference };

std::string_view to_string(ScreenKind k);
ScreenKind parse_screen_kind(std::string_view s);

// Slots per kind:
//   mos         1  stimulus
//   mushra      5  reference + 4 systems (exactly one is the anchor)
//   axy         3  A, X (target speaker), Y (other speaker)
//   preference  4  target + 3 delexified candidates
std::size_t slot_count(ScreenKind k);

struct Screen
{
    std::string id;
    ScreenKind kind = ScreenKind::mos;
    std::vector<std::string> stimulus_refs;
    std::string category;
    std::vector<std::string> system_labels; // one per stimulus slot; never sent to listeners
    std::string item;                       // optional key pairing screens across systems

    bool operator==(const Screen&) const = default;
};

struct StudyConfig
{
    std::size_t screens_per_listener = 36;
    std::size_t min_ratings_per_screen = 8;
    std::uint64_t rng_seed = 0;
    std::string anchor_system = "shuffle";

    bool operator==(const StudyConfig&) const = default;
};

struct Assignment
{
    std::string listener_id;
    std::vector<std::string> screen_ids;
    std::size_t cursor = 0;
};

struct Response
{
    std::string listener_id;
    std::string screen_id;
    nlohmann::json payload;
    std::string received_at; // ISO-8601 UTC
};

nlohmann::json to_json(const Screen& s);
Screen screen_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StudyConfig& c);
StudyConfig config_from_json(const nlohmann::json& j);

// Throws Error("invalid_screen") if the slot layout does not match the kind.
void validate(const Screen& s, std::string_view anchor_system = "shuffle");

// Throws Error("payload_mismatch" / "out_of_range") for a malformed answer.
void validate_payload(ScreenKind kind, const nlohmann::json& payload);

// Per-category screen quotas by largest-remainder apportionment, with every
// category getting at least one screen when the total allows it.
std::map<std::string, std::size_t> category_quotas(const std::map<std::string, std::size_t>& sizes,
                                                   std::size_t total);

// What a listener may see: no system labels.
struct ScreenView
{
    std::string screen_id;
    ScreenKind kind = ScreenKind::mos;
    std::string category;
    std::vector<std::string> stimulus_urls;
    std::size_t position = 0; // 1-based
    std::size_t total = 0;
};

struct NextScreen
{
    std::optional<ScreenView> screen; // empty when done
    std::size_t completed = 0;
    std::size_t total = 0;
    std::string completion_code; // set when done
};

nlohmann::json to_json(const NextScreen& n);

struct Ack
{
    std::string screen_id;
    std::size_t completed = 0;
    std::size_t total = 0;
};

// Hosts listening studies. Every state change is appended to the journal
// (when one is configured) and fsync'ed before the call returns; on
// construction the journal is replayed. Mutations are serialized, reads run
// concurrently against a consistent state.
class StudyService
{
public:
    using Clock = std::function<std::string()>;

    explicit StudyService(std::optional<std::filesystem::path> journal_path = std::nullopt, Clock clock = {});
    ~StudyService();

    std::string create_study(std::vector<Screen> screens, const StudyConfig& config,
                             std::optional<std::string> study_id = std::nullopt);
    Assignment register_listener(const std::string& study_id, std::optional<std::string> listener_id = std::nullopt,
                                 const nlohmann::json& metadata = nlohmann::json::object());
    NextScreen next_screen(const std::string& study_id, const std::string& listener_id) const;
    Ack submit_response(const std::string& study_id, const std::string& listener_id, const std::string& screen_id,
                        const nlohmann::json& payload);
    void close_study(const std::string& study_id);

    // Unblinded, lossless dump of a study. import_study() accepts it back.
    nlohmann::json export_results(const std::string& study_id) const;
    std::string import_study(const nlohmann::json& exported);

    std::vector<std::string> study_ids() const;
    std::map<std::string, std::size_t> rating_counts(const std::string& study_id) const;

private:
    struct Study;

    Study& study(const std::string& id);
    const Study& study(const std::string& id) const;
    void apply(const nlohmann::json& event);
    void commit(const nlohmann::json& event);

    mutable std::shared_mutex mutex_;
    std::map<std::string, std::unique_ptr<Study>> studies_;
    std::unique_ptr<Journal> journal_;
    Clock clock_;
};

std::string utc_timestamp_now();

} // namespace prosody::listensvc
