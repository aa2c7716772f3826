#include "prosody/listensvc.hpp"

#include "prosody/error.hpp"
#include "prosody/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <numeric>
#include <set>

namespace prosody::listensvc {

using nlohmann::json;

constexpr std::string_view kExportFormat = "prosodykit-study-export";
constexpr int kExportVersion = 1;

std::string_view to_string(ScreenKind k)
{
    switch (k) {
    case ScreenKind::mos: return "mos";
    case ScreenKind::mushra: return "mushra";
    case ScreenKind::axy: return "axy";
    case ScreenKind::preference: return "preference";
    }
    return "?";
}

ScreenKind parse_screen_kind(std::string_view s)
{
    if (s == "mos")
        return ScreenKind::mos;
    if (s == "mushra")
        return ScreenKind::mushra;
    if (s == "axy")
        return ScreenKind::axy;
    if (s == "preference")
        return ScreenKind::preference;
    throw Error("invalid_screen", "unknown screen kind '" + std::string(s) + "'");
}

std::size_t slot_count(ScreenKind k)
{
    switch (k) {
    case ScreenKind::mos: return 1;
    case ScreenKind::mushra: return 5;
    case ScreenKind::axy: return 3;
    case ScreenKind::preference: return 4;
    }
    return 0;
}

json to_json(const Screen& s)
{
    return {{"id", s.id},
            {"kind", to_string(s.kind)},
            {"stimulus_refs", s.stimulus_refs},
            {"category", s.category},
            {"system_labels", s.system_labels},
            {"item", s.item}};
}

Screen screen_from_json(const json& j)
{
    try {
        Screen s;
        s.id = j.at("id").get<std::string>();
        s.kind = parse_screen_kind(j.at("kind").get<std::string>());
        s.stimulus_refs = j.at("stimulus_refs").get<std::vector<std::string>>();
        s.category = j.at("category").get<std::string>();
        s.system_labels = j.at("system_labels").get<std::vector<std::string>>();
        s.item = j.value("item", std::string{});
        return s;
    } catch (const json::exception& e) {
        throw Error("invalid_screen", std::string("malformed screen: ") + e.what());
    }
}

json to_json(const StudyConfig& c)
{
    return {{"screens_per_listener", c.screens_per_listener},
            {"min_ratings_per_screen", c.min_ratings_per_screen},
            {"rng_seed", c.rng_seed},
            {"anchor_system", c.anchor_system}};
}

StudyConfig config_from_json(const json& j)
{
    try {
        StudyConfig c;
        c.screens_per_listener = j.value("screens_per_listener", c.screens_per_listener);
        c.min_ratings_per_screen = j.value("min_ratings_per_screen", c.min_ratings_per_screen);
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        c.anchor_system = j.value("anchor_system", c.anchor_system);
        return c;
    } catch (const json::exception& e) {
        throw Error("invalid_config", std::string("malformed study config: ") + e.what());
    }
}

void validate(const Screen& s, std::string_view anchor_system)
{
    if (s.id.empty())
        throw Error("invalid_screen", "screen id must not be empty");
    if (s.category.empty())
        throw Error("invalid_screen", s.id + ": category must not be empty");
    const auto slots = slot_count(s.kind);
    if (s.stimulus_refs.size() != slots)
        throw Error("invalid_screen", s.id + ": " + std::string(to_string(s.kind)) + " screens have " +
                                          std::to_string(slots) + " slots, got " +
                                          std::to_string(s.stimulus_refs.size()));
    if (s.system_labels.size() != slots)
        throw Error("invalid_screen", s.id + ": system_labels must have one entry per slot");
    for (const auto& ref : s.stimulus_refs) {
        if (ref.empty())
            throw Error("invalid_screen", s.id + ": empty stimulus reference");
    }
    if (s.kind == ScreenKind::mushra) {
        const auto anchors = std::count(s.system_labels.begin() + 1, s.system_labels.end(), anchor_system);
        if (anchors != 1)
            throw Error("invalid_screen", s.id + ": mushra screens need exactly one '" + std::string(anchor_system) +
                                              "' anchor slot");
    }
}

void validate_payload(ScreenKind kind, const json& payload)
{
    auto integer_in = [](const json& v, long lo, long hi) {
        if (!v.is_number_integer())
            throw Error("payload_mismatch", "expected an integer rating");
        const auto x = v.get<long>();
        if (x < lo || x > hi)
            throw Error("out_of_range",
                        "rating " + std::to_string(x) + " outside " + std::to_string(lo) + ".." + std::to_string(hi));
    };
    switch (kind) {
    case ScreenKind::mos:
        integer_in(payload, 1, 5);
        return;
    case ScreenKind::mushra:
        if (!payload.is_array() || payload.size() != 4)
            throw Error("payload_mismatch", "mushra payload must be 4 ratings");
        for (const auto& v : payload)
            integer_in(v, 0, 100);
        return;
    case ScreenKind::axy:
        if (!payload.is_string() || (payload != "X" && payload != "Y"))
            throw Error("payload_mismatch", "axy payload must be \"X\" or \"Y\"");
        return;
    case ScreenKind::preference:
        integer_in(payload, 0, 2);
        return;
    }
}

std::map<std::string, std::size_t> category_quotas(const std::map<std::string, std::size_t>& sizes, std::size_t total)
{
    const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0},
                                          [](std::size_t acc, const auto& kv) { return acc + kv.second; });
    std::map<std::string, std::size_t> quota;
    if (n == 0)
        return quota;
    struct Rem
    {
        std::string category;
        std::size_t numerator; // remainder of total * size / n, in units of 1/n
    };
    std::vector<Rem> rems;
    std::size_t assigned = 0;
    for (const auto& [cat, size] : sizes) {
        quota[cat] = total * size / n;
        assigned += quota[cat];
        rems.push_back({cat, total * size % n});
    }
    std::stable_sort(rems.begin(), rems.end(), [](const Rem& a, const Rem& b) { return a.numerator > b.numerator; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned)
        ++quota[rems[i % rems.size()].category];

    if (total >= sizes.size()) {
        for (auto& [cat, q] : quota) {
            if (q > 0 || sizes.at(cat) == 0)
                continue;
            auto donor = std::max_element(quota.begin(), quota.end(),
                                          [](const auto& a, const auto& b) { return a.second < b.second; });
            --donor->second;
            q = 1;
        }
    }
    return quota;
}

json to_json(const NextScreen& n)
{
    if (!n.screen)
        return {{"done", true}, {"completed", n.completed}, {"total", n.total}, {"completion_code", n.completion_code}};
    const auto& v = *n.screen;
    json stimuli = json::array();
    for (std::size_t i = 0; i < v.stimulus_urls.size(); ++i)
        stimuli.push_back({{"slot", i}, {"url", v.stimulus_urls[i]}});
    return {{"done", false},
            {"screen_id", v.screen_id},
            {"kind", to_string(v.kind)},
            {"category", v.category},
            {"stimuli", stimuli},
            {"position", v.position},
            {"total", v.total},
            {"completed", n.completed}};
}

std::string utc_timestamp_now()
{
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

// ---------------------------------------------------------------------------

struct StudyService::Study
{
    struct Listener
    {
        json metadata;
        Assignment assignment;
        std::set<std::string> answered;
    };

    std::string id;
    StudyConfig config;
    std::vector<Screen> screens; // creation order
    std::map<std::string, std::size_t> screen_index;
    std::vector<std::size_t> internal_order; // seeded; tie-break for allocation
    bool closed = false;
    std::vector<std::string> listener_order;
    std::map<std::string, Listener> listeners;
    std::vector<Response> responses;
    std::map<std::string, std::size_t> assigned;
    std::map<std::string, std::size_t> rated;

    Study(std::string study_id, std::vector<Screen> s, StudyConfig c)
        : id(std::move(study_id)), config(std::move(c)), screens(std::move(s))
    {
        for (std::size_t i = 0; i < screens.size(); ++i) {
            screen_index[screens[i].id] = i;
            assigned[screens[i].id] = 0;
            rated[screens[i].id] = 0;
        }
        std::vector<std::size_t> by_id(screens.size());
        std::iota(by_id.begin(), by_id.end(), 0);
        std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return screens[a].id < screens[b].id; });
        auto rng = seeded_rng(config.rng_seed, "screens");
        prosody::shuffle(std::span(by_id), rng);
        internal_order = std::move(by_id);
    }

    const Screen& screen(const std::string& sid) const { return screens[screen_index.at(sid)]; }

    Listener& listener(const std::string& lid)
    {
        auto it = listeners.find(lid);
        if (it == listeners.end())
            throw Error("unknown_listener", "listener '" + lid + "' is not registered in study '" + id + "'");
        return it->second;
    }
    const Listener& listener(const std::string& lid) const { return const_cast<Study*>(this)->listener(lid); }

    std::vector<std::string> allocate(const std::string& listener_id) const
    {
        std::map<std::string, std::vector<std::size_t>> by_category;
        for (auto idx : internal_order)
            by_category[screens[idx].category].push_back(idx);
        std::map<std::string, std::size_t> sizes;
        for (const auto& [cat, idxs] : by_category)
            sizes[cat] = idxs.size();
        const auto quotas = category_quotas(sizes, config.screens_per_listener);

        std::vector<std::string> chosen;
        for (auto& [cat, idxs] : by_category) {
            std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
            for (std::size_t rank = 0; rank < idxs.size(); ++rank) {
                const auto& sid = screens[idxs[rank]].id;
                // least-assigned first; ties broken per listener so that
                // concurrent registrants spread over equally-rated screens
                const auto tie = stable_hash(sid, stable_hash(listener_id, config.rng_seed + 0x9e3779b97f4a7c15ull));
                keyed.emplace_back(tie, idxs[rank]);
            }
            std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
                const auto ca = assigned.at(screens[a.second].id), cb = assigned.at(screens[b.second].id);
                return ca != cb ? ca < cb : a.first < b.first;
            });
            for (std::size_t k = 0; k < quotas.at(cat); ++k)
                chosen.push_back(screens[keyed[k].second].id);
        }
        std::sort(chosen.begin(), chosen.end());
        auto rng = seeded_rng(config.rng_seed, "order:" + listener_id);
        prosody::shuffle(std::span(chosen), rng);
        return chosen;
    }

    void add_listener(const std::string& lid, json metadata, std::vector<std::string> screen_ids, std::size_t cursor)
    {
        for (const auto& sid : screen_ids)
            ++assigned.at(sid);
        listener_order.push_back(lid);
        auto& l = listeners[lid];
        l.metadata = std::move(metadata);
        l.assignment = {lid, std::move(screen_ids), cursor};
    }

    void add_response(Response r)
    {
        auto& l = listener(r.listener_id);
        l.answered.insert(r.screen_id);
        ++rated.at(r.screen_id);
        if (l.assignment.cursor < l.assignment.screen_ids.size() &&
            l.assignment.screen_ids[l.assignment.cursor] == r.screen_id)
            ++l.assignment.cursor;
        responses.push_back(std::move(r));
    }
};

StudyService::StudyService(std::optional<std::filesystem::path> journal_path, Clock clock)
    : clock_(clock ? std::move(clock) : Clock(utc_timestamp_now))
{
    if (journal_path) {
        for (const auto& event : Journal::replay(*journal_path))
            apply(event);
        journal_ = std::make_unique<Journal>(*journal_path);
    }
}

StudyService::~StudyService() = default;

StudyService::Study& StudyService::study(const std::string& id)
{
    auto it = studies_.find(id);
    if (it == studies_.end())
        throw Error("unknown_study", "no study with id '" + id + "'");
    return *it->second;
}

const StudyService::Study& StudyService::study(const std::string& id) const
{
    return const_cast<StudyService*>(this)->study(id);
}

void StudyService::commit(const json& event)
{
    if (journal_)
        journal_->append(event);
    apply(event);
}

void StudyService::apply(const json& event)
{
    const auto type = event.at("type").get<std::string>();
    if (type == "study_created") {
        std::vector<Screen> screens;
        for (const auto& s : event.at("screens"))
            screens.push_back(screen_from_json(s));
        const auto id = event.at("study_id").get<std::string>();
        studies_[id] = std::make_unique<Study>(id, std::move(screens), config_from_json(event.at("config")));
    } else if (type == "listener_registered") {
        auto& s = study(event.at("study_id").get<std::string>());
        s.add_listener(event.at("listener_id").get<std::string>(), event.at("metadata"),
                       event.at("assignment").get<std::vector<std::string>>(), 0);
    } else if (type == "response") {
        auto& s = study(event.at("study_id").get<std::string>());
        s.add_response({event.at("listener_id").get<std::string>(), event.at("screen_id").get<std::string>(),
                        event.at("payload"), event.at("received_at").get<std::string>()});
    } else if (type == "study_closed") {
        study(event.at("study_id").get<std::string>()).closed = true;
    } else if (type == "study_imported") {
        const auto& ex = event.at("export");
        std::vector<Screen> screens;
        for (const auto& sj : ex.at("screens"))
            screens.push_back(screen_from_json(sj));
        const auto id = ex.at("study_id").get<std::string>();
        auto s = std::make_unique<Study>(id, std::move(screens), config_from_json(ex.at("config")));
        for (const auto& lj : ex.at("listeners"))
            s->add_listener(lj.at("listener_id").get<std::string>(), lj.at("metadata"),
                            lj.at("assignment").get<std::vector<std::string>>(), 0);
        for (const auto& rj : ex.at("responses"))
            s->add_response({rj.at("listener_id").get<std::string>(), rj.at("screen_id").get<std::string>(),
                             rj.at("payload"), rj.at("received_at").get<std::string>()});
        for (const auto& lj : ex.at("listeners"))
            s->listener(lj.at("listener_id").get<std::string>()).assignment.cursor = lj.at("cursor").get<std::size_t>();
        s->closed = ex.at("closed").get<bool>();
        studies_[id] = std::move(s);
    } else {
        throw Error("invalid_journal", "unknown journal event type '" + type + "'");
    }
}

std::string StudyService::create_study(std::vector<Screen> screens, const StudyConfig& config,
                                       std::optional<std::string> study_id)
{
    if (config.screens_per_listener == 0 || config.min_ratings_per_screen == 0)
        throw Error("invalid_config", "screens_per_listener and min_ratings_per_screen must be > 0");
    if (screens.empty())
        throw Error("invalid_screen", "a study needs at least one screen");
    std::set<std::string> ids;
    for (const auto& s : screens) {
        validate(s, config.anchor_system);
        if (!ids.insert(s.id).second)
            throw Error("invalid_screen", "duplicate screen id '" + s.id + "'");
    }
    if (config.screens_per_listener > screens.size())
        throw Error("insufficient_screens", "screens_per_listener exceeds the number of screens");

    std::unique_lock lock(mutex_);
    std::string id;
    if (study_id) {
        if (study_id->empty())
            throw Error("invalid_argument", "study id must not be empty");
        if (studies_.contains(*study_id))
            throw Error("duplicate_study", "study '" + *study_id + "' already exists");
        id = *study_id;
    } else {
        for (std::size_t k = studies_.size() + 1;; ++k) {
            id = "study-" + std::to_string(k);
            if (!studies_.contains(id))
                break;
        }
    }
    json screens_json = json::array();
    for (const auto& s : screens)
        screens_json.push_back(to_json(s));
    commit({{"type", "study_created"}, {"study_id", id}, {"config", to_json(config)}, {"screens", screens_json}});
    return id;
}

Assignment StudyService::register_listener(const std::string& study_id, std::optional<std::string> listener_id,
                                           const json& metadata)
{
    std::unique_lock lock(mutex_);
    auto& s = study(study_id);
    if (s.closed)
        throw Error("study_closed", "study '" + study_id + "' is closed");
    std::string lid;
    if (listener_id) {
        if (listener_id->empty())
            throw Error("invalid_argument", "listener id must not be empty");
        if (auto it = s.listeners.find(*listener_id); it != s.listeners.end())
            return it->second.assignment;
        lid = *listener_id;
    } else {
        for (std::size_t k = s.listeners.size() + 1;; ++k) {
            lid = "listener-" + std::to_string(k);
            if (!s.listeners.contains(lid))
                break;
        }
    }
    auto screens = s.allocate(lid);
    commit({{"type", "listener_registered"},
            {"study_id", study_id},
            {"listener_id", lid},
            {"metadata", metadata.is_null() ? json::object() : metadata},
            {"assignment", screens}});
    return s.listeners.at(lid).assignment;
}

NextScreen StudyService::next_screen(const std::string& study_id, const std::string& listener_id) const
{
    std::shared_lock lock(mutex_);
    const auto& s = study(study_id);
    const auto& l = s.listener(listener_id);
    NextScreen next;
    next.completed = l.assignment.cursor;
    next.total = l.assignment.screen_ids.size();
    if (l.assignment.cursor >= l.assignment.screen_ids.size()) {
        char code[64];
        std::snprintf(code, sizeof code, "%016llx",
                      static_cast<unsigned long long>(stable_hash(study_id + "/" + listener_id, s.config.rng_seed)));
        next.completion_code = code;
        return next;
    }
    const auto& screen = s.screen(l.assignment.screen_ids[l.assignment.cursor]);
    ScreenView view;
    view.screen_id = screen.id;
    view.kind = screen.kind;
    view.category = screen.category;
    for (const auto& ref : screen.stimulus_refs)
        view.stimulus_urls.push_back("/audio/" + ref);
    view.position = l.assignment.cursor + 1;
    view.total = next.total;
    next.screen = std::move(view);
    return next;
}

Ack StudyService::submit_response(const std::string& study_id, const std::string& listener_id,
                                  const std::string& screen_id, const json& payload)
{
    std::unique_lock lock(mutex_);
    auto& s = study(study_id);
    if (s.closed)
        throw Error("study_closed", "study '" + study_id + "' is closed");
    auto& l = s.listener(listener_id);
    if (l.answered.contains(screen_id))
        throw Error("already_answered", "screen '" + screen_id + "' was already answered by '" + listener_id + "'");
    const auto& a = l.assignment;
    if (a.cursor >= a.screen_ids.size())
        throw Error("wrong_screen", "listener '" + listener_id + "' has completed every assigned screen");
    if (a.screen_ids[a.cursor] != screen_id)
        throw Error("wrong_screen", "expected a response for screen '" + a.screen_ids[a.cursor] + "', got '" +
                                        screen_id + "'");
    validate_payload(s.screen(screen_id).kind, payload);

    commit({{"type", "response"},
            {"study_id", study_id},
            {"listener_id", listener_id},
            {"screen_id", screen_id},
            {"payload", payload},
            {"received_at", clock_()}});
    return {screen_id, l.assignment.cursor, l.assignment.screen_ids.size()};
}

void StudyService::close_study(const std::string& study_id)
{
    std::unique_lock lock(mutex_);
    auto& s = study(study_id);
    if (s.closed)
        return;
    commit({{"type", "study_closed"}, {"study_id", study_id}});
}

json StudyService::export_results(const std::string& study_id) const
{
    std::shared_lock lock(mutex_);
    const auto& s = study(study_id);
    json screens = json::array();
    for (const auto& sc : s.screens)
        screens.push_back(to_json(sc));
    json listeners = json::array();
    for (const auto& lid : s.listener_order) {
        const auto& l = s.listeners.at(lid);
        listeners.push_back({{"listener_id", lid},
                             {"metadata", l.metadata},
                             {"assignment", l.assignment.screen_ids},
                             {"cursor", l.assignment.cursor}});
    }
    json responses = json::array();
    for (const auto& r : s.responses)
        responses.push_back({{"listener_id", r.listener_id},
                             {"screen_id", r.screen_id},
                             {"payload", r.payload},
                             {"received_at", r.received_at}});
    return {{"format", kExportFormat},
            {"version", kExportVersion},
            {"study_id", s.id},
            {"config", to_json(s.config)},
            {"closed", s.closed},
            {"screens", screens},
            {"listeners", listeners},
            {"responses", responses},
            {"rating_counts", s.rated}};
}

std::string StudyService::import_study(const json& exported)
{
    try {
        if (exported.at("format") != kExportFormat || exported.at("version") != kExportVersion)
            throw Error("invalid_export", "not a study export of a supported version");
        std::unique_lock lock(mutex_);
        const auto id = exported.at("study_id").get<std::string>();
        if (studies_.contains(id))
            throw Error("duplicate_study", "study '" + id + "' already exists");
        // Validate by building into a scratch service first; nothing is
        // journaled unless the export is consistent.
        StudyService scratch;
        scratch.apply({{"type", "study_imported"}, {"export", exported}});
        const auto& sc = scratch.study(id);
        for (const auto& screen : sc.screens)
            validate(screen, sc.config.anchor_system);
        for (const auto& r : sc.responses)
            validate_payload(sc.screen(r.screen_id).kind, r.payload);
        commit({{"type", "study_imported"}, {"export", exported}});
        return id;
    } catch (const json::exception& e) {
        throw Error("invalid_export", std::string("malformed export: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw Error("invalid_export", std::string("export references unknown screens: ") + e.what());
    }
}

std::vector<std::string> StudyService::study_ids() const
{
    std::shared_lock lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, s] : studies_)
        ids.push_back(id);
    return ids;
}

std::map<std::string, std::size_t> StudyService::rating_counts(const std::string& study_id) const
{
    std::shared_lock lock(mutex_);
    return study(study_id).rated;
}

} // namespace prosody::listensvc
