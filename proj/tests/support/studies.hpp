#pragma once

#include "prosody/listensvc.hpp"

#include <string>
#include <vector>

namespace studies {

using prosody::listensvc::Screen;
using prosody::listensvc::ScreenKind;

inline Screen mos(const std::string& id, const std::string& category, const std::string& system = "ours",
                  const std::string& item = "")
{
    return {id, ScreenKind::mos, {id + ".wav"}, category, {system}, item};
}

inline Screen mushra(const std::string& id, const std::string& category)
{
    return {id,
            ScreenKind::mushra,
            {id + "_ref.wav", id + "_1.wav", id + "_2.wav", id + "_3.wav", id + "_4.wav"},
            category,
            {"reference", "ours", "shuffle", "text", "f0"},
            ""};
}

inline Screen axy(const std::string& id, const std::string& category, const std::string& system = "ours")
{
    return {id, ScreenKind::axy, {id + "_a.wav", id + "_x.wav", id + "_y.wav"}, category, {system, "target", "source"}, ""};
}

inline Screen preference(const std::string& id, const std::string& category)
{
    return {id,
            ScreenKind::preference,
            {id + "_t.delex.wav", id + "_0.delex.wav", id + "_1.delex.wav", id + "_2.delex.wav"},
            category,
            {"target", "f0", "text", "shuffle"},
            ""};
}

// MOS screens "<prefix><i>" spread over the given category sizes.
inline std::vector<Screen> mos_study(const std::vector<std::size_t>& category_sizes)
{
    std::vector<Screen> out;
    for (std::size_t c = 0; c < category_sizes.size(); ++c)
        for (std::size_t i = 0; i < category_sizes[c]; ++i)
            out.push_back(mos("c" + std::to_string(c) + "_s" + std::to_string(i), "cat" + std::to_string(c)));
    return out;
}

inline nlohmann::json valid_payload(ScreenKind k)
{
    switch (k) {
    case ScreenKind::mos:
        return 4;
    case ScreenKind::mushra:
        return nlohmann::json::array({80, 61, 49, 25});
    case ScreenKind::axy:
        return "X";
    case ScreenKind::preference:
        return 1;
    }
    return nullptr;
}

} // namespace studies

#include <random>

namespace studies {

// A small mixed study run to completion by scripted listeners whose answers
// come from a seeded generator; returns the unblinded export.
inline nlohmann::json simulated_export(std::uint64_t seed, std::size_t n_listeners = 10)
{
    std::vector<Screen> screens;
    for (const std::string system : {"ours", "f0", "text", "shuffle"})
        for (int i = 0; i < 4; ++i)
            screens.push_back(mos("mos_" + system + std::to_string(i), "same_text", system, "item" + std::to_string(i)));
    for (int i = 0; i < 4; ++i) {
        screens.push_back(mushra("mushra" + std::to_string(i), "pt"));
        screens.push_back(axy("axy" + std::to_string(i), "pt", i % 2 ? "ours" : "f0"));
        screens.push_back(preference("pref" + std::to_string(i), "delex"));
    }
    prosody::listensvc::StudyConfig cfg;
    cfg.screens_per_listener = 12;
    cfg.rng_seed = seed;
    prosody::listensvc::StudyService svc(std::nullopt, [] { return std::string("2026-01-01T00:00:00Z"); });
    const auto id = svc.create_study(screens, cfg, "sim");
    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    for (std::size_t l = 0; l < n_listeners; ++l) {
        const auto lid = svc.register_listener(id).listener_id;
        for (;;) {
            const auto next = svc.next_screen(id, lid);
            if (!next.screen)
                break;
            nlohmann::json payload;
            switch (next.screen->kind) {
            case ScreenKind::mos:
                payload = 1 + static_cast<int>(rng() % 5);
                break;
            case ScreenKind::mushra:
                payload = nlohmann::json::array({90 - static_cast<int>(rng() % 20), 60 + static_cast<int>(rng() % 20),
                                                 20 + static_cast<int>(rng() % 20), 50 + static_cast<int>(rng() % 20)});
                break;
            case ScreenKind::axy:
                payload = rng() % 4 ? "X" : "Y";
                break;
            case ScreenKind::preference:
                payload = static_cast<int>(rng() % 3);
                break;
            }
            svc.submit_response(id, lid, next.screen->screen_id, payload);
        }
    }
    return svc.export_results(id);
}

} // namespace studies
