#ifndef VVAE_CORPUS_INGEST_HPP
#define VVAE_CORPUS_INGEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/hashing.hpp"
#include "vvae/jsonl.hpp"

// Chat-session loading, scrubbing, per-agent subsampling and (context, target) pairing.
namespace vvae {

enum class TurnRole { user, ai };

inline std::string_view to_string(TurnRole r) { return r == TurnRole::user ? "user" : "ai"; }

inline TurnRole parse_turn_role(std::string_view s) {
    if (s == "user") return TurnRole::user;
    if (s == "ai" || s == "assistant") return TurnRole::ai;
    throw Error("unknown turn role '" + std::string(s) + "'");
}

struct Turn {
    TurnRole role = TurnRole::user;
    std::string text;
    std::size_t index = 0;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct ChatSession {
    std::string agent_id;
    std::string session_id;
    std::vector<Turn> turns;

    friend bool operator==(const ChatSession&, const ChatSession&) = default;
};

struct ContextTargetPair {
    std::string agent_id;
    std::string session_id;
    std::vector<Turn> context;
    Turn target;

    std::size_t target_index() const noexcept { return target.index; }
    friend bool operator==(const ContextTargetPair&, const ContextTargetPair&) = default;
};

struct IngestStats {
    std::size_t n_agents = 0;
    std::size_t n_sessions = 0;
    // Every turn in every session; this is the quantity whose ratio to
    // n_sessions gives avg_turns_per_dialogue.
    std::size_t n_context_utterances = 0;
    std::size_t n_ai_turns = 0;
    std::size_t n_user_turns = 0;
    double avg_turns_per_dialogue = 0.0;

    friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

struct ScrubRule {
    std::string name;
    std::regex pattern;
    std::string replacement;
};

/// Phone numbers and e-mail addresses. Replacements contain nothing the
/// patterns match, so scrubbing is idempotent.
inline std::vector<ScrubRule> default_scrub_rules() {
    return {
        {"email", std::regex(R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,})"), "[EMAIL]"},
        {"phone", std::regex(R"(\+?\d[\d\- ]{7,}\d)"), "[PHONE]"},
    };
}

/// Rules file: [{"name": ..., "pattern": ECMAScript regex, "replacement": ...}].
inline std::vector<ScrubRule> scrub_rules_from_json(const nlohmann::json& j) {
    std::vector<ScrubRule> out;
    for (const auto& r : j) {
        const auto pattern = r.at("pattern").get<std::string>();
        try {
            out.push_back({r.value("name", pattern), std::regex(pattern), r.at("replacement").get<std::string>()});
        } catch (const std::regex_error& e) {
            throw ConfigError("bad scrub pattern '" + pattern + "': " + e.what());
        }
    }
    return out;
}

inline std::string scrub(std::string text, const std::vector<ScrubRule>& rules) {
    for (const auto& r : rules) text = std::regex_replace(text, r.pattern, r.replacement);
    return text;
}

namespace detail {

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

inline ChatSession parse_session(const nlohmann::json& j, const std::vector<ScrubRule>& rules) {
    ChatSession s;
    s.agent_id = j.at("agent_id").get<std::string>();
    s.session_id = j.at("session_id").get<std::string>();
    for (const auto& t : j.at("turns")) {
        Turn turn;
        turn.role = parse_turn_role(t.at("role").get<std::string>());
        turn.text = scrub(t.at("text").get<std::string>(), rules);
        if (blank(turn.text)) continue;
        turn.index = s.turns.size();
        s.turns.push_back(std::move(turn));
    }
    return s;
}

} // namespace detail

/// Loads sessions JSONL ({agent_id, session_id, turns:[{role, text}]}), scrubs
/// every turn, drops turns left blank and sessions left empty, and sorts by
/// (agent_id, session_id). Malformed lines throw IngestError when `strict`;
/// otherwise they are skipped and described in `warnings`.
inline std::vector<ChatSession> load_sessions(const std::string& path, const std::vector<ScrubRule>& rules,
                                              bool strict = false, std::vector<std::string>* warnings = nullptr) {
    std::vector<ChatSession> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        try {
            auto s = detail::parse_session(nlohmann::json::parse(line), rules);
            if (!s.turns.empty()) out.push_back(std::move(s));
        } catch (const std::exception& e) {
            if (strict) throw IngestError(e.what(), n);
            if (warnings) warnings->push_back(IngestError(e.what(), n).what());
        }
    });
    std::stable_sort(out.begin(), out.end(), [](const ChatSession& a, const ChatSession& b) {
        return std::tie(a.agent_id, a.session_id) < std::tie(b.agent_id, b.session_id);
    });
    return out;
}

inline nlohmann::ordered_json session_to_json(const ChatSession& s) {
    nlohmann::ordered_json j;
    j["agent_id"] = s.agent_id;
    j["session_id"] = s.session_id;
    auto turns = nlohmann::ordered_json::array();
    for (const auto& t : s.turns) turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
    j["turns"] = std::move(turns);
    return j;
}

/// Linear-interpolation quantile (the "type 7" definition) of `values`.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Session cap implied by `cap_quantile` over per-agent session counts.
inline std::size_t subsample_cap(const std::vector<ChatSession>& sessions, double cap_quantile) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : sessions) ++counts[s.agent_id];
    std::vector<double> v;
    v.reserve(counts.size());
    for (const auto& [_, c] : counts) v.push_back(static_cast<double>(c));
    return static_cast<std::size_t>(std::floor(quantile(std::move(v), cap_quantile) + 1e-9));
}

/// Agents with more sessions than the cap_quantile of per-agent counts keep a
/// seeded uniform subset of exactly cap sessions; everyone else is untouched.
/// Surviving sessions keep their input order.
inline std::vector<ChatSession> subsample_agents(const std::vector<ChatSession>& sessions, double cap_quantile,
                                                 std::uint64_t seed) {
    if (!(cap_quantile > 0.0 && cap_quantile <= 1.0)) throw ConfigError("cap_quantile must be in (0, 1]");
    if (sessions.empty()) return {};
    const std::size_t cap = subsample_cap(sessions, cap_quantile);

    std::map<std::string, std::vector<std::size_t>> by_agent;
    for (std::size_t i = 0; i < sessions.size(); ++i) by_agent[sessions[i].agent_id].push_back(i);

    std::vector<bool> keep(sessions.size(), true);
    for (auto& [agent, idx] : by_agent) {
        if (idx.size() <= cap) continue;
        // Partial Fisher-Yates; the agent's own stream makes this schedule-independent.
        std::mt19937_64 rng(derive_seed(seed, "subsample", agent));
        for (std::size_t i = 0; i < cap; ++i) {
            const std::uint64_t span = idx.size() - i;
            const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                        std::numeric_limits<std::uint64_t>::max() % span;
            std::uint64_t r;
            do {
                r = rng();
            } while (r >= limit);
            std::swap(idx[i], idx[i + static_cast<std::size_t>(r % span)]);
        }
        for (std::size_t i = cap; i < idx.size(); ++i) keep[idx[i]] = false;
    }
    std::vector<ChatSession> out;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (keep[i]) out.push_back(sessions[i]);
    }
    return out;
}

/// One pair per target AI turn; the context is the full prefix before it.
/// Without explicit indices every AI turn at index >= 1 is a target.
inline std::vector<ContextTargetPair> pair_targets(const ChatSession& session,
                                                   const std::optional<std::vector<std::size_t>>& target_indices = {}) {
    std::vector<std::size_t> targets;
    if (target_indices) {
        targets = *target_indices;
        for (std::size_t t : targets) {
            if (t >= session.turns.size()) {
                throw PairingError("session " + session.session_id + ": target index " + std::to_string(t) +
                                   " out of range");
            }
            if (session.turns[t].role != TurnRole::ai) {
                throw PairingError("session " + session.session_id + ": target index " + std::to_string(t) +
                                   " is a user turn");
            }
        }
    } else {
        for (const auto& t : session.turns) {
            if (t.role == TurnRole::ai && t.index >= 1) targets.push_back(t.index);
        }
    }
    std::vector<ContextTargetPair> out;
    out.reserve(targets.size());
    for (std::size_t t : targets) {
        ContextTargetPair p;
        p.agent_id = session.agent_id;
        p.session_id = session.session_id;
        p.context.assign(session.turns.begin(), session.turns.begin() + static_cast<std::ptrdiff_t>(t));
        p.target = session.turns[t];
        out.push_back(std::move(p));
    }
    return out;
}

inline IngestStats stats(const std::vector<ChatSession>& sessions) {
    IngestStats st;
    std::set<std::string> agents;
    for (const auto& s : sessions) {
        agents.insert(s.agent_id);
        st.n_context_utterances += s.turns.size();
        for (const auto& t : s.turns) {
            if (t.role == TurnRole::ai) {
                ++st.n_ai_turns;
            } else {
                ++st.n_user_turns;
            }
        }
    }
    st.n_agents = agents.size();
    st.n_sessions = sessions.size();
    st.avg_turns_per_dialogue =
        st.n_sessions == 0 ? 0.0 : static_cast<double>(st.n_context_utterances) / static_cast<double>(st.n_sessions);
    return st;
}

inline nlohmann::ordered_json stats_to_json(const IngestStats& st) {
    return {{"n_agents", st.n_agents},
            {"n_sessions", st.n_sessions},
            {"n_context_utterances", st.n_context_utterances},
            {"n_ai_turns", st.n_ai_turns},
            {"n_user_turns", st.n_user_turns},
            {"avg_turns_per_dialogue", st.avg_turns_per_dialogue}};
}

inline nlohmann::ordered_json turn_to_json(const Turn& t) {
    return {{"role", to_string(t.role)}, {"text", t.text}, {"index", t.index}};
}

inline Turn turn_from_json(const nlohmann::ordered_json& j) {
    return {parse_turn_role(j.at("role").get<std::string>()), j.at("text").get<std::string>(),
            j.at("index").get<std::size_t>()};
}

inline nlohmann::ordered_json pair_to_json(const ContextTargetPair& p) {
    nlohmann::ordered_json j;
    j["session_id"] = p.session_id;
    j["agent_id"] = p.agent_id;
    j["target_index"] = p.target.index;
    auto ctx = nlohmann::ordered_json::array();
    for (const auto& t : p.context) ctx.push_back(turn_to_json(t));
    j["context"] = std::move(ctx);
    j["target"] = turn_to_json(p.target);
    return j;
}

inline ContextTargetPair pair_from_json(const nlohmann::ordered_json& j) {
    ContextTargetPair p;
    p.session_id = j.at("session_id").get<std::string>();
    p.agent_id = j.value("agent_id", "");
    for (const auto& t : j.at("context")) p.context.push_back(turn_from_json(t));
    p.target = turn_from_json(j.at("target"));
    if (p.target.role != TurnRole::ai) throw PairingError("pair target must be an ai turn");
    if (j.contains("target_index") && j.at("target_index").get<std::size_t>() != p.target.index) {
        throw PairingError("target_index disagrees with target.index");
    }
    return p;
}

inline std::vector<ContextTargetPair> load_pairs(const std::string& path) {
    std::vector<ContextTargetPair> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        try {
            out.push_back(pair_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw IngestError(e.what(), n);
        }
    });
    return out;
}

} // namespace vvae

#endif // VVAE_CORPUS_INGEST_HPP
