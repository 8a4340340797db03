#ifndef VVAE_BENCH_METRICS_HPP
#define VVAE_BENCH_METRICS_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/hashing.hpp"
#include "vvae/jsonl.hpp"
#include "vvae/text.hpp"

// HumanChatBench scoring: per-item pattern detectors for catchphrase presence
// (CP), emoji consistency (EC) and hobby mention (HM), aggregated to hit rates
// and compared against human reference rates. Closer to the reference is better.
namespace vvae {

enum class Metric { CP, EC, HM };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::CP, Metric::EC, Metric::HM};

inline std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::CP: return "CP";
    case Metric::EC: return "EC";
    case Metric::HM: return "HM";
    }
    return "?";
}

inline Metric parse_metric(std::string_view s) {
    for (Metric m : kAllMetrics) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown metric '" + std::string(s) + "'");
}

/// Lowercased, whitespace-collapsed, emoji modifiers removed. Applied to both
/// detector terms and model outputs before matching.
inline std::string detector_canonical(std::string_view s) {
    return text::normalize(s, /*lowercase=*/true, /*strip_modifiers=*/true);
}

struct DetectorSpec {
    std::optional<std::string> catchphrase;
    std::optional<std::set<std::string>> emoji_set;
    std::optional<std::set<std::string>> hobby_terms;

    bool has(Metric m) const {
        switch (m) {
        case Metric::CP: return catchphrase.has_value();
        case Metric::EC: return emoji_set.has_value();
        case Metric::HM: return hobby_terms.has_value();
        }
        return false;
    }
    bool any() const { return catchphrase || emoji_set || hobby_terms; }

    /// Canonicalizes every term; blank terms are dropped and a field left
    /// with nothing becomes absent.
    static DetectorSpec make(std::optional<std::string> cp, std::optional<std::set<std::string>> emoji,
                             std::optional<std::set<std::string>> hobbies) {
        DetectorSpec d;
        if (cp) {
            auto c = detector_canonical(*cp);
            if (!c.empty()) d.catchphrase = std::move(c);
        }
        auto canon_set = [](const std::optional<std::set<std::string>>& in) -> std::optional<std::set<std::string>> {
            if (!in) return std::nullopt;
            std::set<std::string> out;
            for (const auto& t : *in) {
                auto c = detector_canonical(t);
                if (!c.empty()) out.insert(std::move(c));
            }
            if (out.empty()) return std::nullopt;
            return out;
        };
        d.emoji_set = canon_set(emoji);
        d.hobby_terms = canon_set(hobbies);
        return d;
    }
};

struct EvalItem {
    std::string item_id;
    std::string output;
    DetectorSpec detector;
};

/// 1 if the metric's target feature occurs in the output, 0 if not, nullopt
/// when the item has no detector for the metric (skipped).
inline std::optional<int> detect(const EvalItem& item, Metric m) {
    if (!item.detector.has(m)) return std::nullopt;
    const std::string out = detector_canonical(item.output);
    switch (m) {
    case Metric::CP:
        return out.find(*item.detector.catchphrase) != std::string::npos ? 1 : 0;
    case Metric::EC:
        for (const auto& e : *item.detector.emoji_set) {
            if (out.find(e) != std::string::npos) return 1;
        }
        return 0;
    case Metric::HM:
        for (const auto& t : *item.detector.hobby_terms) {
            if (text::contains_word(out, t)) return 1;
        }
        return 0;
    }
    return std::nullopt;
}

struct MetricResult {
    std::size_t n_items = 0;
    std::size_t hits = 0;
    std::optional<double> score;  // percent; undefined when n_items == 0
    std::optional<double> target;
    std::optional<double> deviation;
};

struct ItemResult {
    std::string item_id;
    std::map<Metric, std::optional<int>> hits;
};

struct EvalReport {
    std::map<Metric, MetricResult> metrics;
    std::vector<ItemResult> items;
};

inline double deviation(double score, double target) { return std::fabs(score - target); }

/// Per-metric hit rate (percent) over items that carry that detector, and the
/// absolute deviation from each provided target.
inline EvalReport score(const std::vector<EvalItem>& items, const std::map<Metric, double>& targets = {}) {
    if (items.empty()) throw Error("score: no items");
    EvalReport r;
    for (Metric m : kAllMetrics) r.metrics[m];
    for (const auto& it : items) {
        ItemResult ir{it.item_id, {}};
        for (Metric m : kAllMetrics) {
            auto h = detect(it, m);
            ir.hits[m] = h;
            if (h) {
                auto& mr = r.metrics[m];
                ++mr.n_items;
                mr.hits += static_cast<std::size_t>(*h);
            }
        }
        r.items.push_back(std::move(ir));
    }
    for (auto& [m, mr] : r.metrics) {
        if (mr.n_items > 0) mr.score = 100.0 * static_cast<double>(mr.hits) / static_cast<double>(mr.n_items);
        if (auto t = targets.find(m); t != targets.end()) {
            mr.target = t->second;
            if (mr.score) mr.deviation = deviation(*mr.score, t->second);
        }
    }
    return r;
}

namespace detail {

inline std::optional<std::set<std::string>> string_set(const nlohmann::json& d, const char* key) {
    if (!d.contains(key) || d.at(key).is_null()) return std::nullopt;
    const auto& v = d.at(key);
    if (v.is_string()) return std::set<std::string>{v.get<std::string>()};
    return v.get<std::set<std::string>>();
}

} // namespace detail

inline EvalItem eval_item_from_json(const nlohmann::json& j) {
    EvalItem it;
    it.item_id = j.at("item_id").is_string() ? j.at("item_id").get<std::string>() : j.at("item_id").dump();
    it.output = j.at("output").get<std::string>();
    if (it.output.empty()) throw Error("empty output");
    if (!j.contains("detector") || !j.at("detector").is_object()) throw Error("missing detector object");
    const auto& d = j.at("detector");
    std::optional<std::string> cp;
    if (d.contains("catchphrase") && !d.at("catchphrase").is_null()) cp = d.at("catchphrase").get<std::string>();
    it.detector = DetectorSpec::make(cp, detail::string_set(d, "emoji_set"), detail::string_set(d, "hobby_terms"));
    if (!it.detector.any()) throw Error("detector has no catchphrase, emoji_set or hobby_terms");
    return it;
}

/// Outputs JSONL ({item_id, output, detector}). A repeated item_id replaces
/// the earlier item in place and adds a warning.
inline std::vector<EvalItem> load_outputs(const std::string& path, std::vector<std::string>* warnings = nullptr) {
    std::vector<EvalItem> out;
    std::map<std::string, std::size_t> pos;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        EvalItem it;
        try {
            it = eval_item_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw EvalIngestError(e.what(), n);
        }
        if (auto p = pos.find(it.item_id); p != pos.end()) {
            if (warnings) {
                warnings->push_back("line " + std::to_string(n) + ": duplicate item_id '" + it.item_id +
                                    "', keeping the last occurrence");
            }
            out[p->second] = std::move(it);
        } else {
            pos.emplace(it.item_id, out.size());
            out.push_back(std::move(it));
        }
    });
    return out;
}

/// Targets JSON: {"CP": percent, "EC": percent, "HM": percent}; any subset.
inline std::map<Metric, double> targets_from_json(const nlohmann::json& j) {
    std::map<Metric, double> out;
    for (const auto& [k, v] : j.items()) {
        if (k.rfind('_', 0) == 0) continue;  // "_source" and similar annotations
        out[parse_metric(k)] = v.get<double>();
    }
    return out;
}

inline std::map<Metric, double> load_targets(const std::string& path) {
    try {
        return targets_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path, std::string("bad targets file: ") + e.what());
    }
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    nlohmann::ordered_json metrics;
    for (const auto& [m, mr] : r.metrics) {
        metrics[std::string(to_string(m))] = {{"score", opt(mr.score)},     {"target", opt(mr.target)},
                                              {"deviation", opt(mr.deviation)}, {"n_items", mr.n_items},
                                              {"hits", mr.hits}};
    }
    j["metrics"] = std::move(metrics);
    auto items = nlohmann::ordered_json::array();
    for (const auto& it : r.items) {
        nlohmann::ordered_json h;
        for (const auto& [m, v] : it.hits) {
            h[std::string(to_string(m))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("skipped");
        }
        items.push_back({{"item_id", it.item_id}, {"hits", std::move(h)}});
    }
    j["items"] = std::move(items);
    return j;
}

inline std::string format_table(const EvalReport& r) {
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        return std::string(buf);
    };
    std::string out = "metric  score   target  deviation  n_items\n";
    for (const auto& [m, mr] : r.metrics) {
        char line[128];
        std::snprintf(line, sizeof line, "%-6s  %-6s  %-6s  %-9s  %zu\n", std::string(to_string(m)).c_str(),
                      cell(mr.score).c_str(), cell(mr.target).c_str(), cell(mr.deviation).c_str(), mr.n_items);
        out += line;
    }
    return out;
}

} // namespace vvae

#endif // VVAE_BENCH_METRICS_HPP
