#ifndef VVAE_PRIOR_SAMPLER_HPP
#define VVAE_PRIOR_SAMPLER_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/extraction_record.hpp"
#include "vvae/hashing.hpp"
#include "vvae/persona_space.hpp"

// Empirical per-dimension prior over extracted persona values, and seeded
// filling of absent dimensions from it.
namespace vvae {

inline constexpr int kPriorVersion = 1;

struct PriorEntry {
    PersonaValue value;
    std::uint64_t count = 0;
    double probability = 0.0;

    friend bool operator==(const PriorEntry&, const PriorEntry&) = default;
};

/// Categorical distribution over the distinct non-null values observed for
/// one dimension, sorted by value. Empty when nothing was observed.
struct DimensionPrior {
    std::vector<PriorEntry> entries;
    std::uint64_t total = 0;

    bool empty() const noexcept { return entries.empty(); }

    const PriorEntry* find(const PersonaValue& v) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), v,
                                   [](const PriorEntry& e, const PersonaValue& x) { return e.value < x; });
        return (it != entries.end() && it->value == v) ? &*it : nullptr;
    }

    friend bool operator==(const DimensionPrior&, const DimensionPrior&) = default;
};

class Prior {
public:
    Prior() = default;
    Prior(std::vector<std::string> keys, std::map<std::string, DimensionPrior> dims, std::string source)
        : keys_(std::move(keys)), dims_(std::move(dims)), source_(std::move(source)) {}

    /// Dimension keys in schema order.
    const std::vector<std::string>& keys() const noexcept { return keys_; }
    const std::string& source() const noexcept { return source_; }
    bool covers(const std::string& key) const { return dims_.count(key) != 0; }

    const DimensionPrior& dimension(const std::string& key) const {
        auto it = dims_.find(key);
        if (it == dims_.end()) throw SupportError("prior does not cover dimension '" + key + "'");
        return it->second;
    }

    /// p(value) for the dimension; 0 outside the support.
    double probability(const std::string& key, const PersonaValue& v) const {
        const auto* e = dimension(key).find(v);
        return e ? e->probability : 0.0;
    }

    std::vector<std::string> empty_support_keys() const {
        std::vector<std::string> out;
        for (const auto& k : keys_) {
            if (dims_.at(k).empty()) out.push_back(k);
        }
        return out;
    }

    friend bool operator==(const Prior&, const Prior&) = default;

private:
    std::vector<std::string> keys_;
    std::map<std::string, DimensionPrior> dims_;
    std::string source_;
};

/// Counts each non-null value per dimension across `records`.
inline Prior build_prior(const std::vector<ExtractionRecord>& records, const PersonaSchema& schema,
                         std::string source = {}) {
    if (records.empty()) throw Error("build_prior needs at least one extraction record");
    std::map<std::string, std::map<PersonaValue, std::uint64_t>> counts;
    for (const auto& d : schema.dimensions()) counts[d.key];
    for (const auto& r : records) {
        r.assignment.validate(schema);
        for (const auto& [key, slot] : r.assignment.slots()) {
            if (slot.value) ++counts[key][*slot.value];
        }
    }
    std::map<std::string, DimensionPrior> dims;
    for (auto& [key, table] : counts) {
        DimensionPrior dp;
        for (const auto& [v, c] : table) dp.total += c;
        for (const auto& [v, c] : table) {
            dp.entries.push_back({v, c, static_cast<double>(c) / static_cast<double>(dp.total)});
        }
        dims.emplace(key, std::move(dp));
    }
    return Prior(schema.keys(), std::move(dims), std::move(source));
}

inline nlohmann::ordered_json prior_to_json(const Prior& p) {
    nlohmann::ordered_json j;
    j["prior_version"] = kPriorVersion;
    j["source"] = p.source();
    for (const auto& key : p.keys()) {
        const auto& d = p.dimension(key);
        auto values = nlohmann::ordered_json::array();
        for (const auto& e : d.entries) {
            values.push_back({{"value", e.value.str()}, {"count", e.count}, {"prob", e.probability}});
        }
        j[key] = {{"values", std::move(values)}, {"total", d.total}};
    }
    return j;
}

/// Probabilities are recomputed from counts rather than trusted from "prob".
inline Prior prior_from_json(const nlohmann::ordered_json& j, const PersonaSchema& schema) {
    if (!j.contains("prior_version") || j.at("prior_version") != kPriorVersion) {
        throw SchemaError("unsupported or missing prior_version");
    }
    std::map<std::string, DimensionPrior> dims;
    for (const auto& d : schema.dimensions()) {
        if (!j.contains(d.key)) throw SchemaError("prior lacks dimension '" + d.key + "'");
        const auto& dj = j.at(d.key);
        DimensionPrior dp;
        dp.total = dj.at("total").get<std::uint64_t>();
        std::uint64_t sum = 0;
        for (const auto& e : dj.at("values")) {
            const auto c = e.at("count").get<std::uint64_t>();
            sum += c;
            dp.entries.push_back({PersonaValue::from_canonical(d, e.at("value").get<std::string>()), c, 0.0});
        }
        if (sum != dp.total) throw SchemaError("prior dimension '" + d.key + "': counts do not sum to total");
        std::sort(dp.entries.begin(), dp.entries.end(),
                  [](const PriorEntry& a, const PriorEntry& b) { return a.value < b.value; });
        for (std::size_t i = 0; i < dp.entries.size(); ++i) {
            auto& e = dp.entries[i];
            if (i > 0 && dp.entries[i - 1].value == e.value) {
                throw SchemaError("prior dimension '" + d.key + "': duplicate value '" + e.value.str() + "'");
            }
            if (e.count == 0) throw SchemaError("prior dimension '" + d.key + "': zero count");
            e.probability = static_cast<double>(e.count) / static_cast<double>(dp.total);
        }
        dims.emplace(d.key, std::move(dp));
    }
    return Prior(schema.keys(), std::move(dims), j.value("source", ""));
}

enum class SamplingMode { frequency, uniform };

/// mt19937_64 stream with a draw counter. Integer draws use rejection on the
/// raw engine output, so results do not depend on the standard library.
class SeededSampler {
public:
    explicit SeededSampler(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t draws() const noexcept { return draws_; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error("SeededSampler::below(0)");
        ++draws_;
        // Reject the low 2^64 mod n values so every residue is equally likely.
        const std::uint64_t threshold = (0 - n) % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r < threshold);
        return r % n;
    }

    /// Index into `d.entries`, weighted by count or uniform over the support.
    std::size_t categorical(const DimensionPrior& d, SamplingMode mode) {
        if (d.empty()) throw Error("categorical draw from empty support");
        if (mode == SamplingMode::uniform) return static_cast<std::size_t>(below(d.entries.size()));
        std::uint64_t r = below(d.total);
        for (std::size_t i = 0; i < d.entries.size(); ++i) {
            if (r < d.entries[i].count) return i;
            r -= d.entries[i].count;
        }
        return d.entries.size() - 1;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

struct FillResult {
    PersonaAssignment assignment;
    // Absent dimensions that stayed absent because their support is empty.
    std::vector<std::string> unfilled;
};

/// Fills each absent dimension from its prior (schema order, one draw each).
/// Present values are never touched.
inline FillResult sample_fill(const PersonaAssignment& a, const Prior& prior, SeededSampler& sampler,
                              SamplingMode mode = SamplingMode::frequency) {
    FillResult out{a, {}};
    for (const auto& key : prior.keys()) {
        if (!a.has(key) || a.provenance(key) != Provenance::absent) continue;
        const auto& d = prior.dimension(key);
        if (d.empty()) {
            out.unfilled.push_back(key);
            continue;
        }
        out.assignment.set_sampled(key, d.entries[sampler.categorical(d, mode)].value);
    }
    return out;
}

/// Like sample_fill but every (session, turn, dimension) draws from its own
/// derived stream, so results do not depend on processing order.
inline FillResult sample_fill_keyed(const PersonaAssignment& a, const Prior& prior, std::uint64_t seed,
                                    const std::string& session_id, std::size_t turn_index,
                                    SamplingMode mode = SamplingMode::frequency) {
    FillResult out{a, {}};
    for (const auto& key : prior.keys()) {
        if (!a.has(key) || a.provenance(key) != Provenance::absent) continue;
        const auto& d = prior.dimension(key);
        if (d.empty()) {
            out.unfilled.push_back(key);
            continue;
        }
        SeededSampler s(derive_seed(seed, session_id, std::to_string(turn_index), key));
        out.assignment.set_sampled(key, d.entries[s.categorical(d, mode)].value);
    }
    return out;
}

/// Sum of log p(value) over present dimensions (natural log).
inline double prior_log_mass(const PersonaAssignment& a, const Prior& prior) {
    double total = 0.0;
    for (const auto& [key, slot] : a.slots()) {
        if (!slot.value) continue;
        const auto* e = prior.dimension(key).find(*slot.value);
        if (!e) throw SupportError("value '" + slot.value->str() + "' outside the support of '" + key + "'");
        total += std::log(e->probability);
    }
    return total;
}

} // namespace vvae

#endif // VVAE_PRIOR_SAMPLER_HPP
