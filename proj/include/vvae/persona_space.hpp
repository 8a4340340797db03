#ifndef VVAE_PERSONA_SPACE_HPP
#define VVAE_PERSONA_SPACE_HPP

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/text.hpp"

// The structured latent persona space: three axes of named discrete
// sub-dimensions, and per-dialogue (possibly partial) points in it.
namespace vvae {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class Axis { talking, interaction, personal };

inline constexpr std::array<Axis, 3> kAllAxes = {Axis::talking, Axis::interaction, Axis::personal};

inline std::string_view to_string(Axis a) {
    switch (a) {
    case Axis::talking: return "talking";
    case Axis::interaction: return "interaction";
    case Axis::personal: return "personal";
    }
    return "?";
}

inline Axis parse_axis(std::string_view s) {
    for (Axis a : kAllAxes) {
        if (to_string(a) == s) return a;
    }
    throw ConfigError("unknown axis '" + std::string(s) + "' (expected talking|interaction|personal)");
}

enum class ValueKind { free_text, closed_set };

struct DimensionSpec {
    std::string key;
    Axis axis = Axis::talking;
    std::string description;
    ValueKind value_kind = ValueKind::free_text;
    std::vector<std::string> closed_values;
    // Values are emoji sequences: case is kept and modifiers are stripped.
    bool emoji = false;
};

namespace detail {

inline bool is_null_token(std::string_view normalized) {
    static const std::array<std::string_view, 5> tokens = {"", "none", "null", "\xE2\x88\x85", "n/a"};
    const std::string lower = text::to_lower_ascii(normalized);
    return std::find(tokens.begin(), tokens.end(), lower) != tokens.end();
}

inline std::string normalize_for(const DimensionSpec& dim, std::string_view raw) {
    return text::normalize(raw, /*lowercase=*/!dim.emoji, /*strip_modifiers=*/dim.emoji);
}

} // namespace detail

/// A canonical, non-null dimension value. Only constructible through
/// canonicalize() or from_canonical(), so the invariant holds by construction.
class PersonaValue {
public:
    /// Accepts text that is already canonical for `dim`; throws InvalidValue otherwise.
    static PersonaValue from_canonical(const DimensionSpec& dim, std::string canonical) {
        if (canonical.empty() || detail::is_null_token(canonical) ||
            detail::normalize_for(dim, canonical) != canonical) {
            throw InvalidValue("'" + canonical + "' is not a canonical value for dimension '" +
                               dim.key + "'");
        }
        return PersonaValue(std::move(canonical));
    }

    const std::string& str() const noexcept { return canonical_; }

    friend bool operator==(const PersonaValue&, const PersonaValue&) = default;
    friend auto operator<=>(const PersonaValue&, const PersonaValue&) = default;

private:
    friend std::optional<PersonaValue> canonicalize(const DimensionSpec&, std::string_view);
    explicit PersonaValue(std::string s) : canonical_(std::move(s)) {}
    std::string canonical_;
};

/// Canonical form of raw extractor output, or nullopt for a null token.
/// Throws UnknownClosedValue for closed-set dimensions when the value is not a member.
inline std::optional<PersonaValue> canonicalize(const DimensionSpec& dim, std::string_view raw) {
    std::string norm = detail::normalize_for(dim, raw);
    if (detail::is_null_token(norm)) return std::nullopt;
    if (dim.value_kind == ValueKind::closed_set &&
        std::find(dim.closed_values.begin(), dim.closed_values.end(), norm) == dim.closed_values.end()) {
        throw UnknownClosedValue(dim.key, norm);
    }
    return PersonaValue(std::move(norm));
}

class PersonaSchema {
public:
    PersonaSchema() = default;

    explicit PersonaSchema(std::vector<DimensionSpec> dims) : dimensions_(std::move(dims)) {
        for (std::size_t i = 0; i < dimensions_.size(); ++i) {
            auto& d = dimensions_[i];
            if (d.key.empty()) throw SchemaError("dimension with empty key");
            if (!index_.emplace(d.key, i).second) throw SchemaError("duplicate dimension key '" + d.key + "'");
            if ((d.value_kind == ValueKind::closed_set) == d.closed_values.empty()) {
                throw SchemaError("dimension '" + d.key +
                                  "': closed_values must be non-empty exactly for closed_set dimensions");
            }
            std::set<std::string> seen;
            for (auto& v : d.closed_values) {
                v = detail::normalize_for(d, v);
                if (v.empty() || detail::is_null_token(v)) {
                    throw SchemaError("dimension '" + d.key + "': null closed value");
                }
                if (!seen.insert(v).second) {
                    throw SchemaError("dimension '" + d.key + "': duplicate closed value '" + v + "'");
                }
            }
        }
        for (Axis a : kAllAxes) {
            if (keys_on_axis(a).empty()) {
                throw SchemaError("axis '" + std::string(to_string(a)) + "' has no dimensions");
            }
        }
    }

    const std::vector<DimensionSpec>& dimensions() const noexcept { return dimensions_; }
    std::size_t size() const noexcept { return dimensions_.size(); }
    bool contains(std::string_view key) const { return index_.count(std::string(key)) != 0; }

    const DimensionSpec& dimension(std::string_view key) const {
        auto it = index_.find(std::string(key));
        if (it == index_.end()) throw SchemaError("unknown dimension '" + std::string(key) + "'");
        return dimensions_[it->second];
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(dimensions_.size());
        for (const auto& d : dimensions_) out.push_back(d.key);
        return out;
    }

    std::vector<std::string> keys_on_axis(Axis a) const {
        std::vector<std::string> out;
        for (const auto& d : dimensions_) {
            if (d.axis == a) out.push_back(d.key);
        }
        return out;
    }

    friend bool operator==(const PersonaSchema& a, const PersonaSchema& b) {
        if (a.dimensions_.size() != b.dimensions_.size()) return false;
        for (std::size_t i = 0; i < a.dimensions_.size(); ++i) {
            const auto& x = a.dimensions_[i];
            const auto& y = b.dimensions_[i];
            if (x.key != y.key || x.axis != y.axis || x.description != y.description ||
                x.value_kind != y.value_kind || x.closed_values != y.closed_values || x.emoji != y.emoji) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<DimensionSpec> dimensions_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline PersonaSchema default_schema() {
    auto free = [](std::string key, Axis axis, std::string desc, bool emoji = false) {
        return DimensionSpec{std::move(key), axis, std::move(desc), ValueKind::free_text, {}, emoji};
    };
    return PersonaSchema({
        free("catchphrase", Axis::talking, "recurrent phrase the speaker habitually uses, e.g. \"oh my god\""),
        free("frequent_emoji", Axis::talking, "emoji the speaker uses often", /*emoji=*/true),
        free("tone", Axis::talking, "tonal register, e.g. patient, tender, irritable"),
        free("nickname", Axis::interaction, "what the speaker calls the user, e.g. darling"),
        DimensionSpec{"relationship", Axis::interaction, "relationship proximity to the user",
                      ValueKind::closed_set, {"stranger", "acquaintance", "friend", "lover", "enemy"}, false},
        free("vibe", Axis::interaction, "contextual mood of the exchange, e.g. joyful"),
        free("topic", Axis::interaction, "topical focus of the exchange, e.g. lunch"),
        free("personality", Axis::personal, "stable personality trait, e.g. outgoing"),
        free("hobby", Axis::personal, "hobby of the speaker, e.g. swimming"),
    });
}

inline ordered_json schema_to_json(const PersonaSchema& schema) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    ordered_json dims = ordered_json::array();
    for (const auto& d : schema.dimensions()) {
        ordered_json e;
        e["key"] = d.key;
        e["axis"] = to_string(d.axis);
        e["description"] = d.description;
        e["value_kind"] = d.value_kind == ValueKind::closed_set ? "closed_set" : "free_text";
        if (d.value_kind == ValueKind::closed_set) e["closed_values"] = d.closed_values;
        if (d.emoji) e["emoji"] = true;
        dims.push_back(std::move(e));
    }
    j["dimensions"] = std::move(dims);
    return j;
}

inline PersonaSchema schema_from_json(const ordered_json& j) {
    if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) {
        throw SchemaError("unsupported or missing schema_version");
    }
    std::vector<DimensionSpec> dims;
    for (const auto& e : j.at("dimensions")) {
        DimensionSpec d;
        d.key = e.at("key").get<std::string>();
        d.axis = parse_axis(e.at("axis").get<std::string>());
        d.description = e.value("description", "");
        const auto kind = e.at("value_kind").get<std::string>();
        if (kind == "closed_set") {
            d.value_kind = ValueKind::closed_set;
        } else if (kind != "free_text") {
            throw SchemaError("unknown value_kind '" + kind + "'");
        }
        if (e.contains("closed_values")) d.closed_values = e.at("closed_values").get<std::vector<std::string>>();
        d.emoji = e.value("emoji", false);
        dims.push_back(std::move(d));
    }
    return PersonaSchema(std::move(dims));
}

enum class Provenance { extracted, sampled, absent };

inline std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::extracted: return "extracted";
    case Provenance::sampled: return "sampled";
    case Provenance::absent: return "absent";
    }
    return "?";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "extracted") return Provenance::extracted;
    if (s == "sampled") return Provenance::sampled;
    if (s == "absent") return Provenance::absent;
    throw SchemaError("unknown provenance '" + std::string(s) + "'");
}

struct Slot {
    std::optional<PersonaValue> value;
    Provenance provenance = Provenance::absent;

    friend bool operator==(const Slot&, const Slot&) = default;
};

/// Map dimension-key -> (value?, provenance). Built empty for a schema and
/// filled through the setters, which keep value/provenance consistent.
class PersonaAssignment {
public:
    PersonaAssignment() = default;

    /// Every schema dimension present and absent.
    static PersonaAssignment all_absent(const PersonaSchema& schema) {
        PersonaAssignment a;
        for (const auto& d : schema.dimensions()) a.slots_.emplace(d.key, Slot{});
        return a;
    }

    /// Raw construction from a slot map; call validate() before trusting it.
    explicit PersonaAssignment(std::map<std::string, Slot> slots) : slots_(std::move(slots)) {}

    void set_extracted(const std::string& key, PersonaValue v) { set(key, std::move(v), Provenance::extracted); }
    void set_sampled(const std::string& key, PersonaValue v) { set(key, std::move(v), Provenance::sampled); }
    void clear(const std::string& key) { slot(key) = Slot{}; }

    const std::optional<PersonaValue>& value(const std::string& key) const { return slot(key).value; }
    Provenance provenance(const std::string& key) const { return slot(key).provenance; }
    bool has(const std::string& key) const { return slots_.count(key) != 0; }
    const std::map<std::string, Slot>& slots() const noexcept { return slots_; }

    std::size_t count(Provenance p) const {
        return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(),
                                                      [p](const auto& kv) { return kv.second.provenance == p; }));
    }

    /// Throws SchemaError unless the key set equals the schema's, provenance
    /// agrees with presence, and closed-set values are members.
    void validate(const PersonaSchema& schema) const {
        if (slots_.size() != schema.size()) {
            throw SchemaError("assignment has " + std::to_string(slots_.size()) + " dimensions, schema has " +
                              std::to_string(schema.size()));
        }
        for (const auto& d : schema.dimensions()) {
            auto it = slots_.find(d.key);
            if (it == slots_.end()) throw SchemaError("assignment is missing dimension '" + d.key + "'");
            const Slot& s = it->second;
            if ((s.provenance == Provenance::absent) == s.value.has_value()) {
                throw SchemaError("dimension '" + d.key + "': provenance disagrees with value presence");
            }
            if (s.value && d.value_kind == ValueKind::closed_set &&
                std::find(d.closed_values.begin(), d.closed_values.end(), s.value->str()) ==
                    d.closed_values.end()) {
                throw SchemaError("dimension '" + d.key + "': '" + s.value->str() + "' not in closed set");
            }
        }
    }

    friend bool operator==(const PersonaAssignment&, const PersonaAssignment&) = default;

private:
    void set(const std::string& key, PersonaValue v, Provenance p) { slot(key) = Slot{std::move(v), p}; }

    Slot& slot(const std::string& key) {
        auto it = slots_.find(key);
        if (it == slots_.end()) throw SchemaError("unknown dimension '" + key + "'");
        return it->second;
    }
    const Slot& slot(const std::string& key) const {
        auto it = slots_.find(key);
        if (it == slots_.end()) throw SchemaError("unknown dimension '" + key + "'");
        return it->second;
    }

    std::map<std::string, Slot> slots_;
};

/// True iff no dimension is absent. An assignment with no dimensions at all
/// violates the key-set invariant and throws.
inline bool assignment_complete(const PersonaAssignment& a) {
    if (a.slots().empty()) throw SchemaError("assignment has no dimensions");
    return a.count(Provenance::absent) == 0;
}

inline bool assignment_complete(const PersonaAssignment& a, const PersonaSchema& schema) {
    a.validate(schema);
    return assignment_complete(a);
}

/// Flat object in schema order, null for absent, plus a parallel "_provenance" object.
inline ordered_json assignment_to_json(const PersonaAssignment& a, const PersonaSchema& schema) {
    ordered_json j;
    ordered_json prov;
    for (const auto& d : schema.dimensions()) {
        const auto& v = a.value(d.key);
        j[d.key] = v ? ordered_json(v->str()) : ordered_json(nullptr);
        prov[d.key] = to_string(a.provenance(d.key));
    }
    j["_provenance"] = std::move(prov);
    return j;
}

inline PersonaAssignment assignment_from_json(const ordered_json& j, const PersonaSchema& schema) {
    if (!j.is_object() || !j.contains("_provenance")) throw SchemaError("assignment JSON lacks _provenance");
    const auto& prov = j.at("_provenance");
    std::map<std::string, Slot> slots;
    for (const auto& [key, val] : j.items()) {
        if (key == "_provenance") continue;
        if (!schema.contains(key)) throw SchemaError("unknown dimension '" + key + "'");
        Slot s;
        if (!prov.contains(key)) throw SchemaError("dimension '" + key + "' has no provenance");
        s.provenance = parse_provenance(prov.at(key).get<std::string>());
        if (!val.is_null()) s.value = PersonaValue::from_canonical(schema.dimension(key), val.get<std::string>());
        slots.emplace(key, std::move(s));
    }
    PersonaAssignment a(std::move(slots));
    a.validate(schema);
    return a;
}

} // namespace vvae

#endif // VVAE_PERSONA_SPACE_HPP
