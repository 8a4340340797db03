#ifndef VVAE_DATASET_BUILDER_HPP
#define VVAE_DATASET_BUILDER_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/corpus_ingest.hpp"
#include "vvae/error.hpp"
#include "vvae/extraction_record.hpp"
#include "vvae/hashing.hpp"
#include "vvae/jsonl.hpp"
#include "vvae/persona_space.hpp"
#include "vvae/prior_sampler.hpp"

// Persona-conditioned SFT corpora: the persona block goes into the system
// message, the context turns become the conversation, and the annotated AI
// reply is the target.
namespace vvae {

inline constexpr int kPersonaBlockVersion = 1;

inline constexpr std::string_view kRolePreamble =
    "You are the AI character in this chat. Reply the way a real person would.";
inline constexpr std::string_view kPersonaHeader = "[Persona]";
inline constexpr std::string_view kAnalysisHeader = "[Persona analysis]";

enum class Variant { ft, p_ft, sp_ft, unstructured };

inline std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::ft: return "ft";
    case Variant::p_ft: return "p_ft";
    case Variant::sp_ft: return "sp_ft";
    case Variant::unstructured: return "unstructured";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    for (Variant v : {Variant::ft, Variant::p_ft, Variant::sp_ft, Variant::unstructured}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected ft|p_ft|sp_ft|unstructured)");
}

struct BuildConfig {
    Variant variant = Variant::ft;
    std::set<Axis> excluded_axes;
    std::uint64_t seed = 0;
    std::string prior_path;
    SamplingMode sampling = SamplingMode::frequency;

    void validate(bool have_prior) const {
        if (!excluded_axes.empty() && variant != Variant::p_ft && variant != Variant::sp_ft) {
            throw ConfigError("excluded axes apply only to p_ft and sp_ft");
        }
        if (variant == Variant::sp_ft && !have_prior) throw ConfigError("variant sp_ft requires a prior");
    }
};

struct TrainingMessage {
    std::string role;
    std::string content;

    friend bool operator==(const TrainingMessage&, const TrainingMessage&) = default;
};

struct ExampleMeta {
    Variant variant = Variant::ft;
    std::string session_id;
    std::size_t target_index = 0;
    // Rendered dimensions in schema order, with their provenance.
    std::vector<std::pair<std::string, Provenance>> persona;
    // Absent dimensions whose prior support was empty (sp_ft only).
    std::vector<std::string> unfilled;

    std::size_t count(Provenance p) const {
        std::size_t n = 0;
        for (const auto& [_, prov] : persona) n += prov == p ? 1 : 0;
        return n;
    }

    friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

struct TrainingExample {
    std::string system;
    std::vector<TrainingMessage> messages;
    std::string target;
    ExampleMeta meta;

    friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

/// "key: value" per present dimension, schema order, newline-separated.
inline std::string render_persona_block(const PersonaAssignment& a, const PersonaSchema& schema) {
    std::string out;
    for (const auto& d : schema.dimensions()) {
        if (!a.has(d.key)) continue;
        const auto& v = a.value(d.key);
        if (!v) continue;
        if (!out.empty()) out += '\n';
        out += d.key;
        out += ": ";
        out += v->str();
    }
    return out;
}

inline std::string compose_system(std::string_view header, const std::string& block) {
    std::string s(kRolePreamble);
    if (!block.empty()) {
        s += "\n\n";
        s += header;
        s += '\n';
        s += block;
    }
    return s;
}

namespace detail {

template <typename Record>
std::map<PairKey, const Record*> index_by_pair(const std::vector<Record>& records) {
    std::map<PairKey, const Record*> out;
    for (const auto& r : records) {
        if (!out.emplace(PairKey{r.session_id, r.turn_index}, &r).second) {
            throw BuildError("duplicate record for pair (" + r.session_id + ", " + std::to_string(r.turn_index) + ")");
        }
    }
    return out;
}

inline std::string pair_name(const ContextTargetPair& p) {
    return "(" + p.session_id + ", " + std::to_string(p.target.index) + ")";
}

} // namespace detail

/// Builds one example per pair. `prior` is required for sp_ft,
/// `unstructured` for the unstructured variant.
inline std::vector<TrainingExample> build(const std::vector<ContextTargetPair>& pairs,
                                          const std::vector<ExtractionRecord>& extractions, const Prior* prior,
                                          const BuildConfig& cfg, const PersonaSchema& schema,
                                          const std::vector<UnstructuredRecord>& unstructured = {}) {
    cfg.validate(prior != nullptr);
    const auto by_pair = detail::index_by_pair(extractions);
    const auto analysis_by_pair = detail::index_by_pair(unstructured);

    std::set<std::string> excluded;
    for (Axis ax : cfg.excluded_axes) {
        for (auto& k : schema.keys_on_axis(ax)) excluded.insert(std::move(k));
    }

    std::vector<TrainingExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        TrainingExample ex;
        ex.target = p.target.text;
        if (ex.target.empty()) throw BuildError("empty target for pair " + detail::pair_name(p));
        for (const auto& t : p.context) {
            ex.messages.push_back({t.role == TurnRole::user ? "user" : "assistant", t.text});
        }
        ex.meta.variant = cfg.variant;
        ex.meta.session_id = p.session_id;
        ex.meta.target_index = p.target.index;

        const PairKey key{p.session_id, p.target.index};
        switch (cfg.variant) {
        case Variant::ft:
            ex.system = compose_system(kPersonaHeader, "");
            break;
        case Variant::unstructured: {
            auto it = analysis_by_pair.find(key);
            if (it == analysis_by_pair.end()) {
                throw BuildError("no unstructured analysis for pair " + detail::pair_name(p));
            }
            ex.system = compose_system(kAnalysisHeader, it->second->analysis);
            break;
        }
        case Variant::p_ft:
        case Variant::sp_ft: {
            auto it = by_pair.find(key);
            if (it == by_pair.end()) throw BuildError("no extraction for pair " + detail::pair_name(p));
            PersonaAssignment a = it->second->assignment;
            a.validate(schema);
            if (cfg.variant == Variant::sp_ft) {
                auto filled = sample_fill_keyed(a, *prior, cfg.seed, p.session_id, p.target.index, cfg.sampling);
                a = std::move(filled.assignment);
                for (auto& k : filled.unfilled) {
                    if (!excluded.count(k)) ex.meta.unfilled.push_back(std::move(k));
                }
            }
            for (const auto& k : excluded) a.clear(k);
            for (const auto& d : schema.dimensions()) {
                if (a.value(d.key)) ex.meta.persona.emplace_back(d.key, a.provenance(d.key));
            }
            ex.system = compose_system(kPersonaHeader, render_persona_block(a, schema));
            break;
        }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

inline nlohmann::ordered_json example_to_json(const TrainingExample& ex) {
    nlohmann::ordered_json j;
    j["system"] = ex.system;
    auto msgs = nlohmann::ordered_json::array();
    for (const auto& m : ex.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    j["messages"] = std::move(msgs);
    j["target"] = ex.target;
    nlohmann::ordered_json meta;
    meta["variant"] = to_string(ex.meta.variant);
    meta["session_id"] = ex.meta.session_id;
    meta["target_index"] = ex.meta.target_index;
    nlohmann::ordered_json prov = nlohmann::ordered_json::object();
    for (const auto& [k, p] : ex.meta.persona) prov[k] = to_string(p);
    meta["provenance"] = std::move(prov);
    meta["n_extracted"] = ex.meta.count(Provenance::extracted);
    meta["n_sampled"] = ex.meta.count(Provenance::sampled);
    meta["unfilled"] = ex.meta.unfilled;
    j["meta"] = std::move(meta);
    return j;
}

inline TrainingExample example_from_json(const nlohmann::ordered_json& j) {
    TrainingExample ex;
    ex.system = j.at("system").get<std::string>();
    for (const auto& m : j.at("messages")) {
        ex.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    ex.target = j.at("target").get<std::string>();
    const auto& meta = j.at("meta");
    ex.meta.variant = parse_variant(meta.at("variant").get<std::string>());
    ex.meta.session_id = meta.at("session_id").get<std::string>();
    ex.meta.target_index = meta.at("target_index").get<std::size_t>();
    for (const auto& [k, p] : meta.at("provenance").items()) {
        ex.meta.persona.emplace_back(k, parse_provenance(p.get<std::string>()));
    }
    ex.meta.unfilled = meta.value("unfilled", std::vector<std::string>{});
    return ex;
}

inline std::vector<TrainingExample> load_examples(const std::string& path) {
    std::vector<TrainingExample> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        try {
            out.push_back(example_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw LineError(std::string("bad training example: ") + e.what(), n);
        }
    });
    return out;
}

inline std::string manifest_path_for(const std::string& artifact) { return artifact + ".manifest.json"; }

/// Writes SFT JSONL to `path` and a sidecar `<path>.manifest.json`.
/// `extra` fields (e.g. input hashes) are appended to the manifest.
inline void emit(const std::vector<TrainingExample>& examples, const std::string& path, const BuildConfig& cfg,
                 const std::string& prior_sha, const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
    std::vector<nlohmann::ordered_json> rows;
    rows.reserve(examples.size());
    for (const auto& ex : examples) rows.push_back(example_to_json(ex));
    const std::string body = to_jsonl(rows);
    write_file_atomic(path, body);

    nlohmann::ordered_json m;
    m["command"] = "build-dataset";
    m["artifact_sha"] = sha256_hex(body);
    m["variant"] = to_string(cfg.variant);
    m["seed"] = cfg.seed;
    m["prior_sha"] = prior_sha.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(prior_sha);
    m["n_examples"] = examples.size();
    m["schema_version"] = kSchemaVersion;
    m["persona_block_version"] = kPersonaBlockVersion;
    auto axes = nlohmann::ordered_json::array();
    for (Axis a : cfg.excluded_axes) axes.push_back(to_string(a));
    m["excluded_axes"] = std::move(axes);
    m["sampling"] = cfg.sampling == SamplingMode::frequency ? "frequency" : "uniform";
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_file_atomic(manifest_path_for(path), m.dump(2) + "\n");
}

} // namespace vvae

#endif // VVAE_DATASET_BUILDER_HPP
