#ifndef VVAE_PIPELINE_HPP
#define VVAE_PIPELINE_HPP

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/bench_metrics.hpp"
#include "vvae/bound_verifier.hpp"
#include "vvae/corpus_ingest.hpp"
#include "vvae/dataset_builder.hpp"
#include "vvae/extraction_encoder.hpp"
#include "vvae/hashing.hpp"
#include "vvae/jsonl.hpp"
#include "vvae/llm_client.hpp"
#include "vvae/persona_space.hpp"
#include "vvae/prior_sampler.hpp"

// Pipeline stages behind the command-line tool. Each stage reads its declared
// inputs, writes its artifact plus `<artifact>.manifest.json`, and holds no
// other state. Manifests carry input hashes, seeds and format versions and no
// timestamps, so identical inputs give identical manifests.
namespace vvae::pipeline {

using ordered_json = nlohmann::ordered_json;

inline void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is required");
    if (!std::filesystem::exists(path)) throw ConfigError(what + " not found: " + path);
}

inline ordered_json input_hashes(const std::vector<std::pair<std::string, std::string>>& named_paths) {
    ordered_json j = ordered_json::object();
    for (const auto& [name, path] : named_paths) {
        if (path.empty()) continue;
        j[name] = {{"path", path}, {"sha256", sha256_file(path)}};
    }
    return j;
}

inline void write_manifest(const std::string& artifact, ordered_json m) {
    m["artifact_sha"] = sha256_file(artifact);
    write_file_atomic(manifest_path_for(artifact), m.dump(2) + "\n");
}

inline PersonaSchema load_schema(const std::string& path) {
    if (path.empty()) return default_schema();
    return schema_from_json(ordered_json::parse(read_file(path)));
}

// ---------------------------------------------------------------------------

struct IngestOptions {
    std::string sessions;
    std::string out;
    std::string scrub_rules;
    double cap_quantile = 0.95;
    std::uint64_t seed = 0;
    bool strict = false;
};

inline IngestStats ingest(const IngestOptions& o) {
    require_file(o.sessions, "sessions");
    if (o.out.empty()) throw ConfigError("--out is required");
    if (!(o.cap_quantile > 0.0 && o.cap_quantile <= 1.0)) throw ConfigError("--cap-quantile must be in (0, 1]");
    const auto rules = o.scrub_rules.empty() ? default_scrub_rules()
                                             : scrub_rules_from_json(nlohmann::json::parse(read_file(o.scrub_rules)));
    std::vector<std::string> warnings;
    auto sessions = load_sessions(o.sessions, rules, o.strict, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    const auto before = stats(sessions);
    sessions = subsample_agents(sessions, o.cap_quantile, o.seed);
    const auto after = stats(sessions);

    std::vector<ordered_json> rows;
    for (const auto& s : sessions) {
        for (const auto& p : pair_targets(s)) rows.push_back(pair_to_json(p));
    }
    write_file_atomic(o.out, to_jsonl(rows));

    ordered_json m;
    m["command"] = "ingest";
    m["inputs"] = input_hashes({{"sessions", o.sessions}, {"scrub_rules", o.scrub_rules}});
    m["seed"] = o.seed;
    m["cap_quantile"] = o.cap_quantile;
    m["strict"] = o.strict;
    m["skipped_lines"] = warnings.size();
    m["stats_before_subsample"] = stats_to_json(before);
    m["stats"] = stats_to_json(after);
    m["n_pairs"] = rows.size();
    write_manifest(o.out, std::move(m));
    std::cerr << "ingest: " << after.n_sessions << " sessions, " << rows.size() << " pairs -> " << o.out << "\n";
    return after;
}

// ---------------------------------------------------------------------------

struct ExtractOptions {
    std::string pairs;
    std::string out;
    std::string schema;
    std::string prompt_dir;
    BackendConfig backend;
    std::string mock_rules;
    std::size_t jobs = 1;
    bool unstructured = false;
};

inline BackendConfig resolve_backend(const ExtractOptions& o) {
    BackendConfig b = o.backend;
    if (b.kind == BackendKind::mock && !o.mock_rules.empty()) {
        require_file(o.mock_rules, "mock rules");
        b.mock = mock_config_from_json(nlohmann::json::parse(read_file(o.mock_rules)));
    }
    b.validate();
    return b;
}

inline std::size_t extract(const ExtractOptions& o, std::shared_ptr<Transport> transport = nullptr) {
    require_file(o.pairs, "pairs");
    if (o.out.empty()) throw ConfigError("--out is required");
    const auto schema = load_schema(o.schema);
    auto backend = resolve_backend(o);
    if (backend.kind == BackendKind::remote && !transport) throw ConfigError("remote backend needs a transport");
    LlmClient client(backend, transport);
    const auto pairs = load_pairs(o.pairs);

    std::vector<ordered_json> rows;
    ordered_json m;
    if (o.unstructured) {
        const auto tpl = load_template(TemplateName::unstructured_extraction, o.prompt_dir);
        for (const auto& r : extract_unstructured_all(pairs, client, o.jobs, tpl)) rows.push_back(unstructured_to_json(r));
        m["command"] = "extract-unstructured";
        m["template_sha"] = sha256_hex(tpl.body);
    } else {
        ExtractorOptions eo;
        eo.tpl = load_template(TemplateName::persona_extraction, o.prompt_dir);
        const auto records = extract_all(pairs, schema, client, o.jobs, eo);
        std::size_t n_present = 0;
        for (const auto& r : records) {
            rows.push_back(record_to_json(r, schema));
            n_present += r.assignment.count(Provenance::extracted);
        }
        m["command"] = "extract";
        m["template_sha"] = sha256_hex(eo.tpl.body);
        m["n_values_extracted"] = n_present;
    }
    write_file_atomic(o.out, to_jsonl(rows));
    m["inputs"] = input_hashes({{"pairs", o.pairs}, {"schema", o.schema}, {"mock_rules", o.mock_rules}});
    m["extractor_model"] = backend.model_name();
    m["backend"] = backend.kind == BackendKind::mock ? "mock" : "remote";
    m["schema_version"] = kSchemaVersion;
    m["prompt_version"] = prompts::kPromptVersion;
    m["n_records"] = rows.size();
    write_manifest(o.out, std::move(m));
    std::cerr << "extract: " << rows.size() << " records -> " << o.out << " (backend calls " << client.backend_calls()
              << ", cache hits " << client.cache_hits() << ")\n";
    return rows.size();
}

// ---------------------------------------------------------------------------

struct BuildPriorOptions {
    std::string extractions;
    std::string out;
    std::string schema;
};

inline Prior build_prior_file(const BuildPriorOptions& o) {
    require_file(o.extractions, "extractions");
    if (o.out.empty()) throw ConfigError("--out is required");
    const auto schema = load_schema(o.schema);
    const auto records = load_extractions(o.extractions, schema);
    if (records.empty()) throw Error("no extraction records in " + o.extractions);
    auto prior = build_prior(records, schema, sha256_file(o.extractions));
    write_file_atomic(o.out, prior_to_json(prior).dump(2) + "\n");

    ordered_json m;
    m["command"] = "build-prior";
    m["inputs"] = input_hashes({{"extractions", o.extractions}, {"schema", o.schema}});
    m["prior_version"] = kPriorVersion;
    m["schema_version"] = kSchemaVersion;
    m["n_records"] = records.size();
    m["empty_support"] = prior.empty_support_keys();
    write_manifest(o.out, std::move(m));
    for (const auto& k : prior.empty_support_keys()) {
        std::cerr << "warning: dimension '" << k << "' has empty support\n";
    }
    std::cerr << "build-prior: " << records.size() << " records -> " << o.out << "\n";
    return prior;
}

// ---------------------------------------------------------------------------

struct BuildDatasetOptions {
    std::string pairs;
    std::string extractions;
    std::string unstructured;
    std::string schema;
    std::string out;
    BuildConfig cfg;
};

inline std::size_t build_dataset(const BuildDatasetOptions& o) {
    const auto& cfg = o.cfg;
    cfg.validate(!cfg.prior_path.empty());
    require_file(o.pairs, "pairs");
    if (o.out.empty()) throw ConfigError("--out is required");
    if (cfg.variant == Variant::p_ft || cfg.variant == Variant::sp_ft) require_file(o.extractions, "extractions");
    if (cfg.variant == Variant::unstructured) require_file(o.unstructured, "unstructured analyses");
    if (!cfg.prior_path.empty()) require_file(cfg.prior_path, "prior");

    const auto schema = load_schema(o.schema);
    const auto pairs = load_pairs(o.pairs);
    std::vector<ExtractionRecord> records;
    if (!o.extractions.empty()) records = load_extractions(o.extractions, schema);
    std::vector<UnstructuredRecord> analyses;
    if (!o.unstructured.empty()) analyses = load_unstructured(o.unstructured);
    std::optional<Prior> prior;
    std::string prior_sha;
    if (!cfg.prior_path.empty()) {
        prior = prior_from_json(ordered_json::parse(read_file(cfg.prior_path)), schema);
        prior_sha = sha256_file(cfg.prior_path);
    }
    const auto examples = build(pairs, records, prior ? &*prior : nullptr, cfg, schema, analyses);
    ordered_json extra;
    extra["inputs"] = input_hashes({{"pairs", o.pairs},
                                    {"extractions", o.extractions},
                                    {"unstructured", o.unstructured},
                                    {"prior", cfg.prior_path},
                                    {"schema", o.schema}});
    emit(examples, o.out, cfg, prior_sha, extra);
    std::cerr << "build-dataset: " << examples.size() << " " << to_string(cfg.variant) << " examples -> " << o.out
              << "\n";
    return examples.size();
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
    std::string outputs;
    std::string targets;
    std::string out;
};

inline EvalReport evaluate(const EvaluateOptions& o, std::ostream& table_out = std::cout) {
    require_file(o.outputs, "outputs");
    std::map<Metric, double> targets;
    if (!o.targets.empty()) {
        require_file(o.targets, "targets");
        targets = load_targets(o.targets);
    }
    std::vector<std::string> warnings;
    const auto items = load_outputs(o.outputs, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    auto report = score(items, targets);
    table_out << format_table(report);
    if (!o.out.empty()) {
        auto j = report_to_json(report);
        write_file_atomic(o.out, j.dump(2) + "\n");
        ordered_json m;
        m["command"] = "evaluate";
        m["inputs"] = input_hashes({{"outputs", o.outputs}, {"targets", o.targets}});
        m["n_items"] = items.size();
        m["duplicate_item_ids"] = warnings.size();
        write_manifest(o.out, std::move(m));
    }
    return report;
}

// ---------------------------------------------------------------------------

struct VerifyBoundOptions {
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

/// Runs the standard toy-model suite; returns the combined JSON report.
inline ordered_json verify_bound(const VerifyBoundOptions& o, bool* all_ok = nullptr) {
    if (o.trials == 0) throw ConfigError("--trials must be >= 1");
    ordered_json j;
    j["trials"] = o.trials;
    j["seed"] = o.seed;
    std::size_t violations = 0;
    double max_gap = 0.0;
    auto models = ordered_json::array();
    for (const auto& m : bound::standard_suite(o.seed)) {
        const auto r = bound::verify_bound(m, o.trials, derive_seed(o.seed, m.name));
        violations += r.violations;
        max_gap = std::max(max_gap, r.max_gap_at_posterior);
        models.push_back(bound::report_to_json(r));
    }
    j["violations"] = violations;
    j["max_gap_at_posterior"] = max_gap;
    j["models"] = std::move(models);
    if (all_ok) *all_ok = violations == 0;
    if (!o.out.empty()) {
        write_file_atomic(o.out, j.dump(2) + "\n");
        ordered_json m;
        m["command"] = "verify-bound";
        m["inputs"] = ordered_json::object();
        m["seed"] = o.seed;
        m["trials"] = o.trials;
        m["violations"] = violations;
        write_manifest(o.out, std::move(m));
    }
    return j;
}

// ---------------------------------------------------------------------------

/// Collects manifests (files ending in .manifest.json, or directories scanned
/// non-recursively for them) into one summary document, sorted by path.
inline ordered_json report(const std::vector<std::string>& paths) {
    std::set<std::string> manifests;
    for (const auto& p : paths) {
        if (std::filesystem::is_directory(p)) {
            for (const auto& e : std::filesystem::directory_iterator(p)) {
                const auto name = e.path().filename().string();
                if (name.size() > 14 && name.ends_with(".manifest.json")) manifests.insert(e.path().string());
            }
        } else {
            require_file(p, "manifest");
            manifests.insert(p);
        }
    }
    ordered_json j;
    auto entries = ordered_json::array();
    std::map<std::string, std::size_t> by_command;
    for (const auto& p : manifests) {
        auto m = ordered_json::parse(read_file(p));
        ++by_command[m.value("command", "unknown")];
        entries.push_back({{"manifest", p}, {"content", std::move(m)}});
    }
    j["n_manifests"] = manifests.size();
    j["by_command"] = by_command;
    j["manifests"] = std::move(entries);
    return j;
}

} // namespace vvae::pipeline

#endif // VVAE_PIPELINE_HPP
