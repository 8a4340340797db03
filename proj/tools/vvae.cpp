// vvae: command-line driver for the persona pipeline.
//
//   vvae ingest        sessions JSONL -> (context, target) pairs JSONL
//   vvae extract       pairs -> persona extractions (or free-text analyses)
//   vvae build-prior   extractions -> empirical prior JSON
//   vvae build-dataset pairs + extractions (+ prior) -> SFT JSONL
//   vvae evaluate      model outputs -> CP/EC/HM report
//   vvae verify-bound  variational bound checks on toy models
//   vvae report        manifests -> summary
//
// Exit codes: 0 success, 1 stage failure, 2 usage or configuration error.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vvae/http_transport.hpp"
#include "vvae/pipeline.hpp"

namespace {

using namespace vvae;

void add_backend_options(CLI::App* cmd, pipeline::ExtractOptions& o, std::string& backend_kind) {
    cmd->add_option("--backend", backend_kind, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--mock-rules", o.mock_rules, "JSON rule table for the mock backend");
    cmd->add_option("--endpoint", o.backend.endpoint, "chat-completions URL (remote)");
    cmd->add_option("--model", o.backend.model, "model name (remote)");
    cmd->add_option("--token-env", o.backend.token_env, "environment variable holding the bearer token");
    cmd->add_option("--max-concurrent", o.backend.max_concurrent, "in-flight request limit");
    cmd->add_option("--max-attempts", o.backend.retry.max_attempts, "attempts per request");
    cmd->add_option("--backoff-ms", o.backend.retry.backoff_base_ms, "base retry backoff in milliseconds");
    cmd->add_option("--cache-dir", o.backend.cache_dir, "response cache directory (empty disables)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Persona-conditioned dialogue pipeline"};
    app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
    app.require_subcommand(1);
    std::size_t jobs = 1;
    app.add_option("--jobs,-j", jobs, "worker threads per stage")->check(CLI::PositiveNumber);

    pipeline::IngestOptions ingest;
    auto* c_ingest = app.add_subcommand("ingest", "scrub, subsample and pair chat sessions");
    c_ingest->add_option("--sessions", ingest.sessions, "sessions JSONL")->required();
    c_ingest->add_option("--out", ingest.out, "pairs JSONL output")->required();
    c_ingest->add_option("--scrub-rules", ingest.scrub_rules, "JSON list of {name, pattern, replacement}");
    c_ingest->add_option("--cap-quantile", ingest.cap_quantile, "per-agent session cap quantile in (0,1]");
    c_ingest->add_option("--seed", ingest.seed, "subsampling seed");
    c_ingest->add_flag("--strict", ingest.strict, "fail on malformed lines instead of skipping them");

    pipeline::ExtractOptions extract;
    std::string backend_kind = "mock";
    auto* c_extract = app.add_subcommand("extract", "LLM persona extraction for every pair");
    c_extract->add_option("--pairs", extract.pairs, "pairs JSONL")->required();
    c_extract->add_option("--out", extract.out, "extractions JSONL output")->required();
    c_extract->add_option("--schema", extract.schema, "persona schema JSON (default: built-in 9 dimensions)");
    c_extract->add_option("--prompt-dir", extract.prompt_dir, "directory of <template>.txt overrides");
    c_extract->add_flag("--unstructured", extract.unstructured, "free-text analyses instead of structured persona");
    add_backend_options(c_extract, extract, backend_kind);

    pipeline::BuildPriorOptions prior;
    auto* c_prior = app.add_subcommand("build-prior", "empirical prior from extractions");
    c_prior->add_option("--extractions", prior.extractions, "extractions JSONL")->required();
    c_prior->add_option("--out", prior.out, "prior JSON output")->required();
    c_prior->add_option("--schema", prior.schema, "persona schema JSON");

    pipeline::BuildDatasetOptions dataset;
    std::string variant = "ft";
    std::vector<std::string> excluded;
    bool uniform = false;
    auto* c_dataset = app.add_subcommand("build-dataset", "persona-conditioned SFT corpus");
    c_dataset->add_option("--pairs", dataset.pairs, "pairs JSONL")->required();
    c_dataset->add_option("--extractions", dataset.extractions, "extractions JSONL (p_ft, sp_ft)");
    c_dataset->add_option("--unstructured", dataset.unstructured, "unstructured analyses JSONL");
    c_dataset->add_option("--prior", dataset.cfg.prior_path, "prior JSON (sp_ft)");
    c_dataset->add_option("--schema", dataset.schema, "persona schema JSON");
    c_dataset->add_option("--variant", variant, "ft | p_ft | sp_ft | unstructured");
    c_dataset->add_option("--exclude-axis", excluded, "talking | interaction | personal (repeatable)");
    c_dataset->add_option("--seed", dataset.cfg.seed, "sampling seed");
    c_dataset->add_flag("--uniform-prior", uniform, "sample uniformly over the support instead of by frequency");
    c_dataset->add_option("--out", dataset.out, "SFT JSONL output")->required();

    pipeline::EvaluateOptions evaluate;
    auto* c_eval = app.add_subcommand("evaluate", "score model outputs with CP/EC/HM");
    c_eval->add_option("--outputs", evaluate.outputs, "outputs JSONL")->required();
    c_eval->add_option("--targets", evaluate.targets, "targets JSON");
    c_eval->add_option("--out", evaluate.out, "report JSON output");

    pipeline::VerifyBoundOptions verify;
    auto* c_verify = app.add_subcommand("verify-bound", "check the variational bound on toy models");
    c_verify->add_option("--trials", verify.trials, "random posteriors per model")->check(CLI::PositiveNumber);
    c_verify->add_option("--seed", verify.seed, "seed");
    c_verify->add_option("--out", verify.out, "report JSON output (default: standard output)");

    std::vector<std::string> manifests;
    std::string report_out;
    auto* c_report = app.add_subcommand("report", "aggregate manifests");
    c_report->add_option("manifests", manifests, "manifest files or directories")->required();
    c_report->add_option("--out", report_out, "summary JSON output (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (c_ingest->parsed()) {
            pipeline::ingest(ingest);
        } else if (c_extract->parsed()) {
            extract.jobs = jobs;
            extract.backend.kind = backend_kind == "remote" ? BackendKind::remote : BackendKind::mock;
            std::shared_ptr<Transport> transport;
            if (extract.backend.kind == BackendKind::remote) transport = make_http_transport();
            pipeline::extract(extract, transport);
        } else if (c_prior->parsed()) {
            pipeline::build_prior_file(prior);
        } else if (c_dataset->parsed()) {
            dataset.cfg.variant = parse_variant(variant);
            for (const auto& a : excluded) dataset.cfg.excluded_axes.insert(parse_axis(a));
            dataset.cfg.sampling = uniform ? SamplingMode::uniform : SamplingMode::frequency;
            pipeline::build_dataset(dataset);
        } else if (c_eval->parsed()) {
            pipeline::evaluate(evaluate);
        } else if (c_verify->parsed()) {
            bool ok = false;
            auto j = pipeline::verify_bound(verify, &ok);
            if (verify.out.empty()) std::cout << j.dump(2) << "\n";
            if (!ok) {
                std::cerr << "verify-bound: violations found\n";
                return 1;
            }
        } else if (c_report->parsed()) {
            auto j = pipeline::report(manifests);
            if (report_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                write_file_atomic(report_out, j.dump(2) + "\n");
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
