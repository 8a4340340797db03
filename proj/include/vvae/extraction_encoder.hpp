#ifndef VVAE_EXTRACTION_ENCODER_HPP
#define VVAE_EXTRACTION_ENCODER_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/corpus_ingest.hpp"
#include "vvae/error.hpp"
#include "vvae/extraction_record.hpp"
#include "vvae/llm_client.hpp"
#include "vvae/parallel.hpp"
#include "vvae/persona_space.hpp"
#include "vvae/prior_sampler.hpp"

// The verbal posterior. An LLM reads (context, response) and names a value
// for every persona dimension or "none"; the posterior over each dimension is
// a point mass on the named value, or the prior when nothing was named.
namespace vvae {

/// "User: ..." / "AI: ..." lines in turn order.
inline std::string render_transcript(const std::vector<Turn>& turns) {
    std::string out;
    for (const auto& t : turns) {
        if (!out.empty()) out += '\n';
        out += t.role == TurnRole::user ? "User: " : "AI: ";
        out += t.text;
    }
    return out;
}

namespace detail {

inline std::optional<nlohmann::json> find_json_object(const std::string& raw) {
    auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
        auto j = nlohmann::json::parse(s, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(raw)) return j;
    // Replies often wrap the object in prose or a code fence.
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    return try_parse(std::string_view(raw).substr(open, close - open + 1));
}

inline std::optional<std::string> field_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    if (v.is_array()) {
        for (const auto& e : v) {
            if (e.is_string()) return e.get<std::string>();
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Parses an extractor reply. Returns nullopt when no JSON object is found.
/// Missing, null, unparseable or out-of-closed-set fields become absent.
inline std::optional<PersonaAssignment> parse_extraction_reply(const std::string& raw, const PersonaSchema& schema) {
    auto j = detail::find_json_object(raw);
    if (!j) return std::nullopt;
    auto a = PersonaAssignment::all_absent(schema);
    for (const auto& d : schema.dimensions()) {
        auto it = j->find(d.key);
        if (it == j->end()) continue;
        auto txt = detail::field_text(*it);
        if (!txt) continue;
        try {
            if (auto v = canonicalize(d, *txt)) a.set_extracted(d.key, std::move(*v));
        } catch (const UnknownClosedValue&) {
        }
    }
    return a;
}

struct ExtractorOptions {
    PromptTemplate tpl = builtin_template(TemplateName::persona_extraction);
    double temperature = 0.0;
    int max_tokens = 512;
};

/// Asks for all dimensions in one request. If the reply is not a JSON object
/// one repair turn is sent; a second failure throws ExtractionError.
inline ExtractionRecord extract(const std::vector<Turn>& context, const std::string& response,
                                const PersonaSchema& schema, LlmClient& client, const ExtractorOptions& opt = {}) {
    if (context.empty()) throw ConfigError("extract: context is empty");
    if (response.empty()) throw ConfigError("extract: response is empty");
    ChatRequest req;
    req.system = std::string(prompts::kExtractionSystem);
    req.temperature = opt.temperature;
    req.max_tokens = opt.max_tokens;
    req.messages.push_back(
        {Role::user, render(opt.tpl, {{"context", render_transcript(context)}, {"response", response}})});

    ExtractionRecord rec;
    rec.extractor_model = client.config().model_name();
    rec.raw_reply = client.complete(req);
    auto parsed = parse_extraction_reply(rec.raw_reply, schema);
    if (!parsed) {
        req.messages.push_back({Role::assistant, rec.raw_reply});
        req.messages.push_back({Role::user, std::string(prompts::kRepairRequest)});
        rec.raw_reply = client.complete(req);
        parsed = parse_extraction_reply(rec.raw_reply, schema);
        if (!parsed) throw ExtractionError("extractor reply is not a JSON object after repair", rec.raw_reply);
    }
    rec.assignment = std::move(*parsed);
    return rec;
}

inline ExtractionRecord extract(const ContextTargetPair& pair, const PersonaSchema& schema, LlmClient& client,
                                const ExtractorOptions& opt = {}) {
    auto rec = extract(pair.context, pair.target.text, schema, client, opt);
    rec.session_id = pair.session_id;
    rec.turn_index = pair.target.index;
    return rec;
}

/// Extracts every pair on up to `jobs` threads; output order follows `pairs`.
inline std::vector<ExtractionRecord> extract_all(const std::vector<ContextTargetPair>& pairs,
                                                 const PersonaSchema& schema, LlmClient& client, std::size_t jobs,
                                                 const ExtractorOptions& opt = {}) {
    std::vector<ExtractionRecord> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) { out[i] = extract(pairs[i], schema, client, opt); });
    return out;
}

/// Free-text analysis of why the reply was produced and what it reveals about
/// the character. Stored verbatim.
inline std::string extract_unstructured(const std::vector<Turn>& context, const std::string& response,
                                        LlmClient& client,
                                        const PromptTemplate& tpl = builtin_template(TemplateName::unstructured_extraction)) {
    if (context.empty()) throw ConfigError("extract_unstructured: context is empty");
    if (response.empty()) throw ConfigError("extract_unstructured: response is empty");
    ChatRequest req;
    req.system = std::string(prompts::kUnstructuredSystem);
    req.messages.push_back(
        {Role::user, render(tpl, {{"context", render_transcript(context)}, {"response", response}})});
    std::string reply = client.complete(req);
    if (reply.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ExtractionError("unstructured extraction returned an empty reply", reply);
    }
    return reply;
}

inline std::vector<UnstructuredRecord> extract_unstructured_all(const std::vector<ContextTargetPair>& pairs,
                                                                LlmClient& client, std::size_t jobs,
                                                                const PromptTemplate& tpl = builtin_template(
                                                                    TemplateName::unstructured_extraction)) {
    std::vector<UnstructuredRecord> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const auto& p = pairs[i];
        out[i] = {p.session_id, p.target.index, extract_unstructured(p.context, p.target.text, client, tpl),
                  client.config().model_name()};
    });
    return out;
}

/// q(dim = candidate | x, c): 1 or 0 when the dimension was extracted
/// (match / mismatch), the prior probability when it was not.
inline double posterior_mass(const std::string& dim_key, const PersonaValue& candidate, const ExtractionRecord& record,
                             const Prior& prior) {
    const auto& extracted = record.assignment.value(dim_key);
    if (extracted) return *extracted == candidate ? 1.0 : 0.0;
    return prior.probability(dim_key, candidate);
}

/// Overload for raw text; throws InvalidValue unless `candidate` is already canonical.
inline double posterior_mass(const PersonaSchema& schema, const std::string& dim_key, const std::string& candidate,
                             const ExtractionRecord& record, const Prior& prior) {
    return posterior_mass(dim_key, PersonaValue::from_canonical(schema.dimension(dim_key), candidate), record, prior);
}

/// Joint posterior of a full assignment under the per-dimension factorization.
inline double joint_posterior_mass(const PersonaAssignment& candidate, const ExtractionRecord& record,
                                   const Prior& prior) {
    double p = 1.0;
    for (const auto& [key, slot] : candidate.slots()) {
        if (!slot.value) throw InvalidValue("joint posterior needs a value for every dimension ('" + key + "')");
        p *= posterior_mass(key, *slot.value, record, prior);
    }
    return p;
}

} // namespace vvae

#endif // VVAE_EXTRACTION_ENCODER_HPP
