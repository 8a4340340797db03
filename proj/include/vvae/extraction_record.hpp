#ifndef VVAE_EXTRACTION_RECORD_HPP
#define VVAE_EXTRACTION_RECORD_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vvae/jsonl.hpp"
#include "vvae/persona_space.hpp"

namespace vvae {

/// The verbal posterior's output for one target AI turn.
struct ExtractionRecord {
    std::string session_id;
    std::size_t turn_index = 0;
    PersonaAssignment assignment;
    std::string raw_reply;
    std::string extractor_model;

    friend bool operator==(const ExtractionRecord&, const ExtractionRecord&) = default;
};

/// Free-text persona analysis for the unstructured dataset variant.
struct UnstructuredRecord {
    std::string session_id;
    std::size_t turn_index = 0;
    std::string analysis;
    std::string extractor_model;

    friend bool operator==(const UnstructuredRecord&, const UnstructuredRecord&) = default;
};

using PairKey = std::pair<std::string, std::size_t>;

inline nlohmann::ordered_json record_to_json(const ExtractionRecord& r, const PersonaSchema& schema) {
    nlohmann::ordered_json j;
    j["session_id"] = r.session_id;
    j["turn_index"] = r.turn_index;
    j["assignment"] = assignment_to_json(r.assignment, schema);
    j["raw_reply"] = r.raw_reply;
    j["extractor_model"] = r.extractor_model;
    return j;
}

inline ExtractionRecord record_from_json(const nlohmann::ordered_json& j, const PersonaSchema& schema) {
    ExtractionRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.turn_index = j.at("turn_index").get<std::size_t>();
    r.assignment = assignment_from_json(j.at("assignment"), schema);
    r.raw_reply = j.value("raw_reply", "");
    r.extractor_model = j.value("extractor_model", "");
    return r;
}

inline nlohmann::ordered_json unstructured_to_json(const UnstructuredRecord& r) {
    return {{"session_id", r.session_id},
            {"turn_index", r.turn_index},
            {"analysis", r.analysis},
            {"extractor_model", r.extractor_model}};
}

inline UnstructuredRecord unstructured_from_json(const nlohmann::ordered_json& j) {
    return {j.at("session_id").get<std::string>(), j.at("turn_index").get<std::size_t>(),
            j.at("analysis").get<std::string>(), j.value("extractor_model", "")};
}

inline std::vector<ExtractionRecord> load_extractions(const std::string& path, const PersonaSchema& schema) {
    std::vector<ExtractionRecord> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        try {
            out.push_back(record_from_json(nlohmann::ordered_json::parse(line), schema));
        } catch (const std::exception& e) {
            throw LineError(std::string("bad extraction record: ") + e.what(), n);
        }
    });
    return out;
}

inline std::vector<UnstructuredRecord> load_unstructured(const std::string& path) {
    std::vector<UnstructuredRecord> out;
    for_each_line(path, [&](const std::string& line, std::size_t n) {
        try {
            out.push_back(unstructured_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw LineError(std::string("bad unstructured record: ") + e.what(), n);
        }
    });
    return out;
}

} // namespace vvae

#endif // VVAE_EXTRACTION_RECORD_HPP
