#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vvae/dataset_builder.hpp"

using namespace vvae;
using vvae::testing::TempDir;

namespace {

struct Fixture {
    PersonaSchema schema = default_schema();
    std::vector<ContextTargetPair> pairs;
    std::vector<ExtractionRecord> extractions;
    Prior prior;

    Fixture() {
        for (int i = 0; i < 3; ++i) {
            ChatSession s{"agent", "s" + std::to_string(i),
                          {{TurnRole::user, "hey there " + std::to_string(i), 0}, {TurnRole::ai, "hi!", 1}}};
            auto p = pair_targets(s);
            pairs.insert(pairs.end(), p.begin(), p.end());
            ExtractionRecord r;
            r.session_id = s.session_id;
            r.turn_index = 1;
            r.assignment = PersonaAssignment::all_absent(schema);
            r.assignment.set_extracted("tone", *canonicalize(schema.dimension("tone"), "patient"));
            extractions.push_back(r);
        }
        // A prior with support on every dimension.
        std::vector<ExtractionRecord> corpus = {extractions[0]};
        for (const std::string tag : {"friend", "lover"}) {
            ExtractionRecord full;
            full.assignment = PersonaAssignment::all_absent(schema);
            for (const auto& d : schema.dimensions()) {
                const std::string raw = d.value_kind == ValueKind::closed_set ? tag : d.key + " " + tag;
                full.assignment.set_extracted(d.key, *canonicalize(d, raw));
            }
            corpus.push_back(full);
        }
        prior = build_prior(corpus, schema);
    }

    BuildConfig cfg(Variant v, std::set<Axis> excluded = {}) const {
        BuildConfig c;
        c.variant = v;
        c.excluded_axes = std::move(excluded);
        c.seed = 11;
        return c;
    }
};

} // namespace

TEST(Build, FtHasNoPersonaBlock) {
    Fixture f;
    auto ex = build(f.pairs, {}, nullptr, f.cfg(Variant::ft), f.schema);
    ASSERT_EQ(ex.size(), 3u);
    EXPECT_EQ(ex[0].system, kRolePreamble);
    EXPECT_EQ(ex[0].target, "hi!");
    ASSERT_EQ(ex[0].messages.size(), 1u);
    EXPECT_EQ(ex[0].messages[0].role, "user");
    EXPECT_TRUE(ex[0].meta.persona.empty());
}

TEST(Build, PftRendersOnlyExtracted) {
    Fixture f;
    auto ex = build(f.pairs, f.extractions, nullptr, f.cfg(Variant::p_ft), f.schema);
    EXPECT_EQ(ex[0].system, std::string(kRolePreamble) + "\n\n[Persona]\ntone: patient");
    EXPECT_EQ(ex[0].meta.persona.size(), 1u);
    EXPECT_EQ(ex[0].meta.count(Provenance::extracted), 1u);
}

TEST(Build, SpftFillsFromPrior) {
    Fixture f;
    auto ex = build(f.pairs, f.extractions, &f.prior, f.cfg(Variant::sp_ft), f.schema);
    for (const auto& e : ex) {
        EXPECT_EQ(e.meta.persona.size(), 9u);
        EXPECT_EQ(e.meta.count(Provenance::sampled), 8u);
        EXPECT_EQ(e.meta.count(Provenance::extracted), 1u);
        EXPECT_NE(e.system.find("tone: patient"), std::string::npos);
        EXPECT_TRUE(e.meta.unfilled.empty());
    }
}

TEST(Build, AxisAblationDimensionCounts) {
    Fixture f;
    const std::vector<std::pair<Axis, std::size_t>> cases = {
        {Axis::talking, 6}, {Axis::interaction, 5}, {Axis::personal, 7}};
    for (const auto& [axis, want] : cases) {
        auto ex = build(f.pairs, f.extractions, &f.prior, f.cfg(Variant::sp_ft, {axis}), f.schema);
        for (const auto& e : ex) {
            EXPECT_EQ(e.meta.persona.size(), want) << to_string(axis);
            for (const auto& k : f.schema.keys_on_axis(axis)) {
                EXPECT_EQ(e.system.find(k + ": "), std::string::npos) << k;
            }
        }
    }
}

TEST(Build, ConfigValidation) {
    Fixture f;
    EXPECT_THROW(build(f.pairs, f.extractions, nullptr, f.cfg(Variant::sp_ft), f.schema), ConfigError);
    EXPECT_THROW(build(f.pairs, f.extractions, nullptr, f.cfg(Variant::ft, {Axis::talking}), f.schema), ConfigError);
    EXPECT_THROW(parse_variant("sft"), ConfigError);
}

TEST(Build, MissingOrDuplicateExtractions) {
    Fixture f;
    auto missing = f.extractions;
    missing.pop_back();
    EXPECT_THROW(build(f.pairs, missing, nullptr, f.cfg(Variant::p_ft), f.schema), BuildError);
    auto dup = f.extractions;
    dup.push_back(dup[0]);
    EXPECT_THROW(build(f.pairs, dup, nullptr, f.cfg(Variant::p_ft), f.schema), BuildError);
}

TEST(Build, UnstructuredUsesAnalysis) {
    Fixture f;
    std::vector<UnstructuredRecord> u;
    for (const auto& p : f.pairs) u.push_back({p.session_id, p.target.index, "Cheerful and brief.", "mock"});
    auto ex = build(f.pairs, {}, nullptr, f.cfg(Variant::unstructured), f.schema, u);
    EXPECT_EQ(ex[0].system, std::string(kRolePreamble) + "\n\n[Persona analysis]\nCheerful and brief.");
    u.pop_back();
    EXPECT_THROW(build(f.pairs, {}, nullptr, f.cfg(Variant::unstructured), f.schema, u), BuildError);
}

TEST(RenderPersonaBlock, SchemaOrderSkipsAbsent) {
    const auto s = default_schema();
    auto a = PersonaAssignment::all_absent(s);
    a.set_extracted("hobby", *canonicalize(s.dimension("hobby"), "chess"));
    a.set_extracted("catchphrase", *canonicalize(s.dimension("catchphrase"), "yehei"));
    EXPECT_EQ(render_persona_block(a, s), "catchphrase: yehei\nhobby: chess");
    EXPECT_EQ(render_persona_block(PersonaAssignment::all_absent(s), s), "");
}

TEST(Emit, WritesJsonlAndManifest) {
    Fixture f;
    TempDir dir;
    const auto path = dir.file("out/sft.jsonl");
    auto cfg = f.cfg(Variant::sp_ft, {Axis::talking});
    auto ex = build(f.pairs, f.extractions, &f.prior, cfg, f.schema);
    emit(ex, path, cfg, "abc123");
    EXPECT_EQ(vvae::testing::count_lines(path), 3u);
    const auto m = nlohmann::json::parse(vvae::testing::slurp(manifest_path_for(path)));
    EXPECT_EQ(m.at("variant"), "sp_ft");
    EXPECT_EQ(m.at("seed"), 11);
    EXPECT_EQ(m.at("prior_sha"), "abc123");
    EXPECT_EQ(m.at("n_examples"), 3);
    EXPECT_EQ(m.at("excluded_axes"), nlohmann::json::array({"talking"}));
    EXPECT_EQ(m.at("artifact_sha"), sha256_file(path));
    EXPECT_EQ(load_examples(path), ex);
}

TEST(Emit, ByteIdenticalAcrossRuns) {
    Fixture f;
    TempDir dir;
    auto cfg = f.cfg(Variant::sp_ft);
    emit(build(f.pairs, f.extractions, &f.prior, cfg, f.schema), dir.file("a.jsonl"), cfg, "x");
    emit(build(f.pairs, f.extractions, &f.prior, cfg, f.schema), dir.file("b.jsonl"), cfg, "x");
    EXPECT_EQ(vvae::testing::slurp(dir.file("a.jsonl")), vvae::testing::slurp(dir.file("b.jsonl")));
    cfg.seed = 12;
    emit(build(f.pairs, f.extractions, &f.prior, cfg, f.schema), dir.file("c.jsonl"), cfg, "x");
    EXPECT_NE(vvae::testing::slurp(dir.file("a.jsonl")), vvae::testing::slurp(dir.file("c.jsonl")));
}
