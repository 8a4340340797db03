#include <random>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "vvae/persona_space.hpp"

using namespace vvae;

namespace {

// UTF-8 of the code points involved in emoji normalization.
const std::string kHeart = "\xE2\x9D\xA4";            // U+2764
const std::string kVs16 = "\xEF\xB8\x8F";             // U+FE0F
const std::string kVs15 = "\xEF\xB8\x8E";             // U+FE0E
const std::string kThumbsUp = "\xF0\x9F\x91\x8D";     // U+1F44D
const std::string kSkinTone4 = "\xF0\x9F\x8F\xBD";    // U+1F3FD
const std::string kGrinning = "\xF0\x9F\x98\x80";     // U+1F600

} // namespace

TEST(DefaultSchema, HasNineDimensionsOnThreeAxes) {
    const auto s = default_schema();
    EXPECT_EQ(s.size(), 9u);
    EXPECT_EQ(s.keys_on_axis(Axis::talking), (std::vector<std::string>{"catchphrase", "frequent_emoji", "tone"}));
    EXPECT_EQ(s.keys_on_axis(Axis::interaction),
              (std::vector<std::string>{"nickname", "relationship", "vibe", "topic"}));
    EXPECT_EQ(s.keys_on_axis(Axis::personal), (std::vector<std::string>{"personality", "hobby"}));
}

TEST(DefaultSchema, RelationshipIsTheOnlyClosedSet) {
    const auto s = default_schema();
    const auto& rel = s.dimension("relationship");
    ASSERT_EQ(rel.value_kind, ValueKind::closed_set);
    const std::set<std::string> values(rel.closed_values.begin(), rel.closed_values.end());
    for (const char* v : {"stranger", "acquaintance", "friend", "lover", "enemy"}) EXPECT_TRUE(values.count(v)) << v;
    EXPECT_EQ(values.size(), rel.closed_values.size());
    for (const auto& d : s.dimensions()) {
        if (d.key != "relationship") {
            EXPECT_EQ(d.value_kind, ValueKind::free_text) << d.key;
        }
    }
}

TEST(DefaultSchema, Deterministic) { EXPECT_EQ(default_schema(), default_schema()); }

TEST(DefaultSchema, JsonRoundTripCarriesVersion) {
    const auto j = schema_to_json(default_schema());
    EXPECT_EQ(j.at("schema_version"), 1);
    EXPECT_EQ(schema_from_json(j), default_schema());
}

TEST(PersonaSchema, RejectsDuplicateKeys) {
    std::vector<DimensionSpec> dims = {{"a", Axis::talking, "", ValueKind::free_text, {}, false},
                                       {"a", Axis::interaction, "", ValueKind::free_text, {}, false},
                                       {"b", Axis::personal, "", ValueKind::free_text, {}, false}};
    EXPECT_THROW(PersonaSchema{dims}, SchemaError);
}

TEST(PersonaSchema, RejectsEmptyAxis) {
    std::vector<DimensionSpec> dims = {{"a", Axis::talking, "", ValueKind::free_text, {}, false},
                                       {"b", Axis::personal, "", ValueKind::free_text, {}, false}};
    EXPECT_THROW(PersonaSchema{dims}, SchemaError);
}

TEST(PersonaSchema, ClosedValuesDeduplicatedAfterCanonicalization) {
    std::vector<DimensionSpec> dims = {
        {"a", Axis::talking, "", ValueKind::closed_set, {"Friend", " friend "}, false},
        {"b", Axis::interaction, "", ValueKind::free_text, {}, false},
        {"c", Axis::personal, "", ValueKind::free_text, {}, false}};
    EXPECT_THROW(PersonaSchema{dims}, SchemaError);
}

TEST(PersonaSchema, ClosedValuesRequiredExactlyForClosedSets) {
    std::vector<DimensionSpec> dims = {{"a", Axis::talking, "", ValueKind::closed_set, {}, false},
                                       {"b", Axis::interaction, "", ValueKind::free_text, {"x"}, false},
                                       {"c", Axis::personal, "", ValueKind::free_text, {}, false}};
    EXPECT_THROW(PersonaSchema{dims}, SchemaError);
}

TEST(PersonaSchema, SchemaJsonMayExtendClosedSet) {
    auto j = schema_to_json(default_schema());
    for (auto& d : j["dimensions"]) {
        if (d["key"] == "relationship") d["closed_values"].push_back("colleague");
    }
    const auto s = schema_from_json(j);
    EXPECT_TRUE(canonicalize(s.dimension("relationship"), "Colleague").has_value());
}

TEST(Canonicalize, TrimsAndLowercases) {
    const auto s = default_schema();
    auto v = canonicalize(s.dimension("tone"), "  Patient ");
    ASSERT_TRUE(v);
    EXPECT_EQ(v->str(), "patient");
}

TEST(Canonicalize, CollapsesInternalWhitespace) {
    const auto s = default_schema();
    EXPECT_EQ(canonicalize(s.dimension("catchphrase"), "Oh \t My\n\n God")->str(), "oh my god");
}

TEST(Canonicalize, NullTokens) {
    const auto s = default_schema();
    EXPECT_FALSE(canonicalize(s.dimension("relationship"), "None"));
    for (const char* raw : {"", "   ", "none", "NULL", "n/A", "\xE2\x88\x85", " None "}) {
        EXPECT_FALSE(canonicalize(s.dimension("hobby"), raw)) << raw;
        EXPECT_FALSE(canonicalize(s.dimension("frequent_emoji"), raw)) << raw;
    }
}

TEST(Canonicalize, UnknownClosedValue) {
    const auto s = default_schema();
    EXPECT_THROW(canonicalize(s.dimension("relationship"), "coworker"), UnknownClosedValue);
    EXPECT_EQ(canonicalize(s.dimension("relationship"), " FRIEND ")->str(), "friend");
}

// Code-point table: input sequence -> expected canonical sequence.
TEST(Canonicalize, EmojiNormalizationTable) {
    const auto s = default_schema();
    const auto& dim = s.dimension("frequent_emoji");
    const std::vector<std::pair<std::string, std::string>> table = {
        {kHeart + kVs16, kHeart},
        {kHeart + kVs15, kHeart},
        {kHeart, kHeart},
        {kThumbsUp + kSkinTone4, kThumbsUp},
        {kThumbsUp + kSkinTone4 + kVs16, kThumbsUp},
        {" " + kGrinning + " ", kGrinning},
    };
    for (const auto& [in, want] : table) {
        auto v = canonicalize(dim, in);
        ASSERT_TRUE(v);
        EXPECT_EQ(v->str(), want);
    }
}

TEST(Canonicalize, EmojiDimensionKeepsCase) {
    const auto s = default_schema();
    EXPECT_EQ(canonicalize(s.dimension("frequent_emoji"), "XD")->str(), "XD");
}

TEST(Canonicalize, IdempotentOnRandomInputs) {
    const auto s = default_schema();
    const std::vector<std::string> alphabet = {"a", "B", " ", "\t", "\n", "x", "Z", kHeart, kVs16, kSkinTone4,
                                               kThumbsUp, "\xC3\x89", "none", "-", "\xE4\xBD\xA0"};
    std::mt19937_64 rng(12345);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string raw;
        const auto len = rng() % 12;
        for (std::size_t i = 0; i < len; ++i) raw += alphabet[rng() % alphabet.size()];
        for (const char* key : {"tone", "frequent_emoji", "hobby"}) {
            const auto& d = s.dimension(key);
            auto once = canonicalize(d, raw);
            if (!once) continue;
            auto twice = canonicalize(d, once->str());
            ASSERT_TRUE(twice) << raw;
            EXPECT_EQ(once->str(), twice->str());
        }
    }
}

TEST(PersonaValue, FromCanonicalRejectsNonCanonical) {
    const auto s = default_schema();
    EXPECT_THROW(PersonaValue::from_canonical(s.dimension("tone"), "Patient"), InvalidValue);
    EXPECT_THROW(PersonaValue::from_canonical(s.dimension("tone"), ""), InvalidValue);
    EXPECT_THROW(PersonaValue::from_canonical(s.dimension("tone"), "none"), InvalidValue);
    EXPECT_EQ(PersonaValue::from_canonical(s.dimension("tone"), "patient").str(), "patient");
}

namespace {

PersonaAssignment full_assignment(const PersonaSchema& s) {
    auto a = PersonaAssignment::all_absent(s);
    for (const auto& d : s.dimensions()) {
        const std::string raw = d.value_kind == ValueKind::closed_set ? d.closed_values.front() : d.key + " value";
        a.set_extracted(d.key, *canonicalize(d, raw));
    }
    return a;
}

} // namespace

TEST(AssignmentComplete, AllPresent) {
    const auto s = default_schema();
    EXPECT_TRUE(assignment_complete(full_assignment(s), s));
}

TEST(AssignmentComplete, HobbyAbsent) {
    const auto s = default_schema();
    auto a = full_assignment(s);
    a.clear("hobby");
    EXPECT_FALSE(assignment_complete(a, s));
}

TEST(AssignmentComplete, EmptyMapViolatesKeySet) {
    EXPECT_THROW(assignment_complete(PersonaAssignment{}), SchemaError);
    EXPECT_THROW(assignment_complete(PersonaAssignment{}, default_schema()), SchemaError);
}

TEST(PersonaAssignment, ValidateCatchesInconsistentSlots) {
    const auto s = default_schema();
    auto slots = PersonaAssignment::all_absent(s).slots();
    slots["tone"].provenance = Provenance::sampled;  // sampled without a value
    EXPECT_THROW(PersonaAssignment(slots).validate(s), SchemaError);

    auto missing = PersonaAssignment::all_absent(s).slots();
    missing.erase("hobby");
    EXPECT_THROW(PersonaAssignment(missing).validate(s), SchemaError);
}

TEST(PersonaAssignment, JsonUsesNullAndProvenance) {
    const auto s = default_schema();
    auto a = PersonaAssignment::all_absent(s);
    a.set_extracted("tone", *canonicalize(s.dimension("tone"), "patient"));
    a.set_sampled("hobby", *canonicalize(s.dimension("hobby"), "swimming"));
    const auto j = assignment_to_json(a, s);
    EXPECT_EQ(j.at("tone"), "patient");
    EXPECT_TRUE(j.at("nickname").is_null());
    EXPECT_EQ(j.at("_provenance").at("hobby"), "sampled");
    EXPECT_EQ(j.at("_provenance").at("nickname"), "absent");
    EXPECT_EQ(assignment_from_json(j, s), a);
    // Stable field order: schema order, then _provenance.
    EXPECT_EQ(j.begin().key(), "catchphrase");
    EXPECT_EQ((--j.end()).key(), "_provenance");
}

TEST(AxisPartition, ThreeFourTwo) {
    const auto s = default_schema();
    std::set<std::string> all;
    std::size_t total = 0;
    for (Axis a : kAllAxes) {
        for (const auto& k : s.keys_on_axis(a)) {
            all.insert(k);
            ++total;
        }
    }
    EXPECT_EQ(total, 9u);
    EXPECT_EQ(all.size(), 9u);
}
