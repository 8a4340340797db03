#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vvae/prior_sampler.hpp"

using namespace vvae;
using vvae::testing::RawRecord;

namespace {

ExtractionRecord record_with(const PersonaSchema& s, const std::map<std::string, std::string>& values) {
    ExtractionRecord r;
    r.assignment = PersonaAssignment::all_absent(s);
    for (const auto& [k, v] : values) r.assignment.set_extracted(k, *canonicalize(s.dimension(k), v));
    return r;
}

PersonaValue val(const PersonaSchema& s, const std::string& key, const std::string& v) {
    return *canonicalize(s.dimension(key), v);
}

Prior hobby_prior(const PersonaSchema& s, const std::map<std::string, int>& counts) {
    std::vector<ExtractionRecord> recs;
    for (const auto& [v, c] : counts) {
        for (int i = 0; i < c; ++i) recs.push_back(record_with(s, {{"hobby", v}}));
    }
    return build_prior(recs, s);
}

} // namespace

TEST(BuildPrior, FrequenciesIgnoreNulls) {
    const auto s = default_schema();
    std::vector<ExtractionRecord> recs = {record_with(s, {{"relationship", "friend"}}),
                                          record_with(s, {{"relationship", "friend"}}),
                                          record_with(s, {{"relationship", "lover"}}), record_with(s, {})};
    const auto p = build_prior(recs, s);
    EXPECT_NEAR(p.probability("relationship", val(s, "relationship", "friend")), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(p.probability("relationship", val(s, "relationship", "lover")), 1.0 / 3.0, 1e-12);
    EXPECT_EQ(p.probability("relationship", val(s, "relationship", "enemy")), 0.0);
    EXPECT_EQ(p.dimension("relationship").total, 3u);
    EXPECT_TRUE(p.dimension("hobby").empty());
    EXPECT_EQ(p.empty_support_keys().size(), 8u);
}

TEST(BuildPrior, SingleValueHasMassOne) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"chess", 5}});
    EXPECT_DOUBLE_EQ(p.probability("hobby", val(s, "hobby", "chess")), 1.0);
}

TEST(BuildPrior, EmptyCorpusRejected) { EXPECT_THROW(build_prior({}, default_schema()), Error); }

TEST(BuildPrior, JsonRoundTrip) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"chess", 2}, {"swimming", 7}});
    const auto j = prior_to_json(p);
    EXPECT_EQ(j.at("prior_version"), 1);
    EXPECT_EQ(prior_from_json(j, s), p);
    auto bad = j;
    bad["hobby"]["total"] = 10;
    EXPECT_THROW(prior_from_json(bad, s), SchemaError);
}

TEST(BuildPrior, MatchesBruteForceOracleOnRandomCorpora) {
    const auto s = default_schema();
    const auto keys = s.keys();
    std::mt19937_64 rng(2024);
    const std::vector<std::string> pool = {"a", "b", "c", "d"};
    for (int corpus = 0; corpus < 50; ++corpus) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<ExtractionRecord> recs;
        std::vector<RawRecord> raw;
        for (std::size_t i = 0; i < n; ++i) {
            RawRecord rr;
            std::map<std::string, std::string> vals;
            for (const auto& k : keys) {
                if (rng() % 3 == 0) {
                    rr[k] = std::nullopt;
                    continue;
                }
                std::string v = k == "relationship" ? s.dimension(k).closed_values[rng() % 5] : pool[rng() % pool.size()];
                rr[k] = v;
                vals[k] = v;
            }
            raw.push_back(rr);
            recs.push_back(record_with(s, vals));
        }
        const auto oracle = vvae::testing::brute_force_counts(raw, keys);
        const auto p = build_prior(recs, s);
        for (const auto& k : keys) {
            std::size_t total = 0;
            for (const auto& [v, c] : oracle.at(k)) total += c;
            const auto& d = p.dimension(k);
            ASSERT_EQ(d.entries.size(), oracle.at(k).size());
            ASSERT_EQ(d.total, total);
            double sum = 0;
            for (const auto& e : d.entries) {
                ASSERT_EQ(e.count, oracle.at(k).at(e.value.str()));
                EXPECT_NEAR(e.probability, static_cast<double>(e.count) / static_cast<double>(total), 1e-12);
                sum += e.probability;
            }
            if (total > 0) {
                EXPECT_NEAR(sum, 1.0, 1e-12);
            }
        }
    }
}

TEST(SampleFill, EmpiricalFrequenciesMatchPrior) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"swimming", 7}, {"chess", 2}, {"guitar", 1}});
    SeededSampler sampler(99);
    const auto base = PersonaAssignment::all_absent(s);
    std::map<std::string, int> seen;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        auto r = sample_fill(base, p, sampler);
        ++seen[r.assignment.value("hobby")->str()];
        EXPECT_EQ(r.assignment.provenance("hobby"), Provenance::sampled);
    }
    const double swim = seen["swimming"] / static_cast<double>(n);
    EXPECT_NEAR(swim, 0.7, 0.01);
    double l1 = 0;
    for (const auto& [v, want] : std::map<std::string, double>{{"swimming", 0.7}, {"chess", 0.2}, {"guitar", 0.1}}) {
        l1 += std::abs(seen[v] / static_cast<double>(n) - want);
    }
    EXPECT_LE(l1, 0.02);
}

TEST(SampleFill, UniformModeIgnoresCounts) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"swimming", 98}, {"chess", 1}, {"guitar", 1}});
    SeededSampler sampler(5);
    const auto base = PersonaAssignment::all_absent(s);
    std::map<std::string, int> seen;
    for (int i = 0; i < 30000; ++i) ++seen[sample_fill(base, p, sampler, SamplingMode::uniform).assignment.value("hobby")->str()];
    for (const auto& [v, c] : seen) EXPECT_NEAR(c / 30000.0, 1.0 / 3.0, 0.02) << v;
}

TEST(SampleFill, PresentValuesUntouchedAndNoDraws) {
    const auto s = default_schema();
    std::vector<ExtractionRecord> recs;
    std::map<std::string, std::string> all;
    for (const auto& k : s.keys()) all[k] = k == "relationship" ? "friend" : "v";
    recs.push_back(record_with(s, all));
    const auto p = build_prior(recs, s);
    auto full = recs[0].assignment;
    SeededSampler sampler(1);
    auto r = sample_fill(full, p, sampler);
    EXPECT_EQ(r.assignment, full);
    EXPECT_EQ(sampler.draws(), 0u);
}

TEST(SampleFill, EmptySupportReportedAsUnfilled) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"chess", 1}});
    SeededSampler sampler(1);
    auto r = sample_fill(PersonaAssignment::all_absent(s), p, sampler);
    EXPECT_EQ(r.unfilled.size(), 8u);
    EXPECT_EQ(r.assignment.provenance("hobby"), Provenance::sampled);
    EXPECT_EQ(r.assignment.count(Provenance::absent), 8u);
    EXPECT_EQ(sampler.draws(), 1u);
}

TEST(SampleFill, ReproducibleBySeed) {
    const auto s = default_schema();
    const auto p = hobby_prior(s, {{"swimming", 3}, {"chess", 4}, {"guitar", 5}});
    const auto base = PersonaAssignment::all_absent(s);
    auto run = [&](std::uint64_t seed) {
        SeededSampler sampler(seed);
        std::string out;
        for (int i = 0; i < 200; ++i) out += sample_fill(base, p, sampler).assignment.value("hobby")->str() + ",";
        return out;
    };
    EXPECT_EQ(run(7), run(7));
    EXPECT_NE(run(7), run(8));
    auto k1 = sample_fill_keyed(base, p, 7, "sess", 3);
    auto k2 = sample_fill_keyed(base, p, 7, "sess", 3);
    EXPECT_EQ(k1.assignment, k2.assignment);
}

TEST(SeededSampler, BelowIsUnbiasedOnSmallRange) {
    SeededSampler sampler(3);
    std::vector<int> hist(3, 0);
    for (int i = 0; i < 60000; ++i) ++hist[sampler.below(3)];
    for (int h : hist) EXPECT_NEAR(h / 60000.0, 1.0 / 3.0, 0.01);
    EXPECT_THROW(sampler.below(0), Error);
}

TEST(PriorLogMass, SumsLogProbabilities) {
    const auto s = default_schema();
    std::vector<ExtractionRecord> recs = {record_with(s, {{"relationship", "friend"}}),
                                          record_with(s, {{"relationship", "friend"}}),
                                          record_with(s, {{"relationship", "lover"}})};
    const auto p = build_prior(recs, s);
    auto a = PersonaAssignment::all_absent(s);
    a.set_extracted("relationship", val(s, "relationship", "friend"));
    EXPECT_NEAR(prior_log_mass(a, p), std::log(2.0 / 3.0), 1e-12);
    a.set_extracted("relationship", val(s, "relationship", "enemy"));
    EXPECT_THROW(prior_log_mass(a, p), SupportError);
}
