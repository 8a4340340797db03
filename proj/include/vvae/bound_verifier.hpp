#ifndef VVAE_BOUND_VERIFIER_HPP
#define VVAE_BOUND_VERIFIER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvae/error.hpp"
#include "vvae/hashing.hpp"

// Exact checks of the variational bound on fully enumerable discrete models:
//   -log sum_z p(x|c,z) p(z)  <=  sum_z -q(z) log p(x|c,z) + KL[q || p]
// with equality at the Bayes posterior. All logs are natural.
namespace vvae::bound {

inline constexpr double kTol = 1e-9;

/// Discrete latent model. Latent index z ranges over [0, prior.size());
/// `likelihood[o][z]` is p(x_o | c_o, z) for observation pair o. A factored
/// model stores per-dimension priors; z is then a mixed-radix index with the
/// last dimension varying fastest and the joint prior is their product.
struct ToyModel {
    std::string name;
    std::vector<double> prior;
    std::vector<std::vector<double>> likelihood;
    std::vector<std::vector<double>> factor_priors;

    static ToyModel flat(std::string name, std::vector<double> prior, std::vector<std::vector<double>> likelihood) {
        ToyModel m{std::move(name), std::move(prior), std::move(likelihood), {}};
        m.validate();
        return m;
    }

    static ToyModel factored(std::string name, std::vector<std::vector<double>> factor_priors,
                             std::vector<std::vector<double>> likelihood) {
        ToyModel m{std::move(name), {}, std::move(likelihood), std::move(factor_priors)};
        std::size_t n = 1;
        for (const auto& f : m.factor_priors) n *= f.size();
        m.prior.assign(n, 1.0);
        for (std::size_t z = 0; z < n; ++z) {
            const auto idx = m.decode(z);
            for (std::size_t k = 0; k < idx.size(); ++k) m.prior[z] *= m.factor_priors[k][idx[k]];
        }
        m.validate();
        return m;
    }

    bool is_factored() const noexcept { return !factor_priors.empty(); }
    std::size_t latent_size() const noexcept { return prior.size(); }
    std::size_t n_obs() const noexcept { return likelihood.size(); }

    /// Per-dimension indices of joint index z (factored models only).
    std::vector<std::size_t> decode(std::size_t z) const {
        std::vector<std::size_t> idx(factor_priors.size());
        for (std::size_t k = factor_priors.size(); k-- > 0;) {
            idx[k] = z % factor_priors[k].size();
            z /= factor_priors[k].size();
        }
        return idx;
    }

    void validate() const {
        auto check_dist = [](const std::vector<double>& p, const char* what) {
            if (p.empty()) throw Error(std::string(what) + " is empty");
            double s = 0.0;
            for (double v : p) {
                if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(what) + " entry outside [0,1]");
                s += v;
            }
            if (std::fabs(s - 1.0) > 1e-12) throw Error(std::string(what) + " does not sum to 1");
        };
        check_dist(prior, "prior");
        for (const auto& f : factor_priors) check_dist(f, "factor prior");
        if (likelihood.empty()) throw Error("toy model has no observations");
        for (const auto& row : likelihood) {
            if (row.size() != prior.size()) throw Error("likelihood row size differs from latent size");
            for (double v : row) {
                if (!(v >= 0.0 && v <= 1.0)) throw Error("likelihood entry outside [0,1]");
            }
        }
    }
};

/// q(z | x, c) for one observation pair.
struct PosteriorTable {
    std::vector<double> probs;

    void validate(std::size_t latent_size) const {
        if (probs.size() != latent_size) throw Error("posterior size differs from latent size");
        double s = 0.0;
        for (double v : probs) {
            if (!(v >= 0.0)) throw Error("negative posterior entry");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-12) throw Error("posterior does not sum to 1");
    }
};

inline double marginal(const ToyModel& m, std::size_t obs) {
    double s = 0.0;
    for (std::size_t z = 0; z < m.latent_size(); ++z) s += m.likelihood.at(obs)[z] * m.prior[z];
    return s;
}

/// -log p(x|c) by full enumeration over the latent space.
inline double exact_nll(const ToyModel& m, std::size_t obs) {
    const double p = marginal(m, obs);
    if (p <= 0.0) throw InfiniteNll();
    return -std::log(p);
}

/// sum_z -q(z) log p(x|c,z), with 0 log 0 = 0. Infinite if q covers an impossible z.
inline double expected_reconstruction(const ToyModel& m, std::size_t obs, const PosteriorTable& q) {
    double s = 0.0;
    for (std::size_t z = 0; z < m.latent_size(); ++z) {
        if (q.probs[z] == 0.0) continue;
        const double lik = m.likelihood.at(obs)[z];
        if (lik == 0.0) return std::numeric_limits<double>::infinity();
        s -= q.probs[z] * std::log(lik);
    }
    return s;
}

/// KL[q || p] with 0 log 0 = 0; throws InfiniteKl when q > 0 where p = 0.
inline double kl_divergence(const std::vector<double>& q, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) continue;
        if (p[i] == 0.0) throw InfiniteKl();
        s += q[i] * (std::log(q[i]) - std::log(p[i]));
    }
    return s;
}

inline double elbo_upper_bound(const ToyModel& m, std::size_t obs, const PosteriorTable& q) {
    q.validate(m.latent_size());
    return expected_reconstruction(m, obs, q) + kl_divergence(q.probs, m.prior);
}

/// Exact Bayes posterior p(z | x, c).
inline PosteriorTable true_posterior(const ToyModel& m, std::size_t obs) {
    const double z_norm = marginal(m, obs);
    if (z_norm <= 0.0) throw InfiniteNll();
    PosteriorTable q;
    q.probs.resize(m.latent_size());
    for (std::size_t z = 0; z < m.latent_size(); ++z) q.probs[z] = m.likelihood[obs][z] * m.prior[z] / z_norm;
    return q;
}

/// The fixed-encoder posterior on a factored model: dimension k is a point
/// mass on observed[k] when set, and its prior otherwise.
inline PosteriorTable encoder_posterior(const ToyModel& m, const std::vector<std::optional<std::size_t>>& observed) {
    if (!m.is_factored() || observed.size() != m.factor_priors.size()) {
        throw Error("encoder posterior needs a factored model and one entry per dimension");
    }
    PosteriorTable q;
    q.probs.assign(m.latent_size(), 1.0);
    for (std::size_t z = 0; z < m.latent_size(); ++z) {
        const auto idx = m.decode(z);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            q.probs[z] *= observed[k] ? (idx[k] == *observed[k] ? 1.0 : 0.0) : m.factor_priors[k][idx[k]];
        }
    }
    return q;
}

/// KL computed dimension by dimension: -log p_k(v) for observed dimensions,
/// zero for dimensions left at their prior.
inline double encoder_kl_per_dimension(const ToyModel& m, const std::vector<std::optional<std::size_t>>& observed) {
    double s = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (!observed[k]) continue;
        const double p = m.factor_priors[k].at(*observed[k]);
        if (p == 0.0) throw InfiniteKl();
        s -= std::log(p);
    }
    return s;
}

/// Uniform double in [0, 1) from 53 raw engine bits.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Normalized independent uniform positives.
inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = unit(rng) + 1e-3;
        s += x;
    }
    for (auto& x : v) x /= s;
    return v;
}

inline std::vector<std::vector<double>> random_likelihood(std::mt19937_64& rng, std::size_t n_obs,
                                                          std::size_t latent_size) {
    std::vector<std::vector<double>> lik(n_obs, std::vector<double>(latent_size));
    for (auto& row : lik) {
        for (auto& v : row) v = 0.05 + 0.9 * unit(rng);
    }
    return lik;
}

inline ToyModel random_flat_model(std::string name, std::size_t latent_size, std::size_t n_obs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto prior = random_distribution(rng, latent_size);
    auto lik = random_likelihood(rng, n_obs, latent_size);
    return ToyModel::flat(std::move(name), std::move(prior), std::move(lik));
}

inline ToyModel random_factored_model(std::string name, const std::vector<std::size_t>& sizes, std::size_t n_obs,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> factors;
    std::size_t n = 1;
    for (std::size_t s : sizes) {
        factors.push_back(random_distribution(rng, s));
        n *= s;
    }
    auto lik = random_likelihood(rng, n_obs, n);
    return ToyModel::factored(std::move(name), std::move(factors), std::move(lik));
}

struct Counterexample {
    std::string kind;
    std::size_t obs = 0;
    std::vector<double> q;
    double bound = 0.0;
    double nll = 0.0;
};

struct BoundReport {
    std::string model;
    std::size_t trials = 0;
    std::size_t checks = 0;
    std::size_t violations = 0;
    // Largest |bound - nll| at the Bayes posterior.
    double max_gap_at_posterior = 0.0;
    // Smallest bound - nll over random posteriors (>= -kTol when the bound holds).
    double min_slack = std::numeric_limits<double>::infinity();
    // Largest |(bound - nll) - KL[q || posterior]| over random posteriors.
    double max_gap_identity_error = 0.0;
    // Largest change of the KL term when the likelihood table is redrawn.
    double max_kl_drift = 0.0;
    // Largest |joint KL - sum of per-dimension KLs| under the encoder posterior.
    double max_factorization_gap = 0.0;
    std::vector<Counterexample> counterexamples;

    bool ok() const noexcept { return violations == 0; }
};

namespace detail {

inline void record(BoundReport& r, Counterexample c) {
    ++r.violations;
    if (r.counterexamples.size() < 16) r.counterexamples.push_back(std::move(c));
}

} // namespace detail

/// Checks the bound against `trials` random posteriors per observation,
/// tightness at the Bayes posterior, invariance of the KL term under a
/// redrawn likelihood, and, for factored models, the fixed-encoder posterior.
inline BoundReport verify_bound(const ToyModel& m, std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw ConfigError("verify_bound: trials must be >= 1");
    m.validate();
    BoundReport r;
    r.model = m.name;
    r.trials = trials;

    for (std::size_t obs = 0; obs < m.n_obs(); ++obs) {
        const double nll = exact_nll(m, obs);
        const auto post = true_posterior(m, obs);
        const double gap = std::fabs(elbo_upper_bound(m, obs, post) - nll);
        r.max_gap_at_posterior = std::max(r.max_gap_at_posterior, gap);
        ++r.checks;
        if (gap > kTol) detail::record(r, {"not_tight_at_posterior", obs, post.probs, nll + gap, nll});
    }

    for (std::size_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(derive_seed(seed, m.name, std::to_string(t)));
        ToyModel perturbed = m;
        perturbed.likelihood = random_likelihood(rng, m.n_obs(), m.latent_size());

        for (std::size_t obs = 0; obs < m.n_obs(); ++obs) {
            const double nll = exact_nll(m, obs);
            PosteriorTable q{random_distribution(rng, m.latent_size())};
            const double bound = elbo_upper_bound(m, obs, q);
            ++r.checks;
            r.min_slack = std::min(r.min_slack, bound - nll);
            if (bound < nll - kTol) detail::record(r, {"bound_violated", obs, q.probs, bound, nll});

            // bound - nll is exactly KL[q || Bayes posterior].
            const double kl_post = kl_divergence(q.probs, true_posterior(m, obs).probs);
            const double id_err = std::fabs((bound - nll) - kl_post);
            r.max_gap_identity_error = std::max(r.max_gap_identity_error, id_err);
            if (id_err > kTol) detail::record(r, {"gap_identity", obs, q.probs, bound, nll});

            const double kl_a = bound - expected_reconstruction(m, obs, q);
            const double kl_b = elbo_upper_bound(perturbed, obs, q) - expected_reconstruction(perturbed, obs, q);
            const double drift = std::fabs(kl_a - kl_b);
            r.max_kl_drift = std::max(r.max_kl_drift, drift);
            if (drift > kTol) detail::record(r, {"kl_depends_on_likelihood", obs, q.probs, bound, nll});
        }

        if (!m.is_factored()) continue;
        // Fixed encoder: each dimension observed with probability 1/2 at a random value.
        std::vector<std::optional<std::size_t>> observed(m.factor_priors.size());
        for (std::size_t k = 0; k < observed.size(); ++k) {
            if (rng() & 1U) observed[k] = static_cast<std::size_t>(rng() % m.factor_priors[k].size());
        }
        const auto q = encoder_posterior(m, observed);
        const double kl_joint = kl_divergence(q.probs, m.prior);
        const double kl_dims = encoder_kl_per_dimension(m, observed);
        const double fact_gap = std::fabs(kl_joint - kl_dims);
        r.max_factorization_gap = std::max(r.max_factorization_gap, fact_gap);
        for (std::size_t obs = 0; obs < m.n_obs(); ++obs) {
            const double nll = exact_nll(m, obs);
            const double bound = elbo_upper_bound(m, obs, q);
            ++r.checks;
            if (!std::isfinite(bound)) detail::record(r, {"encoder_bound_infinite", obs, q.probs, bound, nll});
            if (bound < nll - kTol) detail::record(r, {"encoder_bound_violated", obs, q.probs, bound, nll});
            const double joint_vs_dims = std::fabs(bound - (expected_reconstruction(m, obs, q) + kl_dims));
            r.max_factorization_gap = std::max(r.max_factorization_gap, joint_vs_dims);
            if (fact_gap > kTol || joint_vs_dims > kTol) {
                detail::record(r, {"factorization_mismatch", obs, q.probs, bound, nll});
            }
            const double kl_b =
                elbo_upper_bound(perturbed, obs, q) - expected_reconstruction(perturbed, obs, q);
            const double drift = std::fabs(kl_joint - kl_b);
            r.max_kl_drift = std::max(r.max_kl_drift, drift);
            if (drift > kTol) detail::record(r, {"encoder_kl_depends_on_likelihood", obs, q.probs, bound, nll});
        }
    }
    return r;
}

inline nlohmann::ordered_json report_to_json(const BoundReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["trials"] = r.trials;
    j["checks"] = r.checks;
    j["violations"] = r.violations;
    j["max_gap_at_posterior"] = r.max_gap_at_posterior;
    j["min_slack"] = r.min_slack;
    j["max_gap_identity_error"] = r.max_gap_identity_error;
    j["max_kl_drift"] = r.max_kl_drift;
    j["max_factorization_gap"] = r.max_factorization_gap;
    auto ce = nlohmann::ordered_json::array();
    for (const auto& c : r.counterexamples) {
        ce.push_back({{"kind", c.kind}, {"obs", c.obs}, {"q", c.q}, {"bound", c.bound}, {"nll", c.nll}});
    }
    j["counterexamples"] = std::move(ce);
    return j;
}

/// The two-state model with uniform prior and likelihoods 0.8 / 0.2.
inline ToyModel two_state_model() {
    return ToyModel::flat("two_state", {0.5, 0.5}, {{0.8, 0.2}});
}

/// Models checked by the `verify-bound` command: |Z| = 2, |Z| = 4, and a
/// 3 x 2 factored space.
inline std::vector<ToyModel> standard_suite(std::uint64_t seed) {
    return {two_state_model(), random_flat_model("flat_4", 4, 3, derive_seed(seed, "flat_4")),
            random_factored_model("factored_3x2", {3, 2}, 3, derive_seed(seed, "factored_3x2"))};
}

} // namespace vvae::bound

#endif // VVAE_BOUND_VERIFIER_HPP
