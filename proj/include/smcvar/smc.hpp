#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "smcvar/finite.hpp"
#include "smcvar/rng.hpp"

namespace smcvar {

struct SmcParticleDeath : ValidationError {
    std::size_t stage;
    explicit SmcParticleDeath(std::size_t k)
        : ValidationError("smc: all particle weights are zero at stage " + std::to_string(k)),
          stage(k) {}
};

struct ResamplingPolicy {
    enum class Mode { EveryStage, EssThreshold };
    Mode mode = Mode::EveryStage;
    double threshold = 0.5;    // fraction of N, ess-threshold mode only

    void validate() const {
        if (mode == Mode::EssThreshold && !(threshold > 0.0 && threshold <= 1.0))
            throw ValidationError("resampling policy: threshold must lie in (0, 1]");
    }
};

inline double effective_sample_size(const std::vector<double>& w) {
    double sum = 0.0, sumsq = 0.0;
    for (double v : w) {
        sum += v;
        sumsq += v * v;
    }
    if (!(sumsq > 0.0)) return 0.0;
    return sum * sum / sumsq;
}

// N i.i.d. parent indices with P(parent = i) proportional to weights[i].
inline std::vector<std::size_t> multinomial_resample(const std::vector<double>& weights,
                                                     RngStream& rng) {
    const std::size_t N = weights.size();
    std::vector<double> cdf(N);
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        if (!(weights[i] >= 0.0)) throw ValidationError("resample: negative weight");
        acc += weights[i];
        cdf[i] = acc;
    }
    if (!(acc > 0.0)) throw ValidationError("resample: total weight is zero");
    std::vector<std::size_t> parents(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double u = rng.next_double() * acc;
        parents[i] = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (parents[i] >= N) parents[i] = N - 1;
    }
    return parents;
}

template <class State>
struct SmcResult {
    double estimate = 0.0;
    std::vector<double> ess_trace;     // one entry per weighting step
    std::vector<State> ensemble;       // final-stage particles
    std::vector<double> final_weights; // normalized; uniform in every-stage mode
    bool experimental = false;         // set by the ess-threshold extension
};

// Weight with g_{k,k+1}, resample, then mutate by K_{k+1}. The model provides
// stages(), sample_initial(rng), weight(k, state) and mutate(stage, state, rng).
template <class Model, class Phi>
SmcResult<typename Model::State> run_smc(const Model& model, std::size_t N, std::uint64_t seed,
                                         const ResamplingPolicy& policy, Phi&& phi,
                                         std::uint32_t replicate = 0) {
    policy.validate();
    if (N < 2) throw ValidationError("smc: need at least two particles");
    using State = typename Model::State;
    const std::size_t n = model.stages();

    std::vector<State> particles;
    particles.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        RngStream rng(seed, StreamRole::Init, replicate, 0, static_cast<std::uint32_t>(i));
        particles.push_back(model.sample_initial(rng));
    }

    SmcResult<State> out;
    const bool ess_mode = policy.mode == ResamplingPolicy::Mode::EssThreshold;
    out.experimental = ess_mode;
    std::vector<double> carried(N, 1.0);   // ess-threshold mode carries weights across stages

    std::vector<double> w(N);
    std::vector<State> next;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            w[i] = model.weight(k, particles[i]);
            if (!(w[i] >= 0.0)) throw ValidationError("smc: negative weight at stage " + std::to_string(k));
            if (ess_mode) w[i] *= carried[i];
        }
        const double ess = effective_sample_size(w);
        if (!(ess > 0.0)) throw SmcParticleDeath(k);
        out.ess_trace.push_back(ess);

        const bool resample = !ess_mode || ess < policy.threshold * double(N);
        if (resample) {
            RngStream rng(seed, StreamRole::Resample, replicate, static_cast<std::uint32_t>(k));
            const auto parents = multinomial_resample(w, rng);
            next.clear();
            next.reserve(N);
            for (std::size_t i = 0; i < N; ++i) next.push_back(particles[parents[i]]);
            particles.swap(next);
            std::fill(carried.begin(), carried.end(), 1.0);
        } else {
            double sum = 0.0;
            for (double v : w) sum += v;
            for (std::size_t i = 0; i < N; ++i) carried[i] = w[i] * double(N) / sum;
        }

        for (std::size_t i = 0; i < N; ++i) {
            RngStream rng(seed, StreamRole::Mutate, replicate, static_cast<std::uint32_t>(k + 1),
                          static_cast<std::uint32_t>(i));
            model.mutate(k + 1, particles[i], rng);
        }
    }

    out.final_weights.assign(N, 1.0 / double(N));
    if (ess_mode) {
        double sum = 0.0;
        for (double v : carried) sum += v;
        for (std::size_t i = 0; i < N; ++i) out.final_weights[i] = carried[i] / sum;
    }
    double est = 0.0;
    for (std::size_t i = 0; i < N; ++i) est += out.final_weights[i] * phi(particles[i]);
    out.estimate = est;
    out.ensemble = std::move(particles);
    return out;
}

// Finite-state adapter: exact initial sampling and kernel-row mutation by inverse CDF.
struct FiniteModel {
    using State = std::size_t;

    explicit FiniteModel(const BridgingSequence& s) : seq(&s) {
        s.validate();
        mu0_cdf = cumulative(s.distributions[0].weights);
        for (std::size_t k = 0; k < s.stages(); ++k) {
            g.push_back(s.weight(k));
            std::vector<std::vector<double>> rows;
            for (const auto& row : s.kernels[k].rows) rows.push_back(cumulative(row));
            kernel_cdf.push_back(std::move(rows));
        }
    }

    std::size_t stages() const { return seq->stages(); }

    State sample_initial(RngStream& rng) const { return draw(mu0_cdf, rng); }

    double weight(std::size_t k, const State& x) const { return g[k][x]; }

    void mutate(std::size_t stage, State& x, RngStream& rng) const {
        x = draw(kernel_cdf[stage - 1][x], rng);
    }

    const BridgingSequence* seq;
    std::vector<double> mu0_cdf;
    std::vector<std::vector<double>> g;
    std::vector<std::vector<std::vector<double>>> kernel_cdf;

private:
    static std::vector<double> cumulative(const std::vector<double>& w) {
        std::vector<double> c(w.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            c[i] = acc;
        }
        return c;
    }

    static std::size_t draw(const std::vector<double>& cdf, RngStream& rng) {
        const double u = rng.next_double() * cdf.back();
        std::size_t i = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        return i < cdf.size() ? i : cdf.size() - 1;
    }
};

struct ReplicateVarianceReport {
    double n_times_variance = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t replicates_used = 0;
    std::size_t deaths = 0;
    std::vector<double> estimates;
};

// N times the sample variance of independent replicate estimates, with a 99%
// jackknife confidence interval. Replicates that die are excluded but counted.
template <class Model, class Phi>
ReplicateVarianceReport replicate_asymptotic_variance(const Model& model, Phi&& phi, std::size_t N,
                                                      std::size_t R, std::uint64_t seed,
                                                      const ResamplingPolicy& policy = {}) {
    if (R < 2) throw ValidationError("replicate variance: need at least two replicates");
    ReplicateVarianceReport rep;
    for (std::size_t r = 0; r < R; ++r) {
        try {
            const auto res = run_smc(model, N, seed, policy, phi, static_cast<std::uint32_t>(r));
            rep.estimates.push_back(res.estimate);
        } catch (const SmcParticleDeath&) {
            ++rep.deaths;
        }
    }
    rep.replicates_used = rep.estimates.size();
    const std::size_t m = rep.replicates_used;
    if (m < 3) throw ValidationError("replicate variance: fewer than three surviving replicates");

    double sum = 0.0;
    for (double v : rep.estimates) sum += v;
    const double mean = sum / double(m);
    double ss = 0.0;
    for (double v : rep.estimates) ss += (v - mean) * (v - mean);
    rep.n_times_variance = double(N) * ss / double(m - 1);

    // Jackknife over replicates: leave-one-out recomputation of N * sample variance.
    std::vector<double> loo(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = rep.estimates[i];
        const double ss_i = ss - (x - mean) * (x - mean) * double(m) / double(m - 1);
        loo[i] = double(N) * std::max(ss_i, 0.0) / double(m - 2);
    }
    double loo_mean = 0.0;
    for (double v : loo) loo_mean += v;
    loo_mean /= double(m);
    double se2 = 0.0;
    for (double v : loo) se2 += (v - loo_mean) * (v - loo_mean);
    se2 *= double(m - 1) / double(m);
    const double z = 2.575829303548901;   // 99% two-sided normal quantile
    const double se = std::sqrt(se2);
    rep.ci_lo = rep.n_times_variance - z * se;
    rep.ci_hi = rep.n_times_variance + z * se;
    return rep;
}

} // namespace smcvar
