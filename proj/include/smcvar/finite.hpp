#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace smcvar {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kStochasticTol = 1e-12;
constexpr double kInvarianceTol = 1e-10;
constexpr double kWeightRelTol = 1e-10;

struct FiniteDistribution {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double operator()(std::size_t x) const { return weights[x]; }

    double expectation(const std::vector<double>& phi) const {
        double s = 0.0;
        for (std::size_t x = 0; x < weights.size(); ++x) s += weights[x] * phi[x];
        return s;
    }

    double variance(const std::vector<double>& phi) const {
        const double m = expectation(phi);
        double s = 0.0;
        for (std::size_t x = 0; x < weights.size(); ++x) {
            const double d = phi[x] - m;
            s += weights[x] * d * d;
        }
        return s;
    }

    void validate(const std::string& name = "distribution") const {
        if (weights.empty()) throw ValidationError(name + ": empty state set");
        double sum = 0.0;
        for (std::size_t x = 0; x < weights.size(); ++x) {
            if (!(weights[x] >= 0.0))
                throw ValidationError(name + ": negative weight at state " + std::to_string(x));
            sum += weights[x];
        }
        if (std::abs(sum - 1.0) > kStochasticTol)
            throw ValidationError(name + ": weights sum to " + std::to_string(sum));
    }
};

struct TransitionKernel {
    std::vector<std::vector<double>> rows;

    std::size_t size() const { return rows.size(); }
    double operator()(std::size_t x, std::size_t y) const { return rows[x][y]; }

    void validate(const std::string& name = "kernel") const {
        if (rows.empty()) throw ValidationError(name + ": empty");
        for (std::size_t x = 0; x < rows.size(); ++x) {
            if (rows[x].size() != rows.size())
                throw ValidationError(name + ": row " + std::to_string(x) + " has wrong length");
            double sum = 0.0;
            for (double p : rows[x]) {
                if (!(p >= 0.0))
                    throw ValidationError(name + ": negative entry in row " + std::to_string(x));
                sum += p;
            }
            if (std::abs(sum - 1.0) > kStochasticTol)
                throw ValidationError(name + ": row " + std::to_string(x) + " sums to " + std::to_string(sum));
        }
    }

    // max_x |(mu K)(x) - mu(x)|
    double invariance_error(const FiniteDistribution& mu) const {
        const std::size_t n = rows.size();
        double worst = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            double v = 0.0;
            for (std::size_t x = 0; x < n; ++x) v += mu.weights[x] * rows[x][y];
            worst = std::max(worst, std::abs(v - mu.weights[y]));
        }
        return worst;
    }

    void validate_invariant_for(const FiniteDistribution& mu, double tol,
                                const std::string& name = "kernel") const {
        const double err = invariance_error(mu);
        if (err > tol)
            throw ValidationError(name + ": not invariant for its distribution (error " +
                                  std::to_string(err) + " > tolerance " + std::to_string(tol) + ")");
    }
};

// Mode partition at one stage: mode index (0-based) per state.
using Partition = std::vector<int>;

inline int partition_mode_count(const Partition& p) {
    int m = 0;
    for (int v : p) m = std::max(m, v + 1);
    return m;
}

// The bridging chain mu_0..mu_n with kernels K_1..K_n (kernel k invariant for
// mu_k) and incremental weights g_{k,k+1} = d mu_{k+1} / d mu_k.
struct BridgingSequence {
    std::vector<FiniteDistribution> distributions;   // n+1
    std::vector<TransitionKernel> kernels;           // n
    std::vector<Partition> partitions;               // empty, or one per stage 0..n
    double invariance_tol = kInvarianceTol;

    std::size_t stages() const { return kernels.size(); }           // n
    std::size_t state_count() const { return distributions.empty() ? 0 : distributions[0].size(); }

    std::vector<double> weight(std::size_t k) const {               // g_{k,k+1}
        const auto& cur = distributions[k].weights;
        const auto& nxt = distributions[k + 1].weights;
        std::vector<double> g(cur.size(), 0.0);
        for (std::size_t x = 0; x < cur.size(); ++x)
            if (cur[x] > 0.0) g[x] = nxt[x] / cur[x];
        return g;
    }

    void validate() const {
        if (distributions.size() < 2)
            throw ValidationError("bridging: need at least two distributions");
        if (kernels.size() + 1 != distributions.size())
            throw ValidationError("bridging: kernel count must be distribution count - 1");
        const std::size_t S = distributions[0].size();
        for (std::size_t k = 0; k < distributions.size(); ++k) {
            distributions[k].validate("mu_" + std::to_string(k));
            if (distributions[k].size() != S)
                throw ValidationError("bridging: mu_" + std::to_string(k) + " has wrong state count");
        }
        for (std::size_t k = 0; k < kernels.size(); ++k) {
            const std::string name = "K_" + std::to_string(k + 1);
            kernels[k].validate(name);
            if (kernels[k].size() != S) throw ValidationError("bridging: " + name + " has wrong state count");
            kernels[k].validate_invariant_for(distributions[k + 1], invariance_tol, name);
        }
        for (std::size_t k = 0; k + 1 < distributions.size(); ++k)
            for (std::size_t x = 0; x < S; ++x)
                if (distributions[k].weights[x] == 0.0 && distributions[k + 1].weights[x] > 0.0)
                    throw ValidationError("bridging: absolute continuity fails at stage " +
                                          std::to_string(k) + ", state " + std::to_string(x));
        if (!partitions.empty()) {
            if (partitions.size() != distributions.size())
                throw ValidationError("bridging: need one partition per stage");
            for (std::size_t k = 0; k < partitions.size(); ++k) {
                if (partitions[k].size() != S)
                    throw ValidationError("bridging: partition " + std::to_string(k) + " has wrong length");
                const int m = partition_mode_count(partitions[k]);
                std::vector<double> mass(m, 0.0);
                for (std::size_t x = 0; x < S; ++x) {
                    if (partitions[k][x] < 0)
                        throw ValidationError("bridging: negative mode index in partition " + std::to_string(k));
                    mass[partitions[k][x]] += distributions[k].weights[x];
                }
                for (int r = 0; r < m; ++r)
                    if (!(mass[r] > 0.0))
                        throw ValidationError("bridging: stage " + std::to_string(k) + " mode " +
                                              std::to_string(r) + " has zero mass");
            }
        }
    }
};

// Inner/border split of a partitioned state space (one fixed partition).
struct RegionStructure {
    Partition mode_of;
    std::vector<char> is_inner;

    std::size_t size() const { return mode_of.size(); }
    int mode_count() const { return partition_mode_count(mode_of); }

    void validate() const {
        if (mode_of.size() != is_inner.size())
            throw ValidationError("regions: mode/inner length mismatch");
        const int m = mode_count();
        std::vector<int> inner_count(m, 0);
        for (std::size_t x = 0; x < mode_of.size(); ++x)
            if (is_inner[x]) inner_count[mode_of[x]]++;
        for (int r = 0; r < m; ++r)
            if (inner_count[r] == 0)
                throw ValidationError("regions: mode " + std::to_string(r) + " has empty inner region");
    }
};

// mu_hat(x, .) = sum_r alpha[x][r] * local[r](.), sub-Markov when alphas sum below 1.
struct MetastableKernel {
    std::vector<std::vector<double>> alpha;              // state x mode
    std::vector<FiniteDistribution> local_restrictions;  // per mode, on the full state space

    std::size_t size() const { return alpha.size(); }

    double operator()(std::size_t x, std::size_t y) const {
        double v = 0.0;
        for (std::size_t r = 0; r < local_restrictions.size(); ++r)
            v += alpha[x][r] * local_restrictions[r].weights[y];
        return v;
    }

    void validate() const {
        for (std::size_t x = 0; x < alpha.size(); ++x) {
            double s = 0.0;
            for (double a : alpha[x]) {
                if (!(a >= 0.0)) throw ValidationError("metastable: negative alpha");
                s += a;
            }
            if (s > 1.0 + kStochasticTol)
                throw ValidationError("metastable: alphas at state " + std::to_string(x) + " exceed 1");
        }
        for (const auto& mu : local_restrictions) mu.validate("local restriction");
    }
};

// JSON document form: {"states": S, "distributions": [[...]], "kernels": [[[...]]],
// "partitions": [[...]]} with weights always recomputed, never stored.
inline BridgingSequence bridging_from_json(const nlohmann::json& j) {
    BridgingSequence seq;
    const auto S = j.at("states").get<std::size_t>();
    for (const auto& d : j.at("distributions")) {
        FiniteDistribution mu{d.get<std::vector<double>>()};
        if (mu.size() != S) throw ValidationError("json: distribution length mismatch");
        seq.distributions.push_back(std::move(mu));
    }
    for (const auto& k : j.at("kernels")) {
        TransitionKernel K{k.get<std::vector<std::vector<double>>>()};
        seq.kernels.push_back(std::move(K));
    }
    if (j.contains("partitions") && !j.at("partitions").is_null())
        for (const auto& p : j.at("partitions"))
            seq.partitions.push_back(p.get<Partition>());
    if (j.contains("invariance_tol")) seq.invariance_tol = j.at("invariance_tol").get<double>();
    seq.validate();
    return seq;
}

inline nlohmann::json bridging_to_json(const BridgingSequence& seq) {
    nlohmann::json j;
    j["states"] = seq.state_count();
    for (const auto& mu : seq.distributions) j["distributions"].push_back(mu.weights);
    for (const auto& K : seq.kernels) j["kernels"].push_back(K.rows);
    if (!seq.partitions.empty()) j["partitions"] = seq.partitions;
    if (seq.invariance_tol != kInvarianceTol) j["invariance_tol"] = seq.invariance_tol;
    return j;
}

} // namespace smcvar
