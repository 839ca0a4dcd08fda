#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "smcvar/bounds.hpp"
#include "smcvar/variance.hpp"

namespace support {

using smcvar::BridgingSequence;
using smcvar::FiniteDistribution;
using smcvar::Partition;
using smcvar::RegionStructure;
using smcvar::TransitionKernel;

inline FiniteDistribution random_distribution(std::mt19937_64& gen, std::size_t S, double spread) {
    std::normal_distribution<double> normal;
    std::vector<double> w(S);
    double sum = 0.0;
    for (double& v : w) {
        v = std::exp(spread * normal(gen));
        sum += v;
    }
    for (double& v : w) v /= sum;
    return FiniteDistribution{std::move(w)};
}

// a * Metropolis(mu, uniform proposal) + (1-a) * 1 mu^T; reversible for mu by construction.
inline TransitionKernel metropolis_mix_kernel(const FiniteDistribution& mu, double a) {
    const std::size_t S = mu.size();
    TransitionKernel K;
    K.rows.assign(S, std::vector<double>(S, 0.0));
    for (std::size_t x = 0; x < S; ++x) {
        double off = 0.0;
        for (std::size_t y = 0; y < S; ++y) {
            if (y == x) continue;
            const double acc = std::min(1.0, mu.weights[y] / mu.weights[x]);
            K.rows[x][y] = acc / double(S);
            off += K.rows[x][y];
        }
        K.rows[x][x] = 1.0 - off;
        for (std::size_t y = 0; y < S; ++y)
            K.rows[x][y] = a * K.rows[x][y] + (1.0 - a) * mu.weights[y];
    }
    return K;
}

struct BridgingOptions {
    std::size_t s_lo = 4, s_hi = 8;
    std::size_t n_lo = 1, n_hi = 4;
    double spread = 0.4;
    double mix_lo = 0.25, mix_hi = 0.85;
};

inline BridgingSequence random_bridging(std::mt19937_64& gen, const BridgingOptions& opt = {}) {
    std::uniform_int_distribution<std::size_t> pick_s(opt.s_lo, opt.s_hi), pick_n(opt.n_lo, opt.n_hi);
    std::uniform_real_distribution<double> pick_a(opt.mix_lo, opt.mix_hi);
    const std::size_t S = pick_s(gen), n = pick_n(gen);
    BridgingSequence seq;
    for (std::size_t k = 0; k <= n; ++k) seq.distributions.push_back(random_distribution(gen, S, opt.spread));
    for (std::size_t k = 0; k < n; ++k)
        seq.kernels.push_back(metropolis_mix_kernel(seq.distributions[k + 1], pick_a(gen)));
    seq.validate();
    return seq;
}

// Retries until the global-mixing precondition Gamma_g (1-gamma_K)^2 < 1 holds with margin.
inline BridgingSequence random_bridging_global(std::mt19937_64& gen) {
    for (;;) {
        auto seq = random_bridging(gen);
        const auto mc = smcvar::mixing_constants(seq);
        if ((1.0 - mc.gamma_K) * (1.0 - mc.gamma_K) * mc.gamma_g < 0.97) return seq;
    }
}

// Mild weights and strong mixing so the finite-N bias stays well under the CI width.
inline BridgingSequence random_bridging_gentle(std::mt19937_64& gen) {
    BridgingOptions opt;
    opt.spread = 0.25;
    opt.mix_lo = 0.3;
    opt.mix_hi = 0.9;
    return random_bridging(gen, opt);
}

// Unrestricted instance carrying a random two-cell partition per stage.
inline BridgingSequence random_bridging_partitioned(std::mt19937_64& gen) {
    BridgingOptions opt;
    opt.s_lo = 4;
    opt.n_lo = 2;
    opt.n_hi = 5;
    auto seq = random_bridging(gen, opt);
    const std::size_t S = seq.state_count();
    std::uniform_int_distribution<std::size_t> cut(1, S - 1);
    for (std::size_t k = 0; k <= seq.stages(); ++k) {
        Partition p(S, 0);
        const std::size_t c = cut(gen);
        for (std::size_t x = c; x < S; ++x) p[x] = 1;
        seq.partitions.push_back(std::move(p));
    }
    seq.validate();
    return seq;
}

struct BlockyInstance {
    BridgingSequence seq;
    Partition partition;
};

// Two-mode block-diagonal kernels; retries until the no-mixing precondition holds.
inline BlockyInstance random_blocky_bridging(std::mt19937_64& gen) {
    std::uniform_int_distribution<std::size_t> pick_b(2, 4), pick_n(1, 4);
    std::uniform_real_distribution<double> pick_a(0.3, 0.9), pick_mass(0.2, 0.8);
    for (;;) {
        const std::size_t S1 = pick_b(gen), S2 = pick_b(gen), S = S1 + S2, n = pick_n(gen);
        BlockyInstance inst;
        inst.partition.assign(S, 0);
        for (std::size_t x = S1; x < S; ++x) inst.partition[x] = 1;

        for (std::size_t k = 0; k <= n; ++k) {
            const double m1 = pick_mass(gen);
            auto a = random_distribution(gen, S1, 0.4);
            auto b = random_distribution(gen, S2, 0.4);
            std::vector<double> w(S);
            for (std::size_t x = 0; x < S1; ++x) w[x] = m1 * a.weights[x];
            for (std::size_t x = 0; x < S2; ++x) w[S1 + x] = (1.0 - m1) * b.weights[x];
            inst.seq.distributions.push_back(FiniteDistribution{std::move(w)});
        }
        for (std::size_t k = 0; k < n; ++k) {
            const auto& mu = inst.seq.distributions[k + 1];
            TransitionKernel K;
            K.rows.assign(S, std::vector<double>(S, 0.0));
            for (auto [lo, hi] : {std::pair<std::size_t, std::size_t>{0, S1}, {S1, S}}) {
                FiniteDistribution local;
                double mass = 0.0;
                for (std::size_t x = lo; x < hi; ++x) mass += mu.weights[x];
                for (std::size_t x = lo; x < hi; ++x) local.weights.push_back(mu.weights[x] / mass);
                const auto Kb = metropolis_mix_kernel(local, pick_a(gen));
                for (std::size_t x = lo; x < hi; ++x)
                    for (std::size_t y = lo; y < hi; ++y) K.rows[x][y] = Kb(x - lo, y - lo);
            }
            inst.seq.kernels.push_back(std::move(K));
        }
        inst.seq.validate();
        const auto mc = [&] {
            auto copy = inst.seq;
            for (std::size_t k = 0; k <= n; ++k) copy.partitions.push_back(inst.partition);
            return smcvar::mixing_constants(copy, true);
        }();
        if ((1.0 - *mc.gamma_K_local) * (1.0 - *mc.gamma_K_local) * mc.gamma_g < 0.97) return inst;
    }
}

struct RegionChain {
    TransitionKernel P;
    RegionStructure regions;
    FiniteDistribution mu;
};

inline RegionChain random_region_chain(std::mt19937_64& gen) {
    std::uniform_int_distribution<std::size_t> pick_s(4, 9);
    std::uniform_int_distribution<int> pick_m(1, 3), coin(0, 1);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    const std::size_t S = pick_s(gen);
    const int m = std::min<int>(pick_m(gen), int(S / 2));

    RegionChain rc;
    rc.P.rows.assign(S, std::vector<double>(S));
    for (auto& row : rc.P.rows) {
        double sum = 0.0;
        for (double& v : row) {
            v = gamma(gen) + 1e-6;
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    rc.mu = random_distribution(gen, S, 0.5);
    rc.regions.mode_of.resize(S);
    rc.regions.is_inner.assign(S, 0);
    for (std::size_t x = 0; x < S; ++x) rc.regions.mode_of[x] = int(x) % m;
    for (int r = 0; r < m; ++r) rc.regions.is_inner[r] = 1;       // first state of each mode
    for (std::size_t x = std::size_t(m); x < S; ++x) rc.regions.is_inner[x] = char(coin(gen));
    rc.regions.validate();
    return rc;
}

inline std::vector<double> random_phi(std::mt19937_64& gen, std::size_t S) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> phi(S);
    for (double& v : phi) v = u(gen);
    return phi;
}

// Five-state chain with one border state that exits to the two inner regions with
// probabilities 0.3 and 0.5 and stays put with probability 0.2.
struct ToyChain {
    TransitionKernel P{{{0.60, 0.30, 0.10, 0.00, 0.00},
                        {0.25, 0.65, 0.10, 0.00, 0.00},
                        {0.15, 0.15, 0.20, 0.25, 0.25},
                        {0.00, 0.00, 0.00, 0.70, 0.30},
                        {0.00, 0.00, 0.00, 0.40, 0.60}}};
    RegionStructure regions{{0, 0, 0, 1, 1}, {1, 1, 0, 1, 1}};
    FiniteDistribution mu{{0.20, 0.25, 0.05, 0.30, 0.20}};
};

// Three-state one-stage sequence with a perfectly mixing kernel.
inline BridgingSequence toy_bridging() {
    BridgingSequence seq;
    seq.distributions = {FiniteDistribution{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, FiniteDistribution{{0.5, 0.3, 0.2}}};
    seq.kernels = {TransitionKernel{{{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}}}};
    seq.validate();
    return seq;
}

// Upper bound on W1: minimum cost over all north-west-corner allocations under
// row/column reorderings. These staircase allocations are feasible but do not
// exhaust the extreme points, so this can sit strictly above the optimum.
inline double nw_transport_upper_bound(std::vector<double> a, std::vector<double> b,
                                       const std::vector<std::vector<double>>& cost) {
    std::vector<std::size_t> rp(a.size()), cp(b.size());
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(cp.begin(), cp.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::sort(rp.begin(), rp.end());
    do {
        std::sort(cp.begin(), cp.end());
        do {
            auto ra = a;
            auto rb = b;
            double total = 0.0;
            std::size_t i = 0, j = 0;
            while (i < ra.size() && j < rb.size()) {
                const double f = std::min(ra[rp[i]], rb[cp[j]]);
                total += f * cost[rp[i]][cp[j]];
                ra[rp[i]] -= f;
                rb[cp[j]] -= f;
                if (ra[rp[i]] <= rb[cp[j]]) ++i;
                else ++j;
            }
            best = std::min(best, total);
        } while (std::next_permutation(cp.begin(), cp.end()));
    } while (std::next_permutation(rp.begin(), rp.end()));
    return best;
}

#ifdef SMCVAR_CLI_BIN
struct CliResult {
    int code = -1;
    std::string out;
};

inline CliResult run_cli(const std::string& args) {
    CliResult res;
    const std::string cmd = std::string(SMCVAR_CLI_BIN) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return res;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, got);
    const int st = ::pclose(pipe);
    res.code = (st >= 0 && WIFEXITED(st)) ? WEXITSTATUS(st) : -1;
    return res;
}
#endif

inline std::string read_file(const std::string& path) {
    std::string out;
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return out;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, got);
    std::fclose(f);
    return out;
}

} // namespace support
