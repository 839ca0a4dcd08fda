#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "smcvar/finite.hpp"

namespace smcvar {

struct VarianceReport {
    std::vector<double> terms;               // V_{k,n}, k = 0..n
    double total = 0.0;                      // V_n = sum of terms
    double variance = 0.0;                   // Var_{mu_n}(phi), equals terms.back()
    // Same telescoping terms with each norm taken one stage later (in L2(mu_{k+1})
    // instead of L2(mu_k)). Kept as a labeled diagnostic; the CLT variance of the
    // algorithm is `total`.
    std::vector<double> stage_shifted_terms;
    double stage_shifted_total = 0.0;
};

// V_{k,n}(phi) = || G_{k,k+1} K_{k+1} ... G_{n-1,n} K_n phi_bar ||^2 in L2(mu_k),
// phi_bar = phi - mu_n(phi). Terms share the backward recursion
// h_n = phi_bar, h_k = g_{k,k+1} .* (K_{k+1} h_{k+1}).
inline VarianceReport asymptotic_variance_exact(const BridgingSequence& seq,
                                                const std::vector<double>& phi) {
    seq.validate();
    const std::size_t S = seq.state_count();
    const std::size_t n = seq.stages();
    if (phi.size() != S) throw ValidationError("variance: phi length mismatch");

    const auto& mu_n = seq.distributions[n];
    for (std::size_t x = 0; x < S; ++x)
        if (mu_n.weights[x] > 0.0 && !std::isfinite(phi[x]))
            throw ValidationError("variance: phi not finite on the support of mu_n");

    const double mean = mu_n.expectation(phi);
    std::vector<double> h(S);
    for (std::size_t x = 0; x < S; ++x) h[x] = mu_n.weights[x] > 0.0 ? phi[x] - mean : 0.0;

    VarianceReport rep;
    rep.terms.assign(n + 1, 0.0);
    rep.stage_shifted_terms.assign(n + 1, 0.0);
    rep.terms[n] = mu_n.variance(phi);
    rep.variance = rep.terms[n];
    rep.stage_shifted_terms[n] = rep.terms[n];

    std::vector<double> Kh(S), next(S);
    for (std::size_t k = n; k-- > 0;) {
        const auto& K = seq.kernels[k];                  // K_{k+1}
        for (std::size_t x = 0; x < S; ++x) {
            double v = 0.0;
            for (std::size_t y = 0; y < S; ++y) v += K(x, y) * h[y];
            Kh[x] = v;
        }
        const auto g = seq.weight(k);
        for (std::size_t x = 0; x < S; ++x) next[x] = g[x] * Kh[x];
        double norm_k = 0.0, norm_k1 = 0.0;
        for (std::size_t x = 0; x < S; ++x) {
            norm_k += seq.distributions[k].weights[x] * next[x] * next[x];
            norm_k1 += seq.distributions[k + 1].weights[x] * next[x] * next[x];
        }
        rep.terms[k] = norm_k;
        rep.stage_shifted_terms[k] = norm_k1;
        h = next;
    }
    for (double v : rep.terms) rep.total += v;
    for (double v : rep.stage_shifted_terms) rep.stage_shifted_total += v;
    return rep;
}

// ||| K - mu |||_{L2(mu)}: largest singular value of D^{1/2} (K - 1 mu^T) D^{-1/2}
// on the support of mu (zero-mass states dropped).
inline double operator_gap_l2(const TransitionKernel& K, const FiniteDistribution& mu) {
    const std::size_t S = mu.size();
    std::vector<std::size_t> keep;
    for (std::size_t x = 0; x < S; ++x)
        if (mu.weights[x] > 0.0) keep.push_back(x);
    if (keep.empty()) throw ValidationError("operator gap: distribution has empty support");

    const std::size_t m = keep.size();
    Eigen::MatrixXd A(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        const double di = std::sqrt(mu.weights[keep[i]]);
        for (std::size_t j = 0; j < m; ++j) {
            const double dj = std::sqrt(mu.weights[keep[j]]);
            A(i, j) = di * (K(keep[i], keep[j]) - mu.weights[keep[j]]) / dj;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(0);
}

struct MixingConstants {
    double gamma_g = 0.0;                    // max_k ||g_{k,k+1}||_inf
    double gamma_K = 0.0;                    // 1 - max_k |||K_k - mu_k|||
    std::optional<double> gamma_K_local;     // over partition-restricted kernels
};

namespace detail {

inline TransitionKernel restrict_to_cell(const TransitionKernel& K,
                                         const std::vector<std::size_t>& cell) {
    TransitionKernel R;
    R.rows.resize(cell.size());
    for (std::size_t i = 0; i < cell.size(); ++i) {
        R.rows[i].resize(cell.size());
        double sum = 0.0;
        for (std::size_t j = 0; j < cell.size(); ++j) sum += K(cell[i], cell[j]);
        for (std::size_t j = 0; j < cell.size(); ++j) R.rows[i][j] = K(cell[i], cell[j]) / sum;
    }
    return R;
}

inline FiniteDistribution restrict_distribution(const FiniteDistribution& mu,
                                                const std::vector<std::size_t>& cell) {
    FiniteDistribution r;
    r.weights.resize(cell.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < cell.size(); ++i) mass += mu.weights[cell[i]];
    if (!(mass > 0.0)) throw ValidationError("restriction: cell has zero mass");
    for (std::size_t i = 0; i < cell.size(); ++i) r.weights[i] = mu.weights[cell[i]] / mass;
    return r;
}

inline std::vector<std::vector<std::size_t>> cells_of(const Partition& p) {
    std::vector<std::vector<std::size_t>> cells(partition_mode_count(p));
    for (std::size_t x = 0; x < p.size(); ++x) cells[p[x]].push_back(x);
    return cells;
}

} // namespace detail

inline MixingConstants mixing_constants(const BridgingSequence& seq,
                                        bool want_local = false) {
    seq.validate();
    MixingConstants out;
    const std::size_t n = seq.stages();
    for (std::size_t k = 0; k < n; ++k) {
        const auto g = seq.weight(k);
        for (std::size_t x = 0; x < g.size(); ++x)
            if (seq.distributions[k].weights[x] > 0.0) out.gamma_g = std::max(out.gamma_g, g[x]);
    }
    double worst_gap = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        worst_gap = std::max(worst_gap, operator_gap_l2(seq.kernels[k], seq.distributions[k + 1]));
    out.gamma_K = 1.0 - worst_gap;

    if (want_local) {
        if (seq.partitions.empty())
            throw ValidationError("mixing constants: local gap requested without partitions");
        double worst_local = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto& part = seq.partitions[k + 1];
            const auto cells = detail::cells_of(part);
            for (std::size_t r = 0; r < cells.size(); ++r) {
                double leak = 0.0;
                for (std::size_t i : cells[r]) {
                    double in_cell = 0.0;
                    for (std::size_t j : cells[r]) in_cell += seq.kernels[k](i, j);
                    leak = std::max(leak, std::abs(1.0 - in_cell));
                }
                if (leak > kStochasticTol)
                    throw ValidationError("mixing constants: kernel K_" + std::to_string(k + 1) +
                                          " leaks mass out of mode " + std::to_string(r));
                const auto Kr = detail::restrict_to_cell(seq.kernels[k], cells[r]);
                const auto mur = detail::restrict_distribution(seq.distributions[k + 1], cells[r]);
                worst_local = std::max(worst_local, operator_gap_l2(Kr, mur));
            }
        }
        out.gamma_K_local = 1.0 - worst_local;
    }
    return out;
}

enum class AlphaRule { ExitProbability, StationaryMass };

inline MetastableKernel metastable_kernel(const FiniteDistribution& mu, const Partition& partition,
                                          AlphaRule rule, const TransitionKernel* K = nullptr) {
    const auto cells = detail::cells_of(partition);
    MetastableKernel mk;
    const std::size_t S = mu.size();
    for (const auto& cell : cells) {
        const auto local = detail::restrict_distribution(mu, cell);
        FiniteDistribution full{std::vector<double>(S, 0.0)};
        for (std::size_t i = 0; i < cell.size(); ++i) full.weights[cell[i]] = local.weights[i];
        mk.local_restrictions.push_back(std::move(full));
    }
    mk.alpha.assign(S, std::vector<double>(cells.size(), 0.0));
    if (rule == AlphaRule::StationaryMass) {
        std::vector<double> mass(cells.size(), 0.0);
        for (std::size_t r = 0; r < cells.size(); ++r)
            for (std::size_t x : cells[r]) mass[r] += mu.weights[x];
        for (std::size_t x = 0; x < S; ++x) mk.alpha[x] = mass;
    } else {
        if (!K) throw ValidationError("metastable: exit-probability rule needs a kernel");
        for (std::size_t x = 0; x < S; ++x)
            for (std::size_t r = 0; r < cells.size(); ++r) {
                double v = 0.0;
                for (std::size_t y : cells[r]) v += (*K)(x, y);
                mk.alpha[x][r] = v;
            }
    }
    mk.validate();
    return mk;
}

// Exit probabilities from border states: q[j](x) = P(chain started at x is inside
// I^(j) after u steps of the dynamics with every inner state absorbing).
inline std::vector<std::vector<double>> border_exit_probabilities(const TransitionKernel& P,
                                                                  const RegionStructure& regions,
                                                                  std::size_t u) {
    const std::size_t S = P.size();
    const int m = regions.mode_count();
    std::vector<std::vector<double>> q(m, std::vector<double>(S, 0.0));
    std::vector<double> v(S), next(S);
    for (int j = 0; j < m; ++j) {
        for (std::size_t x = 0; x < S; ++x)
            v[x] = (regions.is_inner[x] && regions.mode_of[x] == j) ? 1.0 : 0.0;
        for (std::size_t step = 0; step < u; ++step) {
            for (std::size_t x = 0; x < S; ++x) {
                if (regions.is_inner[x]) {
                    next[x] = v[x];
                    continue;
                }
                double acc = 0.0;
                for (std::size_t y = 0; y < S; ++y) acc += P(x, y) * v[y];
                next[x] = acc;
            }
            std::swap(v, next);
        }
        q[j] = v;
    }
    return q;
}

// pi_hat^(t): rows of inner states are the local restriction of their mode; rows of
// border states mix the local restrictions with the exit probabilities at floor(t/2).
inline std::vector<std::vector<double>> metastable_t_kernel(const TransitionKernel& P, std::size_t t,
                                                            const RegionStructure& regions,
                                                            const FiniteDistribution& mu) {
    if (t < 1) throw ValidationError("metastable t-kernel: t must be >= 1");
    P.validate("P");
    regions.validate();
    const std::size_t S = P.size();
    const int m = regions.mode_count();

    std::vector<FiniteDistribution> local;
    {
        const auto cells = detail::cells_of(regions.mode_of);
        for (const auto& cell : cells) {
            FiniteDistribution full{std::vector<double>(S, 0.0)};
            double mass = 0.0;
            for (std::size_t x : cell) mass += mu.weights[x];
            if (!(mass > 0.0)) throw ValidationError("metastable t-kernel: zero-mass mode");
            for (std::size_t x : cell) full.weights[x] = mu.weights[x] / mass;
            local.push_back(std::move(full));
        }
    }

    const auto q = border_exit_probabilities(P, regions, t / 2);
    std::vector<std::vector<double>> rows(S, std::vector<double>(S, 0.0));
    for (std::size_t x = 0; x < S; ++x) {
        if (regions.is_inner[x]) {
            rows[x] = local[regions.mode_of[x]].weights;
        } else {
            for (int j = 0; j < m; ++j)
                for (std::size_t y = 0; y < S; ++y) rows[x][y] += q[j][x] * local[j].weights[y];
        }
    }
    return rows;
}

inline std::vector<std::vector<double>> kernel_power(const TransitionKernel& P, std::size_t t) {
    const std::size_t S = P.size();
    std::vector<std::vector<double>> acc(S, std::vector<double>(S, 0.0));
    for (std::size_t x = 0; x < S; ++x) acc[x][x] = 1.0;
    std::vector<std::vector<double>> next(S, std::vector<double>(S));
    for (std::size_t step = 0; step < t; ++step) {
        for (std::size_t x = 0; x < S; ++x) {
            for (std::size_t y = 0; y < S; ++y) {
                double v = 0.0;
                for (std::size_t z = 0; z < S; ++z) v += acc[x][z] * P(z, y);
                next[x][y] = v;
            }
        }
        std::swap(acc, next);
    }
    return acc;
}

// ||| A - B |||_inf = max_x sum_y |A(x,y) - B(x,y)|, the operator norm on
// sup-norm-bounded test functions.
inline double sup_operator_distance(const std::vector<std::vector<double>>& A,
                                    const std::vector<std::vector<double>>& B) {
    if (A.size() != B.size()) throw ValidationError("sup distance: dimension mismatch");
    double worst = 0.0;
    for (std::size_t x = 0; x < A.size(); ++x) {
        if (A[x].size() != B[x].size()) throw ValidationError("sup distance: dimension mismatch");
        double row = 0.0;
        for (std::size_t y = 0; y < A[x].size(); ++y) row += std::abs(A[x][y] - B[x][y]);
        worst = std::max(worst, row);
    }
    return worst;
}

} // namespace smcvar
