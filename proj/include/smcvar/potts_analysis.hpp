#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "smcvar/potts.hpp"
#include "smcvar/rng.hpp"

namespace smcvar {

struct SeriesReport {
    std::vector<double> index;
    std::vector<double> values;        // B_{j,j+1}
    std::vector<double> ratio;         // (B-1) / (log(j)^1.5 / j^1.5), zero for j < 2
    double max_ratio = 0.0;
    double argmax_ratio = 0.0;
    double min_value = 0.0;
    double last_decade_slope = 0.0;    // least-squares slope of ratio over [j_max/10, j_max]
};

// B_{j,j+1} for the interpolation schedule: prefix-j mode masses under the size-j
// model against the size-(j+1) model reduced by removing one uniform spin. Sizes
// 0 and 1 are exactly 1: color symmetry makes both one-spin marginals uniform.
inline SeriesReport growth_constants_series(std::size_t j_max, double beta_tilde = kBetaCritical) {
    if (j_max < 3) throw ValidationError("growth series: j_max must be >= 3");
    SeriesReport rep;
    rep.min_value = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= j_max; ++j) {
        double B = 1.0;
        if (j >= 2) {
            const auto small = magnetisation_log_pmf({j, beta_tilde});
            const auto big = magnetisation_log_pmf({j + 1, beta_tilde});
            const auto reduced = remove_one_spin([&] {
                std::vector<double> p(big.log_pmf.size());
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(big.log_pmf[i]);
                return p;
            }(), j + 1);
            std::array<detail::NeumaierSum, 4> mass_small{}, mass_red{};
            const long long jj = static_cast<long long>(j);
            for (std::size_t i = 0; i < small.log_pmf.size(); ++i) {
                const int m = mode_of_counts(small.lat.counts(i), jj) - 1;
                mass_small[m].add(std::exp(small.log_pmf[i]));
                mass_red[m].add(reduced[i]);
            }
            B = 0.0;
            for (int r = 0; r < 4; ++r) {
                const double ms = mass_small[r].value();
                if (ms > 0.0) B = std::max(B, mass_red[r].value() / ms);
            }
        }
        rep.index.push_back(double(j));
        rep.values.push_back(B);
        const double lj = std::log(double(j));
        rep.ratio.push_back(j >= 2 ? (B - 1.0) / (std::pow(lj, 1.5) / std::pow(double(j), 1.5))
                                   : 0.0);
        rep.min_value = std::min(rep.min_value, B);
    }
    for (std::size_t i = 2; i < rep.ratio.size(); ++i)
        if (rep.ratio[i] > rep.max_ratio) {
            rep.max_ratio = rep.ratio[i];
            rep.argmax_ratio = rep.index[i];
        }
    const double lo = double(j_max) / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t i = 0; i < rep.ratio.size(); ++i) {
        if (rep.index[i] < lo || i < 2) continue;
        sx += rep.index[i];
        sy += rep.ratio[i];
        sxx += rep.index[i] * rep.index[i];
        sxy += rep.index[i] * rep.ratio[i];
        cnt += 1;
    }
    if (cnt >= 2) rep.last_decade_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return rep;
}

namespace detail {

inline std::array<double, 3> ratios(const std::array<long long, 3>& n, std::size_t M) {
    return {double(n[0]) / double(M), double(n[1]) / double(M), double(n[2]) / double(M)};
}

} // namespace detail

// Stage-wise max of the interpolation weight g_{k,k+1}, enumerated exactly over
// magnetisation states and the added spin's color. Stage 0 is identically 1.
inline double max_interpolation_weight(std::size_t M, double beta_tilde = kBetaCritical,
                                       std::vector<double>* per_stage = nullptr) {
    if (M < 1) throw ValidationError("interpolation weight: M must be >= 1");
    if (per_stage) per_stage->assign(M, 1.0);
    double overall = 1.0;
    std::vector<double> log_Z(M + 1, 0.0);
    for (std::size_t j = 1; j <= M; ++j)
        log_Z[j] = magnetisation_log_pmf({j, beta_tilde}).log_Z;
    for (std::size_t k = 1; k + 1 <= M; ++k) {
        const MagnetisationLattice lat{k};
        double stage_max = 0.0;
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const auto n = lat.counts(i);
            const double Ek =
                double(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) / double(k);
            for (int c = 0; c < 3; ++c) {
                auto m = n;
                m[c] += 1;
                const double Ek1 =
                    double(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) / double(k + 1);
                const double g = std::exp(std::log(3.0) + log_Z[k] - log_Z[k + 1] +
                                          beta_tilde * (Ek1 - Ek));
                stage_max = std::max(stage_max, g);
            }
        }
        if (per_stage) (*per_stage)[k] = stage_max;
        overall = std::max(overall, stage_max);
    }
    return overall;
}

struct DriftRow {
    std::array<long long, 3> n{0, 0, 0};
    double d_C = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct DriftReport {
    double worst_slack = -std::numeric_limits<double>::infinity();
    std::array<long long, 3> arg{0, 0, 0};
    double center_adjacent_max_abs_drift = 0.0;   // near the C_4 lattice point
    std::size_t states_checked = 0;
};

// Exact one-step drift of d_C against -phi(d_C)/M + (8 + 1/(2(d_C - 1/M)))/M^2,
// over every lattice state with d_C > 1/M. Throws if any state violates the bound.
inline DriftReport drift_verify(std::size_t M, double beta_tilde = kBetaCritical,
                                std::vector<DriftRow>* rows = nullptr) {
    if (M < 12) throw ValidationError("drift: M must be >= 12");
    const PottsParams params{M, beta_tilde};
    const MagnetisationLattice lat{M};
    DriftReport rep;

    const long long c4 = static_cast<long long>(std::llround(double(M) / 3.0));
    const std::array<long long, 3> center{c4, c4, static_cast<long long>(M) - 2 * c4};

    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto n = lat.counts(i);
        const double d0 = center_geometry(detail::ratios(n, M)).d_C;
        if (!(d0 > 1.0 / double(M))) continue;
        double lhs = 0.0;
        for (const auto& tr : magnetisation_transitions(n, params))
            lhs += tr.prob * (center_geometry(detail::ratios(tr.to, M)).d_C - d0);
        const double rhs = -drift_phi(d0) / double(M) +
                           (8.0 + 0.5 / (d0 - 1.0 / double(M))) / (double(M) * double(M));
        const double slack = lhs - rhs;
        if (rows) rows->push_back({n, d0, lhs, rhs});
        ++rep.states_checked;
        if (slack > rep.worst_slack) {
            rep.worst_slack = slack;
            rep.arg = n;
        }
        const long long dist = std::llabs(n[0] - center[0]) + std::llabs(n[1] - center[1]) +
                               std::llabs(n[2] - center[2]);
        if (dist <= 2) rep.center_adjacent_max_abs_drift =
            std::max(rep.center_adjacent_max_abs_drift, std::abs(lhs));
    }
    if (rep.worst_slack > 0.0)
        throw ValidationError("drift: bound violated at state (" + std::to_string(rep.arg[0]) + "," +
                              std::to_string(rep.arg[1]) + "," + std::to_string(rep.arg[2]) +
                              ") by " + std::to_string(rep.worst_slack));
    return rep;
}

struct JumpVarianceReport {
    double min_times_m2 = 0.0;
    std::array<long long, 3> argmin{0, 0, 0};
};

// min over lattice states of Var(d_C(S(1)) | S(0) = s) * M^2.
inline JumpVarianceReport jump_variance_min(std::size_t M, double beta_tilde = kBetaCritical,
                                            std::vector<std::pair<std::array<long long, 3>, double>>*
                                                rows = nullptr) {
    const PottsParams params{M, beta_tilde};
    const MagnetisationLattice lat{M};
    JumpVarianceReport rep;
    rep.min_times_m2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto n = lat.counts(i);
        double e1 = 0.0, e2 = 0.0;
        for (const auto& tr : magnetisation_transitions(n, params)) {
            const double d = center_geometry(detail::ratios(tr.to, M)).d_C;
            e1 += tr.prob * d;
            e2 += tr.prob * d * d;
        }
        const double var = std::max(e2 - e1 * e1, 0.0) * double(M) * double(M);
        if (rows) rows->push_back({n, var});
        if (var < rep.min_times_m2) {
            rep.min_times_m2 = var;
            rep.argmin = n;
        }
    }
    return rep;
}

// Exact optimal transport cost on small supports via the transportation simplex
// with Bland's rule. Masses must balance within 1e-9.
inline double transport_w1(std::vector<double> a, std::vector<double> b,
                           const std::vector<std::vector<double>>& cost) {
    const std::size_t p = a.size(), q = b.size();
    if (cost.size() != p) throw ValidationError("transport: cost row count mismatch");
    for (const auto& row : cost)
        if (row.size() != q) throw ValidationError("transport: cost column count mismatch");
    double sa = 0.0, sb = 0.0;
    for (double v : a) {
        if (!(v >= 0.0)) throw ValidationError("transport: negative mass");
        sa += v;
    }
    for (double v : b) {
        if (!(v >= 0.0)) throw ValidationError("transport: negative mass");
        sb += v;
    }
    if (std::abs(sa - sb) > 1e-9) throw ValidationError("transport: unbalanced masses");
    if (!(sa > 0.0)) return 0.0;
    for (double& v : b) v *= sa / sb;

    struct Cell {
        std::size_t i, j;
        double x;
    };
    std::vector<Cell> basis;
    std::vector<std::vector<char>> in_basis(p, std::vector<char>(q, 0));
    {
        std::vector<double> ra = a, rb = b;
        std::size_t i = 0, j = 0;
        while (basis.size() < p + q - 1) {
            const double x = std::min(ra[i], rb[j]);
            basis.push_back({i, j, x});
            in_basis[i][j] = 1;
            ra[i] -= x;
            rb[j] -= x;
            if (i + 1 < p && (ra[i] <= rb[j] || j + 1 == q))
                ++i;
            else
                ++j;
        }
    }

    for (std::size_t iter = 0; iter < 10000; ++iter) {
        std::vector<double> u(p, 0.0), v(q, 0.0);
        std::vector<char> uk(p, 0), vk(q, 0);
        uk[0] = 1;
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& c : basis) {
                if (uk[c.i] && !vk[c.j]) {
                    v[c.j] = cost[c.i][c.j] - u[c.i];
                    vk[c.j] = 1;
                    changed = true;
                } else if (!uk[c.i] && vk[c.j]) {
                    u[c.i] = cost[c.i][c.j] - v[c.j];
                    uk[c.i] = 1;
                    changed = true;
                }
            }
        }
        std::size_t ei = p, ej = q;
        for (std::size_t i = 0; i < p && ei == p; ++i)
            for (std::size_t j = 0; j < q; ++j)
                if (!in_basis[i][j] && cost[i][j] - u[i] - v[j] < -1e-12) {
                    ei = i;
                    ej = j;
                    break;
                }
        if (ei == p) break;

        // The basis is a spanning tree on rows+columns; adding (ei, ej) closes one
        // cycle. Walk it with a DFS over basis cells from column ej back to row ei.
        std::vector<int> parent_cell(p + q, -1);
        std::vector<char> seen(p + q, 0);
        std::vector<std::size_t> stack;
        seen[ei] = 1;
        stack.push_back(ei);
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            for (std::size_t bi = 0; bi < basis.size(); ++bi) {
                const auto& c = basis[bi];
                const std::size_t rn = c.i, cn = p + c.j;
                std::size_t from = p + q, to = p + q;
                if (node == rn && !seen[cn]) {
                    from = rn;
                    to = cn;
                } else if (node == cn && !seen[rn]) {
                    from = cn;
                    to = rn;
                }
                if (to == p + q) continue;
                seen[to] = 1;
                parent_cell[to] = static_cast<int>(bi);
                stack.push_back(to);
                (void)from;
            }
        }
        std::vector<std::size_t> cycle;   // basis cell indices along the path ej -> ei
        std::size_t node = p + ej;
        while (node != ei) {
            const int bi = parent_cell[node];
            if (bi < 0) throw ValidationError("transport: basis lost connectivity");
            cycle.push_back(bi);
            const auto& c = basis[bi];
            node = (node == c.i) ? p + c.j : c.i;
        }
        // Alternating signs: entering cell +, then -, +, ... along the path.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = basis.size();
        for (std::size_t s = 0; s < cycle.size(); ++s) {
            if (s % 2 == 0 && basis[cycle[s]].x < theta) {
                theta = basis[cycle[s]].x;
                leave = cycle[s];
            }
        }
        for (std::size_t s = 0; s < cycle.size(); ++s)
            basis[cycle[s]].x += (s % 2 == 0) ? -theta : theta;
        in_basis[basis[leave].i][basis[leave].j] = 0;
        basis[leave] = {ei, ej, theta};
        in_basis[ei][ej] = 1;
    }

    double total = 0.0;
    for (const auto& c : basis) total += c.x * cost[c.i][c.j];
    return total;
}

struct CurvatureReport {
    double min_kappa_times_m = 0.0;
    std::array<long long, 3> arg_x{0, 0, 0};
    std::array<long long, 3> arg_y{0, 0, 0};
    std::size_t pairs_checked = 0;
    std::size_t region_states = 0;
};

namespace detail {

struct BoxRegion {
    std::array<long long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    long long M = 0;

    bool contains(const std::array<long long, 3>& n) const {
        for (int l = 0; l < 3; ++l)
            if (n[l] < lo[l] || n[l] > hi[l]) return false;
        return true;
    }
};

inline BoxRegion lambda_box(long long M, double rho, int mode) {
    BoxRegion box;
    box.M = M;
    for (int l = 0; l < 3; ++l) {
        const double C = BarycentricGeometry::centers[mode - 1][l];
        box.lo[l] = std::max<long long>(0, llround(std::ceil((C - rho) * double(M) - 1e-9)));
        box.hi[l] = std::min<long long>(M, llround(std::floor((C + 2.0 * rho) * double(M) + 1e-9)));
    }
    return box;
}

// One-step law of the Lambda-restricted magnetisation chain at x: mass that would
// leave the box is folded into staying at x.
inline std::vector<std::pair<std::array<long long, 3>, double>> restricted_law(
    const std::array<long long, 3>& x, const BoxRegion& box, const PottsParams& params) {
    std::vector<std::pair<std::array<long long, 3>, double>> out;
    double fold = 0.0;
    for (const auto& tr : magnetisation_transitions(x, params)) {
        if (box.contains(tr.to))
            out.push_back({tr.to, tr.prob});
        else
            fold += tr.prob;
    }
    if (fold > 0.0) {
        bool found = false;
        for (auto& e : out)
            if (e.first == x) {
                e.second += fold;
                found = true;
            }
        if (!found) out.push_back({x, fold});
    }
    std::sort(out.begin(), out.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    return out;
}

inline double half_l1(const std::array<long long, 3>& a, const std::array<long long, 3>& b) {
    return 0.5 * double(std::llabs(a[0] - b[0]) + std::llabs(a[1] - b[1]) + std::llabs(a[2] - b[2]));
}

} // namespace detail

// Coarse Ricci curvature of the Lambda-restricted magnetisation chain on adjacent
// pairs: kappa = 1 - W_1(P(x,.), P(y,.)) for d_Lambda(x,y) = 1. sample_pairs = 0
// sweeps every adjacent pair in the box.
inline CurvatureReport curvature_check(long long M, double rho, int mode,
                                       std::size_t sample_pairs, std::uint64_t seed,
                                       double beta_tilde = kBetaCritical) {
    if (mode < 1 || mode > 4) throw ValidationError("curvature: mode must be 1..4");
    const auto box = detail::lambda_box(M, rho, mode);
    std::vector<std::array<long long, 3>> states;
    for (long long n1 = box.lo[0]; n1 <= box.hi[0]; ++n1)
        for (long long n2 = box.lo[1]; n2 <= box.hi[1]; ++n2) {
            const long long n3 = M - n1 - n2;
            if (n3 < box.lo[2] || n3 > box.hi[2]) continue;
            states.push_back({n1, n2, n3});
        }
    if (states.size() < 2) throw ValidationError("curvature: region holds fewer than two lattice points");

    const PottsParams params{std::size_t(M), beta_tilde};
    CurvatureReport rep;
    rep.region_states = states.size();
    rep.min_kappa_times_m = std::numeric_limits<double>::infinity();

    auto eval_pair = [&](const std::array<long long, 3>& x, const std::array<long long, 3>& y) {
        const auto lx = detail::restricted_law(x, box, params);
        const auto ly = detail::restricted_law(y, box, params);
        std::vector<double> a, b;
        std::vector<std::vector<double>> cost(lx.size(), std::vector<double>(ly.size()));
        for (std::size_t i = 0; i < lx.size(); ++i) a.push_back(lx[i].second);
        for (std::size_t j = 0; j < ly.size(); ++j) b.push_back(ly[j].second);
        for (std::size_t i = 0; i < lx.size(); ++i)
            for (std::size_t j = 0; j < ly.size(); ++j)
                cost[i][j] = detail::half_l1(lx[i].first, ly[j].first);
        const double w1 = transport_w1(a, b, cost);
        const double kappa = 1.0 - w1;   // d_Lambda(x, y) = 1 for adjacent pairs
        ++rep.pairs_checked;
        if (kappa * double(M) < rep.min_kappa_times_m) {
            rep.min_kappa_times_m = kappa * double(M);
            rep.arg_x = x;
            rep.arg_y = y;
        }
    };

    static constexpr int moves[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
    if (sample_pairs == 0) {
        for (const auto& x : states)
            for (const auto& mv : moves) {
                if (x[mv[0]] == 0) continue;
                auto y = x;
                y[mv[0]] -= 1;
                y[mv[1]] += 1;
                if (!box.contains(y)) continue;
                if (y < x) continue;   // each unordered pair once
                eval_pair(x, y);
            }
    } else {
        RngStream rng(seed, StreamRole::Scalar, 0, 0, 0);
        std::size_t done = 0, attempts = 0;
        while (done < sample_pairs) {
            if (++attempts > 100 * sample_pairs + 1000)
                throw ValidationError("curvature: could not sample enough adjacent pairs");
            const auto& x = states[rng.next_below(static_cast<std::uint32_t>(states.size()))];
            const auto& mv = moves[rng.next_below(6)];
            if (x[mv[0]] == 0) continue;
            auto y = x;
            y[mv[0]] -= 1;
            y[mv[1]] += 1;
            if (!box.contains(y)) continue;
            eval_pair(x, y);
            ++done;
        }
    }
    if (rep.pairs_checked == 0) throw ValidationError("curvature: no adjacent pairs in region");
    return rep;
}

struct CouplingReport {
    std::size_t replicates = 0;
    std::size_t exceed = 0;           // tau > t
    double empirical_tail = 0.0;
    double bound = 0.0;               // (M/2) exp(-t / (9M))
    double std_error = 0.0;
    std::vector<long long> taus;      // t+1 when not coupled within t
};

// Coupled Glauber pair with equal magnetisation: shared site and shared conditional
// color; on mismatched sites the second chain updates a matched site of the same
// current color. Hamming distance is checked non-increasing at every step. The
// second chain is the first scrambled by `transpositions` random site swaps, which
// preserves magnetisation by construction; zero swaps give an identical pair.
inline CouplingReport coupling_tail(std::size_t M, std::size_t t, std::size_t replicates,
                                    std::uint64_t seed, double beta_tilde = kBetaCritical,
                                    std::size_t transpositions = std::size_t(-1)) {
    if (transpositions == std::size_t(-1)) transpositions = M;
    CouplingReport rep;
    rep.replicates = replicates;
    rep.bound = 0.5 * double(M) * std::exp(-double(t) / (9.0 * double(M)));
    const double b2 = 2.0 * beta_tilde;

    for (std::size_t r = 0; r < replicates; ++r) {
        RngStream rng(seed, StreamRole::Coupling, static_cast<std::uint32_t>(r));
        // sigma uniform; sigma-tilde = sigma with random site-pair transpositions.
        SpinConfiguration sigma(M), tilde(M);
        for (std::size_t i = 0; i < M; ++i) sigma[i] = static_cast<std::uint8_t>(rng.next_below(3));
        tilde = sigma;
        for (std::size_t s = 0; s < transpositions; ++s) {
            const std::size_t i = rng.next_below(static_cast<std::uint32_t>(M));
            const std::size_t j = rng.next_below(static_cast<std::uint32_t>(M));
            std::swap(tilde[i], tilde[j]);
        }
        long long A[3][3] = {};
        for (std::size_t i = 0; i < M; ++i) A[sigma[i]][tilde[i]] += 1;
        for (int c = 0; c < 3; ++c) {
            long long row = A[c][0] + A[c][1] + A[c][2];
            long long col = A[0][c] + A[1][c] + A[2][c];
            if (row != col) throw ValidationError("coupling: initial pair has unequal magnetisation");
        }

        long long D = static_cast<long long>(M) - (A[0][0] + A[1][1] + A[2][2]);
        long long tau = D == 0 ? 0 : static_cast<long long>(t) + 1;
        for (std::size_t step = 1; step <= t && D > 0; ++step) {
            // site class (c, d) with probability A[c][d] / M
            long long pick = static_cast<long long>(rng.next_below(static_cast<std::uint32_t>(M)));
            int c = 0, d = 0;
            for (int ci = 0; ci < 3 && pick >= 0; ++ci)
                for (int di = 0; di < 3; ++di) {
                    pick -= A[ci][di];
                    if (pick < 0) {
                        c = ci;
                        d = di;
                        break;
                    }
                }
            const long long n[3] = {A[0][0] + A[0][1] + A[0][2], A[1][0] + A[1][1] + A[1][2],
                                    A[2][0] + A[2][1] + A[2][2]};
            double w[3];
            for (int e = 0; e < 3; ++e)
                w[e] = std::exp(b2 * (double(n[e]) - (e == c ? 1.0 : 0.0)) / double(M));
            const double u = rng.next_double() * (w[0] + w[1] + w[2]);
            const int z = u < w[0] ? 0 : (u < w[0] + w[1] ? 1 : 2);

            if (c == d) {
                A[c][c] -= 1;
                A[z][z] += 1;
            } else {
                // matched-color site for the second chain: class (e, c), e != c
                const long long cand = A[0][c] + A[1][c] + A[2][c] - A[c][c];
                if (cand <= 0) throw ValidationError("coupling: no matched site available");
                long long pe = static_cast<long long>(rng.next_below(static_cast<std::uint32_t>(cand)));
                int e = -1;
                for (int ei = 0; ei < 3; ++ei) {
                    if (ei == c) continue;
                    pe -= A[ei][c];
                    if (pe < 0) {
                        e = ei;
                        break;
                    }
                }
                A[c][d] -= 1;
                A[z][d] += 1;
                A[e][c] -= 1;
                A[e][z] += 1;
            }
            const long long D2 = static_cast<long long>(M) - (A[0][0] + A[1][1] + A[2][2]);
            if (D2 > D)
                throw ValidationError("coupling: Hamming distance increased at step " +
                                      std::to_string(step));
            D = D2;
            if (D == 0) tau = static_cast<long long>(step);
        }
        if (D > 0) ++rep.exceed;
        rep.taus.push_back(D > 0 ? static_cast<long long>(t) + 1 : tau);
    }
    if (replicates > 0) {
        rep.empirical_tail = double(rep.exceed) / double(replicates);
        rep.std_error = std::sqrt(std::max(rep.empirical_tail * (1.0 - rep.empirical_tail), 1e-12) /
                                  double(replicates));
    }
    return rep;
}

// Magnetisation chain simulator with memoized transition tables.
class MagnetisationChain {
public:
    MagnetisationChain(std::size_t M, double beta_tilde) : params_{M, beta_tilde} {}

    std::array<long long, 3> step(const std::array<long long, 3>& n, RngStream& rng) {
        const long long key = n[0] * (static_cast<long long>(params_.M) + 1) + n[1];
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            Entry e;
            double acc = 0.0;
            for (const auto& tr : magnetisation_transitions(n, params_)) {
                acc += tr.prob;
                e.cum.push_back(acc);
                e.to.push_back(tr.to);
            }
            it = cache_.emplace(key, std::move(e)).first;
        }
        const auto& e = it->second;
        const double u = rng.next_double() * e.cum.back();
        const std::size_t idx =
            std::upper_bound(e.cum.begin(), e.cum.end(), u) - e.cum.begin();
        return e.to[idx < e.to.size() ? idx : e.to.size() - 1];
    }

private:
    struct Entry {
        std::vector<double> cum;
        std::vector<std::array<long long, 3>> to;
    };
    PottsParams params_;
    std::unordered_map<long long, Entry> cache_;
};

struct HittingReport {
    std::vector<long long> taus;   // max_steps + 1 when the target was not reached
    double median = 0.0;
    std::size_t capped = 0;
    std::array<long long, 3> start{0, 0, 0};
};

// tau = first time d_C <= rho/2, started from an edge midpoint by default.
inline HittingReport hitting_experiment(std::size_t M, double rho, std::size_t replicates,
                                        std::uint64_t seed, long long max_steps,
                                        const std::array<long long, 3>* start_override = nullptr,
                                        double beta_tilde = kBetaCritical) {
    HittingReport rep;
    const long long half = static_cast<long long>(M / 2);
    rep.start = start_override ? *start_override
                               : std::array<long long, 3>{half, static_cast<long long>(M) - half, 0};
    MagnetisationChain chain(M, beta_tilde);
    for (std::size_t r = 0; r < replicates; ++r) {
        RngStream rng(seed, StreamRole::Scalar, static_cast<std::uint32_t>(r), 1);
        auto n = rep.start;
        long long tau = max_steps + 1;
        if (center_geometry(detail::ratios(n, M)).d_C <= rho / 2.0) tau = 0;
        for (long long s = 1; s <= max_steps && tau > max_steps; ++s) {
            n = chain.step(n, rng);
            if (center_geometry(detail::ratios(n, M)).d_C <= rho / 2.0) tau = s;
        }
        if (tau > max_steps) ++rep.capped;
        rep.taus.push_back(tau);
    }
    auto sorted = rep.taus;
    std::sort(sorted.begin(), sorted.end());
    rep.median = double(sorted[sorted.size() / 2]);
    return rep;
}

struct EscapeReport {
    std::size_t escapes = 0;
    std::size_t replicates = 0;
    double bound = 0.0;            // l^2 exp(-0.005 rho^2 M), reported not asserted
    std::array<long long, 3> start{0, 0, 0};
};

// Start near C_4 (within rho sqrt3/2) and count trajectories whose d_C ever exceeds
// rho sqrt3 within l steps.
inline EscapeReport escape_experiment(std::size_t M, double rho, long long l,
                                      std::size_t replicates, std::uint64_t seed,
                                      double beta_tilde = kBetaCritical) {
    EscapeReport rep;
    rep.replicates = replicates;
    rep.bound = double(l) * double(l) * std::exp(-0.005 * rho * rho * double(M));
    const long long c4 = static_cast<long long>(std::llround(double(M) / 3.0));
    rep.start = {c4, c4, static_cast<long long>(M) - 2 * c4};
    const double d0 = center_geometry(detail::ratios(rep.start, M)).d_C;
    if (d0 > rho * std::sqrt(3.0) / 2.0)
        throw ValidationError("escape: no lattice start point inside the central region");
    MagnetisationChain chain(M, beta_tilde);
    const double limit = rho * std::sqrt(3.0);
    for (std::size_t r = 0; r < replicates; ++r) {
        RngStream rng(seed, StreamRole::Scalar, static_cast<std::uint32_t>(r), 2);
        auto n = rep.start;
        for (long long s = 1; s <= l; ++s) {
            n = chain.step(n, rng);
            if (center_geometry(detail::ratios(n, M)).d_C > limit) {
                ++rep.escapes;
                break;
            }
        }
    }
    return rep;
}

struct RiemannReport {
    double psi = 0.0;
    double target = 0.0;             // 0 for odd m, Gamma((m+1)/2) for even m
    double abs_error = 0.0;
    double analytic_log10_error = 0.0;   // leading Fourier term magnitude, log10
};

// Psi_m(R, delta) = sum_k exp(-(k+delta)^2 R^2) (k+delta)^m R^(m+1), truncated where
// terms fall below 1e-18 of the largest.
inline RiemannReport riemann_gauss(int m, double R, double delta) {
    if (!(R > 0.0)) throw ValidationError("riemann: R must be positive");
    if (m < 0) throw ValidationError("riemann: m must be >= 0");
    RiemannReport rep;
    auto term = [&](long long k) {
        const double x = (double(k) + delta) * R;
        return std::exp(-x * x) * std::pow(double(k) + delta, m) * std::pow(R, m + 1);
    };
    const long long k0 = static_cast<long long>(std::llround(-delta));
    double max_abs = 0.0;
    for (long long k = k0 - 2; k <= k0 + 2; ++k) max_abs = std::max(max_abs, std::abs(term(k)));
    const long long halfwidth =
        static_cast<long long>(std::ceil((8.0 + std::sqrt(double(m) + 1.0)) / R)) + 4;
    detail::NeumaierSum sum;
    for (long long k = k0 - halfwidth; k <= k0 + halfwidth; ++k) {
        const double v = term(k);
        max_abs = std::max(max_abs, std::abs(v));
        if (std::abs(v) >= 1e-18 * max_abs) sum.add(v);
    }
    rep.psi = sum.value();
    rep.target = (m % 2 == 1) ? 0.0 : std::tgamma((double(m) + 1.0) / 2.0);
    rep.abs_error = std::abs(rep.psi - rep.target);
    rep.analytic_log10_error =
        std::log10(2.0 * std::sqrt(M_PI)) - M_PI * M_PI / (R * R * std::log(10.0));
    return rep;
}

// log10 of the Riemann-sum error, switching to the analytic Fourier magnitude when
// the direct difference drowns in double-precision noise.
inline double riemann_error_log10(int m, double R, double delta) {
    const auto rep = riemann_gauss(m, R, delta);
    if (rep.abs_error > 1e-15) return std::log10(rep.abs_error);
    return rep.analytic_log10_error;
}

// Asymptotic log-likelihood sum_i (beta_c s_i^2 - s_i log s_i); the verbatim flag
// switches to the printed form beta_c sum_i (s_i^3 - s_i log s_i) for comparison.
inline double asymptotic_loglik(const std::array<double, 3>& s, bool verbatim = false) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double xlogx = s[i] > 0.0 ? s[i] * std::log(s[i]) : 0.0;
        if (verbatim)
            v += kBetaCritical * (s[i] * s[i] * s[i] - xlogx);
        else
            v += kBetaCritical * s[i] * s[i] - xlogx;
    }
    return v;
}

struct LoglikReport {
    double corner_value = 0.0;       // at C_1
    double center_value = 0.0;       // at C_4
    double max_center_diff = 0.0;    // max |L(C_i) - L(C_1)| over i = 2, 3, 4
    double best_c = 0.0;             // largest c with L(s) <= L(C_1) - c d_C(s)^2 on grid
    std::array<double, 3> arg_best{0, 0, 0};
    double max_gap_violation = 0.0;  // max over grid of L(s) - (L(C_1) - best_c d_C^2)
};

inline LoglikReport asymptotic_loglik_check(std::size_t resolution, bool verbatim = false) {
    if (resolution < 100) throw ValidationError("loglik: resolution must be >= 100");
    LoglikReport rep;
    rep.corner_value = asymptotic_loglik(BarycentricGeometry::centers[0], verbatim);
    rep.center_value = asymptotic_loglik(BarycentricGeometry::centers[3], verbatim);
    for (int i = 1; i < 4; ++i)
        rep.max_center_diff =
            std::max(rep.max_center_diff,
                     std::abs(asymptotic_loglik(BarycentricGeometry::centers[i], verbatim) -
                              rep.corner_value));

    rep.best_c = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a <= resolution; ++a)
        for (std::size_t b = 0; a + b <= resolution; ++b) {
            const std::array<double, 3> s = {double(a) / double(resolution),
                                             double(b) / double(resolution),
                                             double(resolution - a - b) / double(resolution)};
            const double d = center_geometry(s).d_C;
            if (d < 1e-12) continue;
            const double ratio = (rep.corner_value - asymptotic_loglik(s, verbatim)) / (d * d);
            if (ratio < rep.best_c) {
                rep.best_c = ratio;
                rep.arg_best = s;
            }
        }
    for (std::size_t a = 0; a <= resolution; ++a)
        for (std::size_t b = 0; a + b <= resolution; ++b) {
            const std::array<double, 3> s = {double(a) / double(resolution),
                                             double(b) / double(resolution),
                                             double(resolution - a - b) / double(resolution)};
            const double d = center_geometry(s).d_C;
            rep.max_gap_violation =
                std::max(rep.max_gap_violation,
                         asymptotic_loglik(s, verbatim) - (rep.corner_value - rep.best_c * d * d));
        }
    return rep;
}

struct LocalTvReport {
    std::array<double, 4> tv{};              // d_TV(mu | Lambda^(i), mu | F^(i))
    std::array<double, 4> outside_inner{};   // mu|Lambda(Lambda \ I)
    std::array<double, 4> lambda_mass{};
    std::array<double, 4> mode_mass{};
};

inline LocalTvReport local_tv_profile(std::size_t M, double rho, double beta_tilde = kBetaCritical) {
    const auto table = magnetisation_log_pmf({M, beta_tilde});
    LocalTvReport rep;
    const long long MM = static_cast<long long>(M);
    for (int mode = 1; mode <= 4; ++mode) {
        const auto box = detail::lambda_box(MM, rho, mode);
        const auto& C = BarycentricGeometry::centers[mode - 1];
        detail::NeumaierSum lam_mass, f_mass, inner_mass;
        std::vector<char> in_lam(table.log_pmf.size(), 0), in_f(table.log_pmf.size(), 0);
        for (std::size_t i = 0; i < table.log_pmf.size(); ++i) {
            const auto n = table.lat.counts(i);
            const double p = std::exp(table.log_pmf[i]);
            if (box.contains(n)) {
                in_lam[i] = 1;
                lam_mass.add(p);
                bool inner = true;
                for (int l = 0; l < 3 && inner; ++l) {
                    const double dev = double(n[l]) / double(M) - C[l];
                    if (dev < -rho / 4.0 - 1e-15 || dev > rho / 2.0 + 1e-15) inner = false;
                }
                if (inner) inner_mass.add(p);
            }
            if (mode_of_counts(n, MM) == mode) {
                in_f[i] = 1;
                f_mass.add(p);
            }
        }
        const double ml = lam_mass.value(), mf = f_mass.value();
        if (!(ml > 0.0))
            throw ValidationError("local tv: empty region for mode " + std::to_string(mode));
        if (!(mf > 0.0))
            throw ValidationError("local tv: empty mode " + std::to_string(mode));
        detail::NeumaierSum l1;
        for (std::size_t i = 0; i < table.log_pmf.size(); ++i) {
            if (!in_lam[i] && !in_f[i]) continue;
            const double p = std::exp(table.log_pmf[i]);
            l1.add(std::abs((in_lam[i] ? p / ml : 0.0) - (in_f[i] ? p / mf : 0.0)));
        }
        rep.tv[mode - 1] = 0.5 * l1.value();
        rep.outside_inner[mode - 1] = (ml - inner_mass.value()) / ml;
        rep.lambda_mass[mode - 1] = ml;
        rep.mode_mass[mode - 1] = mf;
    }
    return rep;
}

struct ContourMax {
    std::array<double, 3> s{0, 0, 0};
    double value = 0.0;
    double prominence = 0.0;
};

struct ContourReport {
    int raw_regions = 0;           // plateau-merged hex local maxima
    int significant_regions = 0;   // topographic prominence >= threshold
    std::vector<ContourMax> maxima;
    bool surrogate = false;
    std::size_t states = 0;
};

// Stirling-corrected off-lattice surrogate for the log magnetisation pmf shape;
// -inf on the simplex boundary. Additive constants are dropped (prominence and
// local-max structure are shift-invariant).
inline double log_pmf_surrogate(const std::array<double, 3>& s, std::size_t M,
                                double beta_tilde = kBetaCritical) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (!(s[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        v += beta_tilde * double(M) * s[i] * s[i] - double(M) * s[i] * std::log(s[i]) -
             0.5 * std::log(s[i]) - 1.0 / (12.0 * double(M) * s[i]);
    }
    return v;
}

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace detail

// Shared peak analysis: values on a triangular integer grid (side length `side`,
// entries indexed like the magnetisation lattice), -inf cells excluded.
inline ContourReport contour_scan(const std::vector<double>& values, std::size_t side,
                                  double prominence_threshold,
                                  const std::vector<std::array<double, 3>>& coords) {
    const MagnetisationLattice lat{side};
    const std::size_t S = values.size();
    ContourReport rep;

    auto neighbors = [&](std::size_t idx, std::array<long long, 6>& out) {
        const auto n = lat.counts(idx);
        static constexpr int moves[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
        int cnt = 0;
        for (const auto& mv : moves) {
            auto m = n;
            if (m[mv[0]] == 0) continue;
            m[mv[0]] -= 1;
            m[mv[1]] += 1;
            const std::size_t j = lat.index(std::size_t(m[0]), std::size_t(m[1]));
            if (values[j] == -std::numeric_limits<double>::infinity()) continue;
            out[cnt++] = static_cast<long long>(j);
        }
        return cnt;
    };

    std::vector<std::size_t> order;
    order.reserve(S);
    for (std::size_t i = 0; i < S; ++i)
        if (values[i] != -std::numeric_limits<double>::infinity()) order.push_back(i);
    rep.states = order.size();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });

    // Raw local-max count: plateau components none of whose members sees a
    // strictly greater neighbor.
    {
        detail::UnionFind uf(S);
        std::vector<char> bad(S, 0);
        std::array<long long, 6> nb{};
        for (std::size_t i : order) {
            const int cnt = neighbors(i, nb);
            for (int k = 0; k < cnt; ++k) {
                const std::size_t j = static_cast<std::size_t>(nb[k]);
                if (values[j] == values[i]) uf.unite(int(i), int(j));
                if (values[j] > values[i]) bad[i] = 1;
            }
        }
        std::vector<char> root_bad(S, 0), root_seen(S, 0);
        for (std::size_t i : order)
            if (bad[i]) root_bad[uf.find(int(i))] = 1;
        for (std::size_t i : order) {
            const int r = uf.find(int(i));
            if (!root_seen[r]) {
                root_seen[r] = 1;
                if (!root_bad[r]) ++rep.raw_regions;
            }
        }
    }

    // Topographic prominence by descending flood: when a component merges into a
    // higher one, the dying peak's prominence is its height above the merge col.
    {
        detail::UnionFind uf(S);
        std::vector<char> done(S, 0);
        std::vector<int> peak(S, -1);
        std::vector<std::pair<std::size_t, double>> proms;   // peak index, prominence
        std::array<long long, 6> nb{};
        double lowest = 0.0;
        for (std::size_t i : order) {
            const int cnt = neighbors(i, nb);
            std::vector<int> roots;
            for (int k = 0; k < cnt; ++k) {
                const std::size_t j = static_cast<std::size_t>(nb[k]);
                if (!done[j]) continue;
                const int r = uf.find(int(j));
                bool dup = false;
                for (int seen : roots) dup |= seen == r;
                if (!dup) roots.push_back(r);
            }
            if (roots.empty()) {
                peak[i] = static_cast<int>(i);
            } else {
                int best = roots[0];
                for (int r : roots) {
                    const double pv = values[std::size_t(peak[r])];
                    const double bv = values[std::size_t(peak[best])];
                    if (pv > bv || (pv == bv && peak[r] < peak[best])) best = r;
                }
                for (int r : roots) {
                    if (r == best) continue;
                    proms.push_back({std::size_t(peak[r]), values[std::size_t(peak[r])] - values[i]});
                    uf.unite(r, best);
                }
                const int keep = peak[uf.find(best)];
                uf.unite(int(i), best);
                peak[uf.find(int(i))] = keep;
            }
            done[i] = 1;
            lowest = values[i];
        }
        const std::size_t global_peak = order.front();
        proms.push_back({global_peak, values[global_peak] - lowest});
        for (const auto& pr : proms) {
            if (pr.second < prominence_threshold) continue;
            ++rep.significant_regions;
            rep.maxima.push_back({coords[pr.first], values[pr.first], pr.second});
        }
        std::sort(rep.maxima.begin(), rep.maxima.end(),
                  [](const ContourMax& a, const ContourMax& b) { return a.value > b.value; });
    }
    return rep;
}

// resolution = 0 scans the exact lattice pmf at M; otherwise the surrogate is
// evaluated on a resolution-per-edge grid and flagged as such.
inline ContourReport contour_analyze(double beta_tilde, std::size_t M, std::size_t resolution = 0,
                                     double prominence_threshold = 0.5) {
    std::vector<double> values;
    std::vector<std::array<double, 3>> coords;
    std::size_t side = 0;
    bool surrogate = false;
    if (resolution == 0) {
        const auto table = magnetisation_log_pmf({M, beta_tilde});
        side = M;
        values = table.log_pmf;
        coords.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            coords[i] = detail::ratios(table.lat.counts(i), M);
    } else {
        surrogate = true;
        side = resolution;
        const MagnetisationLattice lat{resolution};
        values.resize(lat.size());
        coords.resize(lat.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto n = lat.counts(i);
            const std::array<double, 3> s = {double(n[0]) / double(resolution),
                                             double(n[1]) / double(resolution),
                                             double(n[2]) / double(resolution)};
            coords[i] = s;
            values[i] = log_pmf_surrogate(s, M, beta_tilde);
        }
    }
    auto rep = contour_scan(values, side, prominence_threshold, coords);
    rep.surrogate = surrogate;
    return rep;
}

} // namespace smcvar
