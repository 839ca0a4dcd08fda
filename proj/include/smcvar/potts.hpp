#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "smcvar/finite.hpp"
#include "smcvar/rng.hpp"

namespace smcvar {

inline constexpr double kBetaCritical = 1.3862943611198906;   // 2 log 2

struct PottsParams {
    std::size_t M = 1;
    double beta_tilde = kBetaCritical;

    void validate() const {
        if (M < 1) throw ValidationError("potts: M must be >= 1");
        if (!(beta_tilde >= 0.0)) throw ValidationError("potts: beta_tilde must be >= 0");
    }
};

// Count vectors (n1, n2, n3) with n1+n2+n3 = M, indexed by n1 then n2.
struct MagnetisationLattice {
    std::size_t M = 0;

    std::size_t size() const { return (M + 1) * (M + 2) / 2; }

    std::size_t index(std::size_t n1, std::size_t n2) const {
        return n1 * (M + 1) - n1 * (n1 - 1) / 2 + n2;
    }

    std::array<long long, 3> counts(std::size_t idx) const {
        std::size_t n1 = 0, row = M + 1;
        while (idx >= row) {
            idx -= row;
            --row;
            ++n1;
        }
        const std::size_t n2 = idx;
        return {static_cast<long long>(n1), static_cast<long long>(n2),
                static_cast<long long>(M - n1 - n2)};
    }
};

namespace detail {

// lgamma(i+1) table; shared so symmetric states get bit-identical log-multinomials.
inline const std::vector<double>& lgamma_table(std::size_t upto) {
    thread_local std::vector<double> tab;
    if (tab.size() < upto + 1) {
        const std::size_t old = tab.size();
        tab.resize(upto + 1);
        for (std::size_t i = old; i <= upto; ++i) tab[i] = std::lgamma(double(i) + 1.0);
    }
    return tab;
}

// Kahan-Neumaier compensated sum.
struct NeumaierSum {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

} // namespace detail

// Counts are sorted before the lgamma sum so color-permuted states evaluate
// bit-identically; the energy term uses an exact integer sum of squares.
inline double log_multinomial(std::size_t M, std::array<long long, 3> n) {
    const auto& lg = detail::lgamma_table(M);
    std::sort(n.begin(), n.end());
    return lg[M] - lg[std::size_t(n[0])] - lg[std::size_t(n[1])] - lg[std::size_t(n[2])];
}

struct MagnetisationTable {
    MagnetisationLattice lat;
    double beta_tilde = 0.0;
    std::vector<double> log_pmf;  // normalized
    double log_Z = 0.0;           // spin-space partition function
};

inline MagnetisationTable magnetisation_log_pmf(const PottsParams& params) {
    params.validate();
    MagnetisationTable t;
    t.lat.M = params.M;
    t.beta_tilde = params.beta_tilde;
    const std::size_t S = t.lat.size();
    t.log_pmf.resize(S);
    const double M = double(params.M);
    for (std::size_t i = 0; i < S; ++i) {
        const auto n = t.lat.counts(i);
        const long long sq = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
        t.log_pmf[i] = log_multinomial(params.M, n) + params.beta_tilde * double(sq) / M;
    }
    const double top = *std::max_element(t.log_pmf.begin(), t.log_pmf.end());
    detail::NeumaierSum z;
    for (double v : t.log_pmf) z.add(std::exp(v - top));
    t.log_Z = top + std::log(z.value());
    for (double& v : t.log_pmf) v -= t.log_Z;
    return t;
}

// Strict-majority mode rule on a length-j prefix: mode i in {1,2,3} iff 2 n_i > j,
// ties and balanced states fall to mode 4.
inline int mode_of_counts(const std::array<long long, 3>& n, long long j) {
    for (int i = 0; i < 3; ++i)
        if (2 * n[i] > j) return i + 1;
    return 4;
}

inline std::array<double, 4> mode_masses(const MagnetisationTable& t) {
    std::array<detail::NeumaierSum, 4> acc{};
    const long long M = static_cast<long long>(t.lat.M);
    for (std::size_t i = 0; i < t.log_pmf.size(); ++i)
        acc[mode_of_counts(t.lat.counts(i), M) - 1].add(std::exp(t.log_pmf[i]));
    return {acc[0].value(), acc[1].value(), acc[2].value(), acc[3].value()};
}

// Law of the first j coordinates' counts under an exchangeable size-(j+1) law:
// remove one uniformly chosen spin. Input and output are linear-space pmfs.
inline std::vector<double> remove_one_spin(const std::vector<double>& pmf, std::size_t size) {
    MagnetisationLattice big{size}, small{size - 1};
    std::vector<double> out(small.size(), 0.0);
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        const auto n = big.counts(i);
        const double p = pmf[i];
        if (p == 0.0) continue;
        for (int c = 0; c < 3; ++c) {
            if (n[c] == 0) continue;
            auto m = n;
            m[c] -= 1;
            out[small.index(std::size_t(m[0]), std::size_t(m[1]))] += p * double(n[c]) / double(size);
        }
    }
    return out;
}

inline std::vector<double> prefix_marginal(const MagnetisationTable& t, std::size_t j) {
    if (j > t.lat.M) throw ValidationError("prefix marginal: prefix longer than the model");
    std::vector<double> pmf(t.log_pmf.size());
    for (std::size_t i = 0; i < pmf.size(); ++i) pmf[i] = std::exp(t.log_pmf[i]);
    for (std::size_t size = t.lat.M; size > j; --size) pmf = remove_one_spin(pmf, size);
    return pmf;
}

struct MagnetisationTransition {
    std::array<long long, 3> to;
    double prob;
};

// One Glauber update seen on counts: pick a uniform site, redraw its color from the
// exact conditional. Up to six moves plus the stay probability.
inline std::vector<MagnetisationTransition> magnetisation_transitions(
    const std::array<long long, 3>& n, const PottsParams& params) {
    params.validate();
    const double M = double(params.M);
    const double b2 = 2.0 * params.beta_tilde;
    std::vector<MagnetisationTransition> out;
    double stay = 1.0;
    for (int i = 0; i < 3; ++i) {
        if (n[i] == 0) continue;
        const double si = double(n[i]) / M;
        double w[3];
        for (int c = 0; c < 3; ++c) w[c] = std::exp(b2 * (double(n[c]) - (c == i ? 1.0 : 0.0)) / M);
        const double denom = w[0] + w[1] + w[2];
        for (int j = 0; j < 3; ++j) {
            if (j == i) continue;
            const double p = si * w[j] / denom;
            auto m = n;
            m[i] -= 1;
            m[j] += 1;
            out.push_back({m, p});
            stay -= p;
        }
    }
    out.push_back({n, stay});
    return out;
}

using SpinConfiguration = std::vector<std::uint8_t>;

inline std::array<long long, 3> spin_counts(const SpinConfiguration& sigma, std::size_t j) {
    std::array<long long, 3> n{0, 0, 0};
    for (std::size_t i = 0; i < j; ++i) n[sigma[i]] += 1;
    return n;
}

namespace detail {

// Glauber update on the first j coordinates of a size-j model; counts kept in sync.
inline void glauber_update(SpinConfiguration& sigma, std::array<long long, 3>& n, std::size_t j,
                           double beta_tilde, RngStream& rng) {
    const std::size_t site = rng.next_below(static_cast<std::uint32_t>(j));
    const int old_c = sigma[site];
    const double b2 = 2.0 * beta_tilde;
    double w[3];
    for (int c = 0; c < 3; ++c)
        w[c] = std::exp(b2 * (double(n[c]) - (c == old_c ? 1.0 : 0.0)) / double(j));
    const double u = rng.next_double() * (w[0] + w[1] + w[2]);
    int c = u < w[0] ? 0 : (u < w[0] + w[1] ? 1 : 2);
    if (c != old_c) {
        n[old_c] -= 1;
        n[c] += 1;
        sigma[site] = static_cast<std::uint8_t>(c);
    }
}

} // namespace detail

inline SpinConfiguration glauber_step(const SpinConfiguration& sigma, const PottsParams& params,
                                      RngStream& rng) {
    params.validate();
    if (sigma.size() != params.M) throw ValidationError("glauber: configuration length mismatch");
    SpinConfiguration next = sigma;
    auto n = spin_counts(next, params.M);
    detail::glauber_update(next, n, params.M, params.beta_tilde, rng);
    return next;
}

struct BarycentricGeometry {
    static constexpr std::array<std::array<double, 3>, 4> centers = {{{2.0 / 3, 1.0 / 6, 1.0 / 6},
                                                                      {1.0 / 6, 2.0 / 3, 1.0 / 6},
                                                                      {1.0 / 6, 1.0 / 6, 2.0 / 3},
                                                                      {1.0 / 3, 1.0 / 3, 1.0 / 3}}};
};

inline double simplex_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / 2.0);
}

// Piecewise-linear drift gauge with knots (0,0), (sqrt3/24, 0.002), (sqrt3/12, 0),
// (sqrt3/6, 0.002); continued with the last slope past the final knot.
inline double drift_phi(double t) {
    const double a = std::sqrt(3.0) / 24.0;
    if (t <= 0.0) return 0.0;
    if (t <= a) return 0.002 * t / a;
    if (t <= 2.0 * a) return 0.002 * (2.0 * a - t) / a;
    return 0.002 * (t - 2.0 * a) / (2.0 * a);
}

struct CenterGeometry {
    double d_C = 0.0;
    int nearest = 0;   // 1..4
    double phi = 0.0;
};

inline CenterGeometry center_geometry(const std::array<double, 3>& s) {
    CenterGeometry g;
    g.d_C = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        const double d = simplex_distance(s, BarycentricGeometry::centers[i]);
        if (d < g.d_C) {
            g.d_C = d;
            g.nearest = i + 1;
        }
    }
    g.phi = drift_phi(g.d_C);
    return g;
}

struct RegionConfig {
    double rho = 1e-6;
    long long j0 = 10000000LL;   // below this prefix length the space is one mode
};

struct ModeRegion {
    int mode = 1;
    bool inner = true;
};

inline ModeRegion mode_and_region(const std::array<double, 3>& s, long long j,
                                  const RegionConfig& cfg = {}) {
    ModeRegion mr;
    if (j <= cfg.j0) return mr;   // single whole-space mode
    mr.mode = 4;
    for (int i = 0; i < 3; ++i)
        if (s[i] > 0.5) {
            mr.mode = i + 1;
            break;
        }
    const auto& C = BarycentricGeometry::centers[mr.mode - 1];
    for (int i = 0; i < 3; ++i) {
        const double dev = s[i] - C[i];
        if (dev < -cfg.rho / 4.0 || dev > cfg.rho / 2.0) {
            mr.inner = false;
            break;
        }
    }
    return mr;
}

// Bridging model over spin configurations, usable directly by the particle engine.
struct PottsBridging {
    enum class Kind { Interpolation, Tempering };
    using State = SpinConfiguration;

    Kind kind = Kind::Interpolation;
    PottsParams params;
    std::size_t n = 0;                    // stage count
    std::vector<std::size_t> t_schedule;  // Glauber steps per mutation stage, index k-1
    std::vector<double> log_Z;            // interpolation: sizes 0..M; tempering: stages 0..n
    std::vector<double> stage_beta;       // tempering inverse temperatures, stages 0..n

    std::size_t stages() const { return n; }

    State sample_initial(RngStream& rng) const {
        State sigma(params.M);
        for (auto& s : sigma) s = static_cast<std::uint8_t>(rng.next_below(3));
        return sigma;
    }

    double log_weight(std::size_t k, const State& sigma) const {
        if (kind == Kind::Interpolation) {
            const auto n_k = spin_counts(sigma, k);
            const auto n_k1 = spin_counts(sigma, k + 1);
            const double Ek = k == 0 ? 0.0 : energy(n_k, k);
            const double Ek1 = energy(n_k1, k + 1);
            return std::log(3.0) + log_Z[k] - log_Z[k + 1] + params.beta_tilde * (Ek1 - Ek);
        }
        const auto n_M = spin_counts(sigma, params.M);
        const double E = energy(n_M, params.M);
        return log_Z[k] - log_Z[k + 1] + (stage_beta[k + 1] - stage_beta[k]) * E;
    }

    double weight(std::size_t k, const State& sigma) const { return std::exp(log_weight(k, sigma)); }

    void mutate(std::size_t stage, State& sigma, RngStream& rng) const {
        const std::size_t t = t_schedule[stage - 1];
        if (kind == Kind::Interpolation) {
            const std::size_t j = stage;
            auto counts = spin_counts(sigma, j);
            for (std::size_t s = 0; s < t; ++s)
                detail::glauber_update(sigma, counts, j, params.beta_tilde, rng);
            for (std::size_t i = j; i < params.M; ++i)
                sigma[i] = static_cast<std::uint8_t>(rng.next_below(3));
        } else {
            auto counts = spin_counts(sigma, params.M);
            for (std::size_t s = 0; s < t; ++s)
                detail::glauber_update(sigma, counts, params.M, stage_beta[stage], rng);
        }
    }

    static double energy(const std::array<long long, 3>& n, std::size_t size) {
        const double sq = double(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        return sq / double(size);
    }
};

// t_k = ceil(C1 * k * log(k)^2), the mutation budget schedule.
inline std::vector<std::size_t> default_mutation_schedule(std::size_t count, double c1 = 1.0) {
    std::vector<std::size_t> t(count);
    for (std::size_t k = 1; k <= count; ++k) {
        const double lk = std::log(double(k));
        t[k - 1] = static_cast<std::size_t>(std::ceil(c1 * double(k) * lk * lk));
    }
    return t;
}

inline PottsBridging bridging_builder(PottsBridging::Kind kind, const PottsParams& params,
                                      const std::vector<std::size_t>& t_schedule) {
    params.validate();
    PottsBridging b;
    b.kind = kind;
    b.params = params;
    b.t_schedule = t_schedule;
    if (kind == PottsBridging::Kind::Interpolation) {
        b.n = params.M;
        if (t_schedule.size() < b.n)
            throw ValidationError("bridging: stage schedule shorter than the spin count");
        b.log_Z.resize(params.M + 1);
        b.log_Z[0] = 0.0;
        for (std::size_t k = 1; k <= params.M; ++k)
            b.log_Z[k] = magnetisation_log_pmf({k, params.beta_tilde}).log_Z;
    } else {
        b.n = t_schedule.size();
        if (b.n < 1) throw ValidationError("bridging: tempering needs at least one stage");
        b.log_Z.resize(b.n + 1);
        b.stage_beta.resize(b.n + 1);
        for (std::size_t i = 0; i <= b.n; ++i) {
            b.stage_beta[i] = params.beta_tilde * double(i) / double(b.n);
            b.log_Z[i] = magnetisation_log_pmf({params.M, b.stage_beta[i]}).log_Z;
        }
    }
    return b;
}

// Per-stage masses of the four modes, a diagnostic for how the bridging schedule
// moves probability into the corner modes.
inline std::vector<std::array<double, 4>> bridging_mode_mass_series(const PottsBridging& b) {
    std::vector<std::array<double, 4>> series;
    if (b.kind == PottsBridging::Kind::Interpolation) {
        for (std::size_t k = 1; k <= b.n; ++k)
            series.push_back(mode_masses(magnetisation_log_pmf({k, b.params.beta_tilde})));
    } else {
        for (std::size_t i = 0; i <= b.n; ++i)
            series.push_back(mode_masses(magnetisation_log_pmf({b.params.M, b.stage_beta[i]})));
    }
    return series;
}

} // namespace smcvar
