// Acceptance harness. Each invocation runs one numbered criterion, prints a
// single line
//
//   ACCEPTANCE <n> PASS|FAIL  <details>  (<elapsed> s)
//
// and exits 0 on pass, 1 on fail. Criteria cover the exactness of the
// counterexample, agreement between the exact variance and replicated SMC,
// domination of every variance bound on randomized instances, the Potts
// lattice checks, and the end-to-end Potts sampler.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "smcvar/bounds.hpp"
#include "smcvar/potts.hpp"
#include "smcvar/potts_analysis.hpp"
#include "smcvar/smc.hpp"
#include "smcvar/variance.hpp"

#include "support.hpp"

namespace {

using namespace smcvar;

struct Outcome {
    bool pass = false;
    std::string details;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double sample_variance(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / double(v.size() - 1);
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

// 1. The four-state counterexample reproduces the published variance pair:
// mixing raises the shifted first-stage contribution from 0.1579 to 0.1669.
Outcome counterexample_values() {
    const auto inst = counterexample_instance();
    const double mix = asymptotic_variance_exact(inst.with_mixing, inst.phi).stage_shifted_total;
    const double nomix = asymptotic_variance_exact(inst.no_mixing, inst.phi).stage_shifted_total;
    Outcome out;
    out.pass = std::abs(mix - 0.1669) <= 5e-4 && std::abs(nomix - 0.1579) <= 5e-4 && mix > nomix;
    out.details = "with mixing " + fmt(mix) + " vs 0.1669, without " + fmt(nomix) +
                  " vs 0.1579, tolerance 5e-4";
    return out;
}

// 2. On 20 randomized bridging instances the jackknife 99% CI from 2000
// replicate runs at N = 10^4 brackets the exact variance at least 18 times.
Outcome clt_bracketing() {
    std::mt19937_64 gen(92);
    const std::size_t N = 10000, R = 2000;
    int hits = 0;
    for (int i = 0; i < 20; ++i) {
        const auto seq = support::random_bridging_gentle(gen);
        const auto phi = support::random_phi(gen, seq.state_count());
        const double exact = asymptotic_variance_exact(seq, phi).total;
        const FiniteModel model(seq);
        const auto rep = replicate_asymptotic_variance(
            model, [&phi](std::size_t x) { return phi[x]; }, N, R, 6101 + std::uint64_t(i), {});
        if (rep.ci_lo <= exact && exact <= rep.ci_hi) ++hits;
    }
    Outcome out;
    out.pass = hits >= 18;
    out.details = "99% CI bracketed the exact variance in " + std::to_string(hits) +
                  "/20 instances (need >= 18)";
    return out;
}

// 3. Each variance bound dominates the exact value on 500 randomized instances
// whose preconditions hold, to slack 1e-9.
Outcome bound_domination() {
    std::mt19937_64 gen(31);
    const int reps = 500;
    int ok_global = 0, ok_no_mix = 0, ok_with_mix = 0, ok_quality = 0;
    std::string first_error;
    auto guard = [&first_error](auto&& body) {
        try {
            return bool(body());
        } catch (const std::exception& e) {
            if (first_error.empty()) first_error = e.what();
            return false;
        }
    };

    for (int i = 0; i < reps; ++i)
        ok_global += guard([&] {
            const auto seq = support::random_bridging_global(gen);
            const auto phi = support::random_phi(gen, seq.state_count());
            const auto rep = bound_global(seq, phi);
            return rep.precondition_ok && *rep.exact_value <= rep.bound_value + 1e-9;
        });

    for (int i = 0; i < reps; ++i)
        ok_no_mix += guard([&] {
            const auto inst = support::random_blocky_bridging(gen);
            const auto phi = support::random_phi(gen, inst.seq.state_count());
            const auto rep = bound_no_mixing(inst.seq, inst.partition, phi);
            return rep.precondition_ok && *rep.exact_value <= rep.bound_value + 1e-9;
        });

    for (int i = 0; i < reps; ++i)
        ok_with_mix += guard([&] {
            const auto seq = support::random_bridging_partitioned(gen);
            const auto phi = support::random_phi(gen, seq.state_count());
            const auto& mu_n = seq.distributions.back();
            double mean = 0.0;
            for (std::size_t x = 0; x < phi.size(); ++x) mean += mu_n.weights[x] * phi[x];
            double sup = 0.0;
            for (std::size_t x = 0; x < phi.size(); ++x)
                sup = std::max(sup, std::abs(phi[x] - mean));
            std::vector<MetastableKernel> hats;
            for (std::size_t j = 1; j < seq.stages(); ++j)
                hats.push_back(i % 2 == 0
                                   ? metastable_kernel(seq.distributions[j], seq.partitions[j],
                                                       AlphaRule::StationaryMass)
                                   : metastable_kernel(seq.distributions[j], seq.partitions[j],
                                                       AlphaRule::ExitProbability,
                                                       &seq.kernels[j - 1]));
            const auto rep = bound_with_mixing(seq, seq.partitions, hats, sup);
            const auto v = asymptotic_variance_exact(seq, phi);
            return v.total <= rep.bound_value + 1e-9;
        });

    std::uniform_int_distribution<std::size_t> pick_t(2, 40);
    for (int i = 0; i < reps; ++i)
        ok_quality += guard([&] {
            const auto rc = support::random_region_chain(gen);
            const auto rep = bound_metastable_quality(rc.P, pick_t(gen), rc.regions, rc.mu);
            return rep.lhs <= rep.rhs + 1e-9;
        });

    Outcome out;
    out.pass = ok_global == reps && ok_no_mix == reps && ok_with_mix == reps && ok_quality == reps;
    out.details = "dominated: global " + std::to_string(ok_global) + "/500, no-mixing " +
                  std::to_string(ok_no_mix) + "/500, with-mixing " + std::to_string(ok_with_mix) +
                  "/500, metastable quality " + std::to_string(ok_quality) + "/500";
    if (!first_error.empty()) out.details += "; first error: " + first_error;
    return out;
}

// 4. The metastable approximation quality bound holds on 200 randomized
// inner/border chains.
Outcome metastable_quality() {
    std::mt19937_64 gen(44);
    std::uniform_int_distribution<std::size_t> pick_t(2, 40);
    int ok = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 200; ++i) {
        const auto rc = support::random_region_chain(gen);
        const auto rep = bound_metastable_quality(rc.P, pick_t(gen), rc.regions, rc.mu);
        worst = std::max(worst, rep.lhs - rep.rhs);
        if (rep.lhs <= rep.rhs + 1e-9) ++ok;
    }
    Outcome out;
    out.pass = ok == 200;
    out.details = "bound held on " + std::to_string(ok) + "/200 chains, worst lhs-rhs " + fmt(worst);
    return out;
}

// 5. Interpolation weights at M = 200 stay at or below 16 on every stage,
// evaluated exactly at magnetisation level.
Outcome interpolation_weights() {
    const double w = max_interpolation_weight(200);
    Outcome out;
    out.pass = w <= 16.0;
    out.details = "max stage weight " + fmt(w) + " (limit 16)";
    return out;
}

// 6. Growth constants: B_{0,1} = B_{1,2} = 1 exactly; the normalized ratio
// series up to j = 1000 stays at its frozen maximum and trends downward over
// the last decade.
Outcome growth_ratio_series() {
    const double golden_max_ratio = 0.58237428597271168;
    const auto rep = growth_constants_series(1000);
    Outcome out;
    const bool exact_ones = rep.values[0] == 1.0 && rep.values[1] == 1.0;
    const bool max_ok = std::isfinite(rep.max_ratio) &&
                        std::abs(rep.max_ratio - golden_max_ratio) <= 1e-12;
    const bool slope_ok = rep.last_decade_slope <= 0.0;
    out.pass = exact_ones && max_ok && slope_ok;
    out.details = "B01 " + fmt(rep.values[0]) + ", B12 " + fmt(rep.values[1]) + ", max ratio " +
                  fmt(rep.max_ratio) + " at j " + fmt(rep.argmax_ratio) + " (golden " +
                  fmt(golden_max_ratio) + "), last-decade slope " + fmt(rep.last_decade_slope);
    return out;
}

// 7. The drift inequality holds at every magnetisation lattice state for
// M in {50, 100, 200, 300}; drift_verify throws on any violation.
Outcome drift_lattice() {
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t states = 0;
    for (std::size_t M : {std::size_t(50), std::size_t(100), std::size_t(200), std::size_t(300)}) {
        const auto rep = drift_verify(M);
        worst = std::max(worst, rep.worst_slack);
        states += rep.states_checked;
    }
    Outcome out;
    out.pass = worst <= 0.0;
    out.details = std::to_string(states) + " lattice states across four sizes, worst slack " +
                  fmt(worst);
    return out;
}

// 8. The one-step jump variance floor min Var * M^2 >= 0.001 holds for
// M in {100, 200, 300}.
Outcome jump_variance_floor() {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t M : {std::size_t(100), std::size_t(200), std::size_t(300)})
        lo = std::min(lo, jump_variance_min(M).min_times_m2);
    Outcome out;
    out.pass = lo >= 0.001;
    out.details = "min Var*M^2 " + fmt(lo) + " (floor 0.001)";
    return out;
}

// 9. Coarse Ricci curvature floor min kappa * M >= 0.01 over 10^4 sampled
// adjacent pairs in each mode region at M = 10^7, rho = 1e-6.
Outcome curvature_floor() {
    double lo = std::numeric_limits<double>::infinity();
    for (int mode = 1; mode <= 4; ++mode)
        lo = std::min(lo, curvature_check(10000000LL, 1e-6, mode, 10000, 777).min_kappa_times_m);
    Outcome out;
    out.pass = lo >= 0.01;
    out.details = "min kappa*M " + fmt(lo) + " over four mode regions (floor 0.01)";
    return out;
}

// 10. Coupling tail at M = 50 with 10^4 replicates: the empirical tail stays
// within four standard errors of (M/2) exp(-t / 9M) at t = 5M and
// t = ceil(9 M log M). Hamming monotonicity is enforced on every step inside
// coupling_tail.
Outcome coupling_tail_bound() {
    const std::size_t M = 50;
    const std::size_t t_short = 5 * M;
    const auto t_long = std::size_t(std::ceil(9.0 * double(M) * std::log(double(M))));
    Outcome out;
    out.pass = true;
    for (std::size_t t : {t_short, t_long}) {
        const auto rep = coupling_tail(M, t, 10000, 123);
        if (!(rep.empirical_tail <= rep.bound + 4.0 * rep.std_error)) out.pass = false;
        out.details += (t == t_short ? "t=" : "; t=") + std::to_string(t) + ": tail " +
                       fmt(rep.empirical_tail) + " vs bound " + fmt(rep.bound) + " + 4se " +
                       fmt(4.0 * rep.std_error);
    }
    return out;
}

// 11. Riemann sums of the Gaussian: Psi_0(0.1, 0.3) hits sqrt(pi) to 1e-12 and
// halving R shrinks the error by far more than 10^3.
Outcome riemann_gauss_accuracy() {
    const auto rep = riemann_gauss(0, 0.1, 0.3);
    const double err_coarse = riemann_error_log10(0, 0.1, 0.3);
    const double err_fine = riemann_error_log10(0, 0.05, 0.3);
    Outcome out;
    out.pass = rep.abs_error < 1e-12 && err_fine <= err_coarse - 3.0;
    out.details = "|Psi_0 - sqrt(pi)| " + fmt(rep.abs_error) + ", log10 error " + fmt(err_coarse) +
                  " at R=0.1 vs " + fmt(err_fine) + " at R=0.05";
    return out;
}

// 12. End-to-end Potts SMC at M in {40, 60, 80}, N = 10^4, t_k = ceil(k log^2 k):
// replicate means of all four mode masses match the exact magnetisation-level
// values within three standard errors, and N * Var of the fourth mode indicator
// grows sub-quadratically in M.
Outcome potts_smc_end_to_end() {
    const std::array<std::size_t, 3> sizes{40, 60, 80};
    const std::size_t N = 10000;
    const int R = 24;
    const std::uint64_t seed = 2601;

    Outcome out;
    out.pass = true;
    double worst_z = 0.0;
    std::vector<double> log_m, log_nvar;
    for (const std::size_t M : sizes) {
        const PottsParams params{M, kBetaCritical};
        const auto exact = mode_masses(magnetisation_log_pmf(params));
        const auto bridge = bridging_builder(PottsBridging::Kind::Interpolation, params,
                                             default_mutation_schedule(M, 1.0));
        std::array<std::vector<double>, 4> est;
        for (int r = 0; r < R; ++r) {
            const auto res = run_smc(
                bridge, N, seed + M, ResamplingPolicy{},
                [](const SpinConfiguration&) { return 0.0; }, static_cast<std::uint32_t>(r));
            std::array<double, 4> mass{0.0, 0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < res.ensemble.size(); ++i) {
                const int mode =
                    mode_of_counts(spin_counts(res.ensemble[i], M), static_cast<long long>(M));
                mass[std::size_t(mode - 1)] += res.final_weights[i];
            }
            for (int m = 0; m < 4; ++m) est[std::size_t(m)].push_back(mass[std::size_t(m)]);
        }
        for (int m = 0; m < 4; ++m) {
            const auto& e = est[std::size_t(m)];
            const double se = std::sqrt(sample_variance(e) / double(R));
            const double z = std::abs(mean_of(e) - exact[std::size_t(m)]) / se;
            worst_z = std::max(worst_z, z);
            if (!(z <= 3.0)) out.pass = false;
        }
        log_m.push_back(std::log(double(M)));
        log_nvar.push_back(std::log(double(N) * sample_variance(est[3])));
    }
    const double exponent = fitted_slope(log_m, log_nvar);
    if (!(exponent < 2.0)) out.pass = false;
    out.details = "worst |mean - exact| " + fmt(worst_z) + " standard errors (limit 3), N*Var growth exponent " +
                  fmt(exponent) + " (limit 2)";
    return out;
}

// 13. Contour mode counts at M = 1000: one significant region at beta_c/2,
// four at beta_c, three at 2 beta_c.
Outcome contour_mode_counts() {
    const std::array<double, 3> betas{kBetaCritical / 2.0, kBetaCritical, 2.0 * kBetaCritical};
    const std::array<int, 3> expected{1, 4, 3};
    Outcome out;
    out.pass = true;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto rep = contour_analyze(betas[i], 1000);
        if (rep.significant_regions != expected[i]) out.pass = false;
        out.details += (i ? ", " : "") + std::to_string(rep.significant_regions) + "/" +
                       std::to_string(expected[i]);
    }
    out.details = "significant regions (got/want): " + out.details;
    return out;
}

using CriterionFn = Outcome (*)();

constexpr CriterionFn kCriteria[13] = {
    counterexample_values, clt_bracketing,   bound_domination,       metastable_quality,
    interpolation_weights, growth_ratio_series, drift_lattice,       jump_variance_floor,
    curvature_floor,       coupling_tail_bound, riemann_gauss_accuracy, potts_smc_end_to_end,
    contour_mode_counts};

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance_tests <criterion 1..13>\n");
        return 2;
    }
    const int id = std::atoi(argv[1]);
    if (id < 1 || id > 13) {
        std::fprintf(stderr, "usage: acceptance_tests <criterion 1..13>\n");
        return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = kCriteria[id - 1]();
    } catch (const std::exception& e) {
        out.pass = false;
        out.details = std::string("unexpected exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("ACCEPTANCE %d %s  %s  (%.1f s)\n", id, out.pass ? "PASS" : "FAIL",
                out.details.c_str(), secs);
    return out.pass ? 0 : 1;
}
