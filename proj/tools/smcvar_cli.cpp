#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "smcvar/bounds.hpp"
#include "smcvar/potts.hpp"
#include "smcvar/potts_analysis.hpp"
#include "smcvar/report.hpp"
#include "smcvar/smc.hpp"
#include "smcvar/variance.hpp"

using nlohmann::json;
using namespace smcvar;

namespace {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open input file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw InputError("cannot parse " + path + ": " + e.what());
    }
    return j;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw InputError("cannot parse number '" + tok + "'");
        }
    }
    if (out.empty()) throw InputError("empty value list");
    return out;
}

// Shared output plumbing: results CSV (or JSON) plus a manifest sidecar that
// records the fully resolved configuration.
struct Emitter {
    std::string out_path;
    std::string format = "csv";
    std::string subcommand;
    std::uint64_t seed = 0;
    json parameters = json::object();
    CsvTable table;
    json extra = json::object();   // merged into the JSON result document

    void finish(double wall_seconds) const {
        if (out_path.empty()) return;
        if (format == "csv") {
            write_csv(out_path, table);
        } else {
            table.check();
            json doc = extra;
            doc["header"] = table.header;
            doc["rows"] = table.rows;
            write_text_file(out_path, doc.dump(2) + "\n");
        }
        json manifest;
        manifest["subcommand"] = subcommand;
        manifest["parameters"] = parameters;
        manifest["seed"] = seed;
        manifest["versions"] = {{"smcvar", kVersion}, {"compiler", __VERSION__}};
        manifest["wall_time_seconds"] = wall_seconds;
        write_text_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
    }
};

int fail_input(const std::string& msg) {
    std::cerr << "invalid input: " << msg << "\n";
    return 2;
}

int fail_assert(const std::string& msg) {
    std::cerr << "assertion failed: " << msg << "\n";
    return 1;
}

double opt_or(const std::optional<double>& v, double fallback) {
    return v ? *v : fallback;
}

void print_bound(const BoundReport& r) {
    std::cout << r.bound_name << ": bound=" << r.bound_value;
    if (r.exact_value) std::cout << " exact=" << *r.exact_value;
    std::cout << " gamma_g=" << r.gamma_g;
    if (r.gamma_K) std::cout << " gamma_K=" << *r.gamma_K;
    if (r.gamma_K_local) std::cout << " gamma_K_local=" << *r.gamma_K_local;
    if (r.A) std::cout << " A=" << *r.A;
    std::cout << " precondition=" << (r.precondition_ok ? "ok" : "violated") << "\n";
}

// Options shared by the experiment commands; every field lands in the manifest.
struct Cli {
    std::string input;
    std::string phi_text;
    std::string out;
    std::string format = "csv";
    std::string policy = "every-stage";
    std::string kind = "interpolation";
    double threshold = 0.5;
    std::uint64_t seed = 20260816;
    std::size_t N = 1000;
    std::size_t replicates = 200;
    std::size_t M = 50;
    std::size_t potts_M = 0;
    std::size_t stages = 10;
    double rho = 1e-6;
    double beta_tilde = kBetaCritical;
    double c1 = 1.0;
    long long j0 = 10000000LL;
    int threads = 0;
    std::size_t t = 2;
    long long l = 100000;
    long long max_steps = 1000000;
    std::size_t jmax = 1000;
    int mode = 0;
    std::size_t pairs = 10000;
    int riemann_m = 0;
    double riemann_R = 0.1;
    double riemann_delta = 0.0;
    std::size_t resolution = 1000;
    std::size_t contour_resolution = 0;
    double prominence = 0.5;
    bool verbatim = false;
};

ResamplingPolicy make_policy(const Cli& cli) {
    ResamplingPolicy p;
    if (cli.policy == "every-stage") {
        p.mode = ResamplingPolicy::Mode::EveryStage;
    } else if (cli.policy == "ess-threshold") {
        p.mode = ResamplingPolicy::Mode::EssThreshold;
        p.threshold = cli.threshold;
    } else {
        throw InputError("unknown policy '" + cli.policy + "' (every-stage | ess-threshold)");
    }
    p.validate();
    return p;
}

struct LoadedModel {
    BridgingSequence seq;
    std::vector<double> phi;
};

LoadedModel load_finite_model(const Cli& cli) {
    if (cli.input.empty()) throw InputError("--input is required");
    LoadedModel m;
    try {
        m.seq = bridging_from_json(load_json_file(cli.input));
    } catch (const ValidationError& e) {
        throw InputError(e.what());
    }
    if (cli.phi_text.empty()) throw InputError("--phi is required");
    m.phi = parse_double_list(cli.phi_text);
    if (m.phi.size() != m.seq.state_count())
        throw InputError("phi length does not match the state count");
    return m;
}

// phi spec for the Potts model: modeK = majority-region indicator, innerK = inner
// part of region K under the configured rho / j0 rule.
std::function<double(const SpinConfiguration&)> potts_phi(const Cli& cli) {
    const std::string& s = cli.phi_text;
    const RegionConfig cfg{cli.rho, cli.j0};
    const std::size_t M = cli.potts_M;
    if (s.size() == 5 && s.rfind("mode", 0) == 0 && s[4] >= '1' && s[4] <= '4') {
        const int target = s[4] - '0';
        return [M, target](const SpinConfiguration& sigma) {
            return mode_of_counts(spin_counts(sigma, M), static_cast<long long>(M)) == target
                       ? 1.0
                       : 0.0;
        };
    }
    if (s.size() == 6 && s.rfind("inner", 0) == 0 && s[5] >= '1' && s[5] <= '4') {
        const int target = s[5] - '0';
        return [M, target, cfg](const SpinConfiguration& sigma) {
            const auto n = spin_counts(sigma, M);
            const std::array<double, 3> r = {double(n[0]) / double(M), double(n[1]) / double(M),
                                             double(n[2]) / double(M)};
            const auto mr = mode_and_region(r, static_cast<long long>(M), cfg);
            return (mr.mode == target && mr.inner) ? 1.0 : 0.0;
        };
    }
    throw InputError("potts phi must be mode1..mode4 or inner1..inner4");
}

PottsBridging build_potts(const Cli& cli) {
    const PottsParams params{cli.potts_M, cli.beta_tilde};
    if (cli.kind == "interpolation")
        return bridging_builder(PottsBridging::Kind::Interpolation, params,
                                default_mutation_schedule(cli.potts_M, cli.c1));
    if (cli.kind == "tempering")
        return bridging_builder(PottsBridging::Kind::Tempering, params,
                                default_mutation_schedule(cli.stages, cli.c1));
    throw InputError("unknown kind '" + cli.kind + "' (interpolation | tempering)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-state SMC variance bounds and Potts experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file");
    app.allow_config_extras(false);

    Cli cli;
    const auto t0 = std::chrono::steady_clock::now();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", cli.out, "results file; a .manifest.json sidecar is added");
        sub->add_option("--format", cli.format, "csv | json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", cli.threads, "worker cap (results are cap-independent)");
        sub->add_option("--seed", cli.seed, "root seed");
    };

    auto* c_counter = app.add_subcommand("counterexample", "two-kernel comparison instance");
    add_common(c_counter);

    auto* c_var = app.add_subcommand("variance-exact", "exact asymptotic variance of a model file");
    add_common(c_var);
    c_var->add_option("--input", cli.input, "bridging model JSON")->required();
    c_var->add_option("--phi", cli.phi_text, "comma-separated test function values")->required();

    auto* c_smc = app.add_subcommand("smc-run", "single SMC run");
    add_common(c_smc);
    c_smc->add_option("--input", cli.input, "bridging model JSON");
    c_smc->add_option("--phi", cli.phi_text, "phi values, or modeK/innerK with --potts-M");
    c_smc->add_option("--N", cli.N, "particle count");
    c_smc->add_option("--policy", cli.policy, "every-stage | ess-threshold");
    c_smc->add_option("--threshold", cli.threshold, "ESS fraction for ess-threshold");
    c_smc->add_option("--potts-M", cli.potts_M, "run the Potts model at this size");
    c_smc->add_option("--kind", cli.kind, "interpolation | tempering");
    c_smc->add_option("--stages", cli.stages, "tempering stage count");
    c_smc->add_option("--c1", cli.c1, "mutation schedule constant");
    c_smc->add_option("--j0", cli.j0, "single-mode cutoff prefix length");
    c_smc->add_option("--rho", cli.rho, "mode region radius");
    c_smc->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_rep = app.add_subcommand("replicate-variance", "replicate SMC variance estimate");
    add_common(c_rep);
    c_rep->add_option("--input", cli.input, "bridging model JSON");
    c_rep->add_option("--phi", cli.phi_text, "phi values, or modeK/innerK with --potts-M");
    c_rep->add_option("--N", cli.N, "particle count");
    c_rep->add_option("--replicates", cli.replicates, "replicate count");
    c_rep->add_option("--policy", cli.policy, "every-stage | ess-threshold");
    c_rep->add_option("--threshold", cli.threshold, "ESS fraction for ess-threshold");
    c_rep->add_option("--potts-M", cli.potts_M, "run the Potts model at this size");
    c_rep->add_option("--kind", cli.kind, "interpolation | tempering");
    c_rep->add_option("--stages", cli.stages, "tempering stage count");
    c_rep->add_option("--c1", cli.c1, "mutation schedule constant");
    c_rep->add_option("--j0", cli.j0, "single-mode cutoff prefix length");
    c_rep->add_option("--rho", cli.rho, "mode region radius");
    c_rep->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_bounds = app.add_subcommand("bounds", "variance bounds for a model file");
    add_common(c_bounds);
    c_bounds->add_option("--input", cli.input, "bridging model JSON")->required();
    c_bounds->add_option("--phi", cli.phi_text, "comma-separated test function values")->required();

    auto* c_meta = app.add_subcommand("metastable-quality", "t-step kernel approximation quality");
    add_common(c_meta);
    c_meta->add_option("--input", cli.input, "chain JSON: kernel, mu, mode_of, is_inner")->required();
    c_meta->add_option("--t", cli.t, "step count (>= 2)");

    auto* c_growth = app.add_subcommand("growth-constants", "mode-mass growth constants series");
    add_common(c_growth);
    c_growth->add_option("--jmax", cli.jmax, "largest prefix length");
    c_growth->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_drift = app.add_subcommand("drift-verify", "center-distance drift bound check");
    add_common(c_drift);
    c_drift->add_option("--M", cli.M, "site count")->required();
    c_drift->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_jump = app.add_subcommand("jump-variance", "one-step center-distance variance floor");
    add_common(c_jump);
    c_jump->add_option("--M", cli.M, "site count")->required();
    c_jump->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_curv = app.add_subcommand("curvature", "coarse Ricci curvature in mode regions");
    add_common(c_curv);
    c_curv->add_option("--M", cli.M, "site count")->required();
    c_curv->add_option("--rho", cli.rho, "region radius");
    c_curv->add_option("--mode", cli.mode, "region 1..4, or 0 for all");
    c_curv->add_option("--pairs", cli.pairs, "sampled adjacent pairs (0 = exhaustive)");
    c_curv->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_coup = app.add_subcommand("coupling-tail", "coalescence tail of the coupled pair");
    add_common(c_coup);
    c_coup->add_option("--M", cli.M, "site count")->required();
    c_coup->add_option("--t", cli.t, "horizon");
    c_coup->add_option("--replicates", cli.replicates, "replicate count");
    c_coup->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_hit = app.add_subcommand("hitting", "first hitting time of the center set");
    add_common(c_hit);
    c_hit->add_option("--M", cli.M, "site count")->required();
    c_hit->add_option("--rho", cli.rho, "target radius rho/2");
    c_hit->add_option("--replicates", cli.replicates, "replicate count");
    c_hit->add_option("--max-steps", cli.max_steps, "per-replicate step cap");
    c_hit->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_esc = app.add_subcommand("escape", "escape count from the central region");
    add_common(c_esc);
    c_esc->add_option("--M", cli.M, "site count")->required();
    c_esc->add_option("--rho", cli.rho, "region radius");
    c_esc->add_option("--l", cli.l, "horizon");
    c_esc->add_option("--replicates", cli.replicates, "replicate count");
    c_esc->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_rg = app.add_subcommand("riemann-gauss", "Gaussian Riemann-sum moments");
    add_common(c_rg);
    c_rg->add_option("--m", cli.riemann_m, "moment order");
    c_rg->add_option("--R", cli.riemann_R, "grid spacing");
    c_rg->add_option("--delta", cli.riemann_delta, "grid offset");

    auto* c_log = app.add_subcommand("loglik-check", "asymptotic log-likelihood landscape");
    add_common(c_log);
    c_log->add_option("--resolution", cli.resolution, "grid points per edge");
    c_log->add_flag("--verbatim", cli.verbatim, "use the cubic printed form");

    auto* c_tv = app.add_subcommand("local-tv", "restriction distance to mode regions");
    add_common(c_tv);
    c_tv->add_option("--M", cli.M, "site count")->required();
    c_tv->add_option("--rho", cli.rho, "region radius");
    c_tv->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");

    auto* c_cont = app.add_subcommand("contour", "local maxima of the magnetisation landscape");
    add_common(c_cont);
    c_cont->add_option("--M", cli.M, "site count")->required();
    c_cont->add_option("--beta-tilde", cli.beta_tilde, "inverse temperature");
    c_cont->add_option("--resolution", cli.contour_resolution,
                       "0 = exact lattice, else surrogate grid");
    c_cont->add_option("--threshold", cli.prominence, "prominence threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    }

    Emitter em;
    em.out_path = cli.out;
    em.format = cli.format;
    em.seed = cli.seed;

    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    try {
        if (c_counter->parsed()) {
            em.subcommand = "counterexample";
            const auto inst = counterexample_instance();
            const auto v_mix = asymptotic_variance_exact(inst.with_mixing, inst.phi);
            const auto v_nomix = asymptotic_variance_exact(inst.no_mixing, inst.phi);
            const auto b_mix = bound_global(inst.with_mixing, inst.phi);
            const auto b_nomix = bound_no_mixing(inst.no_mixing, inst.partition, inst.phi);
            // The block-preservation premise fails for the mixing kernel, so its
            // local-mixing bound is vacuous rather than an error here.
            auto no_mixing_or_inf = [&](const BridgingSequence& seq) {
                try {
                    return bound_no_mixing(seq, inst.partition, inst.phi).bound_value;
                } catch (const ValidationError&) {
                    return std::numeric_limits<double>::infinity();
                }
            };
            std::cout.precision(4);
            std::cout << std::fixed;
            std::cout << "asymptotic variance, stage-stationary norms: with mixing "
                      << v_mix.stage_shifted_total << ", without mixing "
                      << v_nomix.stage_shifted_total << "\n";
            std::cout.unsetf(std::ios::fixed);
            std::cout.precision(17);
            std::cout << "initial-stage norms: with mixing " << v_mix.total << ", without mixing "
                      << v_nomix.total << "\n";
            std::cout << "max row renormalization: " << inst.max_renormalization << "\n";
            print_bound(b_mix);
            print_bound(b_nomix);
            em.parameters = {{"instance", "published"}};
            em.table.header = {"with_mixing", "shifted_total", "total", "target_variance",
                               "bound_global", "bound_no_mixing", "max_renormalization"};
            em.table.rows = {{1, v_mix.stage_shifted_total, v_mix.total, v_mix.variance,
                              b_mix.bound_value, no_mixing_or_inf(inst.with_mixing),
                              inst.max_renormalization},
                             {0, v_nomix.stage_shifted_total, v_nomix.total, v_nomix.variance,
                              bound_global(inst.no_mixing, inst.phi).bound_value,
                              b_nomix.bound_value, inst.max_renormalization}};
            em.finish(wall());
            return 0;
        }

        if (c_var->parsed()) {
            em.subcommand = "variance-exact";
            LoadedModel m;
            try {
                m = load_finite_model(cli);
            } catch (const InputError& e) {
                return fail_input(e.what());
            }
            const auto v = asymptotic_variance_exact(m.seq, m.phi);
            std::cout.precision(17);
            std::cout << "total " << v.total << " shifted_total " << v.stage_shifted_total
                      << " target_variance " << v.variance << "\n";
            em.parameters = {{"input", cli.input}, {"phi", m.phi}};
            em.table.header = {"k", "term", "shifted_term"};
            for (std::size_t k = 0; k < v.terms.size(); ++k)
                em.table.rows.push_back({double(k), v.terms[k], v.stage_shifted_terms[k]});
            em.extra = {{"total", v.total},
                        {"shifted_total", v.stage_shifted_total},
                        {"target_variance", v.variance}};
            em.finish(wall());
            return 0;
        }

        if (c_smc->parsed() || c_rep->parsed()) {
            const bool single = c_smc->parsed();
            em.subcommand = single ? "smc-run" : "replicate-variance";
            ResamplingPolicy policy;
            try {
                policy = make_policy(cli);
            } catch (const InputError& e) {
                return fail_input(e.what());
            }
            em.parameters = {{"N", cli.N},          {"policy", cli.policy},
                             {"threshold", cli.threshold}, {"seed", cli.seed},
                             {"replicates", cli.replicates}};

            auto emit_smc_json = [&](double estimate, const std::vector<double>& ess_trace,
                                     const ReplicateVarianceReport* rv) {
                em.extra = {{"estimate", estimate},
                            {"ess_trace", ess_trace},
                            {"replicate_variance", nullptr},
                            {"ci", nullptr},
                            {"deaths", rv ? rv->deaths : 0}};
                if (rv) {
                    em.extra["replicate_variance"] = rv->n_times_variance;
                    em.extra["ci"] = {rv->ci_lo, rv->ci_hi};
                }
            };

            auto run_model = [&](const auto& model, const auto& phi) -> int {
                if (single) {
                    const auto res = run_smc(model, cli.N, cli.seed, policy, phi);
                    std::cout.precision(17);
                    std::cout << "estimate " << res.estimate << "\n";
                    if (res.experimental)
                        std::cout << "note: ess-threshold resampling is experimental\n";
                    em.table.header = {"stage", "ess"};
                    for (std::size_t k = 0; k < res.ess_trace.size(); ++k)
                        em.table.rows.push_back({double(k), res.ess_trace[k]});
                    emit_smc_json(res.estimate, res.ess_trace, nullptr);
                } else {
                    const auto rv =
                        replicate_asymptotic_variance(model, phi, cli.N, cli.replicates, cli.seed,
                                                      policy);
                    double mean = 0.0;
                    for (double v : rv.estimates) mean += v;
                    mean /= double(rv.estimates.size());
                    std::cout.precision(17);
                    std::cout << "estimate " << mean << "\n";
                    std::cout << "n_times_variance " << rv.n_times_variance << " ci ["
                              << rv.ci_lo << ", " << rv.ci_hi << "] deaths " << rv.deaths
                              << " survivors " << rv.replicates_used << "\n";
                    em.table.header = {"replicate", "estimate"};
                    for (std::size_t r = 0; r < rv.estimates.size(); ++r)
                        em.table.rows.push_back({double(r), rv.estimates[r]});
                    emit_smc_json(mean, {}, &rv);
                }
                em.finish(wall());
                return 0;
            };

            if (cli.potts_M > 0) {
                em.parameters["potts_M"] = cli.potts_M;
                em.parameters["kind"] = cli.kind;
                em.parameters["c1"] = cli.c1;
                em.parameters["j0"] = cli.j0;
                em.parameters["rho"] = cli.rho;
                em.parameters["beta_tilde"] = cli.beta_tilde;
                try {
                    const auto model = build_potts(cli);
                    const auto phi = potts_phi(cli);
                    return run_model(model, phi);
                } catch (const InputError& e) {
                    return fail_input(e.what());
                }
            }
            LoadedModel m;
            try {
                m = load_finite_model(cli);
            } catch (const InputError& e) {
                return fail_input(e.what());
            }
            em.parameters["input"] = cli.input;
            em.parameters["phi"] = m.phi;
            const auto& phi_values = m.phi;
            return run_model(FiniteModel(m.seq),
                             [&phi_values](std::size_t x) { return phi_values[x]; });
        }

        if (c_bounds->parsed()) {
            em.subcommand = "bounds";
            LoadedModel m;
            try {
                m = load_finite_model(cli);
                if (m.seq.partitions.empty())
                    throw InputError("bounds requires partitions in the model file");
            } catch (const InputError& e) {
                return fail_input(e.what());
            }
            const auto v = asymptotic_variance_exact(m.seq, m.phi);
            const auto global = bound_global(m.seq, m.phi);
            const auto no_mix = bound_no_mixing(m.seq, m.seq.partitions[0], m.phi);
            const std::size_t n = m.seq.stages();
            double mu_phi = 0.0, sup = 0.0;
            for (std::size_t x = 0; x < m.phi.size(); ++x)
                mu_phi += m.seq.distributions[n].weights[x] * m.phi[x];
            for (std::size_t x = 0; x < m.phi.size(); ++x)
                sup = std::max(sup, std::abs(m.phi[x] - mu_phi));
            std::vector<MetastableKernel> mu_hats;
            for (std::size_t j = 1; j + 1 <= n; ++j)
                mu_hats.push_back(metastable_kernel(m.seq.distributions[j], m.seq.partitions[j],
                                                    AlphaRule::StationaryMass));
            const auto with_mix = bound_with_mixing(m.seq, m.seq.partitions, mu_hats, sup);
            std::cout.precision(17);
            std::cout << "exact " << v.total << "\n";
            print_bound(global);
            print_bound(no_mix);
            print_bound(with_mix);
            em.parameters = {{"input", cli.input}, {"phi", m.phi}};
            em.table.header = {"bound",        "gamma_g",  "gamma_K", "gamma_K_local", "A",
                               "precondition", "bound_value", "exact"};
            auto row = [&](double id, const BoundReport& r) {
                em.table.rows.push_back({id, r.gamma_g, opt_or(r.gamma_K, -1.0),
                                         opt_or(r.gamma_K_local, -1.0), opt_or(r.A, -1.0),
                                         r.precondition_ok ? 1.0 : 0.0, r.bound_value, v.total});
            };
            row(0, global);
            row(1, no_mix);
            row(2, with_mix);
            em.extra = {{"term_bounds", with_mix.term_bounds}};
            em.finish(wall());
            return 0;
        }

        if (c_meta->parsed()) {
            em.subcommand = "metastable-quality";
            std::vector<std::vector<double>> P;
            FiniteDistribution mu;
            RegionStructure regions;
            try {
                const auto j = load_json_file(cli.input);
                P = j.at("kernel").get<std::vector<std::vector<double>>>();
                mu.weights = j.at("mu").get<std::vector<double>>();
                regions.mode_of = j.at("mode_of").get<std::vector<int>>();
                regions.is_inner = j.at("is_inner").get<std::vector<char>>();
                regions.validate();
                mu.validate("mu");
            } catch (const json::exception& e) {
                return fail_input(e.what());
            } catch (const ValidationError& e) {
                return fail_input(e.what());
            } catch (const InputError& e) {
                return fail_input(e.what());
            }
            const auto q = bound_metastable_quality(TransitionKernel{P}, cli.t, regions, mu);
            std::cout.precision(17);
            std::cout << "lhs " << q.lhs << " rhs " << q.rhs << " stay " << q.stay_term << " tv "
                      << q.tv_term << "\n";
            em.parameters = {{"input", cli.input}, {"t", cli.t}};
            em.table.header = {"t", "lhs", "rhs", "stay_term", "tv_term"};
            em.table.rows = {{double(cli.t), q.lhs, q.rhs, q.stay_term, q.tv_term}};
            em.finish(wall());
            return 0;
        }

        if (c_growth->parsed()) {
            em.subcommand = "growth-constants";
            const auto rep = growth_constants_series(cli.jmax, cli.beta_tilde);
            std::cout.precision(17);
            std::cout << "B(0,1) " << rep.values[0] << " B(1,2) " << rep.values[1] << "\n";
            std::cout << "max_ratio " << rep.max_ratio << " at j " << rep.argmax_ratio
                      << " last_decade_slope " << rep.last_decade_slope << "\n";
            em.parameters = {{"jmax", cli.jmax}, {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"j", "B", "ratio"};
            for (std::size_t i = 2; i < rep.index.size(); ++i)
                em.table.rows.push_back({rep.index[i], rep.values[i], rep.ratio[i]});
            em.extra = {{"max_ratio", rep.max_ratio},
                        {"argmax_ratio", rep.argmax_ratio},
                        {"last_decade_slope", rep.last_decade_slope}};
            em.finish(wall());
            return 0;
        }

        if (c_drift->parsed()) {
            em.subcommand = "drift-verify";
            std::vector<DriftRow> rows;
            const auto rep = drift_verify(cli.M, cli.beta_tilde, &rows);
            std::cout.precision(17);
            std::cout << "worst_slack " << rep.worst_slack << " states " << rep.states_checked
                      << " center_adjacent_max " << rep.center_adjacent_max_abs_drift << "\n";
            em.parameters = {{"M", cli.M}, {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"n1", "n2", "n3", "d_C", "lhs", "rhs", "slack"};
            for (const auto& r : rows)
                em.table.rows.push_back({double(r.n[0]), double(r.n[1]), double(r.n[2]), r.d_C,
                                         r.lhs, r.rhs, r.lhs - r.rhs});
            em.finish(wall());
            return 0;
        }

        if (c_jump->parsed()) {
            em.subcommand = "jump-variance";
            std::vector<std::pair<std::array<long long, 3>, double>> rows;
            const auto rep = jump_variance_min(cli.M, cli.beta_tilde, &rows);
            std::cout.precision(17);
            std::cout << "min_var_times_M2 " << rep.min_times_m2 << " at (" << rep.argmin[0] << ","
                      << rep.argmin[1] << "," << rep.argmin[2] << ")\n";
            em.parameters = {{"M", cli.M}, {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"n1", "n2", "n3", "var_times_m2"};
            for (const auto& r : rows)
                em.table.rows.push_back(
                    {double(r.first[0]), double(r.first[1]), double(r.first[2]), r.second});
            em.finish(wall());
            return 0;
        }

        if (c_curv->parsed()) {
            em.subcommand = "curvature";
            em.parameters = {{"M", cli.M},        {"rho", cli.rho},   {"mode", cli.mode},
                             {"pairs", cli.pairs}, {"seed", cli.seed}, {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"mode", "min_kappa_times_m", "pairs", "states",
                               "x1",   "x2",                "x3",    "y1",
                               "y2",   "y3"};
            std::vector<int> modes =
                cli.mode == 0 ? std::vector<int>{1, 2, 3, 4} : std::vector<int>{cli.mode};
            std::cout.precision(17);
            for (int mode : modes) {
                const auto rep = curvature_check(static_cast<long long>(cli.M), cli.rho, mode,
                                                 cli.pairs, cli.seed, cli.beta_tilde);
                std::cout << "mode " << mode << " min_kappa_times_m " << rep.min_kappa_times_m
                          << " pairs " << rep.pairs_checked << " states " << rep.region_states
                          << "\n";
                em.table.rows.push_back({double(mode), rep.min_kappa_times_m,
                                         double(rep.pairs_checked), double(rep.region_states),
                                         double(rep.arg_x[0]), double(rep.arg_x[1]),
                                         double(rep.arg_x[2]), double(rep.arg_y[0]),
                                         double(rep.arg_y[1]), double(rep.arg_y[2])});
            }
            em.finish(wall());
            return 0;
        }

        if (c_coup->parsed()) {
            em.subcommand = "coupling-tail";
            const auto rep = coupling_tail(cli.M, cli.t, cli.replicates, cli.seed, cli.beta_tilde);
            std::cout.precision(17);
            std::cout << "empirical_tail " << rep.empirical_tail << " bound " << rep.bound
                      << " std_error " << rep.std_error << "\n";
            em.parameters = {{"M", cli.M},
                             {"t", cli.t},
                             {"replicates", cli.replicates},
                             {"seed", cli.seed},
                             {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"replicate", "tau"};
            for (std::size_t r = 0; r < rep.taus.size(); ++r)
                em.table.rows.push_back({double(r), double(rep.taus[r])});
            em.extra = {{"empirical_tail", rep.empirical_tail},
                        {"bound", rep.bound},
                        {"std_error", rep.std_error}};
            em.finish(wall());
            return 0;
        }

        if (c_hit->parsed()) {
            em.subcommand = "hitting";
            const auto rep =
                hitting_experiment(cli.M, cli.rho, cli.replicates, cli.seed, cli.max_steps,
                                   nullptr, cli.beta_tilde);
            const double tail = double(rep.capped) / double(rep.taus.size());
            std::cout.precision(17);
            std::cout << "median " << rep.median << " capped " << rep.capped << "\n";
            for (double C : {330.0, 300.0}) {
                const double r = double(cli.max_steps) / (C * double(cli.M) * std::log(double(cli.M)));
                const double bound = r >= 1.0 ? std::exp(-std::floor(r)) : 1.0;
                std::cout << "tail_vs_C" << C << " empirical " << tail << " bound " << bound
                          << "\n";
            }
            em.parameters = {{"M", cli.M},
                             {"rho", cli.rho},
                             {"replicates", cli.replicates},
                             {"max_steps", cli.max_steps},
                             {"seed", cli.seed},
                             {"C_constants", {330, 300}},
                             {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"replicate", "tau"};
            for (std::size_t r = 0; r < rep.taus.size(); ++r)
                em.table.rows.push_back({double(r), double(rep.taus[r])});
            em.finish(wall());
            return 0;
        }

        if (c_esc->parsed()) {
            em.subcommand = "escape";
            const auto rep =
                escape_experiment(cli.M, cli.rho, cli.l, cli.replicates, cli.seed, cli.beta_tilde);
            std::cout.precision(17);
            std::cout << "escapes " << rep.escapes << " of " << rep.replicates << " bound "
                      << rep.bound << "\n";
            em.parameters = {{"M", cli.M},
                             {"rho", cli.rho},
                             {"l", cli.l},
                             {"replicates", cli.replicates},
                             {"seed", cli.seed},
                             {"beta_tilde", cli.beta_tilde}};
            em.table.header = {"escapes", "replicates", "bound"};
            em.table.rows = {{double(rep.escapes), double(rep.replicates), rep.bound}};
            em.finish(wall());
            return 0;
        }

        if (c_rg->parsed()) {
            em.subcommand = "riemann-gauss";
            RiemannReport rep;
            try {
                rep = riemann_gauss(cli.riemann_m, cli.riemann_R, cli.riemann_delta);
            } catch (const ValidationError& e) {
                return fail_input(e.what());
            }
            const double log10err = riemann_error_log10(cli.riemann_m, cli.riemann_R,
                                                        cli.riemann_delta);
            std::cout.precision(17);
            std::cout << "psi " << rep.psi << " target " << rep.target << " abs_error "
                      << rep.abs_error << " log10_error " << log10err << "\n";
            em.parameters = {{"m", cli.riemann_m}, {"R", cli.riemann_R}, {"delta", cli.riemann_delta}};
            em.table.header = {"m", "R", "delta", "psi", "target", "abs_error", "log10_error"};
            em.table.rows = {{double(cli.riemann_m), cli.riemann_R, cli.riemann_delta, rep.psi,
                              rep.target, rep.abs_error, log10err}};
            em.finish(wall());
            return 0;
        }

        if (c_log->parsed()) {
            em.subcommand = "loglik-check";
            LoglikReport rep;
            try {
                rep = asymptotic_loglik_check(cli.resolution, cli.verbatim);
            } catch (const ValidationError& e) {
                return fail_input(e.what());
            }
            std::cout.precision(17);
            std::cout << "corner " << rep.corner_value << " center " << rep.center_value
                      << " max_center_diff " << rep.max_center_diff << "\n";
            std::cout << "best_c " << rep.best_c << " at (" << rep.arg_best[0] << ","
                      << rep.arg_best[1] << "," << rep.arg_best[2] << ")\n";
            em.parameters = {{"resolution", cli.resolution}, {"verbatim", cli.verbatim}};
            em.table.header = {"corner_value", "center_value", "max_center_diff", "best_c",
                               "best_s1",      "best_s2",      "best_s3",        "max_gap_violation"};
            em.table.rows = {{rep.corner_value, rep.center_value, rep.max_center_diff, rep.best_c,
                              rep.arg_best[0], rep.arg_best[1], rep.arg_best[2],
                              rep.max_gap_violation}};
            em.finish(wall());
            return 0;
        }

        if (c_tv->parsed()) {
            em.subcommand = "local-tv";
            LocalTvReport rep;
            try {
                rep = local_tv_profile(cli.M, cli.rho, cli.beta_tilde);
            } catch (const ValidationError& e) {
                return fail_input(e.what());
            }
            std::cout.precision(17);
            em.table.header = {"mode", "tv", "outside_inner", "lambda_mass", "mode_mass"};
            for (int mode = 1; mode <= 4; ++mode) {
                std::cout << "mode " << mode << " tv " << rep.tv[mode - 1] << " outside_inner "
                          << rep.outside_inner[mode - 1] << "\n";
                em.table.rows.push_back({double(mode), rep.tv[mode - 1],
                                         rep.outside_inner[mode - 1], rep.lambda_mass[mode - 1],
                                         rep.mode_mass[mode - 1]});
            }
            em.parameters = {{"M", cli.M}, {"rho", cli.rho}, {"beta_tilde", cli.beta_tilde}};
            em.finish(wall());
            return 0;
        }

        if (c_cont->parsed()) {
            em.subcommand = "contour";
            const auto rep =
                contour_analyze(cli.beta_tilde, cli.M, cli.contour_resolution, cli.prominence);
            std::cout << "raw_regions " << rep.raw_regions << " significant_regions "
                      << rep.significant_regions << (rep.surrogate ? " (surrogate)" : "") << "\n";
            std::cout.precision(17);
            for (const auto& mx : rep.maxima)
                std::cout << "max at (" << mx.s[0] << "," << mx.s[1] << "," << mx.s[2]
                          << ") value " << mx.value << " prominence " << mx.prominence << "\n";
            em.parameters = {{"M", cli.M},
                             {"beta_tilde", cli.beta_tilde},
                             {"resolution", cli.contour_resolution},
                             {"threshold", cli.prominence}};
            em.table.header = {"s1", "s2", "s3", "value", "prominence"};
            for (const auto& mx : rep.maxima)
                em.table.rows.push_back({mx.s[0], mx.s[1], mx.s[2], mx.value, mx.prominence});
            em.extra = {{"raw_regions", rep.raw_regions},
                        {"significant_regions", rep.significant_regions}};
            em.finish(wall());
            return 0;
        }

        return fail_input("no subcommand given");
    } catch (const SmcParticleDeath& e) {
        return fail_assert(e.what());
    } catch (const ValidationError& e) {
        return fail_assert(e.what());
    } catch (const InputError& e) {
        return fail_input(e.what());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
