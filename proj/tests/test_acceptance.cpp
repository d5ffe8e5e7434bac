// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "israte/laplace.hpp"
#include "israte/quantile.hpp"
#include "israte/rates.hpp"
#include "israte/subset.hpp"
#include "oracles.hpp"

using namespace israte;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

bool close(double got, double want, double tol) {
    if (std::isinf(want)) return got == want;
    return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

// 1 -------------------------------------------------------------------------
Outcome gamma_oracle() {
    double worst = 0.0;
    int mismatched_inf = 0;
    for (int i = 1; i <= 50; ++i) {
        const double eps = 0.02 * i;
        for (int j = 1; j <= 50; ++j) {
            const double s = j / 51.0;
            for (bool plus : {true, false}) {
                const double got = (plus ? gamma_plus(eps, s) : gamma_minus(eps, s)).value;
                const double want = oracle::gamma(eps, s, plus);
                if (std::isinf(want) || std::isinf(got)) {
                    mismatched_inf += got != want;
                    continue;
                }
                worst = std::max(worst, std::abs(got - want) / std::max(1.0, want));
            }
        }
    }
    return {worst <= 1e-9 && mismatched_inf == 0,
            "max deviation " + fmt(worst) + ", infinite mismatches " + std::to_string(mismatched_inf)};
}

// 2 -------------------------------------------------------------------------
Outcome laplace_convergence() {
    struct Case {
        std::vector<double> points, probs, wf;
        MeasureFunctional h;
        bool linear;
    };
    auto capped_square = [](std::vector<double> g, double cap) {
        return MeasureFunctional([g, cap](std::span<const double> nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += g[i] * nu[i];
            return std::min(s * s, cap);
        });
    };
    auto linear = [](std::vector<double> g) {
        return MeasureFunctional([g](std::span<const double> nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += g[i] * nu[i];
            return s;
        });
    };
    auto bounded_quadratic = [](std::vector<double> c) {
        return MeasureFunctional([c](std::span<const double> nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += (nu[i] - c[i]) * (nu[i] - c[i]);
            return std::min(3.0 * s, 0.5);
        });
    };
    const std::vector<Case> cases{
        {{0, 1}, {0.7, 0.3}, {1.0, 1.0}, capped_square({0, 2}, 1.0), false},
        {{0, 1}, {0.6, 0.4}, {1.2, 0.7}, bounded_quadratic({0.2, 0.5}), false},
        {{0, 1, 2}, {0.5, 0.3, 0.2}, {1, 1, 1}, capped_square({0, 1, 2}, 4.0), false},
        {{0, 1, 2}, {0.2, 0.3, 0.5}, {0.9, 1.1, 1.0}, bounded_quadratic({0.5, 0.3, 0.1}), false},
        {{0, 1}, {0.6, 0.4}, {1.0, 1.0}, linear({0.3, -0.2}), true},
        {{0, 1, 2}, {0.5, 0.3, 0.2}, {1.5, 1.0, 0.5}, linear({1.0, -0.5, 2.0}), true},
    };
    const std::vector<std::size_t> ns{1, 2, 5, 10, 20, 40, 80};
    double worst_agreement = 0.0;
    double worst_linear_gap = 0.0;
    bool decreasing = true;
    for (const auto& c : cases) {
        const FiniteDistribution proposal(c.points, c.probs);
        for (std::size_t n : ns) {
            const double e = exact_laplace_value(proposal, c.wf, c.h, n);
            const double d = dp_laplace_value(proposal, c.wf, c.h, n);
            worst_agreement = std::max(worst_agreement, std::abs(e - d));
        }
        const auto run = convergence_check(proposal, c.wf, c.h, ns, LaplaceMethod::dp);
        if (c.linear) {
            for (double g : run.gaps) worst_linear_gap = std::max(worst_linear_gap, std::abs(g));
        } else {
            const double gap10 = run.gaps[3];
            const double gap80 = run.gaps[6];
            decreasing = decreasing && gap80 < gap10;
        }
    }
    return {worst_agreement <= 1e-12 && worst_linear_gap <= 1e-10 && decreasing,
            "enumeration vs dp " + fmt(worst_agreement) + ", linear gap " + fmt(worst_linear_gap) +
                ", gap(80) < gap(10) " + (decreasing ? "yes" : "no")};
}

// 3 -------------------------------------------------------------------------
Outcome quantile_closed_form() {
    const auto mc = ImportanceModel::standard_mc(ScalarDistribution::exponential(1.0), {});
    double worst = 0.0;
    for (int i = 1; i <= 20; ++i) {
        const double alpha = 0.02 + 0.04 * (i - 1);
        for (int j = 1; j <= 20; ++j) {
            const double p = alpha * j / 21.0;
            // Exp(1) has Phi_alpha = -log alpha, so q = (1 + eps) Phi_alpha has tail p at this eps.
            const double eps = std::log(p) / std::log(alpha) - 1.0;
            const double got = quantile_rate(mc, alpha, eps).rate.value;
            worst = std::max(worst, std::abs(got - oracle::binary_kl(alpha, p)));
        }
    }
    return {worst <= 1e-8, "max deviation " + fmt(worst)};
}

// 4 -------------------------------------------------------------------------
Outcome zero_variance_invariance() {
    const auto f = ScalarDistribution::gaussian(0, 1);
    double worst_spread = 0.0;
    bool infinite_at_one = true;
    for (double dp : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        for (double eps : {0.05, 0.1, 0.5}) {
            double lo = kInf, hi = -kInf;
            for (double p : {1e-1, 1e-2, 1e-3}) {
                const Interval a{f.upper_quantile(p), kInf};
                const auto model = ImportanceModel::zero_variance(f, a);
                const auto target = TargetSet::of(a);
                const double v = subset_rate(model, target, eps, dp * target_set_mass(model, target)).rate_plus->value;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            worst_spread = std::max(worst_spread, hi - lo);
        }
    }
    for (double p : {1e-1, 1e-2, 1e-3}) {
        const Interval a{f.upper_quantile(p), kInf};
        const auto model = ImportanceModel::zero_variance(f, a);
        const auto target = TargetSet::of(a);
        infinite_at_one = infinite_at_one && subset_rate(model, target, 0.1, target_set_mass(model, target)).rate_plus->value == kInf;
    }
    return {worst_spread <= 1e-12 && infinite_at_one,
            "max spread over p " + fmt(worst_spread) + ", +inf at delta' = 1 " + (infinite_at_one ? "yes" : "no")};
}

// 5 -------------------------------------------------------------------------
Outcome rare_event_linearization() {
    const double p = 1e-4;
    const auto f = ScalarDistribution::gaussian(0, 1);
    const Interval a{f.upper_quantile(p), kInf};
    const auto model = ImportanceModel::standard_mc(f, a);
    const auto target = TargetSet::of(a);
    const double mass = target_set_mass(model, target);
    double lo = kInf, hi = -kInf;
    for (double eps : {0.05, 0.1, 0.5, 1.0}) {
        for (double dp : {0.1, 0.5, 1.0}) {
            const double rate = subset_rate(model, target, eps, dp * mass).rate_plus->value;
            const double ratio = rate / (mass * dp * ((1 + eps) * std::log1p(eps) - eps));
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    }
    return {lo >= 0.99 && hi <= 1.01, "ratio range [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

// 6 -------------------------------------------------------------------------
Outcome random_walk_bound_check() {
    const auto inc = ScalarDistribution::gaussian(0, 1);
    bool bound_holds = true;
    double worst_ratio = 0.0;
    for (double a : {1.5, 2.0, 3.0}) {
        for (std::size_t m : {1, 5, 10}) {
            const auto r = random_walk_tilt(inc, a, m, 0.1, 0.5);
            // For N(0, 1) increments theta_a = a and kappa(theta) = theta^2 / 2.
            const double bound = std::exp(m * (a * a - a * a / 2)) * r.delta;
            bound_holds = bound_holds && r.realized_proposal_mass && *r.realized_proposal_mass >= bound * (1 - 1e-12);
        }
        const double ratio =
            random_walk_tilt(inc, a, 21, 0.1, 0.5).cost_reduction_bound / random_walk_tilt(inc, a, 20, 0.1, 0.5).cost_reduction_bound;
        worst_ratio = std::max(worst_ratio, std::abs(ratio / std::exp(-a * a / 2) - 1));
    }
    return {bound_holds && worst_ratio <= 0.01,
            std::string("realized mass above bound ") + (bound_holds ? "yes" : "no") +
                ", consecutive-m ratio deviation at m = 20: " + fmt(worst_ratio)};
}

// 7 -------------------------------------------------------------------------
Outcome empirical_decay() {
    const double h = oracle::binary_kl(0.05, 0.03);
    std::vector<std::size_t> ns;
    std::vector<double> tails;
    for (int n = 200; n <= 2000; n += 200) {
        ns.push_back(n);
        tails.push_back(oracle::binomial_upper_tail(n, 0.03, static_cast<int>(std::ceil(0.05 * n - 1e-9))));
    }
    const double slope = rate_slope_fit(ns, tails);
    const double slope_err = std::abs(slope / h - 1);

    const auto g = ScalarDistribution::gaussian(0, 1);
    const double eps = g.upper_quantile(0.03) / g.upper_quantile(0.05) - 1;
    const auto model = ImportanceModel::standard_mc(g, {});
    const EventSpec event{EventSpec::Kind::quantile_exceedance, 0.05, eps, {}};
    const auto est = estimate_event_probability(model, event, 400, 100000, 20240501);
    const double exact = oracle::binomial_upper_tail(400, 0.03, 20);
    const double z = std::abs(est.p_hat - exact) / est.std_err;
    return {slope_err <= 0.10 && z <= 4.0, "slope " + fmt(slope) + " vs H(0.05|0.03) " + fmt(h) + " (" +
                                               fmt(100 * slope_err) + "%), MC at n = 400: " + fmt(est.p_hat) +
                                               " vs " + fmt(exact) + " (" + fmt(z) + " SE)"};
}

// 8 -------------------------------------------------------------------------
std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("israte_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::vector<std::string> configs{
        R"({"model": {"family": "gaussian", "params": [0, 1]},
            "analysis": {"type": "simulate", "n_list": [50, 100, 150], "reps": 20000,
                         "event": {"kind": "quantile-exceedance", "alpha": 0.1, "p_target": 0.05}},
            "seed": 424242})",
        R"({"model": {"family": "finite", "alphabet": [0, 1, 2], "target_probs": [0.5, 0.3, 0.2],
                      "proposal_probs": [0.3, 0.3, 0.4]},
            "analysis": {"type": "simulate", "n_list": [20, 40, 60, 80], "reps": 20000,
                         "event": {"kind": "finite-overweight", "eps": 0.3, "set": [2]}},
            "seed": 7})",
        R"({"model": {"family": "exponential", "params": [1], "sampler": "change_of_measure",
                      "sampler_params": [0.5], "importance_set": [2, "inf"]},
            "analysis": {"type": "simulate", "n_list": [30, 60, 90], "reps": 20000,
                         "event": {"kind": "quantile-exceedance", "alpha": 0.3, "eps": 0.2}},
            "seed": 1})"};
    int mismatches = 0;
    int runs = 0;
    std::string error;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const fs::path cfg = dir / ("c" + std::to_string(c) + ".json");
        std::ofstream(cfg) << configs[c];
        std::string first_report, first_series;
        for (const char* workers : {"1", "1", "2", "4"}) {
            const fs::path report = dir / "r.json";
            const fs::path series = dir / "s.csv";
            std::vector<std::string> args{"israte", "simulate", "--config", cfg.string(), "--out", report.string(),
                                          "--workers", workers};
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            // Series path goes through the config so the echo is identical across runs.
            auto j = nlohmann::json::parse(configs[c]);
            j["output"] = {{"series", series.string()}};
            std::ofstream(cfg) << j.dump();
            const int code = cli::run(static_cast<int>(argv.size()), argv.data());
            ++runs;
            if (code != 0) {
                error = "exit code " + std::to_string(code);
                ++mismatches;
                continue;
            }
            auto r = nlohmann::json::parse(slurp(report));
            r.erase("wall_clock_seconds");
            const std::string payload = r.dump();
            const std::string csv = slurp(series);
            if (first_report.empty()) {
                first_report = payload;
                first_series = csv;
            } else if (payload != first_report || csv != first_series) {
                ++mismatches;
            }
        }
    }
    fs::remove_all(dir);
    return {mismatches == 0, std::to_string(runs) + " runs over 3 configs and worker counts {1, 1, 2, 4}, " +
                                 std::to_string(mismatches) + " mismatches" + (error.empty() ? "" : " (" + error + ")")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> check;
        double limit_seconds;
    };
    const std::vector<Criterion> criteria{
        {1, "gamma oracle equivalence", gamma_oracle, 5},
        {2, "Laplace verification", laplace_convergence, 60},
        {3, "quantile closed form", quantile_closed_form, 10},
        {4, "zero-variance invariance", zero_variance_invariance, 0},
        {5, "rare-event linearization", rare_event_linearization, 0},
        {6, "random-walk bound", random_walk_bound_check, 0},
        {7, "empirical decay", empirical_decay, 120},
        {8, "determinism", determinism, 0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt(seconds) + " s";
        if (c.limit_seconds > 0) {
            timing += " of " + fmt(c.limit_seconds) + " s";
            if (seconds >= c.limit_seconds) {
                out.pass = false;
                out.detail += ", over the time limit";
            }
        }
        failed += !out.pass;
        std::printf("CRITERION %d %s: %s [%s] %s\n", c.id, out.pass ? "PASS" : "FAIL", c.name, timing.c_str(),
                    out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
