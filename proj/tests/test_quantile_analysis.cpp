#include <cmath>
#include <random>

#include "doctest.h"
#include "israte/error.hpp"
#include "israte/quantile.hpp"
#include "oracles.hpp"

using namespace israte;

namespace {

const ScalarDistribution kStd = ScalarDistribution::gaussian(0, 1);

// inf{x : nu((x, inf)) <= alpha}, trying every atom location and -inf.
double brute_quantile(const std::vector<Atom>& atoms, double alpha) {
    auto tail = [&](double x) {
        double s = 0;
        for (const auto& a : atoms)
            if (a.location > x) s += a.weight;
        return s;
    };
    if (tail(-kInf) <= alpha) return -kInf;
    double best = kInf;
    for (const auto& a : atoms)
        if (tail(a.location) <= alpha) best = std::min(best, a.location);
    return best;
}

// Standard MC model on N(0, 1) with p_{alpha, eps} = p.
QuantileRateResult mc_rate(double alpha, double p, Side side = Side::plus) {
    const double phi = kStd.upper_quantile(alpha);
    const double q = kStd.upper_quantile(p);
    const double eps = side == Side::plus ? q / phi - 1 : 1 - q / phi;
    return quantile_rate(ImportanceModel::standard_mc(kStd, {}), alpha, eps, side);
}

}  // namespace

TEST_CASE("quantile of atomic measures") {
    const std::vector<Atom> point{{2.5, 1.0}};
    for (double a : {0.01, 0.5, 0.99}) CHECK(quantile(point, a) == 2.5);

    const std::vector<Atom> atoms{{1, 0.2}, {2, 0.5}, {3, 0.3}};
    CHECK(quantile(atoms, 0.25) == 3);
    CHECK(quantile(atoms, 0.25) == brute_quantile(atoms, 0.25));
    CHECK(quantile(atoms, 0.9) == 1);
    CHECK(quantile(atoms, 0.9) == brute_quantile(atoms, 0.9));
    CHECK(quantile(atoms, 0.5) == 2);
    CHECK_THROWS_AS(quantile(atoms, 0.0), DomainError);
    CHECK_THROWS_AS(quantile(atoms, 1.0), DomainError);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        std::vector<Atom> v;
        for (int i = 0; i < 6; ++i) v.push_back({std::floor(u(rng) * 10), 0.3 * u(rng)});
        double prev = kInf;
        for (double a = 0.01; a < 1; a += 0.01) {
            const double b = brute_quantile(v, a);
            const double got = quantile(v, a);
            CHECK(got == b);
            CHECK(got <= prev);
            prev = got;
        }
    }
}

TEST_CASE("quantile of distributions") {
    CHECK(quantile(kStd, 0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(quantile(kStd, 0.05) == doctest::Approx(1.6448536269514729).epsilon(1e-12));
    const FiniteDistribution f({1, 2, 3}, {0.2, 0.5, 0.3});
    CHECK(quantile(f, 0.25) == 3);
    CHECK(quantile(f, 0.9) == 1);
}

TEST_CASE("mgf_weighted_indicator") {
    const auto mc = ImportanceModel::standard_mc(kStd, {});
    CHECK(mgf_weighted_indicator(mc, 1.0, 0.0).value == doctest::Approx(1.0).epsilon(1e-14));
    const double p = kStd.sf(1.2);
    for (double lam : {0.1, 0.5, 2.0}) {
        const auto m = mgf_weighted_indicator(mc, 1.2, lam);
        CHECK(m.value == doctest::Approx(std::exp(lam) * p + 1 - p).epsilon(1e-12));
        CHECK(m.derivative == doctest::Approx(std::exp(lam) * p).epsilon(1e-12));
    }

    SUBCASE("Gaussian tilt against simulation") {
        const auto tilt = ImportanceModel::change_of_measure(kStd, ScalarDistribution::gaussian(1, 1), {});
        const double lam = 0.5;
        const auto m = mgf_weighted_indicator(tilt, 1.0, lam);
        CHECK(mgf_weighted_indicator(tilt, 1.0, 0.0).value == doctest::Approx(1.0).epsilon(1e-10));
        std::mt19937_64 rng(17);
        std::normal_distribution<double> z(1.0, 1.0);
        const int n = 10'000'000;
        double s = 0, ss = 0;
        for (int i = 0; i < n; ++i) {
            const double x = z(rng);
            const double v = std::exp(lam * (x > 1.0 ? std::exp(0.5 - x) : 0.0));
            s += v;
            ss += v * v;
        }
        const double mean = s / n;
        const double se = std::sqrt((ss / n - mean * mean) / n);
        CHECK(std::abs(m.value - mean) < 4 * se);
        // derivative by central differences
        const double h = 1e-5;
        const double fd =
            (mgf_weighted_indicator(tilt, 1.0, lam + h).value - mgf_weighted_indicator(tilt, 1.0, lam - h).value) / (2 * h);
        CHECK(m.derivative == doctest::Approx(fd).epsilon(1e-7));
    }
    SUBCASE("a light-tailed proposal diverges") {
        const auto narrow = ImportanceModel::change_of_measure(kStd, ScalarDistribution::gaussian(0, 0.5), {});
        CHECK_THROWS_AS(mgf_weighted_indicator(narrow, 1.0, 1.0), DivergenceError);
        CHECK_THROWS_AS(quantile_rate(narrow, 0.05, 0.2), DivergenceError);
    }
}

TEST_CASE("quantile_rate") {
    SUBCASE("no deviation needed") {
        const auto r = quantile_rate(ImportanceModel::standard_mc(kStd, {}), 0.05, 1e-13);
        CHECK(r.rate.value == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("standard MC, alpha = 0.05, p = 0.03") {
        const auto r = mc_rate(0.05, 0.03);
        CHECK(r.p_target == doctest::Approx(0.03).epsilon(1e-12));
        CHECK(r.lambda_star == doctest::Approx(std::log(0.05 * 0.97 / (0.95 * 0.03))).epsilon(1e-9));
        CHECK(r.lambda_star == doctest::Approx(0.5317).epsilon(1e-4));
        CHECK(r.rate.value == doctest::Approx(5.749e-3).epsilon(1e-3));
        CHECK(r.rate.value == doctest::Approx(oracle::binary_kl(0.05, 0.03)).epsilon(1e-10));
        CHECK(r.rate.value == doctest::Approx(r.lambda_star * 0.05 - std::log(std::exp(r.lambda_star) * 0.03 + 0.97)).epsilon(1e-12));
    }
    SUBCASE("generic solver equals the Bernoulli closed form on a 20x20 grid") {
        double worst = 0;
        for (int i = 1; i <= 20; ++i) {
            const double alpha = 0.02 + 0.04 * (i - 1);  // up to 0.78
            for (int j = 1; j <= 20; ++j) {
                const double p = alpha * j / 21.0;
                // Exp(1): Phi_alpha = -log alpha, so p_{alpha, eps} = p at eps = log p / log alpha - 1
                const auto mc = ImportanceModel::standard_mc(ScalarDistribution::exponential(1.0), {});
                const auto r = quantile_rate(mc, alpha, std::log(p) / std::log(alpha) - 1);
                worst = std::max(worst, std::abs(r.rate.value - oracle::binary_kl(alpha, p)));
            }
        }
        CHECK(worst <= 1e-8);
    }
    SUBCASE("nonincreasing in p") {
        double prev = kInf;
        for (int j = 1; j < 50; ++j) {
            const double v = mc_rate(0.1, 0.1 * j / 50.0).rate.value;
            CHECK(v <= prev);
            prev = v;
        }
    }
    SUBCASE("minus side mirrors the plus side") {
        const auto r = mc_rate(0.05, 0.08, Side::minus);
        CHECK(r.rate.value == doctest::Approx(oracle::binary_kl(0.05, 0.08)).epsilon(1e-9));
        CHECK(r.lambda_star <= 0.0);
    }
    SUBCASE("tilted proposal needs a smaller rate than MC") {
        const auto a = kStd.upper_quantile(0.05);
        const auto tilt = ImportanceModel::change_of_measure(kStd, ScalarDistribution::gaussian(2, 1), {0.5 * a, kInf});
        const double eps = kStd.upper_quantile(0.03) / a - 1;
        const auto r = quantile_rate(tilt, 0.05, eps);
        CHECK(r.rate.value > oracle::binary_kl(0.05, 0.03));
        CHECK(r.rate.value == doctest::Approx(r.lambda_star * 0.05 - std::log(mgf_weighted_indicator(tilt, r.q_target, r.lambda_star).value)).epsilon(1e-12));
        const auto m = mgf_weighted_indicator(tilt, r.q_target, r.lambda_star);
        CHECK(m.derivative / m.value == doctest::Approx(0.05).epsilon(1e-9));
    }
    SUBCASE("domain errors") {
        const auto mc = ImportanceModel::standard_mc(kStd, {});
        CHECK_THROWS_AS(quantile_rate(mc, 1.5, 0.1), DomainError);
        CHECK_THROWS_AS(quantile_rate(mc, 0.05, -0.1), DomainError);
    }
}

TEST_CASE("duality lower bound on a finite alphabet") {
    const FiniteDistribution f({0, 1, 2, 3, 4}, {0.4, 0.3, 0.15, 0.1, 0.05});
    const FiniteDistribution g({0, 1, 2, 3, 4}, {0.2, 0.2, 0.2, 0.2, 0.2});
    const auto m = ImportanceModel::finite(f, g, {1, 1, 1, 1, 1});
    const auto r = quantile_rate(m, 0.2, 0.2);  // Phi_0.2(F) = 2, q = 2.4: k = 1{x > 2.4} w
    REQUIRE(r.rate.feasible);
    std::mt19937_64 rng(4);
    std::gamma_distribution<double> gd(0.5);
    int tested = 0;
    while (tested < 50) {
        std::vector<double> q(5);
        double s = 0;
        for (double& x : q) s += (x = gd(rng));
        for (double& x : q) x /= s;
        double k = 0;
        for (std::size_t i = 0; i < 5; ++i)
            if (f.points()[i] > r.q_target) k += q[i] * m.ratio_table()[i];
        if (k < 0.2) continue;
        CHECK(relative_entropy(q, g.probabilities()).value >= r.rate.value - 1e-12);
        ++tested;
    }
}

TEST_CASE("weighted empirical quantile is consistent") {
    const double phi = kStd.upper_quantile(0.05);
    const auto tilt = ImportanceModel::change_of_measure(kStd, ScalarDistribution::gaussian(phi, 1), {1.0, kInf});
    int close = 0;
    for (std::uint64_t r = 0; r < 100; ++r)
        if (std::abs(quantile(sample_weighted_empirical(tilt, 10000, 77, r), 0.05) - phi) < 0.05) ++close;
    CHECK(close >= 95);
}

TEST_CASE("mc_quantile_rate") {
    CHECK(mc_quantile_rate(0.05, 0.05) == 0.0);
    CHECK(mc_quantile_rate(0.05, 0.03) == doctest::Approx(5.749e-3).epsilon(1e-3));
    CHECK(mc_quantile_rate(0.5, 0.25) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75)).epsilon(1e-14));
    CHECK(mc_quantile_rate(0.5, 0.25) == doctest::Approx(0.143841).epsilon(1e-5));
    CHECK_THROWS_AS(mc_quantile_rate(0.05, 0.0), DomainError);
    CHECK_THROWS_AS(mc_quantile_rate(0.05, 0.06), DomainError);
    CHECK_THROWS_AS(mc_quantile_rate(1.0, 0.5), DomainError);
}
