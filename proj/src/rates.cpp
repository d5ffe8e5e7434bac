#include "israte/rates.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "israte/error.hpp"
#include "israte/random.hpp"

namespace israte {

namespace {

/// a log(a / b) with 0 log 0 = 0 and a log(a/0) = +inf for a > 0.
double xlogx_over(double a, double b) {
    if (a == 0.0) return 0.0;
    if (b == 0.0) return kInf;
    return a * std::log(a / b);
}

void check_eps_s(double eps, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("s must lie in [0, 1]");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("eps must be positive and finite");
}

}  // namespace

double one_plus_x_log_minus_x(double x) {
    if (x < -1.0) throw DomainError("one_plus_x_log_minus_x needs x >= -1");
    if (x == -1.0) return 1.0;
    if (std::abs(x) < 1e-2) {
        // sum_{k>=2} (-1)^k x^k / (k (k-1))
        double term = x * x;
        double total = 0.0;
        for (int k = 2; k < 14; ++k) {
            total += term / (k * (k - 1.0));
            term *= -x;
        }
        return total;
    }
    return (1.0 + x) * std::log1p(x) - x;
}

RateValue binary_relative_entropy(double a, double p) {
    if (!(a >= 0.0 && a <= 1.0 && p >= 0.0 && p <= 1.0))
        throw DomainError("binary relative entropy needs a, p in [0, 1]");
    const double v = xlogx_over(a, p) + xlogx_over(1.0 - a, 1.0 - p);
    return std::isinf(v) ? RateValue::infinite() : RateValue::finite(std::max(0.0, v));
}

// Both gamma functions are written as s psi(+-eps) + (1-s) psi(-+u) with
// u = eps s / (1-s) and psi(x) = (1+x)log(1+x) - x. This equals the textbook
// closed form but has no cancellation between terms of size O(eps s).

RateValue gamma_plus(double eps, double s) {
    check_eps_s(eps, s);
    if (s == 0.0) return RateValue::finite(0.0);
    if ((1.0 + eps) * s > 1.0 || s == 1.0) return RateValue::infeasible();
    const double u = std::min(1.0, eps * s / (1.0 - s));
    const double v = s * one_plus_x_log_minus_x(eps) + (1.0 - s) * one_plus_x_log_minus_x(-u);
    return RateValue::finite(v);
}

RateValue gamma_minus(double eps, double s) {
    check_eps_s(eps, s);
    if (eps > 1.0) throw DomainError("gamma_minus needs eps <= 1");
    if (s == 0.0) return RateValue::finite(0.0);
    if (s == 1.0) return RateValue::infeasible();
    const double u = eps * s / (1.0 - s);
    const double v = s * one_plus_x_log_minus_x(-eps) + (1.0 - s) * one_plus_x_log_minus_x(u);
    return RateValue::finite(v);
}

RateValue relative_entropy(std::span<const double> g, std::span<const double> f) {
    if (g.size() != f.size()) throw DomainError("relative entropy: alphabet sizes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double term = xlogx_over(g[i], f[i]);
        if (std::isinf(term)) return RateValue::infinite();
        total += term;
    }
    return RateValue::finite(std::max(0.0, total));
}

RateValue relative_entropy(const FiniteDistribution& g, const FiniteDistribution& f) {
    if (!g.same_alphabet(f)) throw DomainError("relative entropy: alphabets differ");
    return relative_entropy(g.probabilities(), f.probabilities());
}

namespace {

struct LegendreSolution {
    RateValue rate;
    double theta = 0.0;
};

// Next probe away from the origin in direction `sign`, staying inside the
// open domain of kappa.
double advance(double theta, double sign, const LogMgf& k) {
    const double bound = sign > 0 ? k.upper : k.lower;
    double next = 2.0 * theta;
    if (std::isfinite(bound) && sign * next >= sign * bound) next = 0.5 * (theta + bound);
    return next;
}

void check_monotone(const LogMgf& k, double a, double b) {
    constexpr int kProbes = 64;
    double prev = k.derivative(a);
    for (int i = 1; i <= kProbes; ++i) {
        const double t = a + (b - a) * i / kProbes;
        const double d = k.derivative(t);
        if (d < prev - 1e-9 * (1.0 + std::abs(prev))) {
            std::ostringstream os;
            os.precision(17);
            os << "log-MGF derivative decreases between theta = " << a + (b - a) * (i - 1) / kProbes
               << " and " << t << "; kappa is not convex";
            throw NumericalError(os.str());
        }
        prev = d;
    }
}

LegendreSolution legendre(const LogMgf& k, double x) {
    if (!k.value || !k.derivative) throw DomainError("cramer_rate needs kappa and its derivative");
    if (!std::isfinite(x)) throw DomainError("cramer_rate needs a finite x");
    const double mean = k.derivative(0.0);
    if (x == mean) return {RateValue::finite(0.0), 0.0};
    const double sign = x > mean ? 1.0 : -1.0;
    auto objective = [&](double t) { return t * x - k.value(t); };
    auto gap = [&](double t) { return sign * (k.derivative(t) - x); };

    double near = 0.0;
    double far = sign * 1.0;
    if (std::isfinite(sign > 0 ? k.upper : k.lower) && sign * far >= sign * (sign > 0 ? k.upper : k.lower))
        far = 0.5 * (sign > 0 ? k.upper : k.lower);
    bool bracketed = false;
    for (int i = 0; i < 200; ++i) {
        const double g = gap(far);
        if (!std::isfinite(g)) break;
        if (g >= 0.0) {
            bracketed = true;
            break;
        }
        near = far;
        const double next = advance(far, sign, k);
        if (next == far || std::abs(far) > 1e8) break;
        far = next;
    }

    if (bracketed) {
        check_monotone(k, std::min(near, far), std::max(near, far));
        const double tol = 1e-12 * (1.0 + std::abs(x));
        if (std::abs(gap(far)) <= tol) return {RateValue::finite(std::max(0.0, objective(far))), far};
        std::uintmax_t iters = 300;
        auto stop = [](double a, double b) { return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)); };
        auto [lo, hi] = boost::math::tools::toms748_solve(gap, std::min(near, far), std::max(near, far), stop, iters);
        const double theta = std::abs(gap(lo)) < std::abs(gap(hi)) ? lo : hi;
        return {RateValue::finite(std::max(0.0, objective(theta))), theta};
    }

    // No interior root: the supremum is approached along the boundary ray.
    check_monotone(k, std::min(0.0, far), std::max(0.0, far));
    double theta = sign * 1.0;
    double prev = objective(theta);
    for (int i = 0; i < 400; ++i) {
        const double next_theta = advance(theta, sign, k);
        const double v = objective(next_theta);
        if (!std::isfinite(v) || next_theta == theta) break;
        if (v - prev <= 1e-14 * (1.0 + std::abs(v))) return {RateValue::finite(std::max(0.0, std::max(v, prev))), next_theta};
        theta = next_theta;
        prev = v;
        if (std::abs(theta) > 1e300) break;
    }
    return {RateValue::infeasible(), theta};
}

}  // namespace

RateValue cramer_rate(const LogMgf& kappa, double x) { return legendre(kappa, x).rate; }

double cramer_argmax(const LogMgf& kappa, double x) {
    const auto sol = legendre(kappa, x);
    if (!sol.rate.feasible) throw NumericalError("Legendre transform is infinite; no maximizing theta");
    return sol.theta;
}

std::uint64_t sample_size(const RateValue& rate, double error_prob) {
    if (!(error_prob > 0.0 && error_prob < 1.0)) throw DomainError("error probability must lie in (0, 1)");
    if (rate.is_infinite()) return 1;
    if (!(rate.value > 0.0)) throw DomainError("rate is zero: no large-deviations guarantee");
    const double n = std::ceil(-std::log(error_prob) / rate.value);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

double variational_objective(const FiniteDistribution& proposal, std::span<const double> wf,
                             const MeasureFunctional& h, std::span<const double> g) {
    std::vector<double> nu(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) nu[i] = wf[i] * g[i];
    const double hv = h(nu);
    if (std::isnan(hv)) throw NumericalError("functional h returned NaN");
    const RateValue entropy = relative_entropy(g, proposal.probabilities());
    return hv + entropy.value;
}

namespace {

/// C(n, k), saturating well above any lattice size used here.
std::uint64_t binomial_count(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c > 1e18 ? std::uint64_t{1'000'000'000'000'000'000} : static_cast<std::uint64_t>(std::llround(c));
}

/// Minimizer state in log-coordinates: G_i = p_i e^{y_i} / sum_j p_j e^{y_j} on the support.
class SimplexProblem {
public:
    SimplexProblem(const FiniteDistribution& proposal, std::span<const double> wf, const MeasureFunctional& h)
        : h_(h), size_(proposal.size()) {
        for (std::size_t i = 0; i < proposal.size(); ++i) {
            if (proposal[i] > 0.0) {
                support_.push_back(i);
                log_p_.push_back(std::log(proposal[i]));
                wf_.push_back(wf[i]);
            }
        }
        nu_.assign(size_, 0.0);
    }

    std::size_t dim() const { return support_.size(); }
    double log_p(std::size_t i) const { return log_p_[i]; }

    std::vector<double> measure(std::span<const double> y) const {
        double top = -kInf;
        for (std::size_t i = 0; i < y.size(); ++i) top = std::max(top, log_p_[i] + y[i]);
        std::vector<double> g(y.size());
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            g[i] = std::exp(log_p_[i] + y[i] - top);
            total += g[i];
        }
        for (double& v : g) v /= total;
        return g;
    }

    double value(std::span<const double> y) {
        const auto g = measure(y);
        return value_of_measure(g);
    }

    double value_of_measure(std::span<const double> g) {
        double entropy = 0.0;
        std::fill(nu_.begin(), nu_.end(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            nu_[support_[i]] = wf_[i] * g[i];
            if (g[i] > 0.0) entropy += g[i] * (std::log(g[i]) - log_p_[i]);
        }
        const double hv = h_(nu_);
        if (std::isnan(hv)) throw NumericalError("functional h returned NaN");
        ++evaluations_;
        return hv + std::max(0.0, entropy);
    }

    /// d/dG_i of h(wf G) + H(G|p), h part by central differences in nu.
    std::vector<double> gradient(std::span<const double> g) {
        std::vector<double> grad(g.size());
        std::vector<double> nu(size_, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) nu[support_[i]] = wf_[i] * g[i];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = support_[i];
            const double step = 1e-6 * std::max(1.0, std::abs(nu[j]));
            const double saved = nu[j];
            nu[j] = saved + step;
            const double up = h_(nu);
            nu[j] = saved - step;
            const double down = h_(nu);
            nu[j] = saved;
            if (std::isnan(up) || std::isnan(down)) throw NumericalError("functional h returned NaN");
            const double dh = (up - down) / (2.0 * step);
            grad[i] = wf_[i] * dh + (std::log(std::max(g[i], 1e-300)) - log_p_[i]) + 1.0;
        }
        return grad;
    }

    std::vector<double> full_measure(std::span<const double> g) const {
        std::vector<double> out(size_, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) out[support_[i]] = g[i];
        return out;
    }

private:
    const MeasureFunctional& h_;
    std::size_t size_;
    std::vector<std::size_t> support_;
    std::vector<double> log_p_;
    std::vector<double> wf_;
    std::vector<double> nu_;
    std::size_t evaluations_ = 0;
};

/// Entropic mirror descent with backtracking; in log-coordinates y <- y - tau grad.
double mirror_descent(SimplexProblem& problem, std::vector<double>& y) {
    double current = problem.value(y);
    double tau = 1.0;
    for (int iter = 0; iter < 2000; ++iter) {
        const auto g = problem.measure(y);
        const auto grad = problem.gradient(g);
        bool improved = false;
        while (tau > 1e-12) {
            std::vector<double> trial(y);
            for (std::size_t i = 0; i < y.size(); ++i) trial[i] -= tau * grad[i];
            const double v = problem.value(trial);
            if (v < current) {
                const double drop = current - v;
                y = std::move(trial);
                current = v;
                improved = true;
                tau = std::min(4.0, tau * 1.5);
                if (drop < 1e-16 * (1.0 + std::abs(current))) return current;
                break;
            }
            tau *= 0.5;
        }
        if (!improved) break;
    }
    return current;
}

/// Coordinate pattern search on y with a halving pitch; handles kinks the
/// gradient step cannot resolve.
double pattern_refine(SimplexProblem& problem, std::vector<double>& y, double current) {
    double pitch = 0.5;
    double last_level = current;
    while (pitch > 1e-13) {
        bool improved = true;
        int sweeps = 0;
        while (improved && sweeps++ < 200) {
            improved = false;
            for (std::size_t i = 0; i < y.size(); ++i) {
                for (double dir : {1.0, -1.0}) {
                    y[i] += dir * pitch;
                    const double v = problem.value(y);
                    if (v < current) {
                        current = v;
                        improved = true;
                        break;
                    }
                    y[i] -= dir * pitch;
                }
            }
        }
        if (pitch < 1e-6 && last_level - current < 1e-14) break;
        last_level = current;
        pitch *= 0.5;
    }
    return current;
}

/// Best points of a lattice over the simplex, as log-coordinate starts. The
/// lattice catches basins that local descent from the proposal misses when h
/// has plateaus.
std::vector<std::vector<double>> lattice_starts(SimplexProblem& problem, std::size_t keep) {
    const std::size_t d = problem.dim();
    std::size_t steps = 1;
    while (steps < 200 && binomial_count(steps + 1 + d - 1, d - 1) <= 20000) ++steps;
    const double shift = 0.1;
    const double total = static_cast<double>(steps) + shift * static_cast<double>(d);

    std::vector<std::pair<double, std::vector<double>>> best;
    std::vector<std::size_t> counts(d, 0);
    counts[d - 1] = steps;
    std::vector<double> g(d);
    while (true) {
        for (std::size_t i = 0; i < d; ++i) g[i] = (static_cast<double>(counts[i]) + shift) / total;
        const double v = problem.value_of_measure(g);
        if (best.size() < keep || v < best.back().first) {
            std::vector<double> y(d);
            for (std::size_t i = 0; i < d; ++i) y[i] = std::log(g[i]) - problem.log_p(i);
            best.emplace_back(v, std::move(y));
            std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (best.size() > keep) best.pop_back();
        }
        // Next composition of `steps` into d parts in lexicographic order.
        std::size_t j = d - 1;
        while (j > 0 && counts[j] == 0) --j;
        if (j == 0) break;
        const std::size_t tail = counts[j];
        counts[j] = 0;
        ++counts[j - 1];
        counts[d - 1] = tail - 1;
    }
    std::vector<std::vector<double>> out;
    for (auto& [v, y] : best) out.push_back(std::move(y));
    return out;
}

}  // namespace

VariationalResult variational_value(const FiniteDistribution& proposal, std::span<const double> wf,
                                    const MeasureFunctional& h) {
    if (wf.size() != proposal.size()) throw DomainError("wf table length differs from the alphabet size");
    for (double v : wf)
        if (!std::isfinite(v) || v < 0.0) throw DomainError("wf table must be finite and nonnegative");
    if (proposal.size() > 8) throw DomainError("variational_value supports alphabets of at most 8 points");

    SimplexProblem problem(proposal, wf, h);
    const std::size_t d = problem.dim();

    std::vector<std::vector<double>> starts;
    starts.emplace_back(d, 0.0);
    for (std::size_t i = 0; i < d && d > 1; ++i) {
        for (double s : {3.0, -3.0}) {
            std::vector<double> y(d, 0.0);
            y[i] = s;
            starts.push_back(std::move(y));
        }
    }
    for (std::uint64_t r = 0; r < 4 && d > 1; ++r) {
        Stream stream(0x5eed, r);
        std::normal_distribution<double> normal(0.0, 2.0);
        std::vector<double> y(d);
        for (double& v : y) v = normal(stream);
        starts.push_back(std::move(y));
    }

    if (d > 1)
        for (auto& y : lattice_starts(problem, 4)) starts.push_back(std::move(y));

    double best = kInf;
    std::vector<double> best_y;
    for (auto& y : starts) {
        double v = mirror_descent(problem, y);
        v = pattern_refine(problem, y, v);
        if (v < best) {
            best = v;
            best_y = y;
        }
    }
    // A final descent from the incumbent polishes the smooth case after refinement.
    best = std::min(best, mirror_descent(problem, best_y));

    VariationalResult result;
    result.minimizer = problem.full_measure(problem.measure(best_y));
    result.value = best;
    return result;
}

}  // namespace israte
