#include "israte/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "israte/error.hpp"

namespace israte {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

// Region {x > q} intersected with {f > 0} and the target support, for scalar models.
Interval scalar_region(const ImportanceModel& model, double q) {
    Interval r = intersect(model.importance_set(), model.support());
    r.lo = std::max(r.lo, q);
    return r;
}

double proposal_scale(const ImportanceModel& model) {
    const auto& d = model.scalar_proposal();
    return d.family() == Family::gaussian ? d.params()[1] : 1.0 / d.params()[0];
}

void check_tail_decay(const ImportanceModel& model, const Interval& region, double lambda) {
    if (lambda <= 0.0 || std::isfinite(region.hi)) return;
    const auto& form = model.log_ratio();
    const double scale = proposal_scale(model);
    const double start = std::isfinite(region.lo) ? region.lo : 0.0;
    auto log_integrand = [&](double x) {
        return lambda * std::exp(form(x)) + model.scalar_proposal().log_density(x);
    };
    double prev = log_integrand(start + scale);
    for (int k = 1; k <= 12; ++k) {
        const double x = start + scale * std::ldexp(1.0, k);
        const double g = log_integrand(x);
        if (std::isnan(g) || (std::isinf(g) && g > 0)) {
            throw DivergenceError("M(lambda) diverges at lambda = " + fmt(lambda) +
                                  ": exp(lambda w(x)) grows faster than the proposal tail decays "
                                  "(integrability condition on the weights fails)");
        }
        if (k >= 8 && g > prev) {
            throw DivergenceError("M(lambda) diverges at lambda = " + fmt(lambda) +
                                  ": integrand increases in the tail (integrability condition on the weights fails)");
        }
        prev = g;
    }
    if (prev > -40.0)
        throw DivergenceError("M(lambda) integrand does not decay in the tail at lambda = " + fmt(lambda));
}

bool ratio_constant_on(const ImportanceModel& model) {
    return model.proposal_kind() != ImportanceModel::Proposal::exponential_change || model.log_ratio().is_constant();
}

}  // namespace

std::string to_string(Side side) { return side == Side::plus ? "plus" : "minus"; }

Side side_from_string(const std::string& name) {
    if (name == "plus") return Side::plus;
    if (name == "minus") return Side::minus;
    throw DomainError("side must be 'plus' or 'minus', got '" + name + "'");
}

double quantile(std::span<const Atom> atoms, double alpha) {
    check_alpha(alpha);
    std::vector<Atom> sorted(atoms.begin(), atoms.end());
    std::sort(sorted.begin(), sorted.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
    double tail = 0.0;
    for (const Atom& a : sorted) tail += a.weight;
    if (tail <= alpha) return -kInf;
    for (std::size_t i = 0; i < sorted.size();) {
        const double x = sorted[i].location;
        while (i < sorted.size() && sorted[i].location == x) tail -= sorted[i++].weight;
        // tail is now nu((x, inf))
        if (tail <= alpha) return x;
    }
    return sorted.back().location;
}

double quantile(const WeightedEmpiricalMeasure& measure, double alpha) { return quantile(measure.atoms, alpha); }

double quantile(const ScalarDistribution& distribution, double alpha) {
    check_alpha(alpha);
    return distribution.upper_quantile(alpha);
}

double quantile(const FiniteDistribution& distribution, double alpha) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < distribution.size(); ++i)
        atoms.push_back({distribution.points()[i], distribution[i]});
    return quantile(atoms, alpha);
}

MgfValue mgf_weighted_indicator(const ImportanceModel& model, double q, double lambda) {
    if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
    MgfValue out;
    if (model.kind() == ImportanceModel::Kind::finite) {
        const auto& p = model.finite_proposal();
        const auto& f = model.importance_table();
        const auto& r = model.ratio_table();
        out.value = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0.0) continue;
            const double k = (p.points()[i] > q && f[i] > 0.0) ? r[i] * f[i] : 0.0;
            const double e = std::exp(lambda * k);
            out.value += p[i] * e;
            out.derivative += p[i] * k * e;
        }
        return out;
    }

    const Interval region = scalar_region(model, q);
    if (region.empty() || region.lo == region.hi) return out;
    if (ratio_constant_on(model)) {
        const double mid = std::isfinite(region.lo) ? region.lo : region.hi;
        const double r0 = model.likelihood_ratio(mid);
        const double mass = model.proposal_mass(region);
        const double e = std::exp(lambda * r0);
        out.value = 1.0 - mass + mass * e;
        out.derivative = mass * r0 * e;
        return out;
    }

    check_tail_decay(model, region, lambda);
    const auto& form = model.log_ratio();
    using Integrator = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto excess = [&](double x) {
        const double k = std::exp(form(x));
        return std::expm1(lambda * k) * model.proposal_density(x);
    };
    auto slope = [&](double x) {
        const double k = std::exp(form(x));
        return k * std::exp(lambda * k) * model.proposal_density(x);
    };
    double err = 0.0;
    const double m_excess = Integrator::integrate(excess, region.lo, region.hi, 15, 1e-12, &err);
    const double m_slope = Integrator::integrate(slope, region.lo, region.hi, 15, 1e-12, &err);
    if (!std::isfinite(m_excess) || !std::isfinite(m_slope))
        throw DivergenceError("M(lambda) is not finite at lambda = " + fmt(lambda) +
                              " (integrability condition on the weights fails)");
    out.value = 1.0 + m_excess;
    out.derivative = m_slope;
    return out;
}

QuantileRateResult quantile_rate(const ImportanceModel& model, double alpha, double eps, Side side) {
    check_alpha(alpha);
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (side == Side::minus && eps > 1.0) throw DomainError("minus side needs eps <= 1");

    QuantileRateResult res;
    res.alpha = alpha;
    res.eps = eps;
    res.side = side;
    res.quantile_target = model.kind() == ImportanceModel::Kind::scalar ? quantile(model.scalar_target(), alpha)
                                                                        : quantile(model.finite_target(), alpha);
    if (!std::isfinite(res.quantile_target)) throw DomainError("Phi_alpha(F) is not finite");
    res.q_target = (side == Side::plus ? 1.0 + eps : 1.0 - eps) * res.quantile_target;
    res.p_target = mgf_weighted_indicator(model, res.q_target, 0.0).derivative;

    const double sign = side == Side::plus ? 1.0 : -1.0;
    const std::string k_desc = "k(x) = 1{x > " + fmt(res.q_target) + "} w(x) f(x)";
    if (sign * (res.p_target - alpha) >= 0.0) {
        res.rate = RateValue::finite(0.0);
        res.lambda_star = 0.0;
        res.diagnostics.push_back("p = " + fmt(res.p_target) + (side == Side::plus ? " >= " : " <= ") + "alpha: "
                                  "target inside typical set, no deviation needed");
        res.minimizer_note = "G* = proposal";
        return res;
    }

    auto ratio_gap = [&](double lambda) {
        const MgfValue m = mgf_weighted_indicator(model, res.q_target, lambda);
        if (!std::isfinite(m.value) || !std::isfinite(m.derivative) || m.value <= 0.0)
            throw NumericalError("M(lambda) overflows at lambda = " + fmt(lambda));
        return m.derivative / m.value - alpha;
    };

    double near = 0.0;
    double far = sign;
    bool bracketed = false;
    for (int i = 0; i < 64; ++i) {
        if (sign * ratio_gap(far) >= 0.0) {
            bracketed = true;
            break;
        }
        near = far;
        far *= 2.0;
        if (std::abs(far) > 1e6) break;
    }
    if (!bracketed) {
        res.rate = RateValue::infeasible();
        res.diagnostics.push_back("M'(lambda)/M(lambda) never reaches alpha: no measure satisfies the constraint");
        res.minimizer_note = "constraint infeasible";
        return res;
    }
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) {
        return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
    };
    auto [lo, hi] = boost::math::tools::toms748_solve(ratio_gap, std::min(near, far), std::max(near, far), tol, iters);
    const double lambda = std::abs(ratio_gap(lo)) <= std::abs(ratio_gap(hi)) ? lo : hi;
    if (std::abs(ratio_gap(lambda)) > 1e-10)
        throw NumericalError("root of M'/M = alpha not resolved below 1e-10 (residual " +
                             fmt(ratio_gap(lambda)) + ")");
    const MgfValue m = mgf_weighted_indicator(model, res.q_target, lambda);
    res.lambda_star = lambda;
    res.rate = RateValue::finite(std::max(0.0, lambda * alpha - std::log(m.value)));
    res.minimizer_note = "dG*/dF~(x) = exp(lambda k(x)) / M(lambda), " + k_desc + ", lambda = " + fmt(lambda) +
                         ", M(lambda) = " + fmt(m.value);
    return res;
}

double mc_quantile_rate(double alpha, double p) {
    check_alpha(alpha);
    if (!(p > 0.0 && p <= alpha)) throw DomainError("mc_quantile_rate needs 0 < p <= alpha < 1");
    return binary_relative_entropy(alpha, p).value;
}

}  // namespace israte
