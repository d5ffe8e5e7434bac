#include "israte/subset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "israte/error.hpp"

namespace israte {

namespace {

constexpr double kMassRelTol = 1e-12;
constexpr int kMaxBisection = 200;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// A piece of A on which log(dF/dF~) is a fixed quadratic, or +inf.
struct RatioPiece {
    Interval interval;
    bool infinite = false;
    QuadraticLogRatio form;
};

std::vector<RatioPiece> ratio_pieces(const ImportanceModel& model, const Interval& a) {
    const Interval base = intersect(a, model.support());
    std::vector<RatioPiece> pieces;
    if (base.empty()) return pieces;
    if (model.proposal_kind() != ImportanceModel::Proposal::zero_variance) {
        pieces.push_back({base, false, model.log_ratio()});
        return pieces;
    }
    // Zero-variance proposal: ratio F(A_f) on the importance set, +inf outside it.
    const Interval& imp = model.importance_set();
    const Interval inside = intersect(base, imp);
    if (!inside.empty()) pieces.push_back({inside, false, model.log_ratio()});
    const Interval left = intersect(base, {-kInf, imp.lo});
    const Interval right = intersect(base, {imp.hi, kInf});
    if (!left.empty() && left.lo < left.hi) pieces.push_back({left, true, {}});
    if (!right.empty() && right.lo < right.hi) pieces.push_back({right, true, {}});
    return pieces;
}

// {x in interval : q(x) >= log_t}.
std::vector<Interval> superlevel(const QuadraticLogRatio& q, const Interval& interval, double log_t) {
    std::vector<Interval> raw;
    const double c = q.c0 - log_t;
    if (q.c2 == 0.0) {
        if (q.c1 == 0.0) {
            if (c >= 0.0) raw.push_back({-kInf, kInf});
        } else {
            const double x0 = -c / q.c1;
            raw.push_back(q.c1 > 0.0 ? Interval{x0, kInf} : Interval{-kInf, x0});
        }
    } else {
        const double disc = q.c1 * q.c1 - 4.0 * q.c2 * c;
        if (disc < 0.0) {
            if (q.c2 > 0.0) raw.push_back({-kInf, kInf});
        } else {
            const double root = std::sqrt(disc);
            const double s = -0.5 * (q.c1 + (q.c1 >= 0.0 ? root : -root));
            double r1 = s / q.c2;
            double r2 = s != 0.0 ? c / s : r1;
            if (r1 > r2) std::swap(r1, r2);
            if (q.c2 > 0.0) {
                raw.push_back({-kInf, r1});
                raw.push_back({r2, kInf});
            } else {
                raw.push_back({r1, r2});
            }
        }
    }
    std::vector<Interval> out;
    for (const Interval& r : raw) {
        const Interval i = intersect(r, interval);
        if (!i.empty()) out.push_back(i);
    }
    return out;
}

// Range of a quadratic over an interval.
std::pair<double, double> quadratic_range(const QuadraticLogRatio& q, const Interval& i) {
    auto limit = [&](double end) {
        if (std::isfinite(end)) return q(end);
        const double sign = end > 0 ? 1.0 : -1.0;
        if (q.c2 != 0.0) return q.c2 > 0 ? kInf : -kInf;
        if (q.c1 != 0.0) return sign * q.c1 > 0 ? kInf : -kInf;
        return q.c0;
    };
    double lo = std::min(limit(i.lo), limit(i.hi));
    double hi = std::max(limit(i.lo), limit(i.hi));
    if (q.c2 != 0.0) {
        const double vertex = -q.c1 / (2.0 * q.c2);
        if (i.contains(vertex)) {
            lo = std::min(lo, q(vertex));
            hi = std::max(hi, q(vertex));
        }
    }
    return {lo, hi};
}

ThresholdSet scalar_threshold_set(const ImportanceModel& model, const Interval& a, double t) {
    ThresholdSet set;
    set.t = t;
    const double log_t = t > 0.0 ? std::log(t) : -kInf;
    for (const RatioPiece& piece : ratio_pieces(model, a)) {
        if (piece.infinite || t <= 0.0) {
            set.intervals.push_back(piece.interval);
            continue;
        }
        for (const Interval& i : superlevel(piece.form, piece.interval, log_t)) set.intervals.push_back(i);
    }
    std::sort(set.intervals.begin(), set.intervals.end(),
              [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    for (const Interval& i : set.intervals) {
        set.mass_target += model.target_mass(i);
        set.mass_proposal += model.proposal_mass(i);
    }
    set.mass_proposal = std::min(1.0, set.mass_proposal);
    return set;
}

std::vector<std::size_t> finite_indices(const ImportanceModel& model, const TargetSet& target) {
    const auto& f = model.finite_target();
    std::vector<std::size_t> idx;
    for (double p : target.points) {
        const std::size_t i = f.index_of(p);
        if (std::find(idx.begin(), idx.end(), i) != idx.end())
            throw DomainError("target set lists point " + fmt(p) + " twice");
        idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

ThresholdSet finite_threshold_set(const ImportanceModel& model, const std::vector<std::size_t>& idx, double t) {
    ThresholdSet set;
    set.t = t;
    const auto& r = model.ratio_table();
    for (std::size_t i : idx) {
        if (r[i] >= t) {
            set.points.push_back(model.finite_target().points()[i]);
            set.mass_target += model.finite_target()[i];
            set.mass_proposal += model.finite_proposal()[i];
        }
    }
    return set;
}

void check_target(const ImportanceModel& model, const TargetSet& target) {
    if (model.kind() == ImportanceModel::Kind::scalar && !target.interval)
        throw DomainError("scalar models need an interval target set");
    if (model.kind() == ImportanceModel::Kind::finite && target.interval)
        throw DomainError("finite-alphabet models need a point-list target set");
}

bool mass_matches(double mass, double delta) { return std::abs(mass - delta) <= kMassRelTol * delta; }

ThresholdSolution solve_scalar(const ImportanceModel& model, const Interval& a, double delta) {
    ThresholdSolution sol;
    const auto pieces = ratio_pieces(model, a);

    bool constant = !pieces.empty();
    for (const auto& p : pieces) constant = constant && !p.infinite && p.form.is_constant();
    if (constant) {
        const Interval& first = pieces.front().interval;
        const double r0 = model.likelihood_ratio(std::isfinite(first.lo) ? first.lo : first.hi);
        sol.constant_ratio = r0;
        sol.larger = scalar_threshold_set(model, a, r0);
        sol.smaller = scalar_threshold_set(model, a, kInf);
        sol.set = *sol.larger;
        sol.exact = false;
        sol.diagnostic = "likelihood ratio is constant on A: threshold sets are A or empty; "
                         "any C with F(C) = delta is optimal";
        return sol;
    }

    double finite_min = kInf;
    double finite_max = -kInf;
    for (const auto& p : pieces) {
        if (p.infinite) continue;
        const auto [lo, hi] = quadratic_range(p.form, p.interval);
        finite_min = std::min(finite_min, lo);
        finite_max = std::max(finite_max, hi);
    }
    auto mass_at = [&](double u) { return scalar_threshold_set(model, a, std::exp(u)).mass_target; };

    double u_lo;
    if (std::isfinite(finite_min)) {
        u_lo = finite_min;
    } else {
        double step = 1.0;
        u_lo = std::isfinite(finite_max) ? finite_max : 0.0;
        for (int i = 0; i < 2000 && mass_at(u_lo) < delta; ++i, step *= 2.0) u_lo -= step;
    }
    double u_hi;
    if (std::isfinite(finite_max)) {
        u_hi = finite_max + std::max(1e-9, 1e-12 * std::abs(finite_max));
    } else {
        double step = 1.0;
        u_hi = std::max(u_lo, 0.0) + 1.0;
        for (int i = 0; i < 2000 && mass_at(u_hi) > delta; ++i, step *= 2.0) u_hi += step;
    }
    // exp() must stay finite on the bracket.
    u_lo = std::max(u_lo, -700.0);
    u_hi = std::min(u_hi, 700.0);
    double m_lo = mass_at(u_lo);
    double m_hi = mass_at(u_hi);
    if (m_lo < delta && !mass_matches(m_lo, delta))
        throw NumericalError("could not bracket F(C_t) = " + fmt(delta) + " from above");

    auto finish_exact = [&](double u, std::string note) {
        sol.exact = true;
        sol.set = scalar_threshold_set(model, a, std::exp(u));
        sol.diagnostic = std::move(note);
        return sol;
    };
    if (mass_matches(m_lo, delta)) return finish_exact(u_lo, "");
    if (m_hi > delta) {
        // Only the infinite-ratio part remains and it already exceeds delta.
        sol.exact = false;
        sol.larger = scalar_threshold_set(model, a, std::exp(u_hi));
        sol.set = *sol.larger;
        sol.diagnostic = "no threshold set has F(C_t) <= delta";
        return sol;
    }
    if (mass_matches(m_hi, delta)) return finish_exact(u_hi, "");

    for (int iter = 0; iter < kMaxBisection; ++iter) {
        const double mid = 0.5 * (u_lo + u_hi);
        if (mid <= u_lo || mid >= u_hi) break;
        const double m = mass_at(mid);
        if (mass_matches(m, delta)) return finish_exact(mid, "");
        if (m >= delta) {
            u_lo = mid;
            m_lo = m;
        } else {
            u_hi = mid;
            m_hi = m;
        }
    }
    const bool collapsed = std::nextafter(u_lo, kInf) >= u_hi;
    if (collapsed && m_lo - m_hi <= 1e-9 * delta) {
        const double u = (m_lo - delta) < (delta - m_hi) ? u_lo : u_hi;
        return finish_exact(u, "F(C_t) matched to " + fmt(std::abs(mass_at(u) - delta) / delta) +
                                   " relative; limited by floating-point resolution");
    }
    if (!collapsed) throw NumericalError("t_delta bisection did not converge in 200 iterations");
    sol.exact = false;
    sol.larger = scalar_threshold_set(model, a, std::exp(u_lo));
    sol.smaller = scalar_threshold_set(model, a, std::exp(u_hi));
    sol.set = *sol.larger;
    sol.diagnostic = "F(C_t) jumps across delta; returning the bracketing threshold sets";
    return sol;
}

ThresholdSolution solve_finite(const ImportanceModel& model, const std::vector<std::size_t>& idx, double delta) {
    const auto& r = model.ratio_table();
    std::vector<double> levels;
    for (std::size_t i : idx) levels.push_back(r[i]);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    ThresholdSolution sol;
    ThresholdSet previous;  // C above the first level: empty
    previous.t = kInf;
    bool previous_is_empty = true;
    for (double level : levels) {
        ThresholdSet set = finite_threshold_set(model, idx, level);
        if (mass_matches(set.mass_target, delta)) {
            sol.exact = true;
            sol.set = std::move(set);
            return sol;
        }
        if (set.mass_target > delta) {
            sol.exact = false;
            sol.larger = set;
            sol.set = std::move(set);
            if (previous_is_empty) {
                ThresholdSet empty;
                empty.t = level == kInf ? kInf : std::nextafter(level, kInf);
                sol.smaller = std::move(empty);
            } else {
                sol.smaller = std::move(previous);
            }
            sol.diagnostic = "no threshold t has F(C_t) = delta (atoms); returning the bracketing threshold sets";
            return sol;
        }
        previous = std::move(set);
        previous_is_empty = false;
    }
    throw InfeasibleError("delta exceeds F(A)");
}

struct ExhaustiveResult {
    double proposal_mass;
    std::vector<double> points;
};

// min F~(C) over C in A with F(C) >= delta.
std::optional<ExhaustiveResult> exhaustive_min(const ImportanceModel& model, const std::vector<std::size_t>& idx,
                                               double delta, bool use_target_as_proposal) {
    if (idx.size() > 8) return std::nullopt;
    const auto& f = model.finite_target();
    const auto& g = use_target_as_proposal ? model.finite_target() : model.finite_proposal();
    std::optional<ExhaustiveResult> best;
    const std::size_t subsets = std::size_t{1} << idx.size();
    for (std::size_t mask = 1; mask < subsets; ++mask) {
        double fm = 0.0;
        double gm = 0.0;
        for (std::size_t b = 0; b < idx.size(); ++b) {
            if (mask & (std::size_t{1} << b)) {
                fm += f[idx[b]];
                gm += g[idx[b]];
            }
        }
        if (fm < delta && !mass_matches(fm, delta)) continue;
        if (!best || gm < best->proposal_mass) {
            ExhaustiveResult r{gm, {}};
            for (std::size_t b = 0; b < idx.size(); ++b)
                if (mask & (std::size_t{1} << b)) r.points.push_back(f.points()[idx[b]]);
            best = std::move(r);
        }
    }
    return best;
}

}  // namespace

double target_set_mass(const ImportanceModel& model, const TargetSet& target) {
    check_target(model, target);
    if (model.kind() == ImportanceModel::Kind::scalar)
        return model.target_mass(intersect(*target.interval, model.support()));
    double total = 0.0;
    for (std::size_t i : finite_indices(model, target)) total += model.finite_target()[i];
    return total;
}

ThresholdSet threshold_set(const ImportanceModel& model, const TargetSet& target, double t) {
    check_target(model, target);
    if (!(t >= 0.0)) throw DomainError("threshold t must be >= 0");
    if (model.kind() == ImportanceModel::Kind::scalar) return scalar_threshold_set(model, *target.interval, t);
    return finite_threshold_set(model, finite_indices(model, target), t);
}

ThresholdSolution solve_t_delta(const ImportanceModel& model, const TargetSet& target, double delta) {
    check_target(model, target);
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("delta must be positive");
    const double mass_a = target_set_mass(model, target);
    if (delta > mass_a * (1.0 + kMassRelTol))
        throw InfeasibleError("delta = " + fmt(delta) + " exceeds F(A) = " + fmt(mass_a));
    if (delta >= mass_a * (1.0 - kMassRelTol)) {
        ThresholdSolution sol;
        sol.exact = true;
        sol.set = threshold_set(model, target, 0.0);
        return sol;
    }
    if (model.kind() == ImportanceModel::Kind::scalar) return solve_scalar(model, *target.interval, delta);
    return solve_finite(model, finite_indices(model, target), delta);
}

double cost_reduction(const RateValue& rate_mc, const RateValue& rate_is, double cost_factor) {
    if (!(cost_factor > 0.0)) throw DomainError("cost factor must be positive");
    if (!(rate_is.value > 0.0)) throw DomainError("importance-sampling rate is zero: cost reduction undefined");
    if (!(rate_mc.value > 0.0)) throw DomainError("standard Monte Carlo rate is zero: cost reduction undefined");
    if (rate_is.is_infinite()) return rate_mc.is_infinite() ? 1.0 * cost_factor : 0.0;
    return cost_factor * rate_mc.value / rate_is.value;
}

SubsetPerfReport subset_rate(const ImportanceModel& model, const TargetSet& target, double eps, double delta,
                             const SubsetOptions& options) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    SubsetPerfReport report;
    report.eps = eps;
    report.delta = delta;
    report.error_prob = options.error_prob;
    report.threshold = solve_t_delta(model, target, delta);
    const bool minus_ok = eps <= 1.0;
    if (!minus_ok) report.diagnostics.push_back("eps > 1: underweighting rate not defined");

    auto fill_rates = [&](double s) {
        s = std::clamp(s, 0.0, 1.0);
        report.optimal_proposal_mass = s;
        report.rate_plus = gamma_plus(eps, s);
        if (minus_ok) report.rate_minus = gamma_minus(eps, s);
    };

    if (model.kind() == ImportanceModel::Kind::scalar) {
        if (report.threshold.exact) {
            fill_rates(report.threshold.set.mass_proposal);
        } else if (report.threshold.constant_ratio) {
            // Atomless F: any C with F(C) = delta has F~(C) = delta / r0.
            const double r0 = *report.threshold.constant_ratio;
            fill_rates(delta / r0);
            report.diagnostics.push_back("constant likelihood ratio " + fmt(r0) +
                                         " on A: rate gamma(delta / r0) for any C with F(C) = delta");
        } else {
            report.diagnostics.push_back(report.threshold.diagnostic);
        }
    } else {
        const auto idx = finite_indices(model, target);
        if (report.threshold.exact) fill_rates(report.threshold.set.mass_proposal);
        if (!report.threshold.exact) {
            const auto& lo_set = report.threshold.smaller;
            const auto& hi_set = report.threshold.larger;
            const double s_lo = lo_set ? lo_set->mass_proposal : 0.0;
            const double s_hi = hi_set->mass_proposal;
            report.bounds_plus = RateBounds{gamma_plus(eps, s_lo), gamma_plus(eps, std::min(1.0, s_hi))};
            if (minus_ok)
                report.bounds_minus = RateBounds{gamma_minus(eps, s_lo), gamma_minus(eps, std::min(1.0, s_hi))};
            if (auto ex = exhaustive_min(model, idx, delta, false)) {
                fill_rates(ex->proposal_mass);
                report.diagnostics.push_back("exact rate from exhaustive search over subsets of A");
            } else {
                report.diagnostics.push_back("A has more than 8 points: only the threshold bracket is reported");
            }
        }
    }

    auto size_of = [&](const std::optional<RateValue>& rate, const std::optional<RateBounds>& bounds,
                        std::optional<std::uint64_t>& out, const char* side) {
        const RateValue* r = rate ? &*rate : (bounds ? &bounds->lower : nullptr);
        if (!r) return;
        if (r->value > 0.0)
            out = sample_size(*r, options.error_prob);
        else
            report.diagnostics.push_back(std::string("rate ") + side + " is zero: no sample-size guarantee");
    };
    size_of(report.rate_plus, report.bounds_plus, report.sample_size_plus, "plus");
    size_of(report.rate_minus, report.bounds_minus, report.sample_size_minus, "minus");

    if (options.cost_factor) {
        std::optional<RateValue> mc;
        if (model.kind() == ImportanceModel::Kind::scalar) {
            mc = gamma_plus(eps, delta);
        } else if (auto ex = exhaustive_min(model, finite_indices(model, target), delta, true)) {
            mc = gamma_plus(eps, std::min(1.0, ex->proposal_mass));
        }
        report.rate_plus_standard_mc = mc;
        if (mc && report.rate_plus && report.rate_plus->value > 0.0 && mc->value > 0.0)
            report.cost_reduction = cost_reduction(*mc, *report.rate_plus, *options.cost_factor);
        else
            report.diagnostics.push_back("cost reduction undefined (missing or zero rate)");
    }
    return report;
}

RandomWalkReport random_walk_bound(const LogMgf& kappa, double a, std::size_t m, double eps, double delta,
                                   double cost_factor) {
    if (m == 0) throw DomainError("m must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0, 1]");
    const double mean = kappa.derivative(0.0);
    if (!(a > mean)) throw DomainError("a = " + fmt(a) + " must exceed the increment mean " + fmt(mean));
    RandomWalkReport r;
    r.a = a;
    r.m = m;
    r.eps = eps;
    r.delta = delta;
    try {
        r.theta = cramer_argmax(kappa, a);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("solving kappa'(theta) = a failed: ") + e.what() +
                             "; kappa'(0) = " + fmt(mean) + ", a = " + fmt(a));
    }
    r.exponent = r.theta * a - kappa.value(r.theta);
    r.mass_bound = std::exp(static_cast<double>(m) * r.exponent + std::log(delta));
    r.rate_lower_bound = r.mass_bound * (1.0 + eps) > 1.0 ? RateValue::infeasible()
                                                           : gamma_plus(eps, r.mass_bound);
    r.rate_standard_mc = gamma_plus(eps, delta);
    if (r.rate_lower_bound.is_infinite())
        r.cost_reduction_bound = 0.0;
    else
        r.cost_reduction_bound = cost_reduction(r.rate_standard_mc, r.rate_lower_bound, cost_factor);
    return r;
}

RandomWalkReport random_walk_tilt(const ScalarDistribution& increment, double a, std::size_t m, double eps,
                                  double delta_prime, double cost_factor) {
    if (!(delta_prime > 0.0 && delta_prime <= 1.0)) throw DomainError("delta' must lie in (0, 1]");
    if (m == 0) throw DomainError("m must be >= 1");
    const double md = static_cast<double>(m);
    const auto& params = increment.params();
    double tail = 0.0;
    switch (increment.family()) {
        case Family::gaussian: {
            boost::math::normal sum(md * params[0], std::sqrt(md) * params[1]);
            tail = boost::math::cdf(boost::math::complement(sum, md * a));
            break;
        }
        case Family::exponential: {
            boost::math::gamma_distribution<double> sum(md, 1.0 / params[0]);
            tail = boost::math::cdf(boost::math::complement(sum, md * a));
            break;
        }
        case Family::bernoulli: {
            const double k = std::ceil(md * a - 1e-12);
            if (k <= 0.0) {
                tail = 1.0;
            } else if (k > md) {
                tail = 0.0;
            } else {
                boost::math::binomial sum(md, params[0]);
                tail = boost::math::cdf(boost::math::complement(sum, k - 1.0));
            }
            break;
        }
    }
    if (!(tail > 0.0)) throw NumericalError("P(S_m >= m a) underflows to 0");
    RandomWalkReport r = random_walk_bound(increment.log_mgf(), a, m, eps, delta_prime * tail, cost_factor);
    r.delta_prime = delta_prime;
    r.tail_probability = tail;

    if (increment.family() == Family::gaussian) {
        const double mu = params[0];
        const double sd = params[1];
        const double tilted_mean = mu + sd * sd * r.theta;
        const auto model = ImportanceModel::change_of_measure(ScalarDistribution::gaussian(md * mu, std::sqrt(md) * sd),
                                                              ScalarDistribution::gaussian(md * tilted_mean, std::sqrt(md) * sd),
                                                              {md * a, kInf});
        const auto sol = solve_t_delta(model, TargetSet::of({md * a, kInf}), r.delta);
        r.realized_proposal_mass = sol.set.mass_proposal;
        r.realized_rate = gamma_plus(eps, std::min(1.0, sol.set.mass_proposal));
    }
    return r;
}

SmallPExpansion small_p_expansion(double eps, double delta_prime, double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0, 1)");
    if (!(delta_prime >= 0.0 && delta_prime <= 1.0)) throw DomainError("delta' must lie in [0, 1]");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (delta_prime == 0.0) return {0.0, 0.0};
    const RateValue exact = gamma_plus(eps, delta_prime * p);
    return {exact.value, p * delta_prime * one_plus_x_log_minus_x(eps)};
}

}  // namespace israte
