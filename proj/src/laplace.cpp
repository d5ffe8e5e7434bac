#include "israte/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "israte/error.hpp"
#include "israte/kernels.hpp"
#include "israte/quantile.hpp"

namespace israte {

namespace {

/// Streaming log-sum-exp.
class LogSum {
public:
    void add(double v) {
        if (v == -kInf) return;
        if (v <= max_) {
            sum_ += std::exp(v - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - v) + 1.0;
            max_ = v;
        }
    }
    double value() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }

private:
    double max_ = -kInf;
    double sum_ = 0.0;
};

/// Advances `c` to the next composition of sum(c) in lexicographic order.
bool next_composition(std::vector<std::size_t>& c) {
    const std::size_t m = c.size();
    if (m < 2) return false;
    std::size_t tail = c[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) {
        if (tail > 0) {
            ++c[i];
            for (std::size_t l = i + 1; l + 1 < m; ++l) c[l] = 0;
            c[m - 1] = tail - 1;
            return true;
        }
        tail += c[i];
    }
    return false;
}

std::vector<std::size_t> first_composition(std::size_t total, std::size_t parts) {
    std::vector<std::size_t> c(parts, 0);
    c.back() = total;
    return c;
}

struct Support {
    std::vector<std::size_t> index;
    std::vector<double> log_p;
    std::vector<double> wf;
};

Support support_of(const FiniteDistribution& proposal, std::span<const double> wf) {
    if (wf.size() != proposal.size()) throw DomainError("wf table length differs from the alphabet size");
    Support s;
    for (std::size_t i = 0; i < proposal.size(); ++i) {
        if (!std::isfinite(wf[i]) || wf[i] < 0.0) throw DomainError("wf table must be finite and nonnegative");
        if (proposal[i] > 0.0) {
            s.index.push_back(i);
            s.log_p.push_back(std::log(proposal[i]));
            s.wf.push_back(wf[i]);
        }
    }
    return s;
}

void check_budget(std::size_t n, std::size_t k, std::uint64_t budget) {
    if (n == 0) throw DomainError("n must be >= 1");
    const std::uint64_t count = type_class_count(n, k);
    if (count > budget) {
        throw BudgetError("n = " + std::to_string(n) + " over " + std::to_string(k) + " points has " +
                          (count == UINT64_MAX ? std::string("more than 2^64") : std::to_string(count)) +
                          " type classes, over the budget of " + std::to_string(budget) +
                          "; use a smaller n");
    }
}

/// h(Psi(counts / n)) on the full alphabet.
double terminal_cost(const Support& s, std::size_t alphabet, std::span<const std::size_t> counts, std::size_t n,
                     const MeasureFunctional& h, std::vector<double>& nu) {
    nu.assign(alphabet, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < counts.size(); ++i) nu[s.index[i]] = s.wf[i] * (static_cast<double>(counts[i]) * inv_n);
    const double v = h(nu);
    if (std::isnan(v)) throw NumericalError("functional h returned NaN");
    return v;
}

}  // namespace

std::uint64_t type_class_count(std::size_t n, std::size_t k) {
    if (k == 0) return n == 0 ? 1 : 0;
    // C(n + k - 1, k - 1) with saturation.
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i < k; ++i) {
        c = c * (n + i) / i;
        if (c > UINT64_MAX) return UINT64_MAX;
    }
    return static_cast<std::uint64_t>(c);
}

double exact_laplace_value(const FiniteDistribution& proposal, std::span<const double> wf, const MeasureFunctional& h,
                           std::size_t n, std::uint64_t budget) {
    const Support s = support_of(proposal, wf);
    const std::size_t k = s.index.size();
    check_budget(n, k, budget);
    const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
    const double nd = static_cast<double>(n);
    std::vector<double> nu;
    LogSum total;
    auto c = first_composition(n, k);
    do {
        double log_weight = log_n_fact;
        for (std::size_t i = 0; i < k; ++i) {
            log_weight -= std::lgamma(static_cast<double>(c[i]) + 1.0);
            if (c[i] > 0) log_weight += static_cast<double>(c[i]) * s.log_p[i];
        }
        total.add(log_weight - nd * terminal_cost(s, proposal.size(), c, n, h, nu));
    } while (next_composition(c));
    return -total.value() / nd;
}

LaplaceLattice::LaplaceLattice(const FiniteDistribution& proposal, std::span<const double> wf,
                               const MeasureFunctional& h, std::size_t n, std::uint64_t budget)
    : n_(n), alphabet_size_(proposal.size()) {
    const Support s = support_of(proposal, wf);
    support_ = s.index;
    log_p_ = s.log_p;
    const std::size_t k = support_.size();
    check_budget(n, k, budget);

    binom_.assign(n + k + 1, std::vector<std::uint64_t>(k + 1, 0));
    for (std::size_t a = 0; a <= n + k; ++a) {
        binom_[a][0] = 1;
        for (std::size_t b = 1; b <= std::min(a, k); ++b)
            binom_[a][b] = binom_[a - 1][b - 1] + (b <= a - 1 ? binom_[a - 1][b] : 0);
    }

    const double nd = static_cast<double>(n);
    values_.resize(n + 1);
    std::vector<double> nu;
    for (std::size_t j = n + 1; j-- > 0;) {
        values_[j].resize(type_class_count(j, k));
        auto c = first_composition(j, k);
        std::size_t r = 0;
        do {
            if (j == n) {
                values_[j][r] = -nd * terminal_cost(s, alphabet_size_, c, n, h, nu);
            } else {
                LogSum sum;
                for (std::size_t x = 0; x < k; ++x) {
                    ++c[x];
                    sum.add(log_p_[x] + values_[j + 1][rank(c)]);
                    --c[x];
                }
                values_[j][r] = sum.value();
            }
            ++r;
        } while (next_composition(c));
    }
}

std::size_t LaplaceLattice::rank(std::span<const std::size_t> c) const {
    const std::size_t k = c.size();
    std::size_t remaining = std::accumulate(c.begin(), c.end(), std::size_t{0});
    std::size_t r = 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const std::size_t parts = k - 1 - i;
        r += binom_[remaining + parts][parts] - binom_[remaining - c[i] + parts][parts];
        remaining -= c[i];
    }
    return r;
}

std::vector<std::size_t> LaplaceLattice::reduce(std::span<const std::size_t> counts) const {
    if (counts.size() != alphabet_size_) throw DomainError("count vector length differs from the alphabet size");
    std::vector<std::size_t> reduced;
    std::size_t next = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (next < support_.size() && support_[next] == i) {
            reduced.push_back(counts[i]);
            ++next;
        } else if (counts[i] != 0) {
            throw DomainError("counts charge a point outside the proposal support");
        }
    }
    return reduced;
}

double LaplaceLattice::value(std::size_t j, std::span<const std::size_t> counts) const {
    if (j > n_) throw DomainError("lattice level exceeds n");
    const auto c = reduce(counts);
    if (std::accumulate(c.begin(), c.end(), std::size_t{0}) != j) throw DomainError("counts must sum to j");
    return -values_[j][rank(c)] / static_cast<double>(n_);
}

std::vector<double> LaplaceLattice::minimizing_kernel(std::size_t j, std::span<const std::size_t> counts) const {
    if (j >= n_) throw DomainError("the minimizing kernel needs j < n");
    auto c = reduce(counts);
    if (std::accumulate(c.begin(), c.end(), std::size_t{0}) != j) throw DomainError("counts must sum to j");
    const std::size_t k = c.size();
    std::vector<double> log_terms(k);
    double top = -kInf;
    for (std::size_t x = 0; x < k; ++x) {
        ++c[x];
        log_terms[x] = log_p_[x] + values_[j + 1][rank(c)];
        --c[x];
        top = std::max(top, log_terms[x]);
    }
    std::vector<double> kernel(alphabet_size_, 0.0);
    double total = 0.0;
    for (std::size_t x = 0; x < k; ++x) total += std::exp(log_terms[x] - top);
    for (std::size_t x = 0; x < k; ++x) kernel[support_[x]] = std::exp(log_terms[x] - top) / total;
    return kernel;
}

double dp_laplace_value(const FiniteDistribution& proposal, std::span<const double> wf, const MeasureFunctional& h,
                        std::size_t n, std::uint64_t budget) {
    return LaplaceLattice(proposal, wf, h, n, budget).value();
}

std::string to_string(LaplaceMethod method) { return method == LaplaceMethod::dp ? "dp" : "enumeration"; }

LaplaceMethod laplace_method_from_string(const std::string& name) {
    if (name == "dp") return LaplaceMethod::dp;
    if (name == "enumeration") return LaplaceMethod::enumeration;
    throw DomainError("method must be 'dp' or 'enumeration', got '" + name + "'");
}

LaplaceRunResult convergence_check(const FiniteDistribution& proposal, std::span<const double> wf,
                                   const MeasureFunctional& h, std::span<const std::size_t> n_list,
                                   LaplaceMethod method, std::uint64_t budget) {
    if (n_list.empty()) throw DomainError("n list is empty");
    LaplaceRunResult result;
    result.method = method;
    const VariationalResult limit = variational_value(proposal, wf, h);
    result.variational_limit = limit.value;
    result.variational_minimizer = limit.minimizer;
    for (std::size_t n : n_list) {
        const double w = method == LaplaceMethod::dp ? dp_laplace_value(proposal, wf, h, n, budget)
                                                     : exact_laplace_value(proposal, wf, h, n, budget);
        result.n_values.push_back(n);
        result.w_n_values.push_back(w);
        result.gaps.push_back(std::abs(w - limit.value));
    }
    for (std::size_t i = 1; i < result.gaps.size(); ++i)
        if (result.gaps[i] > result.gaps[i - 1] + 1e-12) result.nonincreasing = false;
    return result;
}

std::string to_string(EventSpec::Kind kind) {
    switch (kind) {
        case EventSpec::Kind::quantile_exceedance: return "quantile-exceedance";
        case EventSpec::Kind::finite_overweight: return "finite-overweight";
        case EventSpec::Kind::finite_underweight: return "finite-underweight";
    }
    return "unknown";
}

EventSpec::Kind event_kind_from_string(const std::string& name) {
    if (name == "quantile-exceedance") return EventSpec::Kind::quantile_exceedance;
    if (name == "finite-overweight") return EventSpec::Kind::finite_overweight;
    if (name == "finite-underweight") return EventSpec::Kind::finite_underweight;
    throw DomainError("unknown event kind '" + name + "'");
}

// Comparisons carry a 1e-12 relative slack: sums of w f / n round, and
// boundary cases like 20 draws of weight 1/400 against alpha = 0.05 must count.
constexpr double kEventSlack = 1e-12;

EventTester::EventTester(const ImportanceModel& model, const EventSpec& event) : event_(event) {
    if (!(event.eps > 0.0)) throw DomainError("event eps must be > 0");
    switch (event.kind) {
        case EventSpec::Kind::quantile_exceedance: {
            if (!(event.alpha > 0.0 && event.alpha < 1.0)) throw DomainError("event alpha must lie in (0, 1)");
            const double phi = model.kind() == ImportanceModel::Kind::scalar
                                   ? quantile(model.scalar_target(), event.alpha)
                                   : quantile(model.finite_target(), event.alpha);
            level_ = (1.0 + event.eps) * phi;
            break;
        }
        case EventSpec::Kind::finite_underweight:
            if (event.eps > 1.0) throw DomainError("underweight events need eps <= 1");
            [[fallthrough]];
        case EventSpec::Kind::finite_overweight: {
            if (model.kind() != ImportanceModel::Kind::finite)
                throw DomainError("finite-set events need a finite-alphabet model");
            if (event.set.empty()) throw DomainError("event set C is empty");
            level_ = 0.0;
            for (double x : event.set) level_ += model.finite_target()[model.finite_target().index_of(x)];
            if (!(level_ > 0.0)) throw DomainError("event set C has F(C) = 0");
            break;
        }
    }
}

bool EventTester::operator()(const WeightedEmpiricalMeasure& measure) const {
    double mass = 0.0;
    switch (event_.kind) {
        case EventSpec::Kind::quantile_exceedance:
            // Phi_alpha(nu) >= q  <=>  nu((q, inf)) >= alpha
            for (const Atom& a : measure.atoms)
                if (a.location > level_) mass += a.weight;
            return mass >= event_.alpha * (1.0 - kEventSlack);
        case EventSpec::Kind::finite_overweight:
        case EventSpec::Kind::finite_underweight:
            for (const Atom& a : measure.atoms)
                if (std::find(event_.set.begin(), event_.set.end(), a.location) != event_.set.end()) mass += a.weight;
            if (event_.kind == EventSpec::Kind::finite_overweight)
                return mass >= (1.0 + event_.eps) * level_ * (1.0 - kEventSlack);
            return mass <= (1.0 - event_.eps) * level_ * (1.0 + kEventSlack) + 1e-300;
    }
    return false;
}

EventEstimate estimate_event_probability(const ImportanceModel& model, const EventSpec& event, std::size_t n,
                                         std::size_t reps, std::uint64_t seed) {
    if (reps == 0) throw DomainError("reps must be >= 1");
    if (n == 0) throw DomainError("n must be >= 1");
    const EventTester tester(model, event);
    EventEstimate est;
    est.n = n;
    est.reps = reps;
    est.hits = kernels::count_event_hits(model, tester, n, reps, seed);
    est.p_hat = static_cast<double>(est.hits) / static_cast<double>(reps);
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(reps));
    if (est.hits > 0) est.neg_log_rate = -std::log(est.p_hat) / static_cast<double>(n);
    return est;
}

RateValue event_reference_rate(const ImportanceModel& model, const EventSpec& event) {
    const EventTester tester(model, event);
    if (event.kind == EventSpec::Kind::quantile_exceedance)
        return quantile_rate(model, event.alpha, event.eps, Side::plus).rate;

    // Cramer rate of k = 1_C w f under the proposal at (1 +- eps) F(C).
    const auto& p = model.finite_proposal();
    std::vector<double> log_p;
    std::vector<double> k;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        const double x = p.points()[i];
        const bool in_c = std::find(event.set.begin(), event.set.end(), x) != event.set.end();
        log_p.push_back(std::log(p[i]));
        k.push_back(in_c ? weight(model, x) * model.importance_table()[i] : 0.0);
    }
    LogMgf kappa;
    kappa.value = [log_p, k](double t) {
        LogSum s;
        for (std::size_t i = 0; i < k.size(); ++i) s.add(log_p[i] + t * k[i]);
        return s.value();
    };
    kappa.derivative = [log_p, k](double t) {
        double top = -kInf;
        for (std::size_t i = 0; i < k.size(); ++i) top = std::max(top, log_p[i] + t * k[i]);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            const double e = std::exp(log_p[i] + t * k[i] - top);
            num += k[i] * e;
            den += e;
        }
        return num / den;
    };
    const double sign = event.kind == EventSpec::Kind::finite_overweight ? 1.0 : -1.0;
    return cramer_rate(kappa, (1.0 + sign * event.eps) * tester.reference_level());
}

double rate_slope_fit(std::span<const std::size_t> n_list, std::span<const double> p_hats, double prefactor_power) {
    if (n_list.size() != p_hats.size()) throw DomainError("n list and p_hat list differ in length");
    if (n_list.size() < 3) throw DomainError("slope fit needs at least 3 points");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw DomainError("n list must be strictly increasing");
    for (double p : p_hats) {
        if (p == 0.0) throw DomainError("p_hat = 0 in slope fit: increase reps or decrease n");
        if (!(p > 0.0 && p <= 1.0)) throw DomainError("p_hat values must lie in (0, 1]");
    }
    if (!std::isfinite(prefactor_power)) throw DomainError("prefactor power must be finite");
    auto y = [&](std::size_t i) {
        return -std::log(p_hats[i]) - prefactor_power * std::log(static_cast<double>(n_list[i]));
    };
    const double count = static_cast<double>(n_list.size());
    double mean_n = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        mean_n += static_cast<double>(n_list[i]);
        mean_y += y(i);
    }
    mean_n /= count;
    mean_y /= count;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const double dx = static_cast<double>(n_list[i]) - mean_n;
        sxy += dx * (y(i) - mean_y);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace israte
