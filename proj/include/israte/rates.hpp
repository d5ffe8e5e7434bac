#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "israte/distributions.hpp"

namespace israte {

/// Extended nonnegative rate in nats. Infeasible constraint sets carry +inf.
struct RateValue {
    double value = 0.0;
    bool feasible = true;

    static RateValue finite(double v) { return {v, true}; }
    static RateValue infeasible() { return {kInf, false}; }
    /// +inf reached as a limit of feasible problems (e.g. a zero-probability event).
    static RateValue infinite() { return {kInf, true}; }

    bool is_infinite() const { return value == kInf; }
    friend bool operator==(const RateValue&, const RateValue&) = default;
};

/// (1+x) log(1+x) - x for x >= -1, accurate near 0.
double one_plus_x_log_minus_x(double x);

/// Binary relative entropy H(a | p) = a log(a/p) + (1-a) log((1-a)/(1-p)).
RateValue binary_relative_entropy(double a, double p);

/// Minimal relative entropy of measures that overweight a set of proposal mass s
/// by the factor 1 + eps.
RateValue gamma_plus(double eps, double s);

/// Same for underweighting by 1 - eps, 0 < eps <= 1.
RateValue gamma_minus(double eps, double s);

RateValue relative_entropy(const FiniteDistribution& g, const FiniteDistribution& f);
RateValue relative_entropy(std::span<const double> g, std::span<const double> f);

/// Legendre transform sup_theta {theta x - kappa(theta)}.
///
/// Solves kappa'(theta) = x on a doubling bracket; if kappa' never reaches x the
/// supremum is taken along the boundary ray and may be +inf. Throws
/// NumericalError when kappa' is detected non-monotone.
RateValue cramer_rate(const LogMgf& kappa, double x);

/// The maximizing theta of cramer_rate (finite case only).
double cramer_argmax(const LogMgf& kappa, double x);

/// ceil(-log(error_prob) / rate); 1 for an infinite rate.
std::uint64_t sample_size(const RateValue& rate, double error_prob);

/// Functional on finite measures given as a mass vector over the alphabet.
using MeasureFunctional = std::function<double(std::span<const double>)>;

struct VariationalResult {
    double value = 0.0;
    /// Achieved minimizer G* (probability vector, zero off the proposal support).
    std::vector<double> minimizer;
};

/// inf over probability vectors G of h(wf * G) + H(G | proposal).
VariationalResult variational_value(const FiniteDistribution& proposal, std::span<const double> wf,
                                    const MeasureFunctional& h);

/// h(wf * G) + H(G | proposal) for a given G; the objective variational_value minimizes.
double variational_objective(const FiniteDistribution& proposal, std::span<const double> wf,
                             const MeasureFunctional& h, std::span<const double> g);

}  // namespace israte
