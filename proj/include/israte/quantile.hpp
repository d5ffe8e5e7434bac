#pragma once

#include <span>
#include <string>
#include <vector>

#include "israte/distributions.hpp"
#include "israte/model.hpp"
#include "israte/rates.hpp"

namespace israte {

enum class Side { plus, minus };

std::string to_string(Side side);
Side side_from_string(const std::string& name);

/// Phi_alpha(nu) = inf{x : nu((x, inf)) <= alpha} for an atomic measure;
/// -inf when the total mass is already <= alpha.
double quantile(std::span<const Atom> atoms, double alpha);
double quantile(const WeightedEmpiricalMeasure& measure, double alpha);
double quantile(const ScalarDistribution& distribution, double alpha);
double quantile(const FiniteDistribution& distribution, double alpha);

struct MgfValue {
    double value = 1.0;       ///< M(lambda)
    double derivative = 0.0;  ///< M'(lambda)
};

/// M(lambda) = int exp(lambda k) dF~ with k(x) = 1{x > q} w(x) f(x), and its
/// derivative. Closed form when the ratio is constant above q, adaptive
/// quadrature otherwise. Throws DivergenceError when the integrand does not
/// decay (the proposal tail is too light for the target).
MgfValue mgf_weighted_indicator(const ImportanceModel& model, double q, double lambda);

struct QuantileRateResult {
    double alpha = 0.0;
    double eps = 0.0;
    Side side = Side::plus;
    double quantile_target = 0.0;  ///< Phi_alpha(F)
    double q_target = 0.0;         ///< (1 +- eps) Phi_alpha(F)
    double p_target = 0.0;         ///< F((q, inf)) restricted to {f > 0}
    double lambda_star = 0.0;
    RateValue rate;
    std::string minimizer_note;
    std::vector<std::string> diagnostics;
};

/// Rate of {nu : Phi_alpha(nu) >= (1+eps) Phi_alpha(F)} (plus) or
/// {nu : Phi_alpha(nu) <= (1-eps) Phi_alpha(F)} (minus) for the weighted
/// empirical measure of the model, via lambda alpha - log M(lambda) at the
/// root of M'/M = alpha.
QuantileRateResult quantile_rate(const ImportanceModel& model, double alpha, double eps, Side side = Side::plus);

/// Standard Monte Carlo closed form: binary relative entropy H(alpha | p).
double mc_quantile_rate(double alpha, double p);

}  // namespace israte
