#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "israte/distributions.hpp"
#include "israte/model.hpp"
#include "israte/rates.hpp"

namespace israte {

/// The set A on which the estimate must be accurate: an interval for scalar
/// models, a list of alphabet labels for finite ones.
struct TargetSet {
    std::optional<Interval> interval;
    std::vector<double> points;

    static TargetSet of(Interval i) { return {i, {}}; }
    static TargetSet of_points(std::vector<double> p) { return {std::nullopt, std::move(p)}; }
};

/// C_t = {x in A : dF/dF~(x) >= t} with its masses under F and F~.
struct ThresholdSet {
    double t = 0.0;
    std::vector<Interval> intervals;  ///< scalar models
    std::vector<double> points;       ///< finite models
    double mass_target = 0.0;
    double mass_proposal = 0.0;
};

ThresholdSet threshold_set(const ImportanceModel& model, const TargetSet& target, double t);

/// Result of solving F(C_t) = delta. When no exact root exists the two
/// neighbouring threshold sets bracket it: `larger` has F >= delta and
/// `smaller` has F <= delta.
struct ThresholdSolution {
    bool exact = false;
    ThresholdSet set;
    std::optional<ThresholdSet> larger;
    std::optional<ThresholdSet> smaller;
    /// Set when dF/dF~ is constant on A; Prop-style threshold sets degenerate then.
    std::optional<double> constant_ratio;
    std::string diagnostic;
};

/// Monotone root finding on t -> F(C_t). Throws InfeasibleError for delta > F(A).
ThresholdSolution solve_t_delta(const ImportanceModel& model, const TargetSet& target, double delta);

/// F(A) for the given target set.
double target_set_mass(const ImportanceModel& model, const TargetSet& target);

struct SubsetOptions {
    double error_prob = 0.01;
    std::optional<double> cost_factor;
};

struct RateBounds {
    RateValue lower;
    RateValue upper;
};

/// Large-deviation rates for over- (plus) and under- (minus) weighting some
/// C in A with F(C) >= delta by the factor 1 +- eps.
struct SubsetPerfReport {
    double eps = 0.0;
    double delta = 0.0;
    ThresholdSolution threshold;
    /// Proposal mass of the optimal set; absent when only a bracket is known.
    std::optional<double> optimal_proposal_mass;
    std::optional<RateValue> rate_plus;
    std::optional<RateValue> rate_minus;
    std::optional<RateBounds> bounds_plus;
    std::optional<RateBounds> bounds_minus;
    std::optional<std::uint64_t> sample_size_plus;
    std::optional<std::uint64_t> sample_size_minus;
    double error_prob = 0.01;
    std::optional<RateValue> rate_plus_standard_mc;
    std::optional<double> cost_reduction;
    std::vector<std::string> diagnostics;
};

SubsetPerfReport subset_rate(const ImportanceModel& model, const TargetSet& target, double eps, double delta,
                             const SubsetOptions& options = {});

/// c * rate_mc / rate_is: the cost of importance sampling relative to standard
/// Monte Carlo for the same guarantee.
double cost_reduction(const RateValue& rate_mc, const RateValue& rate_is, double cost_factor);

struct RandomWalkReport {
    double a = 0.0;
    std::size_t m = 0;
    double eps = 0.0;
    double delta_prime = 0.0;
    double theta = 0.0;         ///< solves kappa'(theta) = a
    double exponent = 0.0;      ///< theta a - kappa(theta)
    double tail_probability = 0.0;  ///< p_m = P(S_m >= m a)
    double delta = 0.0;         ///< delta' p_m
    double mass_bound = 0.0;    ///< e^{m exponent} delta
    RateValue rate_lower_bound; ///< gamma+_eps(mass_bound)
    RateValue rate_standard_mc; ///< gamma+_eps(delta)
    double cost_reduction_bound = 0.0;
    std::optional<double> realized_proposal_mass;  ///< F~_theta(C_{t_delta}), Gaussian increments
    std::optional<RateValue> realized_rate;
};

/// Exponential change of measure for the sum of m i.i.d. increments with target
/// A = {S_m >= m a}. The tail p_m is computed exactly for built-in families and
/// the realized threshold-set mass is added for Gaussian increments.
RandomWalkReport random_walk_tilt(const ScalarDistribution& increment, double a, std::size_t m, double eps,
                                  double delta_prime, double cost_factor = 1.0);

/// The bound part of random_walk_tilt for a bare log-MGF and a given delta.
RandomWalkReport random_walk_bound(const LogMgf& kappa, double a, std::size_t m, double eps, double delta,
                                   double cost_factor = 1.0);

struct SmallPExpansion {
    double exact = 0.0;
    double leading = 0.0;
};

/// gamma+_eps(delta' p) and its linearization p delta' [(1+eps) log(1+eps) - eps].
SmallPExpansion small_p_expansion(double eps, double delta_prime, double p);

}  // namespace israte
