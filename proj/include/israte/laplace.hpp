#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "israte/distributions.hpp"
#include "israte/model.hpp"
#include "israte/rates.hpp"

namespace israte {

inline constexpr std::uint64_t kDefaultTypeBudget = 10'000'000;

/// Number of count vectors of n draws over k points, C(n + k - 1, k - 1);
/// saturates at UINT64_MAX.
std::uint64_t type_class_count(std::size_t n, std::size_t k);

/// W^n = -(1/n) log E[exp(-n h(wf * L_n))], L_n the empirical measure of n
/// proposal draws, by summing over type classes in log space.
double exact_laplace_value(const FiniteDistribution& proposal, std::span<const double> wf,
                           const MeasureFunctional& h, std::size_t n, std::uint64_t budget = kDefaultTypeBudget);

/// Backward recursion over the lattice of partial counts:
///   W(j, G) = -(1/n) log sum_x F~(x) exp(-n W(j+1, G + delta_x / n)),
///   W(n, G) = h(wf * G).
class LaplaceLattice {
public:
    LaplaceLattice(const FiniteDistribution& proposal, std::span<const double> wf, const MeasureFunctional& h,
                   std::size_t n, std::uint64_t budget = kDefaultTypeBudget);

    std::size_t n() const { return n_; }
    /// W^n(0, 0).
    double value() const { return -values_[0][0] / static_cast<double>(n_); }
    /// W^n(j, counts / n); counts cover the full alphabet and sum to j.
    double value(std::size_t j, std::span<const std::size_t> counts) const;
    /// One-step minimizing kernel at (j, counts): proportional to
    /// F~(x) exp(-n W(j+1, G + delta_x / n)). Requires j < n.
    std::vector<double> minimizing_kernel(std::size_t j, std::span<const std::size_t> counts) const;

private:
    std::size_t rank(std::span<const std::size_t> reduced) const;
    std::vector<std::size_t> reduce(std::span<const std::size_t> counts) const;

    std::size_t n_;
    std::size_t alphabet_size_;
    std::vector<std::size_t> support_;
    std::vector<double> log_p_;
    std::vector<std::vector<std::uint64_t>> binom_;
    /// values_[j][rank] = -n W(j, .) = log E[exp(-n h) | state].
    std::vector<std::vector<double>> values_;
};

double dp_laplace_value(const FiniteDistribution& proposal, std::span<const double> wf, const MeasureFunctional& h,
                        std::size_t n, std::uint64_t budget = kDefaultTypeBudget);

enum class LaplaceMethod { enumeration, dp };

std::string to_string(LaplaceMethod method);
LaplaceMethod laplace_method_from_string(const std::string& name);

struct LaplaceRunResult {
    std::vector<std::size_t> n_values;
    std::vector<double> w_n_values;
    double variational_limit = 0.0;
    std::vector<double> variational_minimizer;
    std::vector<double> gaps;
    LaplaceMethod method = LaplaceMethod::dp;
    /// Gap sequence is nonincreasing (to 1e-12).
    bool nonincreasing = true;
};

LaplaceRunResult convergence_check(const FiniteDistribution& proposal, std::span<const double> wf,
                                   const MeasureFunctional& h, std::span<const std::size_t> n_list,
                                   LaplaceMethod method = LaplaceMethod::dp,
                                   std::uint64_t budget = kDefaultTypeBudget);

/// Deviation event tested once per replication on the weighted empirical measure.
struct EventSpec {
    enum class Kind { quantile_exceedance, finite_overweight, finite_underweight };

    Kind kind = Kind::quantile_exceedance;
    double alpha = 0.0;           ///< quantile level (quantile_exceedance)
    double eps = 0.0;
    std::vector<double> set;      ///< C as alphabet labels (finite kinds)
};

std::string to_string(EventSpec::Kind kind);
EventSpec::Kind event_kind_from_string(const std::string& name);

/// Precomputed membership test for one (model, event) pair.
class EventTester {
public:
    EventTester(const ImportanceModel& model, const EventSpec& event);

    bool operator()(const WeightedEmpiricalMeasure& measure) const;

    /// q = (1 + eps) Phi_alpha(F) for quantile events; F(C) for finite ones.
    double reference_level() const { return level_; }

private:
    EventSpec event_;
    double level_ = 0.0;
};

struct EventEstimate {
    std::size_t n = 0;
    std::size_t reps = 0;
    std::size_t hits = 0;
    double p_hat = 0.0;
    double std_err = 0.0;
    /// -(1/n) log p_hat; absent when p_hat = 0.
    std::optional<double> neg_log_rate;
};

/// Monte Carlo estimate of P(weighted empirical measure in event) from reps
/// independent samples of size n; replication r uses stream (seed, r).
/// Runs in parallel; the result does not depend on the worker count.
EventEstimate estimate_event_probability(const ImportanceModel& model, const EventSpec& event, std::size_t n,
                                         std::size_t reps, std::uint64_t seed);

/// Large-deviation rate of the event for the weighted empirical measure.
RateValue event_reference_rate(const ImportanceModel& model, const EventSpec& event);

/// Least-squares slope of -log(p_hat n^prefactor_power) against n. A power of 1/2 removes the
/// leading sub-exponential factor of lattice and non-lattice tails.
double rate_slope_fit(std::span<const std::size_t> n_list, std::span<const double> p_hats,
                      double prefactor_power = 0.0);

}  // namespace israte
