#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "israte/distributions.hpp"
#include "israte/random.hpp"

namespace israte {

/// log(dF/dF~)(x) = c0 + c1 x + c2 x^2 on the common support. Every built-in
/// continuous pair has this form, which makes likelihood-ratio superlevel sets
/// exactly computable.
struct QuadraticLogRatio {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;

    double operator()(double x) const { return c0 + x * (c1 + c2 * x); }
    bool is_constant() const { return c1 == 0.0 && c2 == 0.0; }
};

/// Target F, proposal F~, importance function f and the likelihood ratio dF/dF~.
///
/// Scalar models use f = 1{x in A} for an interval A. Finite models carry an
/// arbitrary nonnegative importance table over the alphabet. Immutable after
/// construction.
class ImportanceModel {
public:
    enum class Kind { scalar, finite };
    enum class Proposal { same_as_target, exponential_change, zero_variance, table };

    /// F~ = F.
    static ImportanceModel standard_mc(ScalarDistribution target, Interval importance_set);
    /// F~ from the same family with different parameters; analytic ratio.
    static ImportanceModel change_of_measure(ScalarDistribution target, ScalarDistribution proposal,
                                             Interval importance_set);
    /// dF~/dF = 1{x in A} / F(A).
    static ImportanceModel zero_variance(ScalarDistribution target, Interval importance_set);
    /// Both distributions on the same alphabet; ratio F/F~ (infinite where F~ = 0 < F).
    static ImportanceModel finite(FiniteDistribution target, FiniteDistribution proposal,
                                  std::vector<double> importance);
    /// Proposal plus an explicit ratio table; the target is ratio * proposal.
    static ImportanceModel user_table(FiniteDistribution proposal, std::vector<double> ratio,
                                      std::vector<double> importance);

    Kind kind() const { return kind_; }
    Proposal proposal_kind() const { return proposal_kind_; }

    /// f(x).
    double importance(double x) const;
    /// dF/dF~(x); +inf where the proposal vanishes and the target does not.
    double likelihood_ratio(double x) const;

    // Scalar models.
    const ScalarDistribution& scalar_target() const;
    /// The proposal's family distribution; for zero-variance models this is the
    /// unconditioned target.
    const ScalarDistribution& scalar_proposal() const;
    const Interval& importance_set() const;
    const QuadraticLogRatio& log_ratio() const;
    /// Support of the target (the ratio form is valid there).
    Interval support() const;
    double target_mass(const Interval& interval) const;
    double proposal_mass(const Interval& interval) const;
    double sample_proposal(Stream& stream) const;
    /// Proposal density, used by quadrature.
    double proposal_density(double x) const;

    // Finite models.
    const FiniteDistribution& finite_target() const;
    const FiniteDistribution& finite_proposal() const;
    const std::vector<double>& importance_table() const;
    const std::vector<double>& ratio_table() const;

    std::string describe() const;

private:
    ImportanceModel() = default;

    Kind kind_ = Kind::scalar;
    Proposal proposal_kind_ = Proposal::same_as_target;

    std::optional<ScalarDistribution> scalar_target_;
    std::optional<ScalarDistribution> scalar_proposal_;
    Interval importance_set_;
    QuadraticLogRatio log_ratio_;
    double conditioning_mass_ = 1.0;

    std::optional<FiniteDistribution> finite_target_;
    std::optional<FiniteDistribution> finite_proposal_;
    std::vector<double> importance_table_;
    std::vector<double> ratio_table_;
};

/// w(x) = (dF/dF~)(x) 1{f(x) > 0}. Throws InfiniteWeightError where f(x) > 0 and
/// the ratio diverges.
double weight(const ImportanceModel& model, double x);

struct Atom {
    double location;
    double weight;
    friend bool operator==(const Atom&, const Atom&) = default;
};

/// (1/n) sum_k w(X_k) f(X_k) delta_{X_k} with X_k ~ F~. Zero-weight atoms are dropped.
struct WeightedEmpiricalMeasure {
    std::vector<Atom> atoms;
    std::size_t n = 0;

    double total_mass() const;
    friend bool operator==(const WeightedEmpiricalMeasure&, const WeightedEmpiricalMeasure&) = default;
};

/// n i.i.d. proposal draws from the stream keyed by (seed, replication).
WeightedEmpiricalMeasure sample_weighted_empirical(const ImportanceModel& model, std::size_t n,
                                                   std::uint64_t seed, std::uint64_t replication = 0);

/// sum_k weight_k g(location_k).
double integrate(const WeightedEmpiricalMeasure& measure, const std::function<double(double)>& g);

}  // namespace israte
