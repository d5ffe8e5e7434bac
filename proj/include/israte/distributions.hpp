#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "israte/random.hpp"

namespace israte {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi]; either end may be infinite.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    bool contains(double x) const { return lo <= x && x <= hi; }
    bool empty() const { return !(lo <= hi); }
    friend bool operator==(const Interval&, const Interval&) = default;
};

Interval intersect(const Interval& a, const Interval& b);

/// Logarithmic moment generating function with derivative, finite on the open
/// interval (lower, upper).
struct LogMgf {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double lower = -kInf;
    double upper = kInf;
};

enum class Family { gaussian, exponential, bernoulli };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Built-in one-dimensional distribution families.
///
/// gaussian(mean, sd), exponential(rate), bernoulli(p) on {0, 1}.
class ScalarDistribution {
public:
    static ScalarDistribution gaussian(double mean, double sd);
    static ScalarDistribution exponential(double rate);
    static ScalarDistribution bernoulli(double p);
    static ScalarDistribution make(Family family, std::span<const double> params);

    Family family() const { return family_; }
    const std::vector<double>& params() const { return params_; }
    bool is_continuous() const { return family_ != Family::bernoulli; }

    /// Density for continuous families, mass function for bernoulli.
    double density(double x) const;
    double log_density(double x) const;
    double cdf(double x) const;
    /// P(X > x), computed without cancellation in the upper tail.
    double sf(double x) const;
    /// inf{x : cdf(x) >= u}.
    double quantile(double u) const;
    /// x with sf(x) = u; accurate for tiny u.
    double upper_quantile(double u) const;
    /// P(lo <= X <= hi).
    double mass(const Interval& interval) const;
    double mean() const;
    double median() const;

    LogMgf log_mgf() const;

    double sample(Stream& stream) const;

    friend bool operator==(const ScalarDistribution&, const ScalarDistribution&) = default;

private:
    ScalarDistribution(Family family, std::vector<double> params);

    Family family_;
    std::vector<double> params_;
};

/// Probability vector on an ordered alphabet of distinct real labels.
class FiniteDistribution {
public:
    FiniteDistribution(std::vector<double> points, std::vector<double> probabilities);

    std::size_t size() const { return points_.size(); }
    const std::vector<double>& points() const { return points_; }
    const std::vector<double>& probabilities() const { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }

    /// Index of a label; throws DomainError if absent.
    std::size_t index_of(double point) const;
    bool same_alphabet(const FiniteDistribution& other) const { return points_ == other.points_; }

    std::size_t sample_index(Stream& stream) const;

    friend bool operator==(const FiniteDistribution&, const FiniteDistribution&) = default;

private:
    std::vector<double> points_;
    std::vector<double> probs_;
    std::vector<double> cumulative_;
};

}  // namespace israte
