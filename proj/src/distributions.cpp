#include "israte/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "israte/error.hpp"

namespace israte {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

boost::math::normal normal_of(const std::vector<double>& params) {
    return boost::math::normal(params[0], params[1]);
}

void require(bool condition, const std::string& message) {
    if (!condition) throw DomainError(message);
}

}  // namespace

Interval intersect(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

std::string to_string(Family family) {
    switch (family) {
        case Family::gaussian: return "gaussian";
        case Family::exponential: return "exponential";
        case Family::bernoulli: return "bernoulli";
    }
    return "unknown";
}

Family family_from_string(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "exponential") return Family::exponential;
    if (name == "bernoulli") return Family::bernoulli;
    throw DomainError("unknown distribution family '" + name + "'");
}

ScalarDistribution::ScalarDistribution(Family family, std::vector<double> params)
    : family_(family), params_(std::move(params)) {}

ScalarDistribution ScalarDistribution::gaussian(double mean, double sd) {
    require(std::isfinite(mean), "gaussian mean must be finite");
    require(std::isfinite(sd) && sd > 0.0, "gaussian sd must be positive and finite");
    return ScalarDistribution(Family::gaussian, {mean, sd});
}

ScalarDistribution ScalarDistribution::exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, "exponential rate must be positive and finite");
    return ScalarDistribution(Family::exponential, {rate});
}

ScalarDistribution ScalarDistribution::bernoulli(double p) {
    require(p >= 0.0 && p <= 1.0, "bernoulli p must lie in [0, 1]");
    return ScalarDistribution(Family::bernoulli, {p});
}

ScalarDistribution ScalarDistribution::make(Family family, std::span<const double> params) {
    switch (family) {
        case Family::gaussian:
            require(params.size() == 2, "gaussian takes parameters [mean, sd]");
            return gaussian(params[0], params[1]);
        case Family::exponential:
            require(params.size() == 1, "exponential takes parameters [rate]");
            return exponential(params[0]);
        case Family::bernoulli:
            require(params.size() == 1, "bernoulli takes parameters [p]");
            return bernoulli(params[0]);
    }
    throw DomainError("unknown distribution family");
}

double ScalarDistribution::density(double x) const {
    switch (family_) {
        case Family::gaussian: return boost::math::pdf(normal_of(params_), x);
        case Family::exponential: return x < 0.0 ? 0.0 : params_[0] * std::exp(-params_[0] * x);
        case Family::bernoulli:
            if (x == 1.0) return params_[0];
            if (x == 0.0) return 1.0 - params_[0];
            return 0.0;
    }
    return 0.0;
}

double ScalarDistribution::log_density(double x) const {
    switch (family_) {
        case Family::gaussian: {
            const double z = (x - params_[0]) / params_[1];
            return -0.5 * z * z - std::log(params_[1]) - 0.5 * std::log(2.0 * M_PI);
        }
        case Family::exponential:
            return x < 0.0 ? -kInf : std::log(params_[0]) - params_[0] * x;
        case Family::bernoulli: return std::log(density(x));
    }
    return -kInf;
}

double ScalarDistribution::cdf(double x) const {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    switch (family_) {
        case Family::gaussian: return boost::math::cdf(normal_of(params_), x);
        case Family::exponential: return x < 0.0 ? 0.0 : -std::expm1(-params_[0] * x);
        case Family::bernoulli:
            if (x < 0.0) return 0.0;
            if (x < 1.0) return 1.0 - params_[0];
            return 1.0;
    }
    return 0.0;
}

double ScalarDistribution::sf(double x) const {
    if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
    switch (family_) {
        case Family::gaussian: return boost::math::cdf(boost::math::complement(normal_of(params_), x));
        case Family::exponential: return x < 0.0 ? 1.0 : std::exp(-params_[0] * x);
        case Family::bernoulli: return 1.0 - cdf(x);
    }
    return 0.0;
}

double ScalarDistribution::quantile(double u) const {
    require(u >= 0.0 && u <= 1.0, "quantile level must lie in [0, 1]");
    switch (family_) {
        case Family::gaussian:
            if (u == 0.0) return -kInf;
            if (u == 1.0) return kInf;
            return boost::math::quantile(normal_of(params_), u);
        case Family::exponential:
            if (u == 1.0) return kInf;
            return -std::log1p(-u) / params_[0];
        case Family::bernoulli:
            return u <= 1.0 - params_[0] ? 0.0 : 1.0;
    }
    return 0.0;
}

double ScalarDistribution::upper_quantile(double u) const {
    require(u >= 0.0 && u <= 1.0, "upper quantile level must lie in [0, 1]");
    switch (family_) {
        case Family::gaussian:
            if (u == 0.0) return kInf;
            if (u == 1.0) return -kInf;
            return boost::math::quantile(boost::math::complement(normal_of(params_), u));
        case Family::exponential:
            if (u == 0.0) return kInf;
            return -std::log(u) / params_[0];
        case Family::bernoulli:
            return quantile(1.0 - u);
    }
    return 0.0;
}

double ScalarDistribution::mass(const Interval& interval) const {
    if (interval.empty()) return 0.0;
    if (family_ == Family::bernoulli) {
        double total = 0.0;
        if (interval.contains(0.0)) total += 1.0 - params_[0];
        if (interval.contains(1.0)) total += params_[0];
        return total;
    }
    // Upper-tail intervals go through the survival function to keep relative accuracy.
    if (interval.lo >= median()) return std::max(0.0, sf(interval.lo) - sf(interval.hi));
    return std::max(0.0, cdf(interval.hi) - cdf(interval.lo));
}

double ScalarDistribution::mean() const {
    switch (family_) {
        case Family::gaussian: return params_[0];
        case Family::exponential: return 1.0 / params_[0];
        case Family::bernoulli: return params_[0];
    }
    return 0.0;
}

double ScalarDistribution::median() const {
    switch (family_) {
        case Family::gaussian: return params_[0];
        case Family::exponential: return std::log(2.0) / params_[0];
        case Family::bernoulli: return quantile(0.5);
    }
    return 0.0;
}

LogMgf ScalarDistribution::log_mgf() const {
    LogMgf k;
    switch (family_) {
        case Family::gaussian: {
            const double mu = params_[0];
            const double var = params_[1] * params_[1];
            k.value = [mu, var](double t) { return mu * t + 0.5 * var * t * t; };
            k.derivative = [mu, var](double t) { return mu + var * t; };
            break;
        }
        case Family::exponential: {
            const double rate = params_[0];
            k.value = [rate](double t) { return -std::log1p(-t / rate); };
            k.derivative = [rate](double t) { return 1.0 / (rate - t); };
            k.upper = rate;
            break;
        }
        case Family::bernoulli: {
            const double p = params_[0];
            // log(1 - p + p e^t), evaluated stably for both signs of t.
            k.value = [p](double t) {
                if (p == 0.0) return 0.0;
                if (p == 1.0) return t;
                if (t > 0.0) return t + std::log(p + (1.0 - p) * std::exp(-t));
                return std::log1p(p * std::expm1(t));
            };
            k.derivative = [p](double t) {
                if (p == 0.0) return 0.0;
                if (p == 1.0) return 1.0;
                if (t > 0.0) return p / (p + (1.0 - p) * std::exp(-t));
                const double e = std::exp(t);
                return p * e / (1.0 - p + p * e);
            };
            break;
        }
    }
    return k;
}

double ScalarDistribution::sample(Stream& stream) const {
    switch (family_) {
        case Family::gaussian: {
            std::normal_distribution<double> dist(params_[0], params_[1]);
            return dist(stream);
        }
        case Family::exponential: {
            std::exponential_distribution<double> dist(params_[0]);
            return dist(stream);
        }
        case Family::bernoulli: return stream.uniform() < params_[0] ? 1.0 : 0.0;
    }
    return 0.0;
}

FiniteDistribution::FiniteDistribution(std::vector<double> points, std::vector<double> probabilities)
    : points_(std::move(points)), probs_(std::move(probabilities)) {
    require(!points_.empty(), "finite distribution needs at least one point");
    require(points_.size() == probs_.size(), "finite distribution: points and probabilities differ in length");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        require(std::isfinite(points_[i]), "finite distribution: labels must be finite");
        require(probs_[i] >= 0.0 && std::isfinite(probs_[i]), "finite distribution: probabilities must be >= 0");
        for (std::size_t j = 0; j < i; ++j)
            require(points_[i] != points_[j], "finite distribution: labels must be distinct");
    }
    const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "finite distribution: probabilities sum to " << total << ", expected 1";
        throw DomainError(os.str());
    }
    cumulative_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

std::size_t FiniteDistribution::index_of(double point) const {
    const auto it = std::find(points_.begin(), points_.end(), point);
    if (it == points_.end()) {
        std::ostringstream os;
        os << "point " << point << " is not in the alphabet";
        throw DomainError(os.str());
    }
    return static_cast<std::size_t>(it - points_.begin());
}

std::size_t FiniteDistribution::sample_index(Stream& stream) const {
    const double u = stream.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto index = static_cast<std::size_t>(it - cumulative_.begin());
    if (index >= probs_.size()) index = probs_.size() - 1;
    // Never land on a null point through rounding at a cumulative boundary.
    while (probs_[index] == 0.0 && index > 0) --index;
    return index;
}

}  // namespace israte
