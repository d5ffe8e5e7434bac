#include "israte/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "israte/error.hpp"

namespace israte {

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) throw DomainError(message);
}

void check_importance_table(const std::vector<double>& importance, std::size_t size) {
    require(importance.size() == size, "importance table length differs from the alphabet size");
    for (double v : importance)
        require(std::isfinite(v) && v >= 0.0, "importance table entries must be finite and >= 0");
}

void check_scalar_family(const ScalarDistribution& d) {
    require(d.is_continuous(),
            "scalar importance models need a continuous family; model bernoulli targets as finite alphabets");
}

}  // namespace

ImportanceModel ImportanceModel::standard_mc(ScalarDistribution target, Interval importance_set) {
    check_scalar_family(target);
    require(!importance_set.empty(), "importance set is empty");
    ImportanceModel m;
    m.kind_ = Kind::scalar;
    m.proposal_kind_ = Proposal::same_as_target;
    m.scalar_proposal_ = target;
    m.scalar_target_ = std::move(target);
    m.importance_set_ = importance_set;
    return m;
}

ImportanceModel ImportanceModel::change_of_measure(ScalarDistribution target, ScalarDistribution proposal,
                                                   Interval importance_set) {
    check_scalar_family(target);
    require(target.family() == proposal.family(), "target and proposal must belong to the same family");
    require(!importance_set.empty(), "importance set is empty");
    ImportanceModel m;
    m.kind_ = Kind::scalar;
    m.proposal_kind_ = Proposal::exponential_change;
    const auto& t = target.params();
    const auto& p = proposal.params();
    switch (target.family()) {
        case Family::gaussian: {
            const double v1 = t[1] * t[1];
            const double v2 = p[1] * p[1];
            m.log_ratio_.c2 = -0.5 / v1 + 0.5 / v2;
            m.log_ratio_.c1 = t[0] / v1 - p[0] / v2;
            m.log_ratio_.c0 = std::log(p[1] / t[1]) - 0.5 * t[0] * t[0] / v1 + 0.5 * p[0] * p[0] / v2;
            break;
        }
        case Family::exponential:
            m.log_ratio_.c0 = std::log(t[0] / p[0]);
            m.log_ratio_.c1 = -(t[0] - p[0]);
            break;
        case Family::bernoulli: break;
    }
    m.scalar_target_ = std::move(target);
    m.scalar_proposal_ = std::move(proposal);
    m.importance_set_ = importance_set;
    return m;
}

ImportanceModel ImportanceModel::zero_variance(ScalarDistribution target, Interval importance_set) {
    check_scalar_family(target);
    const double p = target.mass(importance_set);
    require(p > 0.0, "zero-variance proposal needs F(A) > 0");
    ImportanceModel m;
    m.kind_ = Kind::scalar;
    m.proposal_kind_ = Proposal::zero_variance;
    m.conditioning_mass_ = p;
    m.log_ratio_.c0 = std::log(p);
    m.scalar_proposal_ = target;
    m.scalar_target_ = std::move(target);
    m.importance_set_ = importance_set;
    return m;
}

ImportanceModel ImportanceModel::finite(FiniteDistribution target, FiniteDistribution proposal,
                                        std::vector<double> importance) {
    require(target.same_alphabet(proposal), "target and proposal alphabets differ");
    check_importance_table(importance, target.size());
    ImportanceModel m;
    m.kind_ = Kind::finite;
    m.proposal_kind_ = target == proposal ? Proposal::same_as_target : Proposal::table;
    m.ratio_table_.resize(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (proposal[i] > 0.0)
            m.ratio_table_[i] = target[i] / proposal[i];
        else
            m.ratio_table_[i] = target[i] > 0.0 ? kInf : 0.0;
    }
    m.finite_target_ = std::move(target);
    m.finite_proposal_ = std::move(proposal);
    m.importance_table_ = std::move(importance);
    return m;
}

ImportanceModel ImportanceModel::user_table(FiniteDistribution proposal, std::vector<double> ratio,
                                            std::vector<double> importance) {
    require(ratio.size() == proposal.size(), "ratio table length differs from the alphabet size");
    check_importance_table(importance, proposal.size());
    std::vector<double> target(proposal.size(), 0.0);
    for (std::size_t i = 0; i < proposal.size(); ++i) {
        require(ratio[i] >= 0.0, "ratio table entries must be >= 0");
        if (proposal[i] > 0.0) {
            require(std::isfinite(ratio[i]), "ratio table must be finite where the proposal is positive");
            target[i] = ratio[i] * proposal[i];
        }
    }
    const double total = std::accumulate(target.begin(), target.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-10) {
        std::ostringstream os;
        os.precision(17);
        os << "ratio table implies target mass " << total << "; sum of ratio * proposal must be 1";
        throw DomainError(os.str());
    }
    for (double& v : target) v /= total;
    ImportanceModel m;
    m.kind_ = Kind::finite;
    m.proposal_kind_ = Proposal::table;
    m.finite_target_ = FiniteDistribution(proposal.points(), std::move(target));
    m.finite_proposal_ = std::move(proposal);
    m.ratio_table_ = std::move(ratio);
    m.importance_table_ = std::move(importance);
    return m;
}

double ImportanceModel::importance(double x) const {
    if (kind_ == Kind::scalar) return importance_set_.contains(x) ? 1.0 : 0.0;
    return importance_table_[finite_target_->index_of(x)];
}

double ImportanceModel::likelihood_ratio(double x) const {
    if (kind_ == Kind::finite) return ratio_table_[finite_target_->index_of(x)];
    if (!support().contains(x)) return 0.0;
    switch (proposal_kind_) {
        case Proposal::same_as_target: return 1.0;
        case Proposal::zero_variance: return importance_set_.contains(x) ? conditioning_mass_ : kInf;
        default: return std::exp(log_ratio_(x));
    }
}

const ScalarDistribution& ImportanceModel::scalar_target() const {
    if (kind_ != Kind::scalar) throw DomainError("not a scalar model");
    return *scalar_target_;
}

const ScalarDistribution& ImportanceModel::scalar_proposal() const {
    if (kind_ != Kind::scalar) throw DomainError("not a scalar model");
    return *scalar_proposal_;
}

const Interval& ImportanceModel::importance_set() const {
    if (kind_ != Kind::scalar) throw DomainError("not a scalar model");
    return importance_set_;
}

const QuadraticLogRatio& ImportanceModel::log_ratio() const {
    if (kind_ != Kind::scalar) throw DomainError("not a scalar model");
    return log_ratio_;
}

Interval ImportanceModel::support() const {
    if (scalar_target().family() == Family::exponential) return {0.0, kInf};
    return {-kInf, kInf};
}

double ImportanceModel::target_mass(const Interval& interval) const {
    return scalar_target().mass(interval);
}

double ImportanceModel::proposal_mass(const Interval& interval) const {
    if (proposal_kind_ == Proposal::zero_variance)
        return std::min(1.0, scalar_target_->mass(intersect(interval, importance_set_)) / conditioning_mass_);
    return scalar_proposal().mass(interval);
}

double ImportanceModel::proposal_density(double x) const {
    if (proposal_kind_ == Proposal::zero_variance)
        return importance_set_.contains(x) ? scalar_target_->density(x) / conditioning_mass_ : 0.0;
    return scalar_proposal().density(x);
}

double ImportanceModel::sample_proposal(Stream& stream) const {
    if (proposal_kind_ != Proposal::zero_variance) return scalar_proposal().sample(stream);
    // Inverse transform restricted to A, through the survival function in the upper tail.
    const ScalarDistribution& f = *scalar_target_;
    const double u = stream.uniform();
    double x;
    if (importance_set_.lo >= f.median()) {
        const double s_lo = f.sf(importance_set_.lo);
        const double s_hi = f.sf(importance_set_.hi);
        x = f.upper_quantile(s_hi + u * (s_lo - s_hi));
    } else {
        const double c_lo = f.cdf(importance_set_.lo);
        const double c_hi = f.cdf(importance_set_.hi);
        x = f.quantile(c_lo + u * (c_hi - c_lo));
    }
    return std::clamp(x, importance_set_.lo, importance_set_.hi);
}

const FiniteDistribution& ImportanceModel::finite_target() const {
    if (kind_ != Kind::finite) throw DomainError("not a finite-alphabet model");
    return *finite_target_;
}

const FiniteDistribution& ImportanceModel::finite_proposal() const {
    if (kind_ != Kind::finite) throw DomainError("not a finite-alphabet model");
    return *finite_proposal_;
}

const std::vector<double>& ImportanceModel::importance_table() const {
    if (kind_ != Kind::finite) throw DomainError("not a finite-alphabet model");
    return importance_table_;
}

const std::vector<double>& ImportanceModel::ratio_table() const {
    if (kind_ != Kind::finite) throw DomainError("not a finite-alphabet model");
    return ratio_table_;
}

std::string ImportanceModel::describe() const {
    std::ostringstream os;
    os.precision(17);
    if (kind_ == Kind::finite) {
        os << "finite alphabet of " << finite_target_->size() << " points";
        return os.str();
    }
    os << to_string(scalar_target_->family()) << " target, ";
    switch (proposal_kind_) {
        case Proposal::same_as_target: os << "standard Monte Carlo"; break;
        case Proposal::zero_variance: os << "zero-variance proposal"; break;
        default: os << "change of measure"; break;
    }
    os << ", A = [" << importance_set_.lo << ", " << importance_set_.hi << "]";
    return os.str();
}

double weight(const ImportanceModel& model, double x) {
    if (model.importance(x) <= 0.0) return 0.0;
    const double r = model.likelihood_ratio(x);
    if (std::isinf(r)) {
        std::ostringstream os;
        os.precision(17);
        os << "infinite weight at x = " << x
           << ": target is not absolutely continuous w.r.t. the proposal on {f > 0}";
        throw InfiniteWeightError(os.str());
    }
    return r;
}

double WeightedEmpiricalMeasure::total_mass() const {
    double total = 0.0;
    for (const Atom& a : atoms) total += a.weight;
    return total;
}

WeightedEmpiricalMeasure sample_weighted_empirical(const ImportanceModel& model, std::size_t n,
                                                   std::uint64_t seed, std::uint64_t replication) {
    WeightedEmpiricalMeasure measure;
    measure.n = n;
    if (n == 0) return measure;
    Stream stream(seed, replication);
    const double inv_n = 1.0 / static_cast<double>(n);
    measure.atoms.reserve(n);
    if (model.kind() == ImportanceModel::Kind::finite) {
        const auto& points = model.finite_proposal().points();
        const auto& f = model.importance_table();
        const auto& r = model.ratio_table();
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = model.finite_proposal().sample_index(stream);
            if (f[i] <= 0.0) continue;
            if (std::isinf(r[i])) weight(model, points[i]);  // throws
            measure.atoms.push_back({points[i], r[i] * f[i] * inv_n});
        }
        return measure;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double x = model.sample_proposal(stream);
        const double w = weight(model, x);
        if (w > 0.0) measure.atoms.push_back({x, w * inv_n});
    }
    return measure;
}

double integrate(const WeightedEmpiricalMeasure& measure, const std::function<double(double)>& g) {
    double total = 0.0;
    for (const Atom& a : measure.atoms) total += a.weight * g(a.location);
    return total;
}

}  // namespace israte
