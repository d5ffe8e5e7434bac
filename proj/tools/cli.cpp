#include "cli.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "israte/kernels.hpp"
#include "israte/quantile.hpp"
#include "israte/rates.hpp"
#include "israte/subset.hpp"

namespace israte::cli {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- reading -------------------------------------------------------------

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError(path + "." + key + ": unknown field");
}

double read_number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw ConfigError(path + ": expected a number");
}

std::vector<double> read_numbers(const json& v, const std::string& path) {
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(path + ": expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::uint64_t read_count(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    throw ConfigError(path + ": expected a nonnegative integer");
}

std::vector<std::size_t> read_counts(const json& v, const std::string& path) {
    if (!v.is_array()) return {static_cast<std::size_t>(read_count(v, path))};
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(static_cast<std::size_t>(read_count(v[i], path + "[" + std::to_string(i) + "]")));
    return out;
}

std::string read_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
}

Interval read_interval(const json& v, const std::string& path) {
    const auto xs = read_numbers(v, path);
    if (xs.size() != 2) throw ConfigError(path + ": expected [lo, hi]");
    return {xs[0], xs[1]};
}

template <class F>
void if_present(const json& j, const char* key, F&& f) {
    if (j.contains(key)) f(j.at(key));
}

// ---- writing -------------------------------------------------------------

json numbers_json(const std::vector<double>& xs) {
    json a = json::array();
    for (double x : xs) a.push_back(number_json(x));
    return a;
}

json interval_json(const Interval& i) { return json::array({number_json(i.lo), number_json(i.hi)}); }

json rate_json(const RateValue& r) { return {{"value", number_json(r.value)}, {"feasible", r.feasible}}; }

json threshold_json(const ThresholdSet& s) {
    json intervals = json::array();
    for (const auto& i : s.intervals) intervals.push_back(interval_json(i));
    return {{"t", number_json(s.t)},
            {"intervals", intervals},
            {"points", numbers_json(s.points)},
            {"mass_target", number_json(s.mass_target)},
            {"mass_proposal", number_json(s.mass_proposal)}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
    if (!v) return nullptr;
    if constexpr (std::is_same_v<T, RateValue>)
        return rate_json(*v);
    else if constexpr (std::is_same_v<T, double>)
        return number_json(*v);
    else
        return *v;
}

// ---- shared pieces -------------------------------------------------------

bool is_scalar_family(const std::string& f) { return f == "gaussian" || f == "exponential" || f == "bernoulli"; }

TargetSet target_set(const AnalysisConfig& c, const ImportanceModel& model) {
    if (model.kind() == ImportanceModel::Kind::scalar)
        return TargetSet::of(c.analysis.target_interval.value_or(model.importance_set()));
    if (!c.analysis.target_points.empty()) return TargetSet::of_points(c.analysis.target_points);
    std::vector<double> pts;
    const auto& f = model.finite_target();
    for (std::size_t i = 0; i < f.size(); ++i)
        if (model.importance_table()[i] > 0.0) pts.push_back(f.points()[i]);
    return TargetSet::of_points(pts);
}

/// eps with F((q, inf)) = p for q = (1 +- eps) Phi_alpha(F).
double eps_for_tail(const ImportanceModel& model, double alpha, double p, Side side, const std::string& path) {
    if (model.kind() != ImportanceModel::Kind::scalar) throw ConfigError(path + ": p_target needs a scalar target");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError(path + ": p_target must lie in (0, 1)");
    const auto& f = model.scalar_target();
    const double phi = quantile(f, alpha);
    if (!(phi > 0.0)) throw ConfigError(path + ": p_target needs Phi_alpha(F) > 0, got " + fmt17(phi));
    const double q = f.upper_quantile(p);
    const double eps = side == Side::plus ? q / phi - 1.0 : 1.0 - q / phi;
    if (!(eps > 0.0))
        throw ConfigError(path + ": p_target = " + fmt17(p) + " is on the typical side of alpha = " + fmt17(alpha));
    return eps;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

json number_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

// ---- config --------------------------------------------------------------

AnalysisConfig parse_config(const json& j) {
    AnalysisConfig c;
    check_keys(j, "config", {"model", "analysis", "seed", "output"});
    if (!j.contains("model")) throw ConfigError("model: missing block");
    if (!j.contains("analysis")) throw ConfigError("analysis: missing block");

    const json& m = j.at("model");
    check_keys(m, "model", {"family", "params", "sampler", "sampler_params", "importance_set", "alphabet", "target_probs",
                            "proposal_probs", "ratio", "importance"});
    if (!m.contains("family")) throw ConfigError("model.family: missing");
    c.model.family = read_string(m.at("family"), "model.family");
    if_present(m, "params", [&](const json& v) { c.model.params = read_numbers(v, "model.params"); });
    if_present(m, "sampler", [&](const json& v) { c.model.sampler = read_string(v, "model.sampler"); });
    if_present(m, "sampler_params", [&](const json& v) { c.model.sampler_params = read_numbers(v, "model.sampler_params"); });
    if_present(m, "importance_set", [&](const json& v) { c.model.importance_set = read_interval(v, "model.importance_set"); });
    if_present(m, "alphabet", [&](const json& v) { c.model.alphabet = read_numbers(v, "model.alphabet"); });
    if_present(m, "target_probs", [&](const json& v) { c.model.target_probs = read_numbers(v, "model.target_probs"); });
    if_present(m, "proposal_probs", [&](const json& v) { c.model.proposal_probs = read_numbers(v, "model.proposal_probs"); });
    if_present(m, "ratio", [&](const json& v) { c.model.ratio = read_numbers(v, "model.ratio"); });
    if_present(m, "importance", [&](const json& v) { c.model.importance = read_numbers(v, "model.importance"); });

    const json& a = j.at("analysis");
    check_keys(a, "analysis", {"type", "eps", "delta", "delta_prime", "target_set", "cost_factor", "error_prob", "alpha",
                               "p_target", "side", "h", "method", "budget", "n_list", "event", "reps", "a", "m_list"});
    if (!a.contains("type")) throw ConfigError("analysis.type: missing");
    auto& an = c.analysis;
    an.type = read_string(a.at("type"), "analysis.type");
    if_present(a, "eps", [&](const json& v) { an.eps = read_number(v, "analysis.eps"); });
    if_present(a, "delta", [&](const json& v) { an.delta = read_numbers(v, "analysis.delta"); });
    if_present(a, "delta_prime", [&](const json& v) { an.delta_prime = read_numbers(v, "analysis.delta_prime"); });
    if_present(a, "target_set", [&](const json& v) {
        if (v.is_object()) {
            check_keys(v, "analysis.target_set", {"interval", "points"});
            if_present(v, "interval", [&](const json& i) { an.target_interval = read_interval(i, "analysis.target_set.interval"); });
            if_present(v, "points", [&](const json& p) { an.target_points = read_numbers(p, "analysis.target_set.points"); });
        } else {
            throw ConfigError("analysis.target_set: expected {\"interval\": [lo, hi]} or {\"points\": [...]}");
        }
    });
    if_present(a, "cost_factor", [&](const json& v) { an.cost_factor = read_number(v, "analysis.cost_factor"); });
    if_present(a, "error_prob", [&](const json& v) { an.error_prob = read_number(v, "analysis.error_prob"); });
    if_present(a, "alpha", [&](const json& v) { an.alpha = read_number(v, "analysis.alpha"); });
    if_present(a, "p_target", [&](const json& v) { an.p_target = read_number(v, "analysis.p_target"); });
    if_present(a, "side", [&](const json& v) { an.side = read_string(v, "analysis.side"); });
    if_present(a, "h", [&](const json& v) {
        check_keys(v, "analysis.h", {"kind", "c", "g", "center", "scale", "cap"});
        if (!v.contains("kind")) throw ConfigError("analysis.h.kind: missing");
        an.h.kind = read_string(v.at("kind"), "analysis.h.kind");
        if_present(v, "c", [&](const json& x) { an.h.c = read_number(x, "analysis.h.c"); });
        if_present(v, "g", [&](const json& x) { an.h.g = read_numbers(x, "analysis.h.g"); });
        if_present(v, "center", [&](const json& x) { an.h.center = read_numbers(x, "analysis.h.center"); });
        if_present(v, "scale", [&](const json& x) { an.h.scale = read_number(x, "analysis.h.scale"); });
        if_present(v, "cap", [&](const json& x) { an.h.cap = read_number(x, "analysis.h.cap"); });
    });
    if_present(a, "method", [&](const json& v) { an.method = read_string(v, "analysis.method"); });
    if_present(a, "budget", [&](const json& v) { an.budget = read_count(v, "analysis.budget"); });
    if_present(a, "n_list", [&](const json& v) { an.n_list = read_counts(v, "analysis.n_list"); });
    if_present(a, "event", [&](const json& v) {
        check_keys(v, "analysis.event", {"kind", "alpha", "eps", "p_target", "set"});
        if (!v.contains("kind")) throw ConfigError("analysis.event.kind: missing");
        an.event.kind = read_string(v.at("kind"), "analysis.event.kind");
        if_present(v, "alpha", [&](const json& x) { an.event.alpha = read_number(x, "analysis.event.alpha"); });
        if_present(v, "eps", [&](const json& x) { an.event.eps = read_number(x, "analysis.event.eps"); });
        if_present(v, "p_target", [&](const json& x) { an.event.p_target = read_number(x, "analysis.event.p_target"); });
        if_present(v, "set", [&](const json& x) { an.event.set = read_numbers(x, "analysis.event.set"); });
    });
    if_present(a, "reps", [&](const json& v) { an.reps = static_cast<std::size_t>(read_count(v, "analysis.reps")); });
    if_present(a, "a", [&](const json& v) { an.a = read_number(v, "analysis.a"); });
    if_present(a, "m_list", [&](const json& v) { an.m_list = read_counts(v, "analysis.m_list"); });

    if_present(j, "seed", [&](const json& v) { c.seed = read_count(v, "seed"); });
    if_present(j, "output", [&](const json& o) {
        check_keys(o, "output", {"report", "series"});
        if_present(o, "report", [&](const json& v) { c.output.report = read_string(v, "output.report"); });
        if_present(o, "series", [&](const json& v) { c.output.series = read_string(v, "output.series"); });
    });
    return c;
}

AnalysisConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const AnalysisConfig& c) {
    const ModelConfig defaults_m;
    const AnalysisBlock defaults_a;
    json m;
    m["family"] = c.model.family;
    if (!c.model.params.empty()) m["params"] = numbers_json(c.model.params);
    if (c.model.sampler != defaults_m.sampler) m["sampler"] = c.model.sampler;
    if (!c.model.sampler_params.empty()) m["sampler_params"] = numbers_json(c.model.sampler_params);
    if (!(c.model.importance_set == defaults_m.importance_set)) m["importance_set"] = interval_json(c.model.importance_set);
    if (!c.model.alphabet.empty()) m["alphabet"] = numbers_json(c.model.alphabet);
    if (!c.model.target_probs.empty()) m["target_probs"] = numbers_json(c.model.target_probs);
    if (!c.model.proposal_probs.empty()) m["proposal_probs"] = numbers_json(c.model.proposal_probs);
    if (!c.model.ratio.empty()) m["ratio"] = numbers_json(c.model.ratio);
    if (!c.model.importance.empty()) m["importance"] = numbers_json(c.model.importance);

    const auto& an = c.analysis;
    json a;
    a["type"] = an.type;
    if (an.eps) a["eps"] = number_json(*an.eps);
    if (!an.delta.empty()) a["delta"] = numbers_json(an.delta);
    if (!an.delta_prime.empty()) a["delta_prime"] = numbers_json(an.delta_prime);
    if (an.target_interval || !an.target_points.empty()) {
        json t;
        if (an.target_interval) t["interval"] = interval_json(*an.target_interval);
        if (!an.target_points.empty()) t["points"] = numbers_json(an.target_points);
        a["target_set"] = t;
    }
    if (an.cost_factor) a["cost_factor"] = number_json(*an.cost_factor);
    if (an.error_prob != defaults_a.error_prob) a["error_prob"] = number_json(an.error_prob);
    if (an.alpha != defaults_a.alpha) a["alpha"] = number_json(an.alpha);
    if (an.p_target) a["p_target"] = number_json(*an.p_target);
    if (an.side != defaults_a.side) a["side"] = an.side;
    if (!(an.h == defaults_a.h)) {
        json h;
        h["kind"] = an.h.kind;
        if (an.h.c != 0.0) h["c"] = number_json(an.h.c);
        if (!an.h.g.empty()) h["g"] = numbers_json(an.h.g);
        if (!an.h.center.empty()) h["center"] = numbers_json(an.h.center);
        if (an.h.scale != 1.0) h["scale"] = number_json(an.h.scale);
        if (an.h.cap != kInf) h["cap"] = number_json(an.h.cap);
        a["h"] = h;
    }
    if (an.method != defaults_a.method) a["method"] = an.method;
    if (an.budget != defaults_a.budget) a["budget"] = an.budget;
    if (!an.n_list.empty()) a["n_list"] = an.n_list;
    if (!(an.event == defaults_a.event)) {
        json e;
        e["kind"] = an.event.kind;
        if (an.event.alpha != 0.0) e["alpha"] = number_json(an.event.alpha);
        if (an.event.eps) e["eps"] = number_json(*an.event.eps);
        if (an.event.p_target) e["p_target"] = number_json(*an.event.p_target);
        if (!an.event.set.empty()) e["set"] = numbers_json(an.event.set);
        a["event"] = e;
    }
    if (an.reps != 0) a["reps"] = an.reps;
    if (an.a != 0.0) a["a"] = number_json(an.a);
    if (!an.m_list.empty()) a["m_list"] = an.m_list;

    json out;
    out["model"] = m;
    out["analysis"] = a;
    if (c.seed) out["seed"] = *c.seed;
    if (c.output.report || c.output.series) {
        json o = json::object();
        if (c.output.report) o["report"] = *c.output.report;
        if (c.output.series) o["series"] = *c.output.series;
        out["output"] = o;
    }
    return out;
}

ImportanceModel build_model(const ModelConfig& m) {
    try {
        if (is_scalar_family(m.family)) {
            const auto target = ScalarDistribution::make(family_from_string(m.family), m.params);
            if (m.importance_set.empty()) throw ConfigError("model.importance_set: lo > hi");
            if (m.sampler == "standard_mc") return ImportanceModel::standard_mc(target, m.importance_set);
            if (m.sampler == "zero_variance") return ImportanceModel::zero_variance(target, m.importance_set);
            if (m.sampler == "change_of_measure") {
                const auto proposal = ScalarDistribution::make(family_from_string(m.family), m.sampler_params);
                return ImportanceModel::change_of_measure(target, proposal, m.importance_set);
            }
            throw ConfigError("model.sampler: expected standard_mc, change_of_measure or zero_variance, got '" +
                              m.sampler + "'");
        }
        const std::size_t k = m.alphabet.size();
        if (k == 0) throw ConfigError("model.alphabet: missing or empty");
        std::vector<double> importance = m.importance.empty() ? std::vector<double>(k, 1.0) : m.importance;
        if (importance.size() != k) throw ConfigError("model.importance: length differs from model.alphabet");
        if (m.family == "finite") {
            if (m.target_probs.size() != k) throw ConfigError("model.target_probs: length differs from model.alphabet");
            const FiniteDistribution target(m.alphabet, m.target_probs);
            if (m.proposal_probs.empty()) return ImportanceModel::finite(target, target, importance);
            if (m.proposal_probs.size() != k) throw ConfigError("model.proposal_probs: length differs from model.alphabet");
            return ImportanceModel::finite(target, FiniteDistribution(m.alphabet, m.proposal_probs), importance);
        }
        if (m.family == "user-table") {
            if (m.proposal_probs.size() != k) throw ConfigError("model.proposal_probs: length differs from model.alphabet");
            if (m.ratio.size() != k) throw ConfigError("model.ratio: length differs from model.alphabet");
            return ImportanceModel::user_table(FiniteDistribution(m.alphabet, m.proposal_probs), m.ratio, importance);
        }
        throw ConfigError("model.family: expected gaussian, exponential, bernoulli, finite or user-table, got '" +
                          m.family + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

MeasureFunctional build_functional(const FunctionalConfig& h, std::size_t k) {
    auto need = [&](const std::vector<double>& v, const char* field) {
        if (v.size() != k) throw ConfigError(std::string("analysis.h.") + field + ": expected " + std::to_string(k) + " entries");
    };
    auto dot = [](std::span<const double> nu, const std::vector<double>& g) {
        double s = 0.0;
        for (std::size_t i = 0; i < nu.size(); ++i) s += nu[i] * g[i];
        return s;
    };
    if (h.kind == "constant") {
        const double c = h.c;
        return [c](std::span<const double>) { return c; };
    }
    if (h.kind == "linear") {
        need(h.g, "g");
        return [g = h.g, dot](std::span<const double> nu) { return dot(nu, g); };
    }
    if (h.kind == "capped_square") {
        need(h.g, "g");
        if (!(h.cap > 0.0) || !std::isfinite(h.cap)) throw ConfigError("analysis.h.cap: capped_square needs a finite cap > 0");
        return [g = h.g, cap = h.cap, dot](std::span<const double> nu) {
            const double s = dot(nu, g);
            return std::min(s * s, cap);
        };
    }
    if (h.kind == "quadratic") {
        need(h.center, "center");
        return [center = h.center, scale = h.scale, cap = h.cap](std::span<const double> nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += (nu[i] - center[i]) * (nu[i] - center[i]);
            return std::min(scale * s, cap);
        };
    }
    throw ConfigError("analysis.h.kind: expected constant, linear, capped_square or quadratic, got '" + h.kind + "'");
}

void validate(const AnalysisConfig& c) {
    const auto& an = c.analysis;
    if (an.type == "random_walk") {
        require(is_scalar_family(c.model.family), "model.family: random_walk needs a scalar increment family");
        try {
            ScalarDistribution::make(family_from_string(c.model.family), c.model.params);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
        require(an.eps && *an.eps > 0.0, "analysis.eps: required, must be > 0");
        require(an.delta_prime.size() == 1, "analysis.delta_prime: required, a single value");
        require(an.delta_prime[0] > 0.0 && an.delta_prime[0] <= 1.0, "analysis.delta_prime: must lie in (0, 1]");
        require(!an.m_list.empty(), "analysis.m_list: required");
        for (auto m : an.m_list) require(m >= 1, "analysis.m_list: entries must be >= 1");
        require(!an.cost_factor || *an.cost_factor > 0.0, "analysis.cost_factor: must be > 0");
        return;
    }
    const auto model = build_model(c.model);
    const bool scalar = model.kind() == ImportanceModel::Kind::scalar;
    if (an.type == "subset") {
        require(an.eps && *an.eps > 0.0, "analysis.eps: required, must be > 0");
        require(an.delta.empty() != an.delta_prime.empty(), "analysis: give exactly one of delta or delta_prime");
        for (double d : an.delta) require(d > 0.0 && d <= 1.0, "analysis.delta: entries must lie in (0, 1]");
        for (double d : an.delta_prime) require(d > 0.0 && d <= 1.0, "analysis.delta_prime: entries must lie in (0, 1]");
        require(an.error_prob > 0.0 && an.error_prob < 1.0, "analysis.error_prob: must lie in (0, 1)");
        require(!an.cost_factor || *an.cost_factor > 0.0, "analysis.cost_factor: must be > 0");
        require(!scalar || an.target_points.empty(), "analysis.target_set.points: scalar models need an interval");
        require(scalar || !an.target_interval, "analysis.target_set.interval: finite models need points");
    } else if (an.type == "quantile") {
        require(an.alpha > 0.0 && an.alpha < 1.0, "analysis.alpha: required, must lie in (0, 1)");
        require(an.eps.has_value() != an.p_target.has_value(), "analysis: give exactly one of eps or p_target");
        require(!an.eps || *an.eps > 0.0, "analysis.eps: must be > 0");
        require(!an.p_target || scalar, "analysis.p_target: needs a scalar target family");
        require(!an.p_target || (*an.p_target > 0.0 && *an.p_target < 1.0), "analysis.p_target: must lie in (0, 1)");
        require(an.side == "plus" || an.side == "minus", "analysis.side: expected plus or minus");
        require(an.error_prob > 0.0 && an.error_prob < 1.0, "analysis.error_prob: must lie in (0, 1)");
    } else if (an.type == "laplace") {
        require(!scalar, "model.family: laplace verification needs a finite alphabet");
        require(!an.n_list.empty(), "analysis.n_list: required");
        for (auto n : an.n_list) require(n >= 1, "analysis.n_list: entries must be >= 1");
        require(an.method == "dp" || an.method == "enumeration", "analysis.method: expected dp or enumeration");
        build_functional(an.h, model.finite_target().size());
    } else if (an.type == "simulate") {
        require(c.seed.has_value(), "seed: required for stochastic commands");
        require(an.reps >= 1, "analysis.reps: required, must be >= 1");
        require(!an.n_list.empty(), "analysis.n_list: required");
        for (std::size_t i = 0; i < an.n_list.size(); ++i) {
            require(an.n_list[i] >= 1, "analysis.n_list: entries must be >= 1");
            require(i == 0 || an.n_list[i] > an.n_list[i - 1], "analysis.n_list: must be strictly increasing");
        }
        const auto& e = an.event;
        try {
            event_kind_from_string(e.kind);
        } catch (const DomainError& err) {
            throw ConfigError(std::string("analysis.event.kind: ") + err.what());
        }
        require(e.eps.has_value() != e.p_target.has_value(), "analysis.event: give exactly one of eps or p_target");
        require(!e.eps || *e.eps > 0.0, "analysis.event.eps: must be > 0");
        if (e.kind == "quantile-exceedance") {
            require(e.alpha > 0.0 && e.alpha < 1.0, "analysis.event.alpha: required, must lie in (0, 1)");
        } else {
            require(!scalar, "analysis.event.kind: finite-set events need a finite alphabet");
            require(!e.set.empty(), "analysis.event.set: required for finite-set events");
            require(!e.p_target, "analysis.event.p_target: only for quantile events");
        }
    } else {
        throw ConfigError("analysis.type: expected subset, quantile, laplace, simulate or random_walk, got '" + an.type +
                          "'");
    }
}

// ---- commands ------------------------------------------------------------

CommandOutput run_subset(const AnalysisConfig& c) {
    const auto model = build_model(c.model);
    const auto target = target_set(c, model);
    const double mass_a = target_set_mass(model, target);
    SubsetOptions options;
    options.error_prob = c.analysis.error_prob;
    options.cost_factor = c.analysis.cost_factor;

    json entries = json::array();
    const bool by_fraction = !c.analysis.delta_prime.empty();
    for (double d : by_fraction ? c.analysis.delta_prime : c.analysis.delta) {
        const double delta = by_fraction ? d * mass_a : d;
        const auto r = subset_rate(model, target, *c.analysis.eps, delta, options);
        json e;
        if (by_fraction) e["delta_prime"] = number_json(d);
        e["eps"] = number_json(r.eps);
        e["delta"] = number_json(r.delta);
        json th;
        th["exact"] = r.threshold.exact;
        th["set"] = threshold_json(r.threshold.set);
        th["larger"] = r.threshold.larger ? threshold_json(*r.threshold.larger) : json(nullptr);
        th["smaller"] = r.threshold.smaller ? threshold_json(*r.threshold.smaller) : json(nullptr);
        th["constant_ratio"] = optional_json(r.threshold.constant_ratio);
        th["diagnostic"] = r.threshold.diagnostic;
        e["threshold"] = th;
        e["optimal_proposal_mass"] = optional_json(r.optimal_proposal_mass);
        e["rate_plus"] = optional_json(r.rate_plus);
        e["rate_minus"] = optional_json(r.rate_minus);
        auto bounds = [](const std::optional<RateBounds>& b) {
            return b ? json{{"lower", rate_json(b->lower)}, {"upper", rate_json(b->upper)}} : json(nullptr);
        };
        e["bounds_plus"] = bounds(r.bounds_plus);
        e["bounds_minus"] = bounds(r.bounds_minus);
        e["sample_size_plus"] = optional_json(r.sample_size_plus);
        e["sample_size_minus"] = optional_json(r.sample_size_minus);
        e["error_prob"] = number_json(r.error_prob);
        e["rate_plus_standard_mc"] = optional_json(r.rate_plus_standard_mc);
        e["cost_reduction"] = optional_json(r.cost_reduction);
        e["diagnostics"] = r.diagnostics;
        entries.push_back(e);
    }
    json results;
    results["model"] = model.describe();
    results["target_mass"] = number_json(mass_a);
    results["entries"] = entries;
    return {results, std::nullopt};
}

CommandOutput run_quantile(const AnalysisConfig& c) {
    const auto model = build_model(c.model);
    const Side side = side_from_string(c.analysis.side);
    const double alpha = c.analysis.alpha;
    const auto& p_target = c.analysis.p_target;
    QuantileRateResult r;
    if (p_target && (side == Side::plus ? *p_target >= alpha : *p_target <= alpha)) {
        r.alpha = alpha;
        r.eps = 0.0;
        r.side = side;
        r.quantile_target = quantile(model.scalar_target(), alpha);
        r.q_target = r.quantile_target;
        r.p_target = *p_target;
        r.lambda_star = 0.0;
        r.rate = RateValue::finite(0.0);
        r.minimizer_note = "G* = proposal";
        r.diagnostics.push_back("p = " + fmt17(*p_target) + (side == Side::plus ? " >= " : " <= ") +
                                "alpha: target inside typical set, no deviation needed");
    } else {
        const double eps = c.analysis.eps ? *c.analysis.eps
                                          : eps_for_tail(model, alpha, *p_target, side, "analysis.p_target");
        r = quantile_rate(model, alpha, eps, side);
    }
    json results;
    results["model"] = model.describe();
    results["alpha"] = number_json(r.alpha);
    results["eps"] = number_json(r.eps);
    results["side"] = to_string(r.side);
    results["quantile_target"] = number_json(r.quantile_target);
    results["q_target"] = number_json(r.q_target);
    results["p_target"] = number_json(r.p_target);
    results["lambda_star"] = number_json(r.lambda_star);
    results["rate"] = rate_json(r.rate);
    results["sample_size"] =
        r.rate.value > 0.0 ? json(sample_size(r.rate, c.analysis.error_prob)) : json(nullptr);
    results["error_prob"] = number_json(c.analysis.error_prob);
    results["minimizer_note"] = r.minimizer_note;
    results["diagnostics"] = r.diagnostics;
    return {results, std::nullopt};
}

CommandOutput run_laplace(const AnalysisConfig& c) {
    const auto model = build_model(c.model);
    const auto& proposal = model.finite_proposal();
    std::vector<double> wf(proposal.size(), 0.0);
    for (std::size_t i = 0; i < proposal.size(); ++i)
        if (proposal[i] > 0.0) wf[i] = model.ratio_table()[i] * model.importance_table()[i];
    const auto h = build_functional(c.analysis.h, proposal.size());
    const auto method = laplace_method_from_string(c.analysis.method);
    const auto r = convergence_check(proposal, wf, h, c.analysis.n_list, method, c.analysis.budget);

    json results;
    results["method"] = to_string(r.method);
    results["n_values"] = r.n_values;
    results["w_n_values"] = numbers_json(r.w_n_values);
    results["variational_limit"] = number_json(r.variational_limit);
    results["variational_minimizer"] = numbers_json(r.variational_minimizer);
    results["gaps"] = numbers_json(r.gaps);
    results["nonincreasing"] = r.nonincreasing;
    std::ostringstream csv;
    csv << "n,w_n,gap\n";
    for (std::size_t i = 0; i < r.n_values.size(); ++i)
        csv << r.n_values[i] << ',' << fmt17(r.w_n_values[i]) << ',' << fmt17(r.gaps[i]) << '\n';
    return {results, csv.str()};
}

CommandOutput run_simulate(const AnalysisConfig& c) {
    const auto model = build_model(c.model);
    const auto& ec = c.analysis.event;
    EventSpec event;
    event.kind = event_kind_from_string(ec.kind);
    event.alpha = ec.alpha;
    event.eps = ec.eps ? *ec.eps : eps_for_tail(model, ec.alpha, *ec.p_target, Side::plus, "analysis.event.p_target");
    event.set = ec.set;
    const EventTester tester(model, event);

    json series = json::array();
    std::ostringstream csv;
    csv << "n,p_hat,std_err,neg_log_rate\n";
    std::vector<double> p_hats;
    bool all_hit = true;
    for (std::size_t n : c.analysis.n_list) {
        const auto est = estimate_event_probability(model, event, n, c.analysis.reps, *c.seed);
        series.push_back({{"n", est.n},
                          {"hits", est.hits},
                          {"p_hat", number_json(est.p_hat)},
                          {"std_err", number_json(est.std_err)},
                          {"neg_log_rate", est.neg_log_rate ? number_json(*est.neg_log_rate) : json(nullptr)}});
        csv << n << ',' << fmt17(est.p_hat) << ',' << fmt17(est.std_err) << ','
            << (est.neg_log_rate ? fmt17(*est.neg_log_rate) : std::string()) << '\n';
        p_hats.push_back(est.p_hat);
        all_hit = all_hit && est.hits > 0;
    }

    json results;
    results["model"] = model.describe();
    results["event"] = {{"kind", to_string(event.kind)},
                        {"alpha", number_json(event.alpha)},
                        {"eps", number_json(event.eps)},
                        {"set", numbers_json(event.set)},
                        {"reference_level", number_json(tester.reference_level())}};
    results["reps"] = c.analysis.reps;
    results["seed"] = *c.seed;
    results["series"] = series;
    std::vector<std::string> diagnostics;
    if (p_hats.size() >= 3 && all_hit) {
        results["fitted_rate"] = number_json(rate_slope_fit(c.analysis.n_list, p_hats));
        results["fitted_rate_sqrt_n"] = number_json(rate_slope_fit(c.analysis.n_list, p_hats, 0.5));
    } else {
        results["fitted_rate"] = nullptr;
        results["fitted_rate_sqrt_n"] = nullptr;
        diagnostics.push_back(p_hats.size() < 3 ? "slope fit needs at least 3 values of n"
                                                : "some p_hat = 0: increase reps or decrease n to fit a slope");
    }
    try {
        results["reference_rate"] = rate_json(event_reference_rate(model, event));
    } catch (const Error& e) {
        results["reference_rate"] = nullptr;
        diagnostics.push_back(std::string("reference rate unavailable: ") + e.what());
    }
    results["diagnostics"] = diagnostics;
    return {results, csv.str()};
}

CommandOutput run_random_walk(const AnalysisConfig& c) {
    const auto increment = ScalarDistribution::make(family_from_string(c.model.family), c.model.params);
    const double cost = c.analysis.cost_factor.value_or(1.0);
    json entries = json::array();
    for (std::size_t m : c.analysis.m_list) {
        const auto r = random_walk_tilt(increment, c.analysis.a, m, *c.analysis.eps, c.analysis.delta_prime[0], cost);
        entries.push_back({{"m", r.m},
                           {"theta", number_json(r.theta)},
                           {"exponent", number_json(r.exponent)},
                           {"tail_probability", number_json(r.tail_probability)},
                           {"delta", number_json(r.delta)},
                           {"mass_bound", number_json(r.mass_bound)},
                           {"rate_lower_bound", rate_json(r.rate_lower_bound)},
                           {"rate_standard_mc", rate_json(r.rate_standard_mc)},
                           {"cost_reduction_bound", number_json(r.cost_reduction_bound)},
                           {"realized_proposal_mass", optional_json(r.realized_proposal_mass)},
                           {"realized_rate", optional_json(r.realized_rate)},
                           {"bound_holds", r.realized_proposal_mass
                                               ? json(*r.realized_proposal_mass >= r.mass_bound)
                                               : json(nullptr)}});
    }
    json results;
    results["increment"] = {{"family", c.model.family}, {"params", numbers_json(c.model.params)}};
    results["a"] = number_json(c.analysis.a);
    results["eps"] = number_json(*c.analysis.eps);
    results["delta_prime"] = number_json(c.analysis.delta_prime[0]);
    results["entries"] = entries;
    return {results, std::nullopt};
}

json make_report(const std::string& command, const AnalysisConfig& config, const json& results,
                 double wall_clock_seconds) {
    json report;
    report["tool_version"] = kToolVersion;
    report["command"] = command;
    report["config"] = to_json(config);
    report["results"] = results;
    report["wall_clock_seconds"] = wall_clock_seconds;
    return report;
}

void write_atomically(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw ConfigError("writing '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("cannot move report into place at '" + path + "': " + ec.message());
    }
}

std::string gamma_csv(double eps, const std::string& side, const std::string& grid) {
    if (side != "plus" && side != "minus") throw ConfigError("--side: expected plus or minus");
    std::vector<double> parts;
    std::stringstream ss(grid);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--s-grid: '" + item + "' is not a number");
        }
    }
    if (parts.size() != 3) throw ConfigError("--s-grid: expected a:b:step");
    const double a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0.0) || !(b >= a)) throw ConfigError("--s-grid: need a <= b and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 10'000'000) throw ConfigError("--s-grid: more than 10^7 points");
    std::vector<double> s(count);
    for (std::size_t i = 0; i < count; ++i) s[i] = a + static_cast<double>(i) * step;
    const auto values = kernels::gamma_grid(eps, side == "plus", s);
    std::ostringstream out;
    out << "s,value,feasible\n";
    for (std::size_t i = 0; i < count; ++i)
        out << fmt17(s[i]) << ',' << fmt17(values[i].value) << ',' << (values[i].feasible ? "true" : "false") << '\n';
    return out.str();
}

// ---- entry point ---------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"Large-deviation efficiency analysis of importance sampling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;
    int workers = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed, "Random seed (overrides the config)");
        sub->add_option("--out", out_path, "Report path (overrides the config; default stdout)");
        sub->add_option("--workers", workers, "Worker threads for parallel kernels")->check(CLI::NonNegativeNumber);
    };

    auto* analyze = app.add_subcommand("analyze", "Rate analyses");
    analyze->require_subcommand(1);
    auto* subset = analyze->add_subcommand("subset", "Subset-performance rates");
    auto* quant = analyze->add_subcommand("quantile", "Quantile-estimation rate");
    auto* walk = analyze->add_subcommand("random-walk", "Exponential tilt for random-walk sums");
    auto* verify = app.add_subcommand("verify", "Verification runs");
    verify->require_subcommand(1);
    auto* laplace = verify->add_subcommand("laplace", "Exact Laplace values against the variational limit");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates of deviation probabilities");
    for (auto* sub : {subset, quant, walk, laplace, simulate}) add_common(sub);

    double gamma_eps = 0.0;
    std::string gamma_side = "plus";
    std::string gamma_grid_spec;
    auto* gamma = app.add_subcommand("gamma", "Print gamma_plus or gamma_minus over an s grid as CSV");
    gamma->add_option("--eps", gamma_eps, "Relative error eps")->required();
    gamma->add_option("--side", gamma_side, "plus or minus");
    gamma->add_option("--s-grid", gamma_grid_spec, "a:b:step")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (workers > 0) kernels::set_worker_count(workers);
        if (gamma->parsed()) {
            std::cout << gamma_csv(gamma_eps, gamma_side, gamma_grid_spec);
            return 0;
        }

        std::string command;
        std::string expected_type;
        CommandOutput (*runner)(const AnalysisConfig&) = nullptr;
        if (subset->parsed()) {
            command = "analyze subset", expected_type = "subset", runner = run_subset;
        } else if (quant->parsed()) {
            command = "analyze quantile", expected_type = "quantile", runner = run_quantile;
        } else if (walk->parsed()) {
            command = "analyze random-walk", expected_type = "random_walk", runner = run_random_walk;
        } else if (laplace->parsed()) {
            command = "verify laplace", expected_type = "laplace", runner = run_laplace;
        } else {
            command = "simulate", expected_type = "simulate", runner = run_simulate;
        }

        AnalysisConfig config = load_config(config_path);
        if (seed) config.seed = seed;
        if (out_path) config.output.report = out_path;
        if (config.analysis.type != expected_type)
            throw ConfigError("analysis.type: '" + config.analysis.type + "' does not match command '" + command +
                              "' (expected '" + expected_type + "')");
        validate(config);

        const auto start = std::chrono::steady_clock::now();
        const CommandOutput output = runner(config);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const std::string text = make_report(command, config, output.results, elapsed).dump(2) + "\n";
        if (config.output.report)
            write_atomically(*config.output.report, text);
        else
            std::cout << text;
        if (config.output.series && output.series_csv) write_atomically(*config.output.series, *output.series_csv);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace israte::cli
