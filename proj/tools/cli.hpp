#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "israte/distributions.hpp"
#include "israte/error.hpp"
#include "israte/laplace.hpp"
#include "israte/model.hpp"
#include "json.hpp"

namespace israte::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed or out-of-domain configuration; message names the offending field.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::validation, what) {}
};

struct ModelConfig {
    /// gaussian | exponential | bernoulli | finite | user-table
    std::string family;
    std::vector<double> params;
    /// standard_mc | change_of_measure | zero_variance (scalar families)
    std::string sampler = "standard_mc";
    std::vector<double> sampler_params;
    Interval importance_set;
    // finite and user-table
    std::vector<double> alphabet;
    std::vector<double> target_probs;
    std::vector<double> proposal_probs;
    std::vector<double> ratio;
    std::vector<double> importance;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Functional h on finite measures, nu given over the alphabet.
///   constant       h = c
///   linear         h = sum_i g_i nu_i
///   capped_square  h = min((sum_i g_i nu_i)^2, cap)
///   quadratic      h = min(scale sum_i (nu_i - center_i)^2, cap)
struct FunctionalConfig {
    std::string kind = "constant";
    double c = 0.0;
    std::vector<double> g;
    std::vector<double> center;
    double scale = 1.0;
    double cap = kInf;

    friend bool operator==(const FunctionalConfig&, const FunctionalConfig&) = default;
};

struct EventConfig {
    std::string kind = "quantile-exceedance";
    double alpha = 0.0;
    std::optional<double> eps;
    /// Alternative to eps for quantile events: F((q, inf)) = p_target.
    std::optional<double> p_target;
    std::vector<double> set;

    friend bool operator==(const EventConfig&, const EventConfig&) = default;
};

struct AnalysisBlock {
    /// subset | quantile | laplace | simulate | random_walk
    std::string type;
    std::optional<double> eps;
    // subset
    std::vector<double> delta;
    std::vector<double> delta_prime;
    std::optional<Interval> target_interval;
    std::vector<double> target_points;
    std::optional<double> cost_factor;
    double error_prob = 0.01;
    // quantile
    double alpha = 0.0;
    std::optional<double> p_target;
    std::string side = "plus";
    // laplace
    FunctionalConfig h;
    std::string method = "dp";
    std::uint64_t budget = kDefaultTypeBudget;
    // laplace and simulate
    std::vector<std::size_t> n_list;
    // simulate
    EventConfig event;
    std::size_t reps = 0;
    // random_walk
    double a = 0.0;
    std::vector<std::size_t> m_list;

    friend bool operator==(const AnalysisBlock&, const AnalysisBlock&) = default;
};

struct OutputConfig {
    std::optional<std::string> report;
    std::optional<std::string> series;

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct AnalysisConfig {
    ModelConfig model;
    AnalysisBlock analysis;
    std::optional<std::uint64_t> seed;
    OutputConfig output;

    friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

AnalysisConfig parse_config(const nlohmann::json& j);
AnalysisConfig load_config(const std::string& path);
nlohmann::json to_json(const AnalysisConfig& config);

/// Checks every field against the domain of the analysis it feeds.
void validate(const AnalysisConfig& config);

ImportanceModel build_model(const ModelConfig& config);
MeasureFunctional build_functional(const FunctionalConfig& config, std::size_t alphabet_size);

/// Result payload plus an optional CSV series.
struct CommandOutput {
    nlohmann::json results;
    std::optional<std::string> series_csv;
};

CommandOutput run_subset(const AnalysisConfig& config);
CommandOutput run_quantile(const AnalysisConfig& config);
CommandOutput run_laplace(const AnalysisConfig& config);
CommandOutput run_simulate(const AnalysisConfig& config);
CommandOutput run_random_walk(const AnalysisConfig& config);

/// Full report: tool version, config echo, results and wall-clock seconds.
nlohmann::json make_report(const std::string& command, const AnalysisConfig& config, const nlohmann::json& results,
                           double wall_clock_seconds);

/// Writes through a temporary file in the same directory and renames it over `path`.
void write_atomically(const std::string& path, const std::string& content);

/// "s,value,feasible" rows for gamma_plus or gamma_minus over a:b:step.
std::string gamma_csv(double eps, const std::string& side, const std::string& grid);

/// Number or the strings "inf" / "-inf".
nlohmann::json number_json(double v);

/// Entry point shared by the executable and the tests; returns the exit code.
int run(int argc, char** argv);

}  // namespace israte::cli
