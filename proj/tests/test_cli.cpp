#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace israte;
using namespace israte::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("israte_test_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    std::string write(const std::string& name, const json& j) const {
        std::ofstream(path(name)) << j.dump(2);
        return path(name);
    }
};

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "israte");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const std::string& path) { return json::parse(slurp(path)); }

std::string validation_message(const json& j) {
    try {
        validate(parse_config(j));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const json kZeroVariance = json::parse(R"({
  "model": {"family": "gaussian", "params": [0, 1], "sampler": "zero_variance", "importance_set": [1.5, "inf"]},
  "analysis": {"type": "subset", "eps": 0.1, "delta_prime": [0.25, 0.5, 0.75]}
})");

const json kStandardMc = json::parse(R"({
  "model": {"family": "gaussian", "params": [0, 1]},
  "analysis": {"type": "subset", "eps": 0.1, "delta": [0.3]}
})");

const json kQuantileMc = json::parse(R"({
  "model": {"family": "exponential", "params": [1]},
  "analysis": {"type": "quantile", "alpha": 0.05, "p_target": 0.03}
})");

const json kLaplaceNonlinear = json::parse(R"({
  "model": {"family": "finite", "alphabet": [0, 1, 2], "target_probs": [0.5, 0.3, 0.2]},
  "analysis": {"type": "laplace", "h": {"kind": "capped_square", "g": [0, 1, 2], "cap": 4},
               "n_list": [10, 20, 40, 80]}
})");

const json kSimulateSmall = json::parse(R"({
  "model": {"family": "gaussian", "params": [0, 1]},
  "analysis": {"type": "simulate", "n_list": [20, 40, 60], "reps": 3000,
               "event": {"kind": "quantile-exceedance", "alpha": 0.2, "eps": 0.3}},
  "seed": 99
})");

}  // namespace

TEST_CASE("config round trip") {
    const json walk = json::parse(R"({
      "model": {"family": "gaussian", "params": [0, 1]},
      "analysis": {"type": "random_walk", "a": 2, "m_list": [1, 5], "eps": 0.1, "delta_prime": [0.5], "cost_factor": 2},
      "output": {"report": "r.json"}
    })");
    const json table = json::parse(R"({
      "model": {"family": "user-table", "alphabet": [0, 1, 2], "proposal_probs": [0.2, 0.3, 0.5],
                "ratio": [2, 1, 0.6], "importance": [0, 1, 1]},
      "analysis": {"type": "subset", "eps": 0.2, "delta": [0.1, 0.2], "target_set": {"points": [1, 2]},
                   "error_prob": 0.05},
      "seed": 18446744073709551615
    })");
    for (const json& j : {kZeroVariance, kStandardMc, kQuantileMc, kLaplaceNonlinear, kSimulateSmall, walk, table}) {
        const auto c = parse_config(j);
        CHECK(parse_config(to_json(c)) == c);
        CHECK(to_json(parse_config(json::parse(to_json(c).dump()))) == to_json(c));
    }
    const auto c = parse_config(kZeroVariance);
    CHECK(c.model.importance_set.hi == kInf);
    CHECK(to_json(c)["model"]["importance_set"][1] == "inf");
    CHECK(parse_config(table).seed == 18446744073709551615ull);
}

TEST_CASE("validation names the field") {
    json j = kStandardMc;
    j["analysis"]["eps"] = -1;
    CHECK(validation_message(j).find("analysis.eps") == 0);
    j = kStandardMc;
    j["model"]["colour"] = "red";
    CHECK_THROWS_WITH_AS(parse_config(j), "model.colour: unknown field", ConfigError);
    j = kSimulateSmall;
    j.erase("seed");
    CHECK(validation_message(j).find("seed") == 0);
    j = kSimulateSmall;
    j["analysis"]["n_list"] = {40, 20, 60};
    CHECK(validation_message(j).find("analysis.n_list") == 0);
    j = kQuantileMc;
    j["analysis"]["eps"] = 0.1;
    CHECK(validation_message(j).find("exactly one of eps or p_target") != std::string::npos);
    j = kLaplaceNonlinear;
    j["analysis"]["h"]["g"] = {1, 2};
    CHECK(validation_message(j).find("analysis.h.g") == 0);
    j = kStandardMc;
    j["model"]["params"] = {0, -1};
    CHECK(validation_message(j).find("model:") == 0);
    j = kStandardMc;
    j["analysis"]["eps"] = "lots";
    CHECK_THROWS_WITH_AS(parse_config(j), "analysis.eps: expected a number", ConfigError);
}

TEST_CASE("analyze subset") {
    Workspace ws;
    SUBCASE("zero-variance sweep gives gamma at delta'") {
        const auto out = ws.path("zv.json");
        REQUIRE(invoke({"analyze", "subset", "--config", ws.write("c.json", kZeroVariance), "--out", out}) == 0);
        const json r = read_json(out);
        CHECK(r["tool_version"] == kToolVersion);
        CHECK(r["command"] == "analyze subset");
        auto echoed = parse_config(r["config"]);
        CHECK(echoed.output.report == out);
        echoed.output.report.reset();
        CHECK(echoed == parse_config(kZeroVariance));
        const auto& entries = r["results"]["entries"];
        REQUIRE(entries.size() == 3);
        double prev = 0;
        for (const auto& e : entries) {
            const double dp = e["delta_prime"];
            const double v = e["rate_plus"]["value"];
            CHECK(v == doctest::Approx(oracle::gamma(0.1, dp, true)).epsilon(1e-9));
            CHECK(v > prev);
            prev = v;
        }
    }
    SUBCASE("standard Monte Carlo") {
        const auto out = ws.path("mc.json");
        REQUIRE(invoke({"analyze", "subset", "--config", ws.write("c.json", kStandardMc), "--out", out}) == 0);
        const double v = read_json(out)["results"]["entries"][0]["rate_plus"]["value"];
        CHECK(v == doctest::Approx(2.1043e-3).epsilon(1e-3));
        CHECK(v == doctest::Approx(oracle::gamma(0.1, 0.3, true)).epsilon(1e-9));
    }
    SUBCASE("delta above F(A) exits 2") {
        json j = kStandardMc;
        j["model"]["importance_set"] = {1.5, "inf"};
        const auto out = ws.path("never.json");
        CHECK(invoke({"analyze", "subset", "--config", ws.write("c.json", j), "--out", out}) == 2);
        CHECK_FALSE(fs::exists(out));
    }
    SUBCASE("wrong command for the analysis type exits 2") {
        CHECK(invoke({"analyze", "quantile", "--config", ws.write("c.json", kStandardMc)}) == 2);
    }
    SUBCASE("missing config file exits 2") {
        CHECK(invoke({"analyze", "subset", "--config", ws.path("absent.json")}) == 2);
    }
}

TEST_CASE("analyze quantile") {
    Workspace ws;
    SUBCASE("standard Monte Carlo at alpha = 0.05, p = 0.03") {
        const auto out = ws.path("q.json");
        REQUIRE(invoke({"analyze", "quantile", "--config", ws.write("c.json", kQuantileMc), "--out", out}) == 0);
        const json r = read_json(out)["results"];
        CHECK(r["lambda_star"].get<double>() == doctest::Approx(0.5317).epsilon(1e-4));
        CHECK(r["rate"]["value"].get<double>() == doctest::Approx(5.749e-3).epsilon(1e-3));
        CHECK(r["rate"]["value"].get<double>() == doctest::Approx(oracle::binary_kl(0.05, 0.03)).epsilon(1e-9));
    }
    SUBCASE("p = alpha is inside the typical set") {
        json j = kQuantileMc;
        j["analysis"]["p_target"] = 0.05;
        const auto out = ws.path("q.json");
        REQUIRE(invoke({"analyze", "quantile", "--config", ws.write("c.json", j), "--out", out}) == 0);
        const json r = read_json(out)["results"];
        CHECK(r["rate"]["value"] == 0.0);
        CHECK(r["diagnostics"][0].get<std::string>().find("inside typical set") != std::string::npos);
    }
    SUBCASE("divergent mgf exits 3") {
        const json j = json::parse(R"({
          "model": {"family": "gaussian", "params": [0, 1], "sampler": "change_of_measure", "sampler_params": [0, 0.5]},
          "analysis": {"type": "quantile", "alpha": 0.05, "eps": 0.2}
        })");
        CHECK(invoke({"analyze", "quantile", "--config", ws.write("c.json", j)}) == 3);
    }
}

TEST_CASE("verify laplace") {
    Workspace ws;
    SUBCASE("linear h on two points") {
        const json j = json::parse(R"({
          "model": {"family": "finite", "alphabet": [0, 1], "target_probs": [0.6, 0.4]},
          "analysis": {"type": "laplace", "h": {"kind": "linear", "g": [0.3, -0.2]}, "n_list": [1, 5, 20, 80]}
        })");
        const auto out = ws.path("l.json");
        REQUIRE(invoke({"verify", "laplace", "--config", ws.write("c.json", j), "--out", out}) == 0);
        const json gaps = read_json(out)["results"]["gaps"];
        for (const auto& g : gaps) CHECK(std::abs(g.get<double>()) <= 1e-10);
    }
    SUBCASE("constant h") {
        json j = kLaplaceNonlinear;
        j["analysis"]["h"] = {{"kind", "constant"}, {"c", 0.7}};
        const auto out = ws.path("l.json");
        REQUIRE(invoke({"verify", "laplace", "--config", ws.write("c.json", j), "--out", out}) == 0);
        const json gaps = read_json(out)["results"]["gaps"];
        for (const auto& g : gaps) CHECK(std::abs(g.get<double>()) <= 1e-13);
    }
    SUBCASE("nonlinear h writes the gap series") {
        json j = kLaplaceNonlinear;
        j["output"] = {{"report", ws.path("l.json")}, {"series", ws.path("l.csv")}};
        REQUIRE(invoke({"verify", "laplace", "--config", ws.write("c.json", j)}) == 0);
        const json r = read_json(ws.path("l.json"))["results"];
        CHECK(r["nonincreasing"] == true);
        CHECK(r["gaps"].back().get<double>() < r["gaps"].front().get<double>());
        const auto csv = slurp(ws.path("l.csv"));
        CHECK(csv.rfind("n,w_n,gap\n10,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    }
    SUBCASE("type-class budget exits 4") {
        json j = kLaplaceNonlinear;
        j["analysis"]["method"] = "enumeration";
        j["analysis"]["budget"] = 100;
        CHECK(invoke({"verify", "laplace", "--config", ws.write("c.json", j)}) == 4);
    }
}

TEST_CASE("simulate") {
    Workspace ws;
    SUBCASE("binomial event slope") {
        const json j = json::parse(R"({
          "model": {"family": "finite", "alphabet": [0, 1], "target_probs": [0.97, 0.03]},
          "analysis": {"type": "simulate", "n_list": [200, 400, 600, 800, 1000], "reps": 100000,
                       "event": {"kind": "finite-overweight", "eps": 0.66666666666666674, "set": [1]}},
          "seed": 12345
        })");
        const auto out = ws.path("s.json");
        REQUIRE(invoke({"simulate", "--config", ws.write("c.json", j), "--out", out}) == 0);
        const json r = read_json(out)["results"];
        const double h = oracle::binary_kl(0.05, 0.03);
        CHECK(r["reference_rate"]["value"].get<double>() == doctest::Approx(h).epsilon(1e-9));
        CHECK(std::abs(r["fitted_rate_sqrt_n"].get<double>() / h - 1) <= 0.10);
        const auto& at400 = r["series"][1];
        const double exact = oracle::binomial_upper_tail(400, 0.03, 20);
        CHECK(std::abs(at400["p_hat"].get<double>() - exact) <= 4 * at400["std_err"].get<double>());
    }
    SUBCASE("reps = 0 exits 2") {
        json j = kSimulateSmall;
        j["analysis"]["reps"] = 0;
        CHECK(invoke({"simulate", "--config", ws.write("c.json", j)}) == 2);
    }
    SUBCASE("p_target sets eps for quantile events") {
        json j = kSimulateSmall;
        j["analysis"]["event"].erase("eps");
        j["analysis"]["event"]["p_target"] = 0.1;
        const auto out = ws.path("s.json");
        REQUIRE(invoke({"simulate", "--config", ws.write("c.json", j), "--out", out}) == 0);
        const auto g = ScalarDistribution::gaussian(0, 1);
        CHECK(read_json(out)["results"]["event"]["eps"].get<double>() ==
              doctest::Approx(g.upper_quantile(0.1) / g.upper_quantile(0.2) - 1).epsilon(1e-12));
    }
    SUBCASE("repeat runs are byte-identical") {
        json j = kSimulateSmall;
        j["output"] = {{"series", ws.path("s.csv")}};
        const auto cfg = ws.write("c.json", j);
        std::vector<std::string> payloads, series;
        for (const char* workers : {"1", "3"}) {
            for (int rep = 0; rep < 2; ++rep) {
                const auto out = ws.path("s.json");
                REQUIRE(invoke({"simulate", "--config", cfg, "--out", out, "--workers", workers}) == 0);
                json r = read_json(out);
                r.erase("wall_clock_seconds");
                payloads.push_back(r.dump());
                series.push_back(slurp(ws.path("s.csv")));
            }
        }
        for (std::size_t i = 1; i < payloads.size(); ++i) {
            CHECK(payloads[i] == payloads[0]);
            CHECK(series[i] == series[0]);
        }
        CHECK(series[0].rfind("n,p_hat,std_err,neg_log_rate\n", 0) == 0);
    }
    SUBCASE("--seed overrides the config") {
        const auto cfg = ws.write("c.json", kSimulateSmall);
        REQUIRE(invoke({"simulate", "--config", cfg, "--out", ws.path("a.json"), "--seed", "7"}) == 0);
        CHECK(read_json(ws.path("a.json"))["config"]["seed"] == 7);
    }
}

TEST_CASE("analyze random-walk") {
    Workspace ws;
    const json j = json::parse(R"({
      "model": {"family": "gaussian", "params": [0, 1]},
      "analysis": {"type": "random_walk", "a": 2, "m_list": [1, 5, 10], "eps": 0.1, "delta_prime": [0.5]}
    })");
    const auto out = ws.path("w.json");
    REQUIRE(invoke({"analyze", "random-walk", "--config", ws.write("c.json", j), "--out", out}) == 0);
    const json entries = read_json(out)["results"]["entries"];
    for (const auto& e : entries) {
        CHECK(e["theta"].get<double>() == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(e["bound_holds"] == true);
    }
}

TEST_CASE("gamma utility") {
    const auto csv = gamma_csv(0.1, "plus", "0.1:0.5:0.1");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "s,value,feasible");
    int rows = 0;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const double s = std::stod(line.substr(0, c1));
        CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == doctest::Approx(oracle::gamma(0.1, s, true)).epsilon(1e-9));
        CHECK(line.substr(c2 + 1) == "true");
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(gamma_csv(0.5, "plus", "0.9:0.9:0.1").find("inf,false") != std::string::npos);
    CHECK_THROWS_AS(gamma_csv(0.1, "plus", "0.1:0.5"), ConfigError);
    CHECK_THROWS_AS(gamma_csv(0.1, "plus", "0.5:0.1:0.1"), ConfigError);
    CHECK_THROWS_AS(gamma_csv(0.1, "up", "0.1:0.5:0.1"), ConfigError);
    CHECK(invoke({"gamma", "--eps", "0.1", "--s-grid", "x:1:2"}) == 2);
}

TEST_CASE("atomic write") {
    Workspace ws;
    const auto path = ws.path("r.json");
    write_atomically(path, "first");
    write_atomically(path, "second");
    CHECK(slurp(path) == "second");
    CHECK(std::distance(fs::directory_iterator(ws.dir), fs::directory_iterator{}) == 1);
    CHECK_THROWS_AS(write_atomically(ws.path("no/such/dir/r.json"), "x"), ConfigError);
}

TEST_CASE("random walk accepts lattice increments") {
    Workspace ws;
    const json j = json::parse(R"({
      "model": {"family": "bernoulli", "params": [0.3]},
      "analysis": {"type": "random_walk", "a": 0.6, "m_list": [5, 10], "eps": 0.1, "delta_prime": [0.5]}
    })");
    const auto out = ws.path("w.json");
    REQUIRE(invoke({"analyze", "random-walk", "--config", ws.write("c.json", j), "--out", out}) == 0);
    const json e = read_json(out)["results"]["entries"][0];
    // kappa'(theta) = a for Bernoulli(p): theta = log(a (1 - p) / ((1 - a) p)).
    CHECK(e["theta"].get<double>() == doctest::Approx(std::log(0.6 * 0.7 / (0.4 * 0.3))).epsilon(1e-9));
    json bad = j;
    bad["model"]["params"] = {1.5};
    CHECK(validation_message(bad).find("model:") == 0);
}
