#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "ordef/config.hpp"

using namespace ordef;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "ordef_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    fs::path p = work_dir() / name;
    std::ofstream out(p);
    out << text;
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(ORDEF_CLI_PATH) + " " + args + " > " +
                      (work_dir() / "log.txt").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string base_config(const std::string& run_extra = "") {
    return R"({
  "grid": {"t_max": 2.0, "n_steps": 4},
  "intensity": {"variant": "constant", "rates": [1.0, 2.0]},
  "lattice": {"variant": "single", "value": 1.0},
  "claims": [
    {"id": "s1", "kind": "survival_first", "maturity": 1.0, "payoff": 1.0},
    {"id": "r2", "kind": "recovery_second", "maturity": 1.0, "z_base": 1.0,
     "bound": 1.0}
  ],
  "run": {"seed": 7, "n_paths": 300, "quad_steps": 2000, "s": 0.0, "t": 0.0)" +
           run_extra + R"(}
})";
}

// value column of the first prices.csv row matching a claim id
double price_of(const fs::path& csv, const std::string& id) {
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(id + ",", 0) == 0) {
            return std::stod(line.substr(line.rfind(',') + 1));
        }
    }
    FAIL("claim '" << id << "' not found in " << csv.string());
    return 0.0;
}

}  // namespace

TEST_CASE("configs round-trip through the canonical serialization") {
    ScenarioConfig cfg = parse_config(base_config());
    std::string text = serialize_config(cfg);
    ScenarioConfig again = parse_config(text);
    CHECK(serialize_config(again) == text);
    CHECK(again.grid.n_steps == 4);
    CHECK(again.intensity.rates == std::vector<double>{1.0, 2.0});
    CHECK(again.claims.size() == 2);
    CHECK(again.claims[1].kind == "recovery_second");
    CHECK(again.run.seed == 7);
    CHECK(config_hash(again) == config_hash(cfg));
}

TEST_CASE("config errors name the offending field") {
    CHECK_THROWS_WITH_AS(parse_config("{ not json"),
                         doctest::Contains("invalid JSON"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"grid": {"t_max": "wide"}})"),
        doctest::Contains("grid.t_max"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"intensity": {"variant": "constant", "rates": [1.0]},
                         "claims": [{"id": "c", "kind": "lookback"}]})"),
        doctest::Contains("claims[0].kind"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"intensity": {"variant": "constant", "rates": [1.0]},
                         "lattice": {"variant": "binomial", "p_up": [1.5]}})"),
        doctest::Contains("lattice.p_up[0]"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"intensity": {"variant": "constant", "rates": [0.5]},
                         "run": {"s": 1.0, "t": 0.5}})"),
        doctest::Contains("run.s"), ConfigError);
}

TEST_CASE("broken kernels are rejected before any compute") {
    std::string text = R"({
  "grid": {"t_max": 1.0, "n_steps": 1},
  "intensity": {"variant": "constant", "rates": [1.0, 2.0]},
  "lattice": {"variant": "explicit",
              "states": [[1.0], [0.9, 1.1]],
              "kernels": [[[[0.4, 0.5]]]]},
  "run": {"s": 0.0, "t": 0.0}
})";
    CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("sum to 1"),
                         ConfigError);

    fs::path cfg = write_file("broken.json", text);
    fs::path out = work_dir() / "broken_out";
    CHECK(run_cli("verify --config " + cfg.string() + " --out " +
                  out.string()) == 2);
    CHECK_FALSE(fs::exists(out / "verify.csv"));
}

TEST_CASE("a zero-path simulation writes valid empty outputs") {
    fs::path cfg = write_file("zero.json", base_config(", \"n_paths\": 0"));
    fs::path out = work_dir() / "zero_out";
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " +
                  out.string()) == 0);
    CHECK(read_file(out / "scenarios.csv") ==
          "path,level,inter_arrival,default_time,censored\n");
    CHECK(read_file(out / "summary.csv") ==
          "statistic,p1,p2,p3,value,std_error\n");
}

TEST_CASE("identical config and seed give byte-identical outputs") {
    fs::path cfg = write_file("det.json", base_config());
    fs::path a = work_dir() / "det_a";
    fs::path b = work_dir() / "det_b";
    for (const std::string& verb : {"price", "simulate"}) {
        REQUIRE(run_cli(verb + " --config " + cfg.string() + " --out " +
                        a.string()) == 0);
        REQUIRE(run_cli(verb + " --config " + cfg.string() + " --out " +
                        b.string()) == 0);
    }
    CHECK(read_file(a / "prices.csv") == read_file(b / "prices.csv"));
    CHECK(read_file(a / "scenarios.csv") == read_file(b / "scenarios.csv"));
    CHECK(read_file(a / "summary.csv") == read_file(b / "summary.csv"));
    CHECK(read_file(a / "prices.csv").find("e") != std::string::npos);
}

TEST_CASE("priced claims match their analytic values end to end") {
    fs::path cfg = write_file("price.json", base_config());
    fs::path out = work_dir() / "price_out";
    REQUIRE(run_cli("price --config " + cfg.string() + " --out " +
                    out.string()) == 0);
    double hypo = 2.0 * std::exp(-1.0) - std::exp(-2.0);
    CHECK(price_of(out / "prices.csv", "s1") ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
    CHECK(price_of(out / "prices.csv", "r2") ==
          doctest::Approx(1.0 - hypo).epsilon(1e-5));
}

TEST_CASE("verification commands succeed on a singleton prior") {
    std::string text = R"({
  "grid": {"t_max": 2.0, "n_steps": 4},
  "intensity": {"variant": "factor_linear", "base": [0.5, 0.9],
                "slope": [0.4, 0.3]},
  "lattice": {"variant": "binomial", "x0": 1.0, "up": 1.2, "down": 0.85,
              "p_up": [0.55]},
  "claims": [{"id": "r2", "kind": "recovery_second", "maturity": 1.5,
              "z_base": 0.5, "z_slope": 0.1, "bound": 1.0}],
  "run": {"seed": 3, "n_paths": 4000, "quad_steps": 40, "s": 0.5, "t": 1.0}
})";
    fs::path cfg = write_file("verify.json", text);
    fs::path out = work_dir() / "verify_out";
    std::string common =
        " --config " + cfg.string() + " --out " + out.string();
    CHECK(run_cli("verify --verify-kind dpp" + common) == 0);
    CHECK(run_cli("verify --verify-kind tower" + common) == 0);
    CHECK(run_cli("verify --verify-kind commutation" + common) == 0);
    CHECK(run_cli("verify --verify-kind oracle" + common) == 0);
    CHECK(read_file(out / "verify.csv").find("\noracle,,oracle_mean,") !=
          std::string::npos);
}

TEST_CASE("exit codes separate config errors from clean runs") {
    fs::path cfg = write_file("ok.json", base_config());
    CHECK(run_cli("price --config " + (work_dir() / "missing.json").string()) ==
          2);
    CHECK(run_cli("verify --config " + cfg.string() +
                  " --verify-kind sideways") == 2);
    CHECK(run_cli("price") == 2);
    fs::path out = work_dir() / "ok_out";
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " +
                  out.string() + " --seed 99 --threads 2") == 0);
    CHECK(read_file(out / "manifest.json").find("\"seed\": 99") !=
          std::string::npos);
}
