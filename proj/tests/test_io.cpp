#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "curemc3/commands.hpp"
#include "curemc3/config.hpp"
#include "curemc3/csv.hpp"
#include "curemc3/design.hpp"
#include "curemc3/errors.hpp"
#include "curemc3/simulate.hpp"

using namespace curemc3;
namespace fs = std::filesystem;

namespace {

CsvTable parse(const std::string& text)
{
    std::istringstream in(text);
    return read_csv(in);
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("curemc3_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

SimulationConfig tiny_simulation(const fs::path& out)
{
    SimulationConfig cfg;
    cfg.n = 60;
    cfg.seed = 4;
    cfg.spec = make_promotion_spec(Family::weibull);
    cfg.theta.gamma = 0.5;
    cfg.theta.lambda = 1.0;
    cfg.theta.alpha = {1.0, 1.2};
    cfg.theta.beta = {0.2, -0.4, 0.3};
    cfg.numeric = {NumericCovariateGen{"age", NumericCovariateGen::Kind::normal, 40.0, 10.0}};
    cfg.factors = {FactorCovariateGen{"kids", {"no", "yes"}, {0.5, 0.5}}};
    cfg.output_path = out.string();
    return cfg;
}

std::string fit_json(const std::string& data, const std::string& dir, std::size_t cycles)
{
    return R"({"data": {"path": ")" + data + R"(", "covariates": ["age"], "standardize": ["age"],
      "factors": [{"name": "kids", "reference": "no"}]},
      "promotion_time": {"distribution": "weibull"},
      "mcmc": {"chains": 2, "cycles": )" +
           std::to_string(cycles) + R"(, "seed": 5, "sweeps_per_cycle": 2},
      "output": {"dir": ")" + dir + R"("}})";
}

}  // namespace

TEST_CASE("CSV parsing")
{
    const CsvTable t = parse("a,b,c\n1,\"x,y\",3\n\n4,\"say \"\"hi\"\"\",6\n");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "x,y");
    CHECK(t.rows[1][1] == "say \"hi\"");
    CHECK(t.column("c") == 2);
    CHECK_FALSE(t.find_column("zz").has_value());
    CHECK_THROWS_AS(parse("a,b\n1\n"), ParseError);
    CHECK(is_missing("NA"));
    CHECK(is_missing(""));
    CHECK_FALSE(is_missing("0"));
    CHECK(parse_number("1e-3").value() == 1e-3);
    CHECK_FALSE(parse_number("1.5x").has_value());
}

TEST_CASE("floats round-trip with 17 significant digits")
{
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(i % 40) - 20);
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.10000000000000001");
    std::ostringstream out;
    write_csv_row(out, {"a", "b,c", "d\"e"});
    CHECK(out.str() == "a,\"b,c\",\"d\"\"e\"\n");
}

TEST_CASE("dataset loading")
{
    DesignConfig cfg;
    cfg.covariates = {"age"};
    SUBCASE("rows with missing required cells are dropped")
    {
        const auto ds = load_dataset(parse("time,censoring,age\n1,1,30\n2,0,NA\n3,1,50\n"), cfg);
        CHECK(ds.data.n() == 2);
        CHECK(ds.dropped_rows == 1);
        CHECK(ds.source_rows == std::vector<std::size_t>{1, 3});
    }
    SUBCASE("a censoring value of 2 names the row")
    {
        try {
            load_dataset(parse("time,censoring,age\n1,1,30\n2,2,40\n"), cfg);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.row() == 2);
            CHECK(e.column() == "censoring");
        }
    }
    SUBCASE("boolean censoring cells")
    {
        const auto ds = load_dataset(parse("time,censoring,age\n1,true,30\n2,false,40\n"), cfg);
        CHECK(ds.data.delta == std::vector<std::uint8_t>{1, 0});
    }
    SUBCASE("non-positive times are rejected")
    {
        CHECK_THROWS_AS(load_dataset(parse("time,censoring,age\n0,1,30\n"), cfg), ParseError);
    }
    SUBCASE("empty after dropping")
    {
        CHECK_THROWS_AS(load_dataset(parse("time,censoring,age\n1,1,NA\n"), cfg), EmptyDataset);
    }
}

TEST_CASE("design matrix coding")
{
    const CsvTable t = parse(
        "time,censoring,age,kids,race\n"
        "1,1,30,no,black\n2,0,40,yes,hispanic\n3,1,50,no,other\n4,1,35,yes,black\n");
    DesignConfig cfg;
    cfg.covariates = {"age"};
    cfg.factors = {FactorSpec{"kids", {"no", "yes"}, "no"},
                   FactorSpec{"race", {}, "black"}};
    const auto ds = load_dataset(t, cfg);
    const std::vector<std::string> expect{"(Intercept)", "age", "kidsyes", "racehispanic",
                                          "raceother"};
    CHECK(ds.data.column_names == expect);
    CHECK(ds.data.k() == 5);
    CHECK(ds.data.X(1, 2) == 1.0);
    CHECK(ds.data.X(2, 4) == 1.0);
    CHECK(ds.data.X(0, 3) == 0.0);

    cfg.standardize = {"age"};
    cfg.factors.clear();
    const auto st = load_dataset(parse("time,censoring,age\n1,1,1\n2,1,2\n3,0,3\n"), cfg);
    CHECK(st.data.X(0, 1) == doctest::Approx(-1.0));
    CHECK(st.data.X(1, 1) == doctest::Approx(0.0));
    CHECK(st.data.X(2, 1) == doctest::Approx(1.0));
    CHECK(st.schema.terms[0].center == 2.0);
    CHECK(st.schema.terms[0].scale == doctest::Approx(1.0));
    // Stored constants are reused for new data.
    const Eigen::MatrixXd nx = st.schema.apply(parse("age\n5\n"));
    CHECK(nx(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("schema application rejects unseen levels and missing columns")
{
    DesignConfig cfg;
    cfg.factors = {FactorSpec{"kids", {}, ""}};
    const auto ds = load_dataset(parse("time,censoring,kids\n1,1,no\n2,0,yes\n"), cfg);
    CHECK_THROWS_AS(ds.schema.apply(parse("kids\nmaybe\n")), UnseenLevel);
    CHECK_THROWS_AS(ds.schema.apply(parse("other\n1\n")), SchemaMismatch);
}

TEST_CASE("design roles are validated")
{
    DesignConfig cfg;
    cfg.covariates = {"time"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.covariates = {"a", "a"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.covariates = {"a"};
    cfg.standardize = {"b"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fit configuration parsing")
{
    const FitConfig c = parse_fit_config(R"({
        "data": {"path": "d.csv", "covariates": ["x"]},
        "promotion_time": {"distribution": "gamma_mixture", "K": 3},
        "prior": {"a_gamma": 2.0, "sigma_scale": 10.0},
        "mcmc": {"chains": 3, "cycles": 100, "seed": 9, "mala_probability": 0.5},
        "output": {"dir": "out", "fdr": 0.05}
    })",
                                         "/base");
    CHECK(c.input_path == "/base/d.csv");
    CHECK(c.promotion.family == Family::gamma_mixture);
    CHECK(c.promotion.K == 3);
    CHECK(c.prior.a_gamma == 2.0);
    CHECK(c.prior_sigma_scale.value() == 10.0);
    CHECK(c.mcmc.n_chains == 3);
    CHECK(c.mcmc.mala_probability == 0.5);
    CHECK(c.fdr == 0.05);

    FitConfig o = c;
    CliOverrides ov;
    ov.cycles = 7;
    ov.seed = 11;
    ov.threads = 4;
    ov.fdr = 0.2;
    apply_overrides(o, ov);
    CHECK(o.mcmc.mcmc_cycles == 7);
    CHECK(o.mcmc.seed == 11);
    CHECK(o.mcmc.threads == 4);
    CHECK(o.fdr == 0.2);

    CHECK_THROWS_AS(parse_fit_config("{not json"), ConfigError);
    CHECK(parse_fit_config(R"({"data": {"path": "d.csv"}})").promotion.family == Family::weibull);
    CHECK_THROWS_AS(parse_fit_config(R"({"promotion_time": {"distribution": "weibull"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_fit_config(R"({"data": {"path": "d.csv"},
        "promotion_time": {"distribution": "normal"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_fit_config(R"({"data": {"path": "d.csv", "typo": 1},
        "promotion_time": {"distribution": "weibull"}})"),
                    ConfigError);
    CHECK_THROWS_AS(load_fit_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("simulation")
{
    SUBCASE("no cure when p0 is identically zero")
    {
        SimulationConfig cfg;
        cfg.n = 500;
        cfg.spec = make_promotion_spec(Family::exponential);
        cfg.theta.gamma = -1.0;
        cfg.theta.lambda = 1.0;
        cfg.theta.alpha = {1.0};
        cfg.theta.beta = {1.0};
        cfg.censoring_rate = 0.0;
        const SimulatedData sim = simulate(cfg);
        for (std::size_t i = 0; i < sim.cured.size(); ++i) {
            CHECK(sim.cured[i] == 0);
            CHECK(sim.data.delta[i] == 1);
        }
    }
    SUBCASE("cured fraction matches a homogeneous cure rate")
    {
        // gamma -> 0: p0 = exp(-vartheta) = 0.3.
        SimulationConfig cfg;
        cfg.n = 100000;
        cfg.spec = make_promotion_spec(Family::exponential);
        cfg.theta.gamma = 0.0;
        cfg.theta.lambda = 1.0;
        cfg.theta.alpha = {1.0};
        cfg.theta.beta = {std::log(-std::log(0.3))};
        const SimulatedData sim = simulate(cfg);
        double cured = 0.0;
        for (auto c : sim.cured)
            cured += c;
        CHECK(cured / cfg.n == doctest::Approx(0.3).epsilon(0.005 / 0.3));
    }
    SUBCASE("susceptible times invert the susceptible survival")
    {
        Theta th;
        th.gamma = 0.4;
        th.lambda = 1.3;
        th.alpha = {1.0, 1.5};
        th.beta = {0.1};
        const auto spec = make_promotion_spec(Family::weibull);
        const std::vector<double> x{1.0};
        for (double u : {0.05, 0.3, 0.7, 0.99}) {
            const double t = draw_susceptible_time(th, x, spec, u);
            CHECK(susceptible_survival(t, th, x, spec) == doctest::Approx(u).epsilon(1e-8));
        }
    }
    SUBCASE("invalid truth is a generator error")
    {
        SimulationConfig cfg;
        cfg.spec = make_promotion_spec(Family::exponential);
        cfg.theta.gamma = 0.5;
        cfg.theta.lambda = -1.0;
        cfg.theta.alpha = {1.0};
        cfg.theta.beta = {0.0};
        CHECK_THROWS_AS(simulate(cfg), GeneratorError);
        cfg.theta.lambda = 1.0;
        cfg.theta.beta = {0.0, 1.0};
        CHECK_THROWS_AS(simulate(cfg), GeneratorError);
    }
    SUBCASE("config parsing and CSV output")
    {
        const fs::path dir = scratch_dir("sim");
        const SimulationConfig cfg = parse_simulation_config(R"({
            "n": 30, "seed": 3, "promotion_time": {"distribution": "exponential"},
            "theta": {"gamma": 0.5, "lambda": 1.0, "alpha": [1.0], "beta": [0.2, 0.1]},
            "numeric": [{"name": "x", "distribution": "uniform", "a": 0.0, "b": 1.0}],
            "censoring_rate": 0.2, "output": "sim.csv"})");
        CHECK(cfg.n == 30);
        CHECK(cfg.design_width() == 2);
        const SimulatedData sim = simulate(cfg);
        write_simulated_csv(sim, (dir / "s.csv").string());
        CHECK(first_line(dir / "s.csv") == "time,censoring,x,true_status");
        CHECK(read_csv_file((dir / "s.csv").string()).rows.size() == 30);
    }
}

TEST_CASE("fit outputs round-trip through the output directory")
{
    const fs::path dir = scratch_dir("fit");
    const SimulationConfig sim_cfg = tiny_simulation(dir / "data.csv");
    write_simulated_csv(simulate(sim_cfg), sim_cfg.output_path);
    write_file(dir / "fit.json", fit_json("data.csv", "out", 60));
    const FitConfig cfg = load_fit_config((dir / "fit.json").string());
    std::ostringstream out, err;
    REQUIRE(run_fit_command(cfg, out, err) == kExitSuccess);
    CHECK(out.str().find("Swap rates of adjacent chains") != std::string::npos);
    const fs::path od = dir / "out";
    CHECK(first_line(od / "samples.csv") ==
          "g_mcmc,lambda_mcmc,a1_mcmc,a2_mcmc,b0_mcmc,b1_mcmc,b2_mcmc");
    for (const char* f : {"latent_draws.csv", "diagnostics.csv", "swap_rates.csv", "model.json",
                          "summary.json", "residuals.csv"})
        CHECK(fs::exists(od / f));
    CHECK(first_line(od / "residuals.csv") == "residual,censoring,km_cumulative_hazard");

    const StoredFit sf = load_fit(od.string());
    CHECK(sf.fit.cycles() == 60);
    CHECK(sf.schema.width() == 3);
    CHECK(sf.fit.column_names.back() == "b2_mcmc");

    // Re-saving the loaded fit reproduces samples.csv byte for byte.
    const fs::path copy = dir / "copy";
    save_fit(copy.string(), sf.fit, sf.schema, cfg);
    CHECK(read_file(copy / "samples.csv") == read_file(od / "samples.csv"));

    std::ostringstream s_out, s_err;
    CHECK(run_summary_command({od.string()}, std::nullopt, 0.1, 0.1, {0.5}, s_out, s_err) ==
          kExitSuccess);
    write_file(dir / "new.csv", "age,kids\n35,no\n50,yes\n");
    std::ostringstream p_out, p_err;
    CHECK(run_predict_command(od.string(), (dir / "new.csv").string(), {0.5, 1.0}, 0.1,
                              std::nullopt, (dir / "pred.csv").string(), p_out, p_err) ==
          kExitSuccess);
    CHECK(read_csv_file((dir / "pred.csv").string()).rows.size() == 4);
}

TEST_CASE("model ranking orders by BIC")
{
    const auto r = rank_by_bic({{"dagum", 310.0, 300.0}, {"exponential", 305.0, 301.0},
                                {"weibull", 307.0, 299.0}});
    CHECK(r[0].label == "exponential");
    CHECK(r[1].label == "weibull");
    CHECK(r[2].label == "dagum");
}

TEST_CASE("exception classes map to exit codes")
{
    CHECK(exit_code_for(ConfigError("x")) == kExitConfigError);
    CHECK(exit_code_for(RegistrationError("x")) == kExitConfigError);
    CHECK(exit_code_for(ParseError("x")) == kExitDataError);
    CHECK(exit_code_for(SchemaMismatch("x")) == kExitDataError);
    CHECK(exit_code_for(InvalidBase("x")) == kExitNumericFailure);
    CHECK(exit_code_for(InsufficientSamples("x")) == kExitNumericFailure);
    CHECK(exit_code_for(std::runtime_error("x")) == kExitFailure);
}

#ifdef CUREMC3_CLI_PATH
namespace {

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(CUREMC3_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command-line exit codes")
{
    const fs::path dir = scratch_dir("cli");
    const SimulationConfig sim_cfg = tiny_simulation(dir / "data.csv");
    write_simulated_csv(simulate(sim_cfg), sim_cfg.output_path);
    write_file(dir / "fit.json", fit_json("data.csv", "out", 40));
    write_file(dir / "bad.csv", "time,censoring,age,kids\n1,1,30,no\n2,7,40,yes\n");
    write_file(dir / "bad_data.json", fit_json("bad.csv", "out_bad", 40));
    write_file(dir / "bad_config.json", R"({"promotion_time": {"distribution": "weibull"}})");
    const std::string d = dir.string();

    CHECK(run_cli("") == kExitConfigError);
    CHECK(run_cli("fit --bogus") == kExitConfigError);
    CHECK(run_cli("fit --config " + d + "/missing.json") == kExitConfigError);
    CHECK(run_cli("fit --config " + d + "/bad_config.json") == kExitConfigError);
    CHECK(run_cli("fit --config " + d + "/bad_data.json") == kExitDataError);
    CHECK_FALSE(fs::exists(dir / "out_bad" / "samples.csv"));
    CHECK(run_cli("fit --config " + d + "/fit.json --cycles 40 --threads 2 --seed 3") ==
          kExitSuccess);
    CHECK(first_line(dir / "out" / "samples.csv") ==
          "g_mcmc,lambda_mcmc,a1_mcmc,a2_mcmc,b0_mcmc,b1_mcmc,b2_mcmc");
    CHECK(run_cli("summary " + d + "/out --burn 35") == kExitNumericFailure);
    CHECK(run_cli("summary " + d + "/out --burn 5 --fdr 0.2 --alpha 0.05") == kExitSuccess);
    CHECK(run_cli("residuals " + d + "/out --output " + d + "/res.csv") == kExitSuccess);
    CHECK(fs::exists(dir / "res.csv"));
    CHECK(run_cli("summary " + d + "/nowhere") != kExitSuccess);
}
#endif
