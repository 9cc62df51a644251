#include "curemc3/simulate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "curemc3/config.hpp"
#include "curemc3/csv.hpp"
#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"

namespace curemc3 {

namespace {

/// log S_U(t) for t > 0.
double log_susceptible_survival(double t, const Theta& theta, double eta, const PromotionSpec& spec)
{
    const LogDensityCdf pt = evaluate(spec, t, theta.alpha);
    const PointLogTerms terms = point_log_terms(eta, pt.log_F, pt.log_f, theta.gamma, theta.lambda);
    return censored_contribution(terms, 1) - log1mexp(terms.log_cure);
}

}  // namespace

std::size_t SimulationConfig::design_width() const noexcept
{
    std::size_t w = (intercept ? 1 : 0) + numeric.size();
    for (const auto& f : factors)
        w += f.levels.empty() ? 0 : f.levels.size() - 1;
    return w;
}

double draw_susceptible_time(const Theta& theta, std::span<const double> x,
                             const PromotionSpec& spec, double u)
{
    if (!(u > 0.0 && u < 1.0))
        throw GeneratorError("draw_susceptible_time: u must lie in (0, 1)");
    const double eta = linear_predictor(theta, x);
    const double log_u = std::log(u);
    auto above = [&](double t) { return log_susceptible_survival(t, theta, eta, spec) > log_u; };
    double lo = 1.0;
    double hi = 1.0;
    while (!above(lo)) {
        lo *= 0.5;
        if (lo < 1e-300)
            throw GeneratorError("cannot bracket the susceptible time from below");
    }
    while (above(hi)) {
        hi *= 2.0;
        if (hi > 1e300)
            throw GeneratorError("cannot bracket the susceptible time from above");
    }
    // Bisection on log t keeps relative precision over many decades.
    double a = std::log(lo);
    double b = std::log(hi);
    for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        if (above(std::exp(mid)))
            a = mid;
        else
            b = mid;
    }
    return std::exp(0.5 * (a + b));
}

SimulatedData simulate(const SimulationConfig& cfg)
{
    cfg.spec.validate();
    const std::size_t k = cfg.design_width();
    try {
        validate_theta(cfg.theta, cfg.spec, k);
    } catch (const DomainError& e) {
        throw GeneratorError(std::string("invalid generator theta: ") + e.what());
    }
    for (const auto& f : cfg.factors) {
        if (f.levels.size() < 2 || f.probabilities.size() != f.levels.size())
            throw GeneratorError("factor '" + f.name + "' needs >= 2 levels with one probability each");
    }
    if (!(cfg.censoring_rate >= 0.0))
        throw GeneratorError("censoring rate must be >= 0");

    Rng rng = make_stream(cfg.seed, 0);
    SimulatedData out;
    for (const auto& c : cfg.numeric)
        out.covariate_names.push_back(c.name);
    for (const auto& f : cfg.factors)
        out.covariate_names.push_back(f.name);
    out.data.X.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(k));
    if (cfg.intercept)
        out.data.column_names.push_back("(Intercept)");
    for (const auto& c : cfg.numeric)
        out.data.column_names.push_back(c.name);
    for (const auto& f : cfg.factors) {
        for (std::size_t l = 1; l < f.levels.size(); ++l)
            out.data.column_names.push_back(f.name + f.levels[l]);
    }

    std::vector<double> x(k);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        std::vector<std::string> cells;
        std::size_t col = 0;
        if (cfg.intercept)
            x[col++] = 1.0;
        for (const auto& c : cfg.numeric) {
            const double v = c.kind == NumericCovariateGen::Kind::normal
                                 ? c.a + c.b * standard_normal(rng)
                                 : c.a + (c.b - c.a) * uniform01(rng);
            x[col++] = v;
            cells.push_back(format_double(v));
        }
        for (const auto& f : cfg.factors) {
            const std::size_t level =
                std::discrete_distribution<std::size_t>(f.probabilities.begin(), f.probabilities.end())(rng);
            for (std::size_t l = 1; l < f.levels.size(); ++l)
                x[col++] = l == level ? 1.0 : 0.0;
            cells.push_back(f.levels[level]);
        }
        for (std::size_t j = 0; j < k; ++j)
            out.data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j];

        double p0 = 0.0;
        try {
            p0 = cure_rate(cfg.theta, x, cfg.spec);
        } catch (const InvalidBase& e) {
            throw GeneratorError(std::string("generator theta leaves the model support: ") + e.what());
        }
        const bool cured = uniform01(rng) < p0;
        const double u = uniform01(rng);
        const double c_time = cfg.censoring_rate > 0.0
                                  ? std::exponential_distribution<double>(cfg.censoring_rate)(rng)
                                  : std::numeric_limits<double>::infinity();
        double y = 0.0;
        std::uint8_t delta = 0;
        if (cured) {
            if (!std::isfinite(c_time))
                throw GeneratorError("cured subjects need a positive censoring rate");
            y = c_time;
        } else {
            const double t = draw_susceptible_time(cfg.theta, x, cfg.spec, std::max(u, 1e-300));
            y = std::min(t, c_time);
            delta = t <= c_time ? 1 : 0;
        }
        out.data.y.push_back(y);
        out.data.delta.push_back(delta);
        out.cured.push_back(cured ? 1 : 0);
        out.covariate_cells.push_back(std::move(cells));
    }
    return out;
}

void write_simulated_csv(const SimulatedData& sim, const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw DataError("cannot write '" + path + "'");
    std::vector<std::string> header{"time", "censoring"};
    header.insert(header.end(), sim.covariate_names.begin(), sim.covariate_names.end());
    header.push_back("true_status");
    write_csv_row(f, header);
    for (std::size_t i = 0; i < sim.data.n(); ++i) {
        std::vector<std::string> row{format_double(sim.data.y[i]), std::to_string(sim.data.delta[i])};
        row.insert(row.end(), sim.covariate_cells[i].begin(), sim.covariate_cells[i].end());
        row.push_back(std::to_string(sim.cured[i]));
        write_csv_row(f, row);
    }
    if (!f)
        throw DataError("failed while writing '" + path + "'");
}

SimulationConfig parse_simulation_config(const std::string& json_text)
{
    using Json = nlohmann::json;
    SimulationConfig cfg;
    try {
        const Json doc = Json::parse(json_text);
        for (const auto& item : doc.items()) {
            static const std::set<std::string> allowed{"n", "seed", "promotion_time", "theta", "intercept",
                                                       "numeric", "factors", "censoring_rate", "output"};
            if (!allowed.count(item.key()))
                throw ConfigError("unknown key '" + item.key() + "' in the simulation config");
        }
        cfg.n = doc.value("n", cfg.n);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.intercept = doc.value("intercept", cfg.intercept);
        cfg.censoring_rate = doc.value("censoring_rate", cfg.censoring_rate);
        cfg.output_path = doc.value("output", std::string());
        if (doc.contains("promotion_time"))
            cfg.spec = parse_promotion_block(json_text);
        const Json& th = doc.at("theta");
        cfg.theta.gamma = th.at("gamma").get<double>();
        cfg.theta.lambda = th.at("lambda").get<double>();
        cfg.theta.alpha = th.at("alpha").get<std::vector<double>>();
        cfg.theta.beta = th.at("beta").get<std::vector<double>>();
        if (doc.contains("numeric")) {
            for (const Json& c : doc.at("numeric")) {
                NumericCovariateGen g;
                g.name = c.at("name").get<std::string>();
                const std::string dist = c.value("distribution", std::string("normal"));
                if (dist == "normal")
                    g.kind = NumericCovariateGen::Kind::normal;
                else if (dist == "uniform")
                    g.kind = NumericCovariateGen::Kind::uniform;
                else
                    throw ConfigError("numeric covariate distribution must be normal or uniform");
                g.a = c.value("a", 0.0);
                g.b = c.value("b", 1.0);
                cfg.numeric.push_back(std::move(g));
            }
        }
        if (doc.contains("factors")) {
            for (const Json& f : doc.at("factors")) {
                FactorCovariateGen g;
                g.name = f.at("name").get<std::string>();
                g.levels = f.at("levels").get<std::vector<std::string>>();
                g.probabilities = f.contains("probabilities")
                                      ? f.at("probabilities").get<std::vector<double>>()
                                      : std::vector<double>(g.levels.size(), 1.0);
                cfg.factors.push_back(std::move(g));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("simulation config: ") + e.what());
    }
    return cfg;
}

SimulationConfig load_simulation_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open simulation config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    SimulationConfig cfg = parse_simulation_config(ss.str());
    if (!cfg.output_path.empty() && std::filesystem::path(cfg.output_path).is_relative()) {
        const auto base = std::filesystem::path(path).parent_path();
        cfg.output_path = (base / cfg.output_path).lexically_normal().string();
    }
    return cfg;
}

}  // namespace curemc3
