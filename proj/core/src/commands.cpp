#include "curemc3/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "curemc3/csv.hpp"
#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"
#include "curemc3/version.hpp"

namespace curemc3 {

namespace fs = std::filesystem;
using Json = nlohmann::json;

int exit_code_for(const std::exception& error) noexcept
{
    if (dynamic_cast<const ConfigError*>(&error))
        return kExitConfigError;
    if (dynamic_cast<const DataError*>(&error))
        return kExitDataError;
    if (dynamic_cast<const NumericError*>(&error))
        return kExitNumericFailure;
    return kExitFailure;
}

namespace {

/// Files written by a command, removed again if the command fails.
class OutputGuard
{
public:
    explicit OutputGuard(const std::string& dir)
    {
        created_dir_ = !fs::exists(dir);
        fs::create_directories(dir);
        dir_ = dir;
    }
    std::string file(const std::string& name)
    {
        std::string path = (fs::path(dir_) / name).string();
        files_.push_back(path);
        return path;
    }
    void commit() noexcept { committed_ = true; }
    ~OutputGuard()
    {
        if (committed_)
            return;
        std::error_code ec;
        for (const auto& f : files_)
            fs::remove(f, ec);
        if (created_dir_ && fs::is_empty(dir_, ec))
            fs::remove(dir_, ec);
    }

private:
    std::string dir_;
    std::vector<std::string> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw DataError("cannot write '" + path + "'");
    f << std::setprecision(17);
    return f;
}

void check_written(const std::ofstream& f, const std::string& path)
{
    if (!f)
        throw DataError("failed while writing '" + path + "'");
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json design_to_json(const DesignConfig& d, const std::string& path)
{
    Json factors = Json::array();
    for (const auto& f : d.factors)
        factors.push_back({{"name", f.name}, {"levels", f.levels}, {"reference", f.reference}});
    return {{"path", path},           {"time", d.time_column},
            {"censoring", d.censoring_column}, {"id", d.id_column},
            {"covariates", d.covariates},      {"factors", factors},
            {"standardize", d.standardize},    {"intercept", d.intercept}};
}

DesignConfig design_from_json(const Json& j)
{
    DesignConfig d;
    d.time_column = j.at("time").get<std::string>();
    d.censoring_column = j.at("censoring").get<std::string>();
    d.id_column = j.at("id").get<std::string>();
    d.covariates = j.at("covariates").get<std::vector<std::string>>();
    d.standardize = j.at("standardize").get<std::vector<std::string>>();
    d.intercept = j.at("intercept").get<bool>();
    for (const Json& f : j.at("factors"))
        d.factors.push_back({f.at("name").get<std::string>(),
                             f.at("levels").get<std::vector<std::string>>(),
                             f.at("reference").get<std::string>()});
    return d;
}

Json schema_to_json(const DesignSchema& s)
{
    Json terms = Json::array();
    for (const auto& t : s.terms)
        terms.push_back({{"name", t.name},
                         {"is_factor", t.is_factor},
                         {"standardized", t.standardized},
                         {"center", t.center},
                         {"scale", t.scale},
                         {"levels", t.levels}});
    return {{"intercept", s.intercept}, {"terms", terms}, {"column_names", s.column_names}};
}

DesignSchema schema_from_json(const Json& j)
{
    DesignSchema s;
    s.intercept = j.at("intercept").get<bool>();
    s.column_names = j.at("column_names").get<std::vector<std::string>>();
    for (const Json& t : j.at("terms")) {
        DesignTerm term;
        term.name = t.at("name").get<std::string>();
        term.is_factor = t.at("is_factor").get<bool>();
        term.standardized = t.at("standardized").get<bool>();
        term.center = t.at("center").get<double>();
        term.scale = t.at("scale").get<double>();
        term.levels = t.at("levels").get<std::vector<std::string>>();
        s.terms.push_back(std::move(term));
    }
    return s;
}

Json spec_to_json(const PromotionSpec& spec)
{
    Json priors = Json::array();
    for (const auto& p : spec.prior_parameters)
        priors.push_back({p.shape, p.scale});
    return {{"distribution", family_name(spec.family)},
            {"K", spec.K},
            {"component_dim", spec.component_dim},
            {"user_family", spec.user_name},
            {"prior_parameters", priors},
            {"prop_scale", spec.prop_scale},
            {"dirichlet_alpha0", spec.dirichlet_concentration}};
}

PromotionSpec spec_from_json(const Json& j)
{
    const Family family = parse_family(j.at("distribution").get<std::string>());
    const auto K = j.at("K").get<std::size_t>();
    PromotionSpec spec;
    if (family == Family::user || family == Family::user_mixture) {
        spec = find_user_family(j.at("user_family").get<std::string>());
        if (family == Family::user_mixture)
            spec = make_user_mixture(spec, K);
    } else {
        spec = make_promotion_spec(family, K);
    }
    spec.prior_parameters.clear();
    for (const Json& p : j.at("prior_parameters"))
        spec.prior_parameters.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    spec.prop_scale = j.at("prop_scale").get<std::vector<double>>();
    spec.dirichlet_concentration = j.at("dirichlet_alpha0").get<double>();
    spec.validate();
    return spec;
}

std::string column_label(const FitResult& fit, std::size_t c)
{
    const std::size_t first_beta = 2 + fit.spec.alpha_size();
    if (c >= first_beta && c - first_beta < fit.design_columns.size())
        return fit.design_columns[c - first_beta];
    return "";
}

double median_of(std::vector<double> v)
{
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// Short label for a probability level, e.g. 0.05 -> "0.05".
std::string level_label(double level)
{
    std::ostringstream s;
    s << std::setprecision(6) << level;
    return s.str();
}

Json summary_to_json(const FitResult& fit, const SummaryReport& rep,
                     const std::vector<std::string>& ids)
{
    Json params = Json::array();
    for (std::size_t c = 0; c < rep.parameters.size(); ++c) {
        const auto& p = rep.parameters[c];
        Json q = Json::object();
        for (std::size_t l = 0; l < rep.quantile_levels.size(); ++l)
            q[level_label(rep.quantile_levels[l])] = p.quantiles[l];
        params.push_back({{"name", p.name},
                          {"label", column_label(fit, c)},
                          {"map", p.map},
                          {"mean", p.mean},
                          {"hpd", {p.hpd.low, p.hpd.high}},
                          {"quantiles", q}});
    }
    auto id_of = [&](std::size_t i) { return i < ids.size() ? ids[i] : std::to_string(i + 1); };
    Json cured = Json::array();
    for (std::size_t j = 0; j < rep.censored_indices.size(); ++j)
        cured.push_back({{"index", rep.censored_indices[j]},
                         {"id", id_of(rep.censored_indices[j])},
                         {"cured_probability", rep.cured_posterior_prob[j]}});
    Json found = Json::array();
    for (std::size_t i : rep.discoveries)
        found.push_back({{"index", i}, {"id", id_of(i)}});
    return {{"burn", rep.burn},
            {"retained", rep.retained},
            {"hpd_alpha", rep.alpha},
            {"fdr_level", rep.fdr_level},
            {"bic", fit.bic},
            {"aic", fit.aic},
            {"swap_accept_rates", fit.swap_accept_rates},
            {"parameters", params},
            {"cured_posterior_probabilities", cured},
            {"discoveries", found}};
}

}  // namespace

void save_fit(const std::string& dir, const FitResult& fit, const DesignSchema& schema,
              const FitConfig& cfg)
{
    fs::create_directories(dir);
    {
        const std::string path = (fs::path(dir) / "samples.csv").string();
        auto f = open_out(path);
        write_csv_row(f, fit.column_names);
        std::vector<std::string> cells(static_cast<std::size_t>(fit.samples.cols()));
        for (Eigen::Index t = 0; t < fit.samples.rows(); ++t) {
            for (Eigen::Index c = 0; c < fit.samples.cols(); ++c)
                cells[static_cast<std::size_t>(c)] = format_double(fit.samples(t, c));
            write_csv_row(f, cells);
        }
        check_written(f, path);
    }
    {
        const std::string path = (fs::path(dir) / "latent_draws.csv").string();
        auto f = open_out(path);
        std::vector<std::string> header;
        for (std::size_t i : fit.censored_indices)
            header.push_back("I_" + std::to_string(i + 1));
        write_csv_row(f, header);
        std::string line;
        for (std::size_t t = 0; t < fit.cycles(); ++t) {
            line.clear();
            for (std::size_t j = 0; j < fit.n_censored(); ++j) {
                if (j > 0)
                    line.push_back(',');
                line.push_back(fit.latent(t, j) ? '1' : '0');
            }
            f << line << '\n';
        }
        check_written(f, path);
    }
    {
        const std::string path = (fs::path(dir) / "diagnostics.csv").string();
        auto f = open_out(path);
        std::vector<std::string> header{"cycle", "log_posterior"};
        for (std::size_t c = 0; c < fit.complete_ll_trace.size(); ++c)
            header.push_back("complete_loglik_chain" + std::to_string(c + 1));
        write_csv_row(f, header);
        for (std::size_t t = 0; t < fit.cycles(); ++t) {
            std::vector<std::string> row{std::to_string(t + 1), format_double(fit.log_posterior_trace[t])};
            for (const auto& trace : fit.complete_ll_trace)
                row.push_back(format_double(trace[t]));
            write_csv_row(f, row);
        }
        check_written(f, path);
    }
    {
        const std::string path = (fs::path(dir) / "swap_rates.csv").string();
        auto f = open_out(path);
        write_csv_row(f, {"pair", "heat_a", "heat_b", "attempts", "accepts", "rate"});
        for (std::size_t p = 0; p < fit.swap_stats.attempts.size(); ++p)
            write_csv_row(f, {std::to_string(p + 1) + "-" + std::to_string(p + 2),
                              format_double(fit.temperatures[p]), format_double(fit.temperatures[p + 1]),
                              std::to_string(fit.swap_stats.attempts[p]),
                              std::to_string(fit.swap_stats.accepts[p]),
                              format_double(fit.swap_accept_rates[p])});
        check_written(f, path);
    }
    Json counters = Json::array();
    for (const auto& c : fit.chain_counters)
        counters.push_back({{"mwg_proposals", c.mwg_proposals},
                            {"mwg_accepts", c.mwg_accepts},
                            {"mala_attempts", c.mala_attempts},
                            {"mala_accepts", c.mala_accepts},
                            {"mala_fallbacks", c.mala_fallbacks}});
    const Json manifest = {
        {"tool", "curemc3"},
        {"version", version_string()},
        {"promotion_time", spec_to_json(fit.spec)},
        {"data", design_to_json(cfg.design, cfg.input_path)},
        {"design", schema_to_json(schema)},
        {"design_columns", fit.design_columns},
        {"n_obs", fit.n_obs},
        {"n_parameters", fit.n_parameters},
        {"censored_indices", fit.censored_indices},
        {"temperatures", fit.temperatures},
        {"cycles", fit.cycles()},
        {"chains", fit.temperatures.size()},
        {"sweeps_per_cycle", cfg.mcmc.sweeps_per_cycle},
        {"seed", cfg.mcmc.seed},
        {"threads", cfg.mcmc.threads},
        {"map_index", fit.map_index},
        {"map_log_likelihood", fit.map_log_likelihood},
        {"bic", fit.bic},
        {"aic", fit.aic},
        {"swap_attempts", fit.swap_stats.attempts},
        {"swap_accepts", fit.swap_stats.accepts},
        {"chain_counters", counters},
        {"wall_seconds", fit.wall_seconds},
        {"default_burn", cfg.burn.value_or(default_burn(fit.cycles()))},
        {"config", cfg.source_text},
    };
    const std::string path = (fs::path(dir) / "model.json").string();
    auto f = open_out(path);
    f << manifest.dump(2) << '\n';
    check_written(f, path);
}

StoredFit load_fit(const std::string& dir)
{
    StoredFit out;
    Json m;
    try {
        m = Json::parse(slurp((fs::path(dir) / "model.json").string()));
    } catch (const Json::exception& e) {
        throw DataError("model.json in '" + dir + "' is malformed: " + e.what());
    }
    FitResult& fit = out.fit;
    try {
        fit.spec = spec_from_json(m.at("promotion_time"));
        out.schema = schema_from_json(m.at("design"));
        out.design = design_from_json(m.at("data"));
        out.data_path = m.at("data").at("path").get<std::string>();
        out.default_burn = m.at("default_burn").get<std::size_t>();
        fit.design_columns = m.at("design_columns").get<std::vector<std::string>>();
        fit.n_obs = m.at("n_obs").get<std::size_t>();
        fit.n_parameters = m.at("n_parameters").get<std::size_t>();
        fit.censored_indices = m.at("censored_indices").get<std::vector<std::size_t>>();
        fit.temperatures = m.at("temperatures").get<std::vector<double>>();
        fit.map_index = m.at("map_index").get<std::size_t>();
        fit.map_log_likelihood = m.at("map_log_likelihood").get<double>();
        fit.bic = m.at("bic").is_null() ? std::numeric_limits<double>::quiet_NaN() : m.at("bic").get<double>();
        fit.aic = m.at("aic").get<double>();
        fit.swap_stats.attempts = m.at("swap_attempts").get<std::vector<std::size_t>>();
        fit.swap_stats.accepts = m.at("swap_accepts").get<std::vector<std::size_t>>();
        fit.wall_seconds = m.at("wall_seconds").get<double>();
    } catch (const Json::exception& e) {
        throw DataError("model.json in '" + dir + "' is incomplete: " + e.what());
    }
    fit.swap_accept_rates = fit.swap_stats.rates();

    const CsvTable samples = read_csv_file((fs::path(dir) / "samples.csv").string());
    const std::size_t k = fit.design_columns.size();
    fit.column_names = sample_column_names(fit.spec, k);
    if (samples.header != fit.column_names)
        throw SchemaMismatch("samples.csv columns do not match the stored model");
    fit.samples.resize(static_cast<Eigen::Index>(samples.rows.size()),
                       static_cast<Eigen::Index>(fit.column_names.size()));
    for (std::size_t t = 0; t < samples.rows.size(); ++t) {
        for (std::size_t c = 0; c < fit.column_names.size(); ++c) {
            const auto v = parse_number(samples.rows[t][c]);
            if (!v)
                throw ParseError("samples.csv: bad number", t + 1, fit.column_names[c]);
            fit.samples(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = *v;
        }
    }
    const CsvTable latent = read_csv_file((fs::path(dir) / "latent_draws.csv").string());
    if (latent.header.size() != fit.censored_indices.size() && !fit.censored_indices.empty())
        throw SchemaMismatch("latent_draws.csv does not match the censored subjects");
    fit.latent_draws.reserve(fit.cycles() * fit.n_censored());
    for (const auto& row : latent.rows) {
        for (const auto& cell : row)
            fit.latent_draws.push_back(cell == "1" ? 1 : 0);
    }
    if (fit.latent_draws.size() != fit.cycles() * fit.n_censored())
        throw SchemaMismatch("latent_draws.csv has the wrong number of rows");

    const CsvTable diag = read_csv_file((fs::path(dir) / "diagnostics.csv").string());
    fit.log_posterior_trace.reserve(diag.rows.size());
    fit.complete_ll_trace.assign(diag.header.size() > 2 ? diag.header.size() - 2 : 0, {});
    for (const auto& row : diag.rows) {
        fit.log_posterior_trace.push_back(parse_number(row[1]).value_or(kNegInf));
        for (std::size_t c = 2; c < row.size(); ++c)
            fit.complete_ll_trace[c - 2].push_back(parse_number(row[c]).value_or(kNegInf));
    }
    if (fit.map_index >= fit.cycles())
        throw SchemaMismatch("stored MAP index is out of range");
    fit.map_estimate = fit.draw(fit.map_index);
    return out;
}

std::vector<ModelScore> rank_by_bic(std::vector<ModelScore> scores)
{
    std::stable_sort(scores.begin(), scores.end(),
                     [](const ModelScore& a, const ModelScore& b) { return a.bic < b.bic; });
    return scores;
}

std::string format_synopsis(const FitResult& fit)
{
    std::ostringstream s;
    s << std::setprecision(6);
    s << "Generalized promotion time cure rate model (Metropolis-coupled MCMC)\n";
    s << "  promotion time distribution: " << family_name(fit.spec.family);
    if (!fit.spec.user_name.empty())
        s << " (" << fit.spec.user_name << ")";
    if (fit.spec.is_mixture())
        s << ", K = " << fit.spec.K;
    s << "\n";
    s << "  observations: " << fit.n_obs << ", censored: " << fit.n_censored() << "\n";
    s << "  MCMC cycles: " << fit.cycles() << ", chains: " << fit.temperatures.size() << "\n";
    s << "  BIC: " << fit.bic << "  AIC: " << fit.aic << "  (parameters: " << fit.n_parameters << ")\n";
    if (!fit.swap_accept_rates.empty()) {
        const auto& r = fit.swap_accept_rates;
        s << "  Swap rates of adjacent chains: min " << *std::min_element(r.begin(), r.end())
          << ", median " << median_of(r) << ", max " << *std::max_element(r.begin(), r.end()) << "\n";
    }
    s << "  MAP estimate (log posterior at cycle " << fit.map_index + 1 << "):\n";
    const std::vector<double> row = theta_to_row(fit.map_estimate);
    for (std::size_t c = 0; c < row.size(); ++c) {
        const std::string label = column_label(fit, c);
        std::string name = fit.column_names[c];
        if (!label.empty())
            name += " [" + label + "]";
        s << "    " << std::left << std::setw(28) << name << std::right << std::setw(14) << row[c] << "\n";
    }
    s << "  wall time: " << fit.wall_seconds << " s\n";
    return s.str();
}

std::string format_summary(const FitResult& fit, const SummaryReport& rep)
{
    std::ostringstream s;
    s << std::setprecision(5);
    s << "Posterior summary (" << rep.retained << " draws after burn-in of " << rep.burn << ")\n";
    s << "  " << std::left << std::setw(28) << "parameter" << std::right << std::setw(12) << "MAP"
      << std::setw(12) << "mean" << std::setw(12) << "HPD low" << std::setw(12) << "HPD high";
    for (double q : rep.quantile_levels)
        s << std::setw(12) << ("q" + level_label(q));
    s << "\n";
    for (std::size_t c = 0; c < rep.parameters.size(); ++c) {
        const auto& p = rep.parameters[c];
        std::string name = p.name;
        const std::string label = column_label(fit, c);
        if (!label.empty())
            name += " [" + label + "]";
        s << "  " << std::left << std::setw(28) << name << std::right << std::setw(12) << p.map
          << std::setw(12) << p.mean << std::setw(12) << p.hpd.low << std::setw(12) << p.hpd.high;
        for (double v : p.quantiles)
            s << std::setw(12) << v;
        s << "\n";
    }
    s << "  HPD level: " << 1.0 - rep.alpha << "\n";
    s << "  subjects declared cured at FDR " << rep.fdr_level << ": " << rep.discoveries.size()
      << " of " << rep.censored_indices.size() << " censored\n";
    s << "  BIC: " << fit.bic << "  AIC: " << fit.aic << "\n";
    return s.str();
}

void write_residuals_csv(const std::string& path, const ResidualDiagnostic& diag)
{
    auto f = open_out(path);
    write_csv_row(f, {"residual", "censoring", "km_cumulative_hazard"});
    for (std::size_t i = 0; i < diag.residual.size(); ++i)
        write_csv_row(f, {format_double(diag.residual[i]), std::to_string(diag.status[i]),
                          format_double(diag.km_cumulative_hazard[i])});
    check_written(f, path);
}

void write_predictions_csv(const std::string& path, const PredictionTable& table,
                           bool posterior_mean)
{
    auto f = open_out(path);
    std::vector<std::string> header{"row", "t"};
    for (const char* q : {"survival", "cumulative_hazard", "hazard", "cured_probability"}) {
        header.push_back(q);
        header.push_back(std::string(q) + "_low");
        header.push_back(std::string(q) + "_high");
        if (posterior_mean)
            header.push_back(std::string(q) + "_mean");
    }
    write_csv_row(f, header);
    for (const PredictionRow& r : table.rows) {
        std::vector<std::string> cells{std::to_string(r.row + 1), format_double(r.t)};
        for (const PredictedValue* v : {&r.survival, &r.cumulative_hazard, &r.hazard, &r.cured_probability}) {
            cells.push_back(format_double(v->map));
            cells.push_back(format_double(v->band.low));
            cells.push_back(format_double(v->band.high));
            if (posterior_mean)
                cells.push_back(format_double(v->mean));
        }
        write_csv_row(f, cells);
    }
    check_written(f, path);
}

int run_fit_command(const FitConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        const LoadedDataset ds = load_dataset(cfg.input_path, cfg.design);
        for (const auto& w : ds.warnings)
            err << "warning: " << w << "\n";
        const std::size_t k = ds.data.k();
        PriorConfig prior = cfg.prior;
        if (prior.mu.size() == 0)
            prior.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        if (cfg.prior_sigma_scale)
            prior.Sigma = *cfg.prior_sigma_scale * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                                              static_cast<Eigen::Index>(k));
        Mc3Config mcmc = cfg.mcmc;
        if (mcmc.verbose && !mcmc.progress)
            mcmc.progress = &err;

        const FitResult fit = run_mc3(ds.data, cfg.promotion, prior, mcmc);

        OutputGuard guard(cfg.output_dir);
        for (const char* name : {"samples.csv", "latent_draws.csv", "diagnostics.csv",
                                 "swap_rates.csv", "model.json"})
            guard.file(name);
        save_fit(cfg.output_dir, fit, ds.schema, cfg);

        const std::size_t burn = cfg.burn.value_or(default_burn(fit.cycles()));
        if (fit.cycles() > burn && fit.cycles() - burn >= 10) {
            const SummaryReport rep = summarize(fit, burn, cfg.hpd_alpha, cfg.fdr, cfg.quantiles);
            const std::string path = guard.file("summary.json");
            auto f = open_out(path);
            f << summary_to_json(fit, rep, ds.ids).dump(2) << '\n';
            check_written(f, path);
        } else {
            err << "warning: fewer than 10 draws after burn-in; summary.json not written\n";
        }

        bool residuals_ok = true;
        for (double r : fit.residuals)
            residuals_ok = residuals_ok && std::isfinite(r);
        if (residuals_ok) {
            write_residuals_csv(guard.file("residuals.csv"),
                                residual_diagnostic(fit.residuals, ds.data.delta));
        } else {
            err << "warning: survival is zero at some observed time under the MAP draw; "
                   "residuals.csv not written\n";
        }

        if (cfg.predict) {
            const CsvTable newdata = read_csv_file(cfg.predict->newdata_path);
            const Eigen::MatrixXd X = ds.schema.apply(newdata);
            const PredictionTable table =
                predict(fit, X, cfg.predict->times, cfg.predict->alpha, std::min(burn, fit.cycles() - 1));
            write_predictions_csv(guard.file("predictions.csv"), table, cfg.posterior_mean_predictions);
        }
        guard.commit();
        out << format_synopsis(fit);
        out << "  outputs written to " << cfg.output_dir << "\n";
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run_summary_command(const std::vector<std::string>& fit_dirs, std::optional<std::size_t> burn,
                        double fdr, double alpha, const std::vector<double>& quantiles,
                        std::ostream& out, std::ostream& err)
{
    try {
        if (fit_dirs.empty())
            throw ConfigError("summary needs at least one fit directory");
        std::vector<ModelScore> scores;
        for (const auto& dir : fit_dirs) {
            const StoredFit stored = load_fit(dir);
            const SummaryReport rep =
                summarize(stored.fit, burn.value_or(stored.default_burn), alpha, fdr, quantiles);
            out << "== " << dir << "\n" << format_synopsis(stored.fit) << format_summary(stored.fit, rep);
            std::string label = std::string(family_name(stored.fit.spec.family));
            if (!stored.fit.spec.user_name.empty())
                label += "(" + stored.fit.spec.user_name + ")";
            scores.push_back({dir + " [" + label + "]", stored.fit.bic, stored.fit.aic});
        }
        if (scores.size() > 1) {
            out << "Model ranking by BIC (lower is better):\n";
            std::size_t rank = 1;
            for (const auto& s : rank_by_bic(scores))
                out << "  " << rank++ << ". " << s.label << "  BIC " << format_double(s.bic)
                    << "  AIC " << format_double(s.aic) << "\n";
        }
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run_predict_command(const std::string& fit_dir, const std::string& newdata_path,
                        const std::vector<double>& times, double alpha,
                        std::optional<std::size_t> burn, const std::string& output_path,
                        std::ostream& out, std::ostream& err)
{
    try {
        if (times.empty())
            throw ConfigError("predict needs at least one time point");
        const StoredFit stored = load_fit(fit_dir);
        const CsvTable newdata = read_csv_file(newdata_path);
        const Eigen::MatrixXd X = stored.schema.apply(newdata);
        const PredictionTable table =
            predict(stored.fit, X, times, alpha, burn.value_or(stored.default_burn));
        const std::string path =
            output_path.empty() ? (fs::path(fit_dir) / "predictions.csv").string() : output_path;
        write_predictions_csv(path, table, false);
        out << "wrote " << table.rows.size() << " prediction rows to " << path << "\n";
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run_residuals_command(const std::string& fit_dir, const std::string& data_path,
                          const std::string& output_path, std::ostream& out, std::ostream& err)
{
    try {
        const StoredFit stored = load_fit(fit_dir);
        const std::string input = data_path.empty() ? stored.data_path : data_path;
        const LoadedDataset ds = load_dataset(input, stored.design, &stored.schema);
        const std::vector<double> r = cox_snell_residuals(ds.data, stored.fit.map_estimate, stored.fit.spec);
        const ResidualDiagnostic diag = residual_diagnostic(r, ds.data.delta);
        const std::string path =
            output_path.empty() ? (fs::path(fit_dir) / "residuals.csv").string() : output_path;
        write_residuals_csv(path, diag);
        out << "wrote " << r.size() << " Cox-Snell residuals to " << path << "\n";
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run_simulate_command(const SimulationConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        if (cfg.output_path.empty())
            throw ConfigError("simulation config needs an 'output' path");
        const SimulatedData sim = simulate(cfg);
        write_simulated_csv(sim, cfg.output_path);
        const auto cured = std::count(sim.cured.begin(), sim.cured.end(), std::uint8_t{1});
        out << "wrote " << sim.data.n() << " subjects (" << sim.data.n_events() << " events, " << cured
            << " cured) to " << cfg.output_path << "\n";
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run_bench_command(const FitConfig& cfg, std::size_t cycles, std::ostream& out, std::ostream& err)
{
    try {
        using Clock = std::chrono::steady_clock;
        const LoadedDataset ds = load_dataset(cfg.input_path, cfg.design);
        const std::size_t k = ds.data.k();
        Mc3Config mcmc = cfg.mcmc;
        mcmc.mcmc_cycles = cycles;
        mcmc.verbose = false;
        PriorConfig prior = cfg.prior;
        if (prior.mu.size() == 0)
            prior.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        const Mc3Model model(ds.data, cfg.promotion, prior, mcmc);
        Rng rng = make_stream(mcmc.seed, 1);
        const Chain chain = model.initial_chain(0, rng);
        const Theta& theta = chain.state().theta;

        const int reps = 200;
        auto t0 = Clock::now();
        double sink = 0.0;
        for (int r = 0; r < reps; ++r)
            sink += observed_log_likelihood(ds.data, theta, cfg.promotion);
        const double per_eval = std::chrono::duration<double>(Clock::now() - t0).count() / reps;

        t0 = Clock::now();
        const FitResult fit = run_mc3(ds.data, cfg.promotion, prior, mcmc);
        const double run = std::chrono::duration<double>(Clock::now() - t0).count();
        out << std::setprecision(4);
        out << "n = " << ds.data.n() << ", k = " << k << ", family " << family_name(cfg.promotion.family) << "\n";
        out << "observed log-likelihood: " << per_eval * 1e6 << " us per evaluation (checksum "
            << sink / reps << ")\n";
        out << "sampler: " << cycles << " cycles x " << mcmc.n_chains << " chains x "
            << mcmc.sweeps_per_cycle << " sweeps in " << run << " s (" << run / static_cast<double>(cycles) * 1e3
            << " ms per cycle, " << mcmc.threads << " thread(s))\n";
        (void)fit;
        return kExitSuccess;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace curemc3
