#include "curemc3/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "curemc3/errors.hpp"

namespace curemc3 {

namespace {

using Json = nlohmann::json;

Json parse_json(const std::string& text)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
}

void check_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object())
        throw ConfigError("'" + where + "' must be an object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in '" + where + "'");
    }
}

template <class T>
T get(const Json& obj, const char* key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError("'" + where + "." + key + "': " + e.what());
    }
}

template <class T>
void read_opt(const Json& obj, const char* key, const std::string& where, T& target)
{
    if (obj.contains(key))
        target = get<T>(obj, key, where);
}

std::string resolve(const std::string& path, const std::string& base_dir)
{
    if (path.empty())
        return path;
    const std::filesystem::path p(path);
    if (p.is_absolute())
        return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

PromotionSpec promotion_from_json(const Json& block)
{
    const std::string where = "promotion_time";
    check_keys(block, where,
               {"distribution", "K", "prior_parameters", "prop_scale", "dirichlet_alpha0",
                "user_family"});
    const Family family = parse_family(get<std::string>(block, "distribution", where));
    const auto K = block.contains("K") ? get<std::size_t>(block, "K", where) : std::size_t{2};
    PromotionSpec spec;
    if (family == Family::user || family == Family::user_mixture) {
        if (!block.contains("user_family"))
            throw ConfigError("'promotion_time.user_family' names the registered family to use");
        spec = find_user_family(get<std::string>(block, "user_family", where));
        if (family == Family::user_mixture)
            spec = make_user_mixture(spec, K);
    } else {
        spec = make_promotion_spec(family, family == Family::gamma_mixture ? K : 1);
    }
    if (block.contains("prior_parameters")) {
        const auto table = get<std::vector<std::vector<double>>>(block, "prior_parameters", where);
        spec.prior_parameters.clear();
        for (const auto& row : table) {
            if (row.size() != 2)
                throw ConfigError("'promotion_time.prior_parameters' rows are (shape, scale) pairs");
            spec.prior_parameters.push_back({row[0], row[1]});
        }
    }
    read_opt(block, "prop_scale", where, spec.prop_scale);
    read_opt(block, "dirichlet_alpha0", where, spec.dirichlet_concentration);
    spec.validate();
    return spec;
}

DesignConfig design_from_json(const Json& block, std::string& path, const std::string& base_dir)
{
    const std::string where = "data";
    check_keys(block, where,
               {"path", "time", "censoring", "id", "covariates", "factors", "standardize",
                "intercept"});
    DesignConfig d;
    path = resolve(get<std::string>(block, "path", where), base_dir);
    read_opt(block, "time", where, d.time_column);
    read_opt(block, "censoring", where, d.censoring_column);
    read_opt(block, "id", where, d.id_column);
    read_opt(block, "covariates", where, d.covariates);
    read_opt(block, "standardize", where, d.standardize);
    read_opt(block, "intercept", where, d.intercept);
    if (block.contains("factors")) {
        for (const Json& f : block.at("factors")) {
            FactorSpec spec;
            if (f.is_string()) {
                spec.name = f.get<std::string>();
            } else {
                check_keys(f, "data.factors[]", {"name", "levels", "reference"});
                spec.name = get<std::string>(f, "name", "data.factors[]");
                read_opt(f, "levels", "data.factors[]", spec.levels);
                read_opt(f, "reference", "data.factors[]", spec.reference);
            }
            d.factors.push_back(std::move(spec));
        }
    }
    d.validate();
    return d;
}

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void prior_from_json(const Json& block, FitConfig& cfg)
{
    const std::string where = "prior";
    check_keys(block, where,
               {"mu", "Sigma", "sigma_scale", "a_gamma", "b_gamma", "a_lambda", "b_lambda"});
    if (block.contains("mu"))
        cfg.prior.mu = to_vector(get<std::vector<double>>(block, "mu", where));
    if (block.contains("Sigma")) {
        const auto rows = get<std::vector<std::vector<double>>>(block, "Sigma", where);
        const auto k = static_cast<Eigen::Index>(rows.size());
        cfg.prior.Sigma.resize(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != k)
                throw ConfigError("'prior.Sigma' must be square");
            for (Eigen::Index j = 0; j < k; ++j)
                cfg.prior.Sigma(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    if (block.contains("sigma_scale"))
        cfg.prior_sigma_scale = get<double>(block, "sigma_scale", where);
    read_opt(block, "a_gamma", where, cfg.prior.a_gamma);
    read_opt(block, "b_gamma", where, cfg.prior.b_gamma);
    read_opt(block, "a_lambda", where, cfg.prior.a_lambda);
    read_opt(block, "b_lambda", where, cfg.prior.b_lambda);
}

void mcmc_from_json(const Json& block, Mc3Config& m)
{
    const std::string where = "mcmc";
    check_keys(block, where,
               {"chains", "cycles", "sweeps_per_cycle", "temperatures", "epsilon0",
                "prop_scale_theta", "mala_tau", "mala_probability", "fd_step", "seed", "threads",
                "verbose"});
    read_opt(block, "chains", where, m.n_chains);
    read_opt(block, "cycles", where, m.mcmc_cycles);
    read_opt(block, "sweeps_per_cycle", where, m.sweeps_per_cycle);
    read_opt(block, "temperatures", where, m.temperatures);
    read_opt(block, "epsilon0", where, m.epsilon0);
    read_opt(block, "prop_scale_theta", where, m.prop_scale_theta);
    read_opt(block, "mala_tau", where, m.mala_tau);
    read_opt(block, "mala_probability", where, m.mala_probability);
    read_opt(block, "fd_step", where, m.fd_step);
    read_opt(block, "seed", where, m.seed);
    read_opt(block, "threads", where, m.threads);
    read_opt(block, "verbose", where, m.verbose);
}

void output_from_json(const Json& block, FitConfig& cfg, const std::string& base_dir)
{
    const std::string where = "output";
    check_keys(block, where,
               {"dir", "burn", "fdr", "hpd_alpha", "quantiles", "posterior_mean_predictions"});
    if (block.contains("dir"))
        cfg.output_dir = resolve(get<std::string>(block, "dir", where), base_dir);
    if (block.contains("burn"))
        cfg.burn = get<std::size_t>(block, "burn", where);
    read_opt(block, "fdr", where, cfg.fdr);
    read_opt(block, "hpd_alpha", where, cfg.hpd_alpha);
    read_opt(block, "quantiles", where, cfg.quantiles);
    read_opt(block, "posterior_mean_predictions", where, cfg.posterior_mean_predictions);
}

void validate_levels(const FitConfig& cfg)
{
    if (!(cfg.fdr > 0.0 && cfg.fdr < 1.0))
        throw ConfigError("fdr level must lie in (0, 1)");
    if (!(cfg.hpd_alpha > 0.0 && cfg.hpd_alpha < 1.0))
        throw ConfigError("hpd alpha must lie in (0, 1)");
    for (double q : cfg.quantiles) {
        if (!(q >= 0.0 && q <= 1.0))
            throw ConfigError("quantile levels must lie in [0, 1]");
    }
    if (cfg.predict && !(cfg.predict->alpha > 0.0 && cfg.predict->alpha < 1.0))
        throw ConfigError("prediction band alpha must lie in (0, 1)");
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PromotionSpec parse_promotion_block(const std::string& json_text)
{
    const Json doc = parse_json(json_text);
    if (!doc.contains("promotion_time"))
        throw ConfigError("missing 'promotion_time' block");
    return promotion_from_json(doc.at("promotion_time"));
}

FitConfig parse_fit_config(const std::string& json_text, const std::string& base_dir)
{
    const Json doc = parse_json(json_text);
    check_keys(doc, "(root)", {"data", "promotion_time", "prior", "mcmc", "output", "predict"});
    FitConfig cfg;
    cfg.source_text = json_text;
    if (!doc.contains("data"))
        throw ConfigError("missing 'data' block");
    cfg.design = design_from_json(doc.at("data"), cfg.input_path, base_dir);
    if (doc.contains("promotion_time"))
        cfg.promotion = promotion_from_json(doc.at("promotion_time"));
    if (doc.contains("prior"))
        prior_from_json(doc.at("prior"), cfg);
    if (doc.contains("mcmc"))
        mcmc_from_json(doc.at("mcmc"), cfg.mcmc);
    if (doc.contains("output"))
        output_from_json(doc.at("output"), cfg, base_dir);
    if (doc.contains("predict")) {
        const Json& p = doc.at("predict");
        check_keys(p, "predict", {"newdata", "times", "alpha"});
        PredictRequest req;
        req.newdata_path = resolve(get<std::string>(p, "newdata", "predict"), base_dir);
        req.times = get<std::vector<double>>(p, "times", "predict");
        read_opt(p, "alpha", "predict", req.alpha);
        cfg.predict = std::move(req);
    }
    validate_levels(cfg);
    return cfg;
}

FitConfig load_fit_config(const std::string& path)
{
    const std::string base = std::filesystem::path(path).parent_path().string();
    return parse_fit_config(slurp(path), base.empty() ? "." : base);
}

void apply_overrides(FitConfig& cfg, const CliOverrides& o)
{
    if (o.cycles)
        cfg.mcmc.mcmc_cycles = *o.cycles;
    if (o.chains) {
        cfg.mcmc.n_chains = *o.chains;
        if (cfg.mcmc.temperatures.size() != *o.chains)
            cfg.mcmc.temperatures.clear();
    }
    if (o.threads)
        cfg.mcmc.threads = *o.threads;
    if (o.seed)
        cfg.mcmc.seed = *o.seed;
    if (o.burn)
        cfg.burn = *o.burn;
    if (o.fdr)
        cfg.fdr = *o.fdr;
    if (o.alpha)
        cfg.hpd_alpha = *o.alpha;
    if (o.output_dir)
        cfg.output_dir = *o.output_dir;
    if (o.verbose)
        cfg.mcmc.verbose = true;
    validate_levels(cfg);
}

}  // namespace curemc3
