#include "curemc3/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "curemc3/errors.hpp"

namespace curemc3 {

namespace {

double parse_cell(const std::string& cell, std::size_t row, const std::string& column)
{
    const auto v = parse_number(cell);
    if (!v || !std::isfinite(*v))
        throw ParseError("row " + std::to_string(row) + ", column '" + column +
                             "': cannot parse '" + cell + "' as a number",
                         row, column);
    return *v;
}

std::vector<std::string> factor_levels(const FactorSpec& f, const std::vector<std::string>& observed)
{
    std::vector<std::string> levels;
    if (f.levels.empty()) {
        const std::set<std::string> uniq(observed.begin(), observed.end());
        levels.assign(uniq.begin(), uniq.end());
    } else {
        levels = f.levels;
        for (const std::string& v : observed) {
            if (std::find(levels.begin(), levels.end(), v) == levels.end())
                throw UnseenLevel("factor '" + f.name + "' has undeclared level '" + v + "'");
        }
    }
    if (!f.reference.empty()) {
        const auto it = std::find(levels.begin(), levels.end(), f.reference);
        if (it == levels.end())
            throw ConfigError("reference level '" + f.reference + "' is not a level of factor '" +
                              f.name + "'");
        std::rotate(levels.begin(), it, it + 1);
    }
    if (levels.size() < 2)
        throw ConfigError("factor '" + f.name + "' needs at least two levels");
    return levels;
}

}  // namespace

void DesignConfig::validate() const
{
    if (time_column.empty() || censoring_column.empty())
        throw ConfigError("time and censoring columns must be named");
    if (time_column == censoring_column)
        throw ConfigError("time and censoring columns must differ");
    std::set<std::string> seen;
    auto claim = [&](const std::string& name) {
        if (name == time_column || name == censoring_column || (!id_column.empty() && name == id_column))
            throw ConfigError("column '" + name + "' cannot be both a role column and a covariate");
        if (!seen.insert(name).second)
            throw ConfigError("covariate '" + name + "' is declared twice");
    };
    for (const auto& c : covariates)
        claim(c);
    for (const auto& f : factors)
        claim(f.name);
    for (const auto& s : standardize) {
        if (std::find(covariates.begin(), covariates.end(), s) == covariates.end())
            throw ConfigError("standardized column '" + s + "' is not a numeric covariate");
    }
    if (!intercept && covariates.empty() && factors.empty())
        throw ConfigError("the design has no columns");
}

Eigen::MatrixXd DesignSchema::apply(const CsvTable& table) const
{
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(width()));
    Eigen::Index col = 0;
    if (intercept)
        X.col(col++).setOnes();
    for (const DesignTerm& term : terms) {
        const auto src = table.find_column(term.name);
        if (!src)
            throw SchemaMismatch("new data lacks the column '" + term.name + "'");
        if (!term.is_factor) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::string& cell = table.rows[static_cast<std::size_t>(i)][*src];
                const std::size_t row = static_cast<std::size_t>(i) + 1;
                if (is_missing(cell))
                    throw ParseError("row " + std::to_string(row) + ": missing value for '" +
                                         term.name + "'",
                                     row, term.name);
                X(i, col) = (parse_cell(cell, row, term.name) - term.center) / term.scale;
            }
            ++col;
            continue;
        }
        const auto width_f = static_cast<Eigen::Index>(term.levels.size() - 1);
        X.block(0, col, n, width_f).setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string& cell = table.rows[static_cast<std::size_t>(i)][*src];
            const auto it = std::find(term.levels.begin(), term.levels.end(), cell);
            if (it == term.levels.end())
                throw UnseenLevel("factor '" + term.name + "' has unseen level '" + cell + "'");
            const auto level = static_cast<Eigen::Index>(it - term.levels.begin());
            if (level > 0)
                X(i, col + level - 1) = 1.0;
        }
        col += width_f;
    }
    return X;
}

DesignMatrix build_design_matrix(const CsvTable& raw, const DesignConfig& cfg)
{
    cfg.validate();
    DesignMatrix out;
    DesignSchema& schema = out.schema;
    schema.intercept = cfg.intercept;
    if (cfg.intercept)
        schema.column_names.push_back("(Intercept)");
    const std::size_t n = raw.rows.size();

    for (const std::string& name : cfg.covariates) {
        const std::size_t src = raw.column(name);
        DesignTerm term;
        term.name = name;
        term.standardized =
            std::find(cfg.standardize.begin(), cfg.standardize.end(), name) != cfg.standardize.end();
        if (term.standardized) {
            double sum = 0.0;
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = parse_cell(raw.rows[i][src], i + 1, name);
                sum += v[i];
            }
            const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
            double ss = 0.0;
            for (double x : v)
                ss += (x - mean) * (x - mean);
            const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
            term.center = mean;
            if (sd > 0.0) {
                term.scale = sd;
            } else {
                out.warnings.push_back("column '" + name + "' is constant; centered but not scaled");
            }
        }
        schema.column_names.push_back(name);
        schema.terms.push_back(std::move(term));
    }
    for (const FactorSpec& f : cfg.factors) {
        const std::size_t src = raw.column(f.name);
        std::vector<std::string> observed;
        observed.reserve(n);
        for (const auto& row : raw.rows)
            observed.push_back(row[src]);
        DesignTerm term;
        term.name = f.name;
        term.is_factor = true;
        term.levels = factor_levels(f, observed);
        for (std::size_t l = 1; l < term.levels.size(); ++l)
            schema.column_names.push_back(f.name + term.levels[l]);
        schema.terms.push_back(std::move(term));
    }
    out.X = schema.apply(raw);
    out.column_names = schema.column_names;

    bool varying_numeric = false;
    for (Eigen::Index j = cfg.intercept ? 1 : 0; j < out.X.cols(); ++j) {
        const bool constant = n == 0 || out.X.col(j).maxCoeff() == out.X.col(j).minCoeff();
        if (constant)
            out.warnings.push_back("design column '" + out.column_names[static_cast<std::size_t>(j)] +
                                   "' is constant");
    }
    for (std::size_t t = 0; t < cfg.covariates.size(); ++t) {
        const Eigen::Index j = (cfg.intercept ? 1 : 0) + static_cast<Eigen::Index>(t);
        if (n > 0 && out.X.col(j).maxCoeff() > out.X.col(j).minCoeff())
            varying_numeric = true;
    }
    if (!varying_numeric)
        out.warnings.push_back(
            "no non-constant numeric covariate: the cure-rate parameters may be weakly identified");
    return out;
}

LoadedDataset load_dataset(const CsvTable& table, const DesignConfig& cfg,
                           const DesignSchema* schema)
{
    cfg.validate();
    const std::size_t t_col = table.column(cfg.time_column);
    const std::size_t c_col = table.column(cfg.censoring_column);
    std::vector<std::size_t> required{t_col, c_col};
    for (const auto& c : cfg.covariates)
        required.push_back(table.column(c));
    for (const auto& f : cfg.factors)
        required.push_back(table.column(f.name));
    const std::optional<std::size_t> id_col =
        cfg.id_column.empty() ? std::nullopt : std::optional<std::size_t>(table.column(cfg.id_column));

    LoadedDataset out;
    CsvTable kept;
    kept.header = table.header;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const bool missing = std::any_of(required.begin(), required.end(),
                                         [&](std::size_t j) { return is_missing(row[j]); });
        if (missing) {
            ++out.dropped_rows;
            continue;
        }
        const std::size_t row_no = r + 1;
        const double y = parse_cell(row[t_col], row_no, cfg.time_column);
        if (!(y > 0.0))
            throw ParseError("row " + std::to_string(row_no) + ": time must be > 0", row_no,
                             cfg.time_column);
        const std::string& cs = row[c_col];
        double d = 0.0;
        if (cs == "true" || cs == "TRUE")
            d = 1.0;
        else if (cs == "false" || cs == "FALSE")
            d = 0.0;
        else
            d = parse_cell(cs, row_no, cfg.censoring_column);
        if (d != 0.0 && d != 1.0)
            throw ParseError("row " + std::to_string(row_no) + ": censoring value '" + cs +
                                 "' is not 0 or 1",
                             row_no, cfg.censoring_column);
        out.data.y.push_back(y);
        out.data.delta.push_back(static_cast<std::uint8_t>(d));
        out.source_rows.push_back(row_no);
        out.ids.push_back(id_col ? row[*id_col] : std::to_string(row_no));
        kept.rows.push_back(row);
    }
    if (kept.rows.empty())
        throw EmptyDataset("no complete rows in the input (" + std::to_string(out.dropped_rows) +
                           " dropped)");
    if (out.dropped_rows > 0)
        out.warnings.push_back("dropped " + std::to_string(out.dropped_rows) +
                               " row(s) with missing values");
    if (schema) {
        out.data.X = schema->apply(kept);
        out.data.column_names = schema->column_names;
        out.schema = *schema;
    } else {
        DesignMatrix dm = build_design_matrix(kept, cfg);
        out.data.X = std::move(dm.X);
        out.data.column_names = dm.column_names;
        out.schema = std::move(dm.schema);
        out.warnings.insert(out.warnings.end(), dm.warnings.begin(), dm.warnings.end());
    }
    out.data.validate();
    return out;
}

LoadedDataset load_dataset(const std::string& path, const DesignConfig& cfg,
                           const DesignSchema* schema)
{
    return load_dataset(read_csv_file(path), cfg, schema);
}

}  // namespace curemc3
