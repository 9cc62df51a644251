#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "curemc3/csv.hpp"
#include "curemc3/model.hpp"

namespace curemc3 {

/// Declared factor: optional level order and reference level.
struct FactorSpec
{
    std::string name;
    std::vector<std::string> levels;  // empty: lexicographic order of observed levels
    std::string reference;            // empty: first level
};

/// Column roles of an input table.
struct DesignConfig
{
    std::string time_column = "time";
    std::string censoring_column = "censoring";
    std::string id_column;  // optional subject identifier
    std::vector<std::string> covariates;
    std::vector<FactorSpec> factors;
    std::vector<std::string> standardize;
    bool intercept = true;

    /// Throws ConfigError when roles overlap.
    void validate() const;
};

/// Everything needed to rebuild design rows for new data.
struct DesignTerm
{
    std::string name;
    bool is_factor = false;
    bool standardized = false;
    double center = 0.0;
    double scale = 1.0;
    std::vector<std::string> levels;  // factors: levels[0] is the reference
};

struct DesignSchema
{
    bool intercept = true;
    std::vector<DesignTerm> terms;
    std::vector<std::string> column_names;

    std::size_t width() const noexcept { return column_names.size(); }

    /// Design rows for raw covariate values (numeric columns on the raw
    /// scale, standardized with the stored constants). Throws UnseenLevel or
    /// SchemaMismatch.
    Eigen::MatrixXd apply(const CsvTable& table) const;
};

struct DesignMatrix
{
    Eigen::MatrixXd X;
    std::vector<std::string> column_names;
    DesignSchema schema;
    std::vector<std::string> warnings;
};

/// Intercept first, then numeric covariates (optionally standardized), then
/// L - 1 treatment-coded indicators per factor named factor + level.
DesignMatrix build_design_matrix(const CsvTable& raw, const DesignConfig& cfg);

struct LoadedDataset
{
    SurvivalDataset data;
    DesignSchema schema;
    std::size_t dropped_rows = 0;
    std::vector<std::size_t> source_rows;  // 1-based input row per kept subject
    std::vector<std::string> ids;          // id column values (or row numbers)
    std::vector<std::string> warnings;
};

/// Parses, drops rows with missing required cells and builds the design.
/// Throws ParseError (with row/column) or EmptyDataset.
/// With `schema`, the design is rebuilt from the stored terms (factor levels
/// and standardization constants) instead of being learned from the table.
LoadedDataset load_dataset(const CsvTable& table, const DesignConfig& cfg,
                           const DesignSchema* schema = nullptr);
LoadedDataset load_dataset(const std::string& path, const DesignConfig& cfg,
                           const DesignSchema* schema = nullptr);

}  // namespace curemc3
