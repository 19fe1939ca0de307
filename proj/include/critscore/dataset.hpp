#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace critscore {

/// One independent group: response vector with its fixed- and random-effect
/// design matrices.
struct Group {
    Eigen::VectorXd y;  // r_i
    Eigen::MatrixXd X;  // r_i x d2
    Eigen::MatrixXd Z;  // r_i x q
};

/// Grouped longitudinal data plus the assignment of random-effect columns to
/// scale parameters (several columns may share one scale).
struct GroupedDataset {
    std::vector<Group> groups;
    std::vector<int> scale_map;  // Z column k -> scale index in [0, n_scales)

    // Provenance, kept for serialization; empty when built programmatically.
    std::vector<std::string> group_ids;
    std::string response_name = "y";
    std::vector<std::string> fixed_names;
    std::vector<std::string> random_names;
    std::vector<std::string> scale_names;

    int n_groups() const { return static_cast<int>(groups.size()); }
    int n_fixed() const { return groups.empty() ? 0 : static_cast<int>(groups[0].X.cols()); }
    int n_random() const { return groups.empty() ? 0 : static_cast<int>(groups[0].Z.cols()); }
    int n_scales() const;

    /// Dimensional invariants; throws Error on violation.
    void validate() const;
};

/// y ~ fixed terms | re(term)[:scale] formula. Terms are column names or the
/// literal 1 for an intercept; re terms sharing a :scale label share one
/// scale parameter.
struct ModelFormula {
    std::string response;
    std::vector<std::string> fixed_terms;                 // "1" means intercept
    std::vector<std::pair<std::string, std::string>> random_terms;  // (term, scale label)

    static ModelFormula parse(const std::string& text);
};

/// Raw long-format table: a group id column plus named numeric columns.
struct LongTable {
    std::vector<std::string> columns;                  // excluding the group column
    std::vector<std::string> group_of_row;
    std::vector<std::vector<double>> rows;             // aligned with `columns`

    std::size_t n_rows() const { return rows.size(); }
    int column_index(const std::string& name) const;   // -1 when absent
};

LongTable read_long_csv(const std::string& path);
LongTable parse_long_table(const std::string& text);
std::string write_long_table(const LongTable& table);

/// Assemble X/Z per group from a parsed table, groups in first-appearance
/// order. Throws MissingColumn / EmptyGroup with context.
GroupedDataset build_dataset(const LongTable& table, const ModelFormula& formula);

/// read_long_csv + build_dataset in one step.
GroupedDataset parse_long_csv(const std::string& path, const std::string& formula);

/// Long-format table for a dataset built from a table (uses the stored
/// provenance); numbers serialized with 17 significant digits so a
/// write/parse round trip is bit-exact.
LongTable dataset_to_table(const GroupedDataset& data);

}  // namespace critscore
