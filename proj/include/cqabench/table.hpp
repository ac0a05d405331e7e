#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cqabench {

enum class Role { Predictor, Target, ExcludedComposite };
enum class Task { Regression, Classification };
enum class ResearchQuestion { RQ1, RQ2, RQ3 };

std::string_view to_string(Role role);
std::string_view to_string(Task task);
std::string_view to_string(ResearchQuestion rq);
ResearchQuestion parse_research_question(std::string_view text);

struct ColumnSpec {
    std::string name;
    Role role = Role::Predictor;
    std::set<std::string> task_targets;

    bool operator==(const ColumnSpec&) const = default;
};

struct TargetSpec {
    std::string name;
    Task task = Task::Regression;
    ResearchQuestion rq = ResearchQuestion::RQ1;
};

// Ordered, uniquely named column list. Construction validates names and the
// composite-column flags; everything else is a read-only view.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<ColumnSpec> columns);

    std::size_t size() const noexcept { return columns_.size(); }
    const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
    const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    // Like index_of but throws SchemaError naming the column.
    std::size_t require(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    std::vector<std::string> names() const;
    std::vector<std::string> names_with_role(Role role) const;

    FeatureSchema select(std::span<const std::size_t> indices) const;
    FeatureSchema with_role(std::string_view name, Role role) const;

    // Every target must exist in the schema.
    void validate_targets(std::span<const TargetSpec> targets) const;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<ColumnSpec> columns_;
};

// Checks the per-question target cardinalities (1 / 20 / 1).
void validate_target_set(ResearchQuestion rq, std::span<const TargetSpec> targets);

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// n x m numeric matrix with an authoritative missingness mask. Masked cells
// hold a quiet NaN and are never handed out as values.
class UserFeatureTable {
public:
    UserFeatureTable() = default;
    UserFeatureTable(FeatureSchema schema, Eigen::MatrixXd values, MissingMask mask);

    static UserFeatureTable complete(FeatureSchema schema, Eigen::MatrixXd values);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    const FeatureSchema& schema() const noexcept { return schema_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const MissingMask& mask() const noexcept { return mask_; }

    bool missing(std::size_t row, std::size_t col) const { return mask_(row, col); }
    double at(std::size_t row, std::size_t col) const;
    std::size_t missing_count(std::size_t col) const;
    std::size_t missing_count() const;
    bool column_complete(std::size_t col) const { return missing_count(col) == 0; }

    // Column values; throws if any cell in the column is masked.
    Eigen::VectorXd column(std::string_view name) const;
    // Dense matrix of the named columns; throws if any selected cell is masked.
    Eigen::MatrixXd matrix(std::span<const std::string> names) const;

    UserFeatureTable with_column(std::size_t col, const Eigen::VectorXd& values,
                                 const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) const;
    UserFeatureTable select_columns(std::span<const std::string> names) const;
    UserFeatureTable drop_columns(std::span<const std::string> names) const;
    UserFeatureTable select_rows(std::span<const std::size_t> rows) const;
    UserFeatureTable with_schema(FeatureSchema schema) const;

    // Bit-level equality: schema, mask, and every observed cell.
    bool identical(const UserFeatureTable& other) const;

private:
    FeatureSchema schema_;
    Eigen::MatrixXd values_;
    MissingMask mask_;
};

struct TableFormat {
    char delimiter = ',';
};

// Reads a delimiter-separated file with a header row. Blank or non-numeric
// cells become masked-missing; columns not in the schema are ignored.
UserFeatureTable load_table(const std::filesystem::path& source, const FeatureSchema& schema,
                            TableFormat format = {});
UserFeatureTable read_table(std::istream& in, const FeatureSchema& schema, TableFormat format = {});

// Writes all schema columns; masked cells are empty, values use round-trip
// precision.
void write_table(std::ostream& out, const UserFeatureTable& table, TableFormat format = {});
void save_table(const std::filesystem::path& path, const UserFeatureTable& table, TableFormat format = {});

// Splits one delimiter-separated line, honouring double-quoted fields.
std::vector<std::string> split_record(std::string_view line, char delimiter);

}  // namespace cqabench
