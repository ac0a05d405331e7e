#include "cqabench/table.hpp"

#include "cqabench/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace cqabench {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::string_view, 2> kCompositeNames{"User Development Index",
                                                          "User Management Index"};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<double> parse_number(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

// Gender is nominal in the source data; models only see numbers.
std::optional<double> parse_gender(std::string_view cell) {
    const std::string v = lower(std::string(cell));
    if (v == "male" || v == "m") return 0.0;
    if (v == "female" || v == "f") return 1.0;
    return parse_number(cell);
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Predictor: return "predictor";
        case Role::Target: return "target";
        case Role::ExcludedComposite: return "excluded-composite";
    }
    return "?";
}

std::string_view to_string(Task task) {
    return task == Task::Regression ? "regression" : "classification";
}

std::string_view to_string(ResearchQuestion rq) {
    switch (rq) {
        case ResearchQuestion::RQ1: return "RQ1";
        case ResearchQuestion::RQ2: return "RQ2";
        case ResearchQuestion::RQ3: return "RQ3";
    }
    return "?";
}

ResearchQuestion parse_research_question(std::string_view text) {
    const std::string v = lower(std::string(text));
    if (v == "rq1") return ResearchQuestion::RQ1;
    if (v == "rq2") return ResearchQuestion::RQ2;
    if (v == "rq3") return ResearchQuestion::RQ3;
    throw ConfigError("unknown research question '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw SchemaError("empty column name");
        if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
        const bool composite_name =
            std::find(kCompositeNames.begin(), kCompositeNames.end(), c.name) != kCompositeNames.end();
        if (composite_name && c.role != Role::ExcludedComposite)
            throw SchemaError("composite column '" + c.name + "' must be flagged excluded-composite");
    }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

std::size_t FeatureSchema::require(std::string_view name) const {
    if (auto i = index_of(name)) return *i;
    throw SchemaError(std::string(name));
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

std::vector<std::string> FeatureSchema::names_with_role(Role role) const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
        if (c.role == role) out.push_back(c.name);
    return out;
}

FeatureSchema FeatureSchema::select(std::span<const std::size_t> indices) const {
    std::vector<ColumnSpec> cols;
    cols.reserve(indices.size());
    for (auto i : indices) cols.push_back(columns_.at(i));
    return FeatureSchema(std::move(cols));
}

FeatureSchema FeatureSchema::with_role(std::string_view name, Role role) const {
    auto cols = columns_;
    cols.at(require(name)).role = role;
    return FeatureSchema(std::move(cols));
}

void FeatureSchema::validate_targets(std::span<const TargetSpec> targets) const {
    for (const auto& t : targets) {
        if (!contains(t.name)) throw SchemaError("target '" + t.name + "' is not in the schema");
    }
}

void validate_target_set(ResearchQuestion rq, std::span<const TargetSpec> targets) {
    std::size_t expected = rq == ResearchQuestion::RQ2 ? 20 : 1;
    if (targets.size() != expected)
        throw ConfigError(std::string(to_string(rq)) + " expects " + std::to_string(expected) + " target(s), got " +
                          std::to_string(targets.size()));
    const Task task = rq == ResearchQuestion::RQ3 ? Task::Classification : Task::Regression;
    std::unordered_set<std::string> seen;
    for (const auto& t : targets) {
        if (t.rq != rq) throw ConfigError("target '" + t.name + "' belongs to another research question");
        if (t.task != task) throw ConfigError("target '" + t.name + "' has the wrong task kind");
        if (!seen.insert(t.name).second) throw ConfigError("duplicate target '" + t.name + "'");
    }
}

UserFeatureTable::UserFeatureTable(FeatureSchema schema, Eigen::MatrixXd values, MissingMask mask)
    : schema_(std::move(schema)), values_(std::move(values)), mask_(std::move(mask)) {
    if (static_cast<std::size_t>(values_.cols()) != schema_.size())
        throw SchemaError("matrix has " + std::to_string(values_.cols()) + " columns but schema has " +
                          std::to_string(schema_.size()));
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
        throw SchemaError("mask dimensions do not match the value matrix");
    for (Eigen::Index c = 0; c < values_.cols(); ++c)
        for (Eigen::Index r = 0; r < values_.rows(); ++r)
            if (mask_(r, c)) values_(r, c) = kMissing;
}

UserFeatureTable UserFeatureTable::complete(FeatureSchema schema, Eigen::MatrixXd values) {
    MissingMask mask = MissingMask::Constant(values.rows(), values.cols(), false);
    return UserFeatureTable(std::move(schema), std::move(values), std::move(mask));
}

double UserFeatureTable::at(std::size_t row, std::size_t col) const {
    if (mask_(row, col))
        throw SchemaError("cell (" + std::to_string(row) + ", " + schema_.column(col).name + ") is missing");
    return values_(row, col);
}

std::size_t UserFeatureTable::missing_count(std::size_t col) const {
    return static_cast<std::size_t>(mask_.col(static_cast<Eigen::Index>(col)).count());
}

std::size_t UserFeatureTable::missing_count() const { return static_cast<std::size_t>(mask_.count()); }

Eigen::VectorXd UserFeatureTable::column(std::string_view name) const {
    const auto c = schema_.require(name);
    if (missing_count(c) > 0) throw SchemaError("column '" + std::string(name) + "' has missing values");
    return values_.col(static_cast<Eigen::Index>(c));
}

Eigen::MatrixXd UserFeatureTable::matrix(std::span<const std::string> names) const {
    Eigen::MatrixXd out(values_.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = column(names[j]);
    return out;
}

UserFeatureTable UserFeatureTable::with_column(std::size_t col, const Eigen::VectorXd& values,
                                               const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) const {
    if (values.size() != values_.rows() || mask.size() != values_.rows())
        throw SchemaError("replacement column has the wrong length");
    UserFeatureTable out = *this;
    out.values_.col(static_cast<Eigen::Index>(col)) = values;
    out.mask_.col(static_cast<Eigen::Index>(col)) = mask;
    for (Eigen::Index r = 0; r < values_.rows(); ++r)
        if (mask(r)) out.values_(r, static_cast<Eigen::Index>(col)) = kMissing;
    return out;
}

UserFeatureTable UserFeatureTable::select_columns(std::span<const std::string> names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(schema_.require(n));
    Eigen::MatrixXd v(values_.rows(), static_cast<Eigen::Index>(idx.size()));
    MissingMask m(values_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        v.col(static_cast<Eigen::Index>(j)) = values_.col(static_cast<Eigen::Index>(idx[j]));
        m.col(static_cast<Eigen::Index>(j)) = mask_.col(static_cast<Eigen::Index>(idx[j]));
    }
    return UserFeatureTable(schema_.select(idx), std::move(v), std::move(m));
}

UserFeatureTable UserFeatureTable::drop_columns(std::span<const std::string> names) const {
    for (const auto& n : names) schema_.require(n);
    std::vector<std::string> keep;
    for (const auto& c : schema_.columns())
        if (std::find(names.begin(), names.end(), c.name) == names.end()) keep.push_back(c.name);
    return select_columns(keep);
}

UserFeatureTable UserFeatureTable::select_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), values_.cols());
    MissingMask m(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= this->rows()) throw SchemaError("row index out of range");
        v.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
        m.row(static_cast<Eigen::Index>(i)) = mask_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return UserFeatureTable(schema_, std::move(v), std::move(m));
}

UserFeatureTable UserFeatureTable::with_schema(FeatureSchema schema) const {
    if (schema.names() != schema_.names()) throw SchemaError("replacement schema must keep column names and order");
    return UserFeatureTable(std::move(schema), values_, mask_);
}

bool UserFeatureTable::identical(const UserFeatureTable& other) const {
    if (!(schema_ == other.schema_)) return false;
    if (values_.rows() != other.values_.rows() || values_.cols() != other.values_.cols()) return false;
    if ((mask_ != other.mask_).any()) return false;
    for (Eigen::Index c = 0; c < values_.cols(); ++c)
        for (Eigen::Index r = 0; r < values_.rows(); ++r) {
            if (mask_(r, c)) continue;
            const double a = values_(r, c);
            const double b = other.values_(r, c);
            if (std::memcmp(&a, &b, sizeof(double)) != 0) return false;
        }
    return true;
}

std::vector<std::string> split_record(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

UserFeatureTable read_table(std::istream& in, const FeatureSchema& schema, TableFormat format) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row", 0);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    auto header = split_record(line, format.delimiter);
    for (auto& h : header) h = trim(h);

    std::vector<std::size_t> source_of(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto it = std::find(header.begin(), header.end(), schema.column(j).name);
        if (it == header.end()) throw SchemaError(schema.column(j).name);
        source_of[j] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<std::vector<double>> cells;
    std::vector<std::vector<char>> missing;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_record(line, format.delimiter);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(header.size()),
                             row);
        std::vector<double> r(schema.size(), kMissing);
        std::vector<char> m(schema.size(), 1);
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const std::string cell = trim(fields[source_of[j]]);
            const auto v = schema.column(j).name == "Gender" ? parse_gender(cell) : parse_number(cell);
            if (v) {
                r[j] = *v;
                m[j] = 0;
            }
        }
        cells.push_back(std::move(r));
        missing.push_back(std::move(m));
        ++row;
    }

    Eigen::MatrixXd values(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(schema.size()));
    MissingMask mask(values.rows(), values.cols());
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = 0; j < schema.size(); ++j) {
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i][j];
            mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = missing[i][j] != 0;
        }
    return UserFeatureTable(schema, std::move(values), std::move(mask));
}

UserFeatureTable load_table(const std::filesystem::path& source, const FeatureSchema& schema, TableFormat format) {
    std::ifstream in(source);
    if (!in) throw Error("load", "cannot open '" + source.string() + "'");
    return read_table(in, schema, format);
}

void write_table(std::ostream& out, const UserFeatureTable& table, TableFormat format) {
    const auto& schema = table.schema();
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (j) out << format.delimiter;
        const auto& name = schema.column(j).name;
        if (name.find(format.delimiter) != std::string::npos || name.find('"') != std::string::npos) {
            out << '"';
            for (char ch : name) out << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
            out << '"';
        } else {
            out << name;
        }
    }
    out << '\n';
    std::array<char, 64> buf{};
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (j) out << format.delimiter;
            if (table.missing(i, j)) continue;
            auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), table.at(i, j));
            out.write(buf.data(), ptr - buf.data());
        }
        out << '\n';
    }
}

void save_table(const std::filesystem::path& path, const UserFeatureTable& table, TableFormat format) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    write_table(out, table, format);
}

}  // namespace cqabench
