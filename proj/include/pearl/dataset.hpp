#pragma once

#include <pearl/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pearl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// One row of a dataset: covariates, treatment in {-1,+1}, outcome.
struct Observation {
    Vector x;
    int a = 1;
    double y = 0.0;
};

/// n observations of (x, a, y) stored column-major. Immutable after creation.
class Dataset {
public:
    Dataset() = default;

    Dataset(Matrix x, Eigen::VectorXi a, Vector y, std::vector<std::string> column_names = {})
        : x_(std::move(x)), a_(std::move(a)), y_(std::move(y)), names_(std::move(column_names))
    {
        validate();
    }

    Index n() const noexcept { return x_.rows(); }
    Index p() const noexcept { return x_.cols(); }

    const Matrix& x() const noexcept { return x_; }
    const Eigen::VectorXi& a() const noexcept { return a_; }
    const Vector& y() const noexcept { return y_; }
    const std::vector<std::string>& column_names() const noexcept { return names_; }

    std::string column_name(Index j) const
    {
        if (!names_.empty())
            return names_[static_cast<std::size_t>(j)];
        return "x" + std::to_string(j + 1);
    }

    Observation observation(Index i) const { return {x_.row(i).transpose(), a_(i), y_(i)}; }

    Dataset subset(std::span<const Index> rows) const
    {
        Matrix xs(static_cast<Index>(rows.size()), p());
        Eigen::VectorXi as(xs.rows());
        Vector ys(xs.rows());
        for (Index r = 0; r < xs.rows(); ++r) {
            const Index i = rows[static_cast<std::size_t>(r)];
            xs.row(r) = x_.row(i);
            as(r) = a_(i);
            ys(r) = y_(i);
        }
        return Dataset(std::move(xs), std::move(as), std::move(ys), names_);
    }

    bool has_both_arms() const
    {
        return (a_.array() == 1).any() && (a_.array() == -1).any();
    }

    /// Copy with outcomes replaced; used by tests that perturb responses.
    Dataset with_outcomes(Vector y) const { return Dataset(x_, a_, std::move(y), names_); }

    /// Copy with covariates replaced (same n).
    Dataset with_covariates(Matrix x) const { return Dataset(std::move(x), a_, y_, {}); }

private:
    void validate() const
    {
        if (x_.rows() < 1)
            throw ValidationError("dataset must contain at least one observation");
        if (a_.size() != x_.rows() || y_.size() != x_.rows())
            throw ValidationError("covariate, treatment and outcome lengths differ");
        if (!names_.empty() && static_cast<Index>(names_.size()) != x_.cols())
            throw ValidationError("column_names length does not match covariate dimension");
        for (Index i = 0; i < x_.rows(); ++i) {
            if (a_(i) != 1 && a_(i) != -1)
                throw ValidationError("treatment at row " + std::to_string(i + 1) + " is not -1 or +1");
            if (!std::isfinite(y_(i)))
                throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
        }
        if (!x_.allFinite())
            throw ValidationError("covariates contain non-finite values");
    }

    Matrix x_;
    Eigen::VectorXi a_;
    Vector y_;
    std::vector<std::string> names_;
};

/// Which CSV columns hold the outcome, treatment and covariates, and how the
/// raw treatment strings map onto {-1,+1}.
struct ColumnSpec {
    std::string outcome = "y";
    std::string treatment = "a";
    std::vector<std::string> covariates; // empty: every other column, in file order
    std::map<std::string, int> treatment_coding{{"-1", -1}, {"1", 1}, {"+1", 1}};
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

inline double parse_cell(const std::string& text, std::size_t row, const std::string& column)
{
    const char* begin = text.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (text.empty() || end != begin + text.size())
        throw ValidationError("malformed numeric value '" + text + "' at row " + std::to_string(row) +
                              ", column " + column);
    if (!std::isfinite(value))
        throw ValidationError("non-finite value at row " + std::to_string(row) + ", column " + column);
    return value;
}

} // namespace detail

/// Parse a dataset from CSV text with a header row. Row numbers in errors are
/// 1-based data rows (the header is row 0).
inline Dataset parse_dataset(std::istream& in, const ColumnSpec& spec)
{
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("empty CSV input");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line.erase(0, 3); // UTF-8 BOM
    const auto header = detail::split_csv_line(line);

    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name)
                return c;
        throw ValidationError("column '" + name + "' not found in header");
    };
    const std::size_t y_col = find_column(spec.outcome);
    const std::size_t a_col = find_column(spec.treatment);
    std::vector<std::size_t> x_cols;
    std::vector<std::string> names;
    if (spec.covariates.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != y_col && c != a_col) {
                x_cols.push_back(c);
                names.push_back(header[c]);
            }
    } else {
        for (const auto& name : spec.covariates) {
            x_cols.push_back(find_column(name));
            names.push_back(name);
        }
    }
    if (x_cols.empty())
        throw ValidationError("no covariate columns");

    std::vector<double> xs, ys;
    std::vector<int> as;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty())
            continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("malformed row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " cells, found " +
                                  std::to_string(cells.size()));
        const auto coded = spec.treatment_coding.find(cells[a_col]);
        if (coded == spec.treatment_coding.end() || (coded->second != 1 && coded->second != -1))
            throw ValidationError("treatment value '" + cells[a_col] + "' at row " + std::to_string(row) +
                                  " is outside the declared coding");
        as.push_back(coded->second);
        ys.push_back(detail::parse_cell(cells[y_col], row, header[y_col]));
        for (std::size_t c : x_cols)
            xs.push_back(detail::parse_cell(cells[c], row, header[c]));
    }
    if (row == 0)
        throw ValidationError("CSV has a header but no data rows");

    const auto n = static_cast<Index>(row);
    const auto p = static_cast<Index>(x_cols.size());
    Matrix x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xs.data(), n, p);
    Eigen::VectorXi a = Eigen::Map<const Eigen::VectorXi>(as.data(), n);
    Vector y = Eigen::Map<const Vector>(ys.data(), n);
    return Dataset(std::move(x), std::move(a), std::move(y), std::move(names));
}

inline Dataset load_dataset(const std::string& path, const ColumnSpec& spec = {})
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    return parse_dataset(in, spec);
}

/// Write a dataset as CSV with columns y,a,<covariates>. Values are printed
/// with 17 significant digits so a reload reproduces them exactly.
inline void write_dataset(std::ostream& out, const Dataset& data)
{
    out << "y,a";
    for (Index j = 0; j < data.p(); ++j)
        out << ',' << data.column_name(j);
    out << '\n';
    const auto old_precision = out.precision(17);
    for (Index i = 0; i < data.n(); ++i) {
        out << data.y()(i) << ',' << data.a()(i);
        for (Index j = 0; j < data.p(); ++j)
            out << ',' << data.x()(i, j);
        out << '\n';
    }
    out.precision(old_precision);
}

} // namespace pearl
