#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/matrix.hpp"
#include "lipschitz_lr/rng.hpp"

namespace lipschitz_lr {

enum class Task { Regression, Binary, Multiclass };

inline const char* to_string(Task t) {
    switch (t) {
        case Task::Regression: return "regression";
        case Task::Binary: return "binary";
        case Task::Multiclass: return "multiclass";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    if (s == "regression") return Task::Regression;
    if (s == "binary") return Task::Binary;
    if (s == "multiclass") return Task::Multiclass;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

/// Features plus targets. Targets are m x 1 for regression and binary tasks
/// and an m x k one-hot matrix for multiclass.
struct Dataset {
    Matrix features;
    Matrix targets;
    Task task = Task::Regression;
    std::vector<std::string> feature_names;
    std::string target_name = "target";
    /// Multiclass label strings in first-appearance order; column j of the
    /// one-hot matrix corresponds to class_labels[j].
    std::vector<std::string> class_labels;

    std::size_t examples() const noexcept { return features.rows(); }
    std::size_t feature_count() const noexcept { return features.cols(); }

    /// k for the Lipschitz formulas: 2 for binary, #labels for multiclass, 0 otherwise.
    std::size_t class_count() const noexcept {
        switch (task) {
            case Task::Binary: return 2;
            case Task::Multiclass: return targets.cols();
            default: return 0;
        }
    }

    /// Class index per example (binary: the 0/1 label).
    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out(examples());
        for (std::size_t i = 0; i < examples(); ++i) {
            if (task == Task::Multiclass) {
                auto r = targets.row(i);
                out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
            } else {
                out[i] = targets(i, 0) > 0.5 ? 1 : 0;
            }
        }
        return out;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws DimensionError / ConfigError if the dataset breaks its invariants.
inline void validate(const Dataset& d) {
    if (d.features.rows() != d.targets.rows())
        throw DimensionError("dataset: " + std::to_string(d.features.rows()) + " feature rows but " +
                             std::to_string(d.targets.rows()) + " target rows");
    if (d.feature_names.size() != d.features.cols())
        throw DimensionError("dataset: feature name count does not match columns");
    switch (d.task) {
        case Task::Regression:
        case Task::Binary:
            if (d.targets.cols() != 1) throw DimensionError("dataset: expected a single target column");
            if (d.task == Task::Binary)
                for (double v : d.targets.values())
                    if (v != 0.0 && v != 1.0) throw ConfigError("dataset: binary label outside {0,1}");
            break;
        case Task::Multiclass:
            if (d.targets.cols() < 2) throw InvalidClassCountError("dataset: multiclass needs k >= 2");
            if (d.class_labels.size() != d.targets.cols())
                throw DimensionError("dataset: class label count does not match one-hot width");
            for (std::size_t i = 0; i < d.targets.rows(); ++i) {
                double s = 0.0;
                for (double v : d.targets.row(i)) s += v;
                if (s != 1.0) throw ConfigError("dataset: one-hot row does not sum to 1");
            }
            break;
    }
}

inline Dataset subset(const Dataset& d, std::span<const std::size_t> rows) {
    Dataset out = d;
    out.features = select_rows(d.features, rows);
    out.targets = select_rows(d.targets, rows);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
    bool has_header = true;
    Task task = Task::Regression;
    /// Target column by header name; takes precedence over target_index.
    std::optional<std::string> target_name;
    /// Target column by 0-based index; defaults to the last column.
    std::optional<std::size_t> target_index;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        cells.emplace_back(trim(cell));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::vector<std::string> header;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (schema.has_header && header.empty()) {
            header = std::move(cells);
            continue;
        }
        rows.push_back(std::move(cells));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) throw ParseError("no data rows in '" + path + "'", line_no);

    const std::size_t width = header.empty() ? rows.front().size() : header.size();
    if (width < 2) throw ParseError("need at least one feature and one target column", line_numbers.front());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw ParseError("expected " + std::to_string(width) + " cells, found " +
                                 std::to_string(rows[r].size()),
                             line_numbers[r]);
        for (const auto& cell : rows[r])
            if (cell.empty()) throw ParseError("missing cell", line_numbers[r]);
    }

    std::size_t target = width - 1;
    if (schema.target_name) {
        auto it = std::find(header.begin(), header.end(), *schema.target_name);
        if (it == header.end()) throw ConfigError("no column named '" + *schema.target_name + "'");
        target = static_cast<std::size_t>(it - header.begin());
    } else if (schema.target_index) {
        if (*schema.target_index >= width)
            throw ConfigError("target index " + std::to_string(*schema.target_index) + " out of range");
        target = *schema.target_index;
    }

    Dataset d;
    d.task = schema.task;
    for (std::size_t c = 0; c < width; ++c) {
        std::string name = header.empty() ? (c == target ? "target" : "x" + std::to_string(c + 1)) : header[c];
        if (c == target)
            d.target_name = name;
        else
            d.feature_names.push_back(std::move(name));
    }

    const std::size_t m = rows.size(), n = width - 1;
    d.features = Matrix(m, n);
    for (std::size_t r = 0; r < m; ++r) {
        std::size_t j = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == target) continue;
            double v;
            if (!detail::parse_double(rows[r][c], v) || !std::isfinite(v))
                throw ParseError("cannot parse '" + rows[r][c] + "' as a number", line_numbers[r]);
            d.features(r, j++) = v;
        }
    }

    switch (schema.task) {
        case Task::Regression:
        case Task::Binary: {
            d.targets = Matrix(m, 1);
            for (std::size_t r = 0; r < m; ++r) {
                double v;
                if (!detail::parse_double(rows[r][target], v) || !std::isfinite(v))
                    throw ParseError("cannot parse target '" + rows[r][target] + "'", line_numbers[r]);
                if (schema.task == Task::Binary && v != 0.0 && v != 1.0)
                    throw ParseError("binary label must be 0 or 1, got '" + rows[r][target] + "'",
                                     line_numbers[r]);
                d.targets(r, 0) = v;
            }
            break;
        }
        case Task::Multiclass: {
            std::vector<std::size_t> index(m);
            for (std::size_t r = 0; r < m; ++r) {
                const auto& label = rows[r][target];
                auto it = std::find(d.class_labels.begin(), d.class_labels.end(), label);
                index[r] = static_cast<std::size_t>(it - d.class_labels.begin());
                if (it == d.class_labels.end()) d.class_labels.push_back(label);
            }
            if (d.class_labels.size() < 2)
                throw InvalidClassCountError("multiclass target has fewer than 2 distinct labels");
            d.targets = Matrix(m, d.class_labels.size());
            for (std::size_t r = 0; r < m; ++r) d.targets(r, index[r]) = 1.0;
            break;
        }
    }
    return d;
}

/// Writes features followed by the target column, always with a header.
/// Values use the shortest round-trip representation, so load_csv gives back
/// bit-identical matrices.
inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& name : d.feature_names) out << name << ',';
    out << d.target_name << '\n';
    for (std::size_t r = 0; r < d.examples(); ++r) {
        for (double v : d.features.row(r)) out << detail::format_double(v) << ',';
        if (d.task == Task::Multiclass) {
            auto row = d.targets.row(r);
            out << d.class_labels[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
        } else {
            out << detail::format_double(d.targets(r, 0));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScalingMode {
    None,
    /// Divide every column by its sum.
    SumToOne,
    /// Subtract the column mean, then divide by 255 (image protocol).
    MeanCenter255,
    /// Subtract the column mean, divide by the population standard deviation.
    Standardize,
};

inline const char* to_string(ScalingMode m) {
    switch (m) {
        case ScalingMode::None: return "none";
        case ScalingMode::SumToOne: return "sum-to-one";
        case ScalingMode::MeanCenter255: return "mean-center-255";
        case ScalingMode::Standardize: return "standardize";
    }
    return "?";
}

inline ScalingMode parse_scaling_mode(std::string_view s) {
    if (s == "none") return ScalingMode::None;
    if (s == "sum-to-one") return ScalingMode::SumToOne;
    if (s == "mean-center-255") return ScalingMode::MeanCenter255;
    if (s == "standardize") return ScalingMode::Standardize;
    throw ConfigError("unknown scaling mode '" + std::string(s) + "'");
}

/// x' = (x - offset) / divisor per feature column.
struct ScalingRecord {
    ScalingMode mode = ScalingMode::None;
    Vector offsets;
    Vector divisors;
};

inline constexpr double kDegenerateColumnTolerance = 1e-12;

namespace detail {

inline double column_sum(const Matrix& x, std::size_t c) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, c);
    return s;
}

inline double column_std(const Matrix& x, std::size_t c, double mean) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) s += (x(r, c) - mean) * (x(r, c) - mean);
    return std::sqrt(s / static_cast<double>(x.rows()));
}

}  // namespace detail

inline Dataset apply_scaling(const Dataset& d, const ScalingRecord& rec) {
    if (rec.divisors.size() != d.feature_count() || rec.offsets.size() != d.feature_count())
        throw DimensionError("apply_scaling: record width does not match features");
    Dataset out = d;
    for (std::size_t r = 0; r < out.examples(); ++r) {
        auto row = out.features.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - rec.offsets[c]) / rec.divisors[c];
    }
    return out;
}

/// Fits the scaling for `mode` on `d` and applies it. Targets are untouched.
/// Columns the mode cannot scale raise DegenerateFeatureError; see
/// drop_degenerate_columns.
inline std::pair<Dataset, ScalingRecord> scale_features(const Dataset& d,
                                                        ScalingMode mode = ScalingMode::SumToOne) {
    if (d.features.empty()) throw DimensionError("scale_features: empty feature matrix");
    const std::size_t n = d.feature_count();
    const double m = static_cast<double>(d.examples());
    ScalingRecord rec{mode, Vector(n, 0.0), Vector(n, 1.0)};
    for (std::size_t c = 0; c < n; ++c) {
        const double sum = detail::column_sum(d.features, c);
        switch (mode) {
            case ScalingMode::None:
                break;
            case ScalingMode::SumToOne:
                // Mixed-sign columns are divided by their signed sum.
                if (std::abs(sum) < kDegenerateColumnTolerance)
                    throw DegenerateFeatureError("column " + std::to_string(c) + " ('" + d.feature_names[c] +
                                                     "') sums to zero",
                                                 c);
                rec.divisors[c] = sum;
                break;
            case ScalingMode::MeanCenter255:
                rec.offsets[c] = sum / m;
                rec.divisors[c] = 255.0;
                break;
            case ScalingMode::Standardize: {
                const double mean = sum / m;
                const double sd = detail::column_std(d.features, c, mean);
                if (sd < kDegenerateColumnTolerance)
                    throw DegenerateFeatureError("column " + std::to_string(c) + " ('" + d.feature_names[c] +
                                                     "') is constant",
                                                 c);
                rec.offsets[c] = mean;
                rec.divisors[c] = sd;
                break;
            }
        }
    }
    return {apply_scaling(d, rec), rec};
}

inline Dataset drop_columns(const Dataset& d, std::span<const std::size_t> columns) {
    std::vector<bool> drop(d.feature_count(), false);
    for (auto c : columns) drop.at(c) = true;
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < d.feature_count(); ++c)
        if (!drop[c]) keep.push_back(c);
    Dataset out = d;
    out.features = Matrix(d.examples(), keep.size());
    out.feature_names.clear();
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.feature_names.push_back(d.feature_names[keep[j]]);
        for (std::size_t r = 0; r < d.examples(); ++r) out.features(r, j) = d.features(r, keep[j]);
    }
    return out;
}

/// Removes the columns scale_features would reject for `mode`. Returns the
/// reduced dataset and the dropped column indices (in the input's numbering).
inline std::pair<Dataset, std::vector<std::size_t>> drop_degenerate_columns(const Dataset& d, ScalingMode mode) {
    std::vector<std::size_t> bad;
    const double m = static_cast<double>(d.examples());
    for (std::size_t c = 0; c < d.feature_count(); ++c) {
        const double sum = detail::column_sum(d.features, c);
        if (mode == ScalingMode::SumToOne && std::abs(sum) < kDegenerateColumnTolerance) bad.push_back(c);
        if (mode == ScalingMode::Standardize &&
            detail::column_std(d.features, c, sum / m) < kDegenerateColumnTolerance)
            bad.push_back(c);
    }
    return {drop_columns(d, bad), bad};
}

/// Appends a constant column of ones named "intercept".
inline Dataset add_intercept_column(const Dataset& d) {
    Dataset out = d;
    const std::size_t n = d.feature_count();
    out.features = Matrix(d.examples(), n + 1);
    for (std::size_t r = 0; r < d.examples(); ++r) {
        auto src = d.features.row(r);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.features(r, n) = 1.0;
    }
    out.feature_names.push_back("intercept");
    return out;
}

/// Weight-norm bound heuristic K = (a + b) / 2, where a is the sum of the
/// column means and b is the mean of the column maxima.
inline double estimate_k_bound(const Matrix& x) {
    if (x.empty()) throw DimensionError("estimate_k_bound: empty feature matrix");
    const double m = static_cast<double>(x.rows());
    const double n = static_cast<double>(x.cols());
    double a = 0.0, b = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double sum = 0.0, mx = x(0, c);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            sum += x(r, c);
            mx = std::max(mx, x(r, c));
        }
        a += sum / m;
        b += mx;
    }
    b /= n;
    return (a + b) / 2.0;
}

inline double estimate_k_bound(const Dataset& d) { return estimate_k_bound(d.features); }

/// Seeded shuffle, then the first round(fraction * m) rows train.
inline std::pair<Dataset, Dataset> train_validation_split(const Dataset& d, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw ConfigError("train fraction must be in (0, 1]");
    auto order = rng.permutation(d.examples());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(d.examples())));
    std::span<const std::size_t> all(order);
    return {subset(d, all.first(n_train)), subset(d, all.subspan(n_train))};
}

}  // namespace lipschitz_lr
