#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "lipschitz_lr/error.hpp"

namespace lipschitz_lr {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("matrix: " + std::to_string(data_.size()) + " values for " +
                                 std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionError("matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Single column holding `v`.
    static Matrix column(std::span<const double> v) {
        return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    Vector column_values(std::size_t c) const {
        Vector out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double frobenius_norm(const Matrix& m) {
    if (m.empty()) throw DimensionError("frobenius_norm: empty matrix");
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return std::sqrt(s);
}

/// Euclidean norm; for a single entry this is its absolute value.
inline double vector_2norm(std::span<const double> v) {
    if (v.empty()) throw DimensionError("vector_2norm: empty vector");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    const std::size_t n = a.rows(), inner = a.cols(), k = b.cols();
    Matrix c(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double* out = c.data() + i * k;
        const double* arow = a.data() + i * inner;
        for (std::size_t p = 0; p < inner; ++p) {
            const double s = arow[p];
            const double* brow = b.data() + p * k;
            for (std::size_t j = 0; j < k; ++j) out[j] += s * brow[j];
        }
    }
    return c;
}

/// aᵀ·b without materializing the transpose.
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_transpose_a: row counts differ");
    const std::size_t m = a.rows(), n = a.cols(), k = b.cols();
    Matrix c(n, k);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * n;
        const double* brow = b.data() + i * k;
        for (std::size_t p = 0; p < n; ++p) {
            const double s = arow[p];
            if (s == 0.0) continue;
            double* out = c.data() + p * k;
            for (std::size_t j = 0; j < k; ++j) out[j] += s * brow[j];
        }
    }
    return c;
}

/// a·bᵀ without materializing the transpose.
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_transpose_b: column counts differ");
    const std::size_t n = a.rows(), k = b.rows(), inner = a.cols();
    Matrix c(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.data() + i * inner;
        for (std::size_t j = 0; j < k; ++j) {
            const double* brow = b.data() + j * inner;
            double s = 0.0;
            for (std::size_t p = 0; p < inner; ++p) s += arow[p] * brow[p];
            c(i, j) = s;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

/// dst += scale * src, elementwise.
inline void add_scaled(std::span<double> dst, std::span<const double> src, double scale) {
    if (dst.size() != src.size()) throw DimensionError("add_scaled: size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace lipschitz_lr
