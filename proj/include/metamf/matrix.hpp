#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace metamf {

class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major matrix of doubles. Column vectors are matrices with cols == 1.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
        }
    }

    static Matrix column_vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return Matrix(n, 1, std::move(values));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_string() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard dense product, shape (a.rows x b.cols). Throws ShapeError on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a^T * b without materializing the transpose. Accumulates each output entry
/// over a's rows in ascending order, exactly like matmul(transpose(a), b).
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Row-major reinterpretation of the same elements under a new shape.
Matrix reshape(const Matrix& a, std::size_t rows, std::size_t cols);

/// Elementwise max(0, x).
Matrix relu(const Matrix& x);

/// Passes `upstream` through where x > 0, zero elsewhere.
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

void add_in_place(Matrix& a, const Matrix& b);            // a += b
void add_scaled(Matrix& a, const Matrix& b, double s);    // a += s * b
void scale_in_place(Matrix& a, double s);

/// acc += col * row^T, where col is (m x 1) and row is (n x 1); acc is (m x n).
void add_outer_product(Matrix& acc, const Matrix& col, const Matrix& row);

Matrix extract_column(const Matrix& a, std::size_t col);
void add_to_column(Matrix& a, std::size_t col, const Matrix& v);
void set_column(Matrix& a, std::size_t col, const Matrix& v);

double squared_norm(const Matrix& a);
bool all_finite(const Matrix& a);

}  // namespace metamf
