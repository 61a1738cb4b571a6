#include "metamf/matrix.hpp"

#include <cmath>

namespace metamf {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: dimension mismatch " + a.shape_string() + " * " +
                         b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    if (b.cols() == 1) {
        // matrix-vector: one running sum per row, same k-ascending order
        const double* v = b.data();
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double* arow = a.data() + i * inner;
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * v[k];
            out.at(i) = acc;
        }
        return out;
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data() + k * b.cols();
            double* orow = out.data() + i * out.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_at_b: dimension mismatch " + a.shape_string() + "^T * " +
                         b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    if (b.cols() == 1) {
        // out[c] accumulates a(r,c)*b[r] over r ascending; zero terms add
        // +/-0 and never change the accumulated bits, so they are skipped.
        const double* v = b.data();
        double* o = out.data();
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double br = v[r];
            if (br == 0.0) continue;
            const double* arow = a.data() + r * a.cols();
            for (std::size_t c = 0; c < a.cols(); ++c) {
                o[c] += arow[c] * br;
            }
        }
        return out;
    }
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* arow = a.data() + r * a.cols();
        const double* brow = b.data() + r * b.cols();
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (arow[c] == 0.0) continue;
            double* orow = out.data() + c * out.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += arow[c] * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

Matrix reshape(const Matrix& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.size()) {
        throw ShapeError("reshape: cannot view " + a.shape_string() + " as " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::vector<double> data(a.data(), a.data() + a.size());
    return Matrix(rows, cols, std::move(data));
}

Matrix relu(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.at(i) = x.at(i) > 0.0 ? x.at(i) : 0.0;
    }
    return out;
}

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
    if (!x.same_shape(upstream)) {
        throw ShapeError("relu_backward: shape mismatch " + x.shape_string() + " vs " +
                         upstream.shape_string());
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.at(i) = x.at(i) > 0.0 ? upstream.at(i) : 0.0;
    }
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += b.at(i);
}

void add_scaled(Matrix& a, const Matrix& b, double s) {
    if (!a.same_shape(b)) {
        throw ShapeError("add_scaled: shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += s * b.at(i);
}

void scale_in_place(Matrix& a, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) *= s;
}

void add_outer_product(Matrix& acc, const Matrix& col, const Matrix& row) {
    if (col.cols() != 1 || row.cols() != 1 || acc.rows() != col.rows() ||
        acc.cols() != row.rows()) {
        throw ShapeError("add_outer_product: shape mismatch " + acc.shape_string() + " += " +
                         col.shape_string() + " * " + row.shape_string() + "^T");
    }
    for (std::size_t i = 0; i < acc.rows(); ++i) {
        const double ci = col.at(i);
        if (ci == 0.0) continue;
        double* arow = acc.data() + i * acc.cols();
        for (std::size_t j = 0; j < acc.cols(); ++j) {
            arow[j] += ci * row.at(j);
        }
    }
}

Matrix extract_column(const Matrix& a, std::size_t col) {
    if (col >= a.cols()) {
        throw ShapeError("extract_column: column " + std::to_string(col) + " out of range for " +
                         a.shape_string());
    }
    Matrix out(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) out.at(i) = a(i, col);
    return out;
}

void add_to_column(Matrix& a, std::size_t col, const Matrix& v) {
    if (col >= a.cols() || v.cols() != 1 || v.rows() != a.rows()) {
        throw ShapeError("add_to_column: shape mismatch " + a.shape_string() + " col " +
                         std::to_string(col) + " += " + v.shape_string());
    }
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, col) += v.at(i);
}

void set_column(Matrix& a, std::size_t col, const Matrix& v) {
    if (col >= a.cols() || v.cols() != 1 || v.rows() != a.rows()) {
        throw ShapeError("set_column: shape mismatch " + a.shape_string() + " col " +
                         std::to_string(col) + " = " + v.shape_string());
    }
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, col) = v.at(i);
}

double squared_norm(const Matrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i) * a.at(i);
    return acc;
}

bool all_finite(const Matrix& a) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a.at(i))) return false;
    }
    return true;
}

}  // namespace metamf
