#pragma once

#include "metamf/matrix.hpp"
#include "metamf/rng.hpp"

namespace metamf {

/// Xavier (Glorot) uniform initialization: entries drawn uniformly in
/// [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))], deterministic in the seed.
Matrix xavier_init(std::size_t rows, std::size_t cols, Seed seed);

/// Bias-corrected Adam state for one parameter matrix.
struct AdamState {
    std::size_t step = 0;
    Matrix first_moment;
    Matrix second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, double lr)
        : first_moment(rows, cols), second_moment(rows, cols), learning_rate(lr) {}
};

/// One Adam update:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
///   param <- param - lr * m_hat / (sqrt(v_hat) + eps)
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

}  // namespace metamf
