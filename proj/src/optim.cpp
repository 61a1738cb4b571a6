#include "metamf/optim.hpp"

#include <cmath>

namespace metamf {

Matrix xavier_init(std::size_t rows, std::size_t cols, Seed seed) {
    if (rows == 0 || cols == 0) {
        throw ShapeError("xavier_init: zero dimension " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Rng rng(seed);
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.at(i) = rng.next_uniform(-bound, bound);
    }
    return out;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
    if (!param.same_shape(grad) || !param.same_shape(state.first_moment)) {
        throw ShapeError("adam_step: shape mismatch param " + param.shape_string() + ", grad " +
                         grad.shape_string() + ", moment " + state.first_moment.shape_string());
    }
    state.step += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.at(i);
        const double m = b1 * state.first_moment.at(i) + (1.0 - b1) * g;
        const double v = b2 * state.second_moment.at(i) + (1.0 - b2) * g * g;
        state.first_moment.at(i) = m;
        state.second_moment.at(i) = v;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        param.at(i) -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace metamf
