#include "metamf/device.hpp"

#include <cmath>
#include <stdexcept>

namespace metamf {

namespace {

/// Forward pass for one item; fills `activations` with the layer inputs:
/// activations[0] is the item embedding, activations[l] the input of layer l.
double forward(const GeneratedModel& model, std::size_t item_index,
               std::vector<Matrix>* activations) {
    if (item_index >= model.item_embeddings.cols()) {
        throw ShapeError("item index " + std::to_string(item_index) + " out of range for " +
                         std::to_string(model.item_embeddings.cols()) + " items");
    }
    Matrix h = extract_column(model.item_embeddings, item_index);
    const std::size_t num_layers = model.layers.size();
    for (std::size_t l = 0; l < num_layers; ++l) {
        if (activations != nullptr) (*activations)[l] = h;
        Matrix pre = matmul(model.layers[l].weight, h);
        add_in_place(pre, model.layers[l].bias);
        h = (l + 1 < num_layers) ? relu(pre) : std::move(pre);  // output layer stays affine
    }
    if (h.rows() != 1 || h.cols() != 1) {
        throw ShapeError("prediction output is " + h.shape_string() + ", expected scalar");
    }
    return h.at(0);
}

}  // namespace

double predict(const DeviceState& state, std::size_t item_index) {
    return forward(state.model, item_index, nullptr);
}

double local_loss(const DeviceState& state,
                  const std::vector<std::pair<std::size_t, double>>& batch) {
    if (batch.empty()) throw std::invalid_argument("local_loss: empty batch");
    double sum = 0.0;
    for (const auto& [item, rating] : batch) {
        const double err = rating - predict(state, item);
        sum += err * err;
    }
    return sum / static_cast<double>(batch.size());
}

LocalGradient local_gradient(const DeviceState& state,
                             const std::vector<std::pair<std::size_t, double>>& batch) {
    if (batch.empty()) throw std::invalid_argument("local_gradient: empty batch");
    const GeneratedModel& model = state.model;
    const std::size_t num_layers = model.layers.size();

    LocalGradient out;
    out.grad = ModelGradient::zeros_like(model);
    out.batch_size = batch.size();

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    std::vector<Matrix> activations(num_layers);
    double loss_sum = 0.0;

    for (const auto& [item, rating] : batch) {
        const double prediction = forward(model, item, &activations);
        const double err = rating - prediction;
        loss_sum += err * err;

        // d loss / d prediction for the batch-mean squared error
        Matrix delta(1, 1);
        delta.at(0) = 2.0 * (prediction - rating) * inv_batch;

        for (std::size_t l = num_layers; l-- > 0;) {
            if (l + 1 < num_layers) {
                // The stored activation of the next layer is ReLU(pre_l).
                delta = relu_backward(activations[l + 1], delta);
            }
            add_outer_product(out.grad.layers[l].weight, delta, activations[l]);
            add_in_place(out.grad.layers[l].bias, delta);
            delta = matmul_at_b(model.layers[l].weight, delta);
        }
        add_to_column(out.grad.item_embeddings, item, delta);
    }
    out.loss = loss_sum * inv_batch;
    return out;
}

EvalSums evaluate_local(const DeviceState& state, Chunk chunk) {
    const auto& ratings = chunk == Chunk::Valid ? state.shard.valid : state.shard.test;
    EvalSums sums;
    for (const auto& [item, rating] : ratings) {
        const double err = rating - predict(state, item);
        sums.sum_abs_err += std::abs(err);
        sums.sum_sq_err += err * err;
        sums.count += 1;
    }
    return sums;
}

}  // namespace metamf
