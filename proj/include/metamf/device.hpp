#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "metamf/dataset.hpp"
#include "metamf/generated_model.hpp"

namespace metamf {

// Everything in this header runs on the device side of the protocol. It sees
// only the user's own generated model and rating shard; server parameters are
// deliberately not reachable from here.

struct DeviceState {
    std::size_t user_index = 0;
    GeneratedModel model;
    UserShard shard;
};

/// Gradient of the local batch loss with respect to every model field, plus
/// the loss value and batch size it was computed from. Carries no ratings.
struct LocalGradient {
    ModelGradient grad;
    std::size_t batch_size = 0;
    double loss = 0.0;
};

/// Rating estimate for one item: embedding column lookup, ReLU hidden layers,
/// affine scalar output (no activation, no clipping).
double predict(const DeviceState& state, std::size_t item_index);

/// Mean squared error over the batch.
double local_loss(const DeviceState& state,
                  const std::vector<std::pair<std::size_t, double>>& batch);

/// Exact gradient of local_loss: standard MLP backprop per batch element;
/// embedding-gradient columns for items absent from the batch stay zero.
LocalGradient local_gradient(const DeviceState& state,
                             const std::vector<std::pair<std::size_t, double>>& batch);

enum class Chunk { Valid, Test };

struct EvalSums {
    double sum_abs_err = 0.0;
    double sum_sq_err = 0.0;
    std::size_t count = 0;
};

/// Raw error sums over the chosen chunk so a global aggregate over all devices
/// reproduces the exact corpus-level mean errors. Empty chunk yields zeros.
EvalSums evaluate_local(const DeviceState& state, Chunk chunk);

}  // namespace metamf
