#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "metamf/matrix.hpp"

namespace metamf {

enum class Variant { Full, SharedItems, SharedModel };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

/// Model hyperparameters. layer_sizes lists the output width of each
/// prediction layer; the first layer's input width is item_dim and the last
/// layer must have width 1 (scalar rating).
struct ModelDims {
    std::size_t num_users = 0;       // m
    std::size_t num_items = 0;       // n
    std::size_t user_dim = 32;       // user embedding size
    std::size_t item_dim = 32;       // item embedding size
    std::size_t collab_dim = 128;    // collaborative vector size
    std::size_t low_rank = 8;        // low-dimensional item embedding size
    std::size_t hidden_dim = 512;    // generator hidden size
    std::vector<std::size_t> layer_sizes = {8, 1};
    Variant variant = Variant::Full;
    std::size_t max_generated_bytes = 64ull * 1024 * 1024;  // per-user budget

    std::size_t num_layers() const { return layer_sizes.size(); }
    std::size_t layer_in(std::size_t l) const { return l == 0 ? item_dim : layer_sizes[l - 1]; }
    std::size_t layer_out(std::size_t l) const { return layer_sizes[l]; }

    /// item_dim*n + sum_l (in*out + out): size of one user's generated model.
    std::size_t generated_parameter_count() const;
    /// Elements emitted by the factorized item-embedding generators: s*n + item_dim*s.
    std::size_t factorized_output_elements() const;
    /// Elements a direct single-shot generator would emit: item_dim * n.
    std::size_t direct_output_elements() const;

    void validate() const;
};

/// The per-user model materialized for one device: a private item embedding
/// matrix plus the weights and biases of a private prediction MLP. Not
/// trainable server-side; it is the output of the meta network.
struct GeneratedModel {
    struct Layer {
        Matrix weight;  // out x in
        Matrix bias;    // out x 1

        bool operator==(const Layer& other) const = default;
    };
    Matrix item_embeddings;  // item_dim x num_items
    std::vector<Layer> layers;

    bool operator==(const GeneratedModel& other) const = default;
};

/// Gradient of a scalar loss with respect to every GeneratedModel field.
struct ModelGradient {
    Matrix item_embeddings;
    std::vector<GeneratedModel::Layer> layers;

    static ModelGradient zeros_like(const GeneratedModel& model);
};

}  // namespace metamf
