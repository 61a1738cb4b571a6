#include "metamf/generated_model.hpp"

#include <stdexcept>

namespace metamf {

Variant variant_from_string(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "si") return Variant::SharedItems;
    if (name == "sm") return Variant::SharedModel;
    throw std::invalid_argument("unknown variant '" + name + "' (expected full|si|sm)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::SharedItems: return "si";
        case Variant::SharedModel: return "sm";
    }
    return "full";
}

std::size_t ModelDims::generated_parameter_count() const {
    std::size_t count = item_dim * num_items;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        count += layer_in(l) * layer_out(l) + layer_out(l);
    }
    return count;
}

std::size_t ModelDims::factorized_output_elements() const {
    return low_rank * num_items + item_dim * low_rank;
}

std::size_t ModelDims::direct_output_elements() const {
    return item_dim * num_items;
}

void ModelDims::validate() const {
    if (num_users == 0) throw std::invalid_argument("model dims: zero users");
    if (num_items == 0) throw std::invalid_argument("model dims: zero items");
    if (user_dim == 0 || item_dim == 0 || collab_dim == 0 || low_rank == 0 || hidden_dim == 0) {
        throw std::invalid_argument("model dims: every dimension must be at least 1");
    }
    if (layer_sizes.empty()) throw std::invalid_argument("model dims: no prediction layers");
    for (const auto w : layer_sizes) {
        if (w == 0) throw std::invalid_argument("model dims: zero-width prediction layer");
    }
    if (layer_sizes.back() != 1) {
        throw std::invalid_argument("model dims: final prediction layer must have width 1");
    }
}

ModelGradient ModelGradient::zeros_like(const GeneratedModel& model) {
    ModelGradient grad;
    grad.item_embeddings = Matrix(model.item_embeddings.rows(), model.item_embeddings.cols());
    grad.layers.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        grad.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                               Matrix(layer.bias.rows(), layer.bias.cols())});
    }
    return grad;
}

}  // namespace metamf
