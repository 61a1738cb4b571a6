#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "metamf/generated_model.hpp"
#include "metamf/matrix.hpp"
#include "metamf/rng.hpp"

namespace metamf {

class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Two-stage generator for one flat output vector:
///   hidden = ReLU(hidden_weight * c + hidden_bias);  out = output_proj * hidden
/// (no offset on the output stage).
struct FactorGenerator {
    Matrix hidden_weight;  // hidden_dim x collab_dim
    Matrix hidden_bias;    // hidden_dim x 1
    Matrix output_proj;    // flat_out x hidden_dim
};

/// Generator for one prediction layer:
///   hidden = ReLU(hidden_weight * c + hidden_bias)
///   weight = reshape(weight_proj * hidden + weight_offset, out x in)
///   bias   = bias_proj * hidden + bias_offset
/// One instance per layer; nothing is shared between layers.
struct LayerGenerator {
    Matrix hidden_weight;  // hidden_dim x collab_dim
    Matrix hidden_bias;    // hidden_dim x 1
    Matrix weight_proj;    // (out*in) x hidden_dim
    Matrix weight_offset;  // (out*in) x 1
    Matrix bias_proj;      // out x hidden_dim
    Matrix bias_offset;    // out x 1
};

/// All server-side trainable parameters. Depending on the variant, the
/// generated item embeddings or the generated prediction layers are replaced
/// by directly trainable shared fields.
struct MetaParams {
    ModelDims dims;
    Matrix user_embeddings;  // user_dim x num_users
    Matrix memory;           // user_dim x collab_dim

    // Full / SharedModel: factorized item-embedding generators.
    FactorGenerator low_factor_gen;   // emits low_rank * num_items
    FactorGenerator rise_factor_gen;  // emits item_dim * low_rank
    // SharedItems: one trainable embedding matrix used for every user.
    Matrix shared_item_embeddings;  // item_dim x num_items

    // Full / SharedItems: per-layer generators.
    std::vector<LayerGenerator> layer_gens;
    // SharedModel: trainable layers used for every user.
    std::vector<GeneratedModel::Layer> shared_layers;

    /// Xavier-initialized parameters; every field gets its own derived seed.
    static MetaParams init(const ModelDims& dims, Seed seed);
    /// All fields shaped per dims, entries zero.
    static MetaParams zeros(const ModelDims& dims);
    /// Same shapes as `other`, all entries zero (gradient accumulator).
    static MetaParams zeros_like(const MetaParams& other);

    /// Visits every trainable field as (name, matrix) in a fixed canonical
    /// order. The order defines checkpoint layout, Adam state indexing, and
    /// the serialized gradient reduction.
    template <class F>
    void for_each_param(F&& f) {
        visit(*this, std::forward<F>(f));
    }
    template <class F>
    void for_each_param(F&& f) const {
        visit(*this, std::forward<F>(f));
    }
    std::size_t param_field_count() const;

    /// Asserts every field has exactly the shape implied by dims.
    void validate_shapes() const;

private:
    template <class Self, class F>
    static void visit(Self& self, F&& f);
};

/// Cached forward intermediates for one user's generation; enough to replay
/// the backward pass without re-running the forward pass.
struct GenerationTape {
    std::size_t user_index = 0;
    Matrix user_vec;     // e_u, user_dim x 1
    Matrix collab_vec;   // c_u, collab_dim x 1
    Matrix low_hidden;   // hidden state of the low-rank factor generator
    Matrix rise_hidden;  // hidden state of the rise factor generator
    Matrix low_factor;   // low_rank x num_items
    Matrix rise_factor;  // item_dim x low_rank
    std::vector<Matrix> layer_hidden;  // per layer generator hidden state
};

/// Column user_index of the user embedding matrix (one-hot product).
Matrix user_embedding(const MetaParams& params, std::size_t user_index);

/// c = memory^T * e: the e-weighted sum of the memory matrix's row vectors.
Matrix collaborative_vector(const MetaParams& params, const Matrix& user_vec);

/// Factorized generation of the private item embedding matrix (item_dim x n);
/// records intermediates on the tape.
Matrix generate_item_embeddings(const MetaParams& params, const Matrix& collab_vec,
                                GenerationTape& tape);

/// Generates (weight, bias) for prediction layer `layer`; records the
/// generator hidden state on the tape.
GeneratedModel::Layer generate_layer(const MetaParams& params, const Matrix& collab_vec,
                                     std::size_t layer, GenerationTape& tape);

/// Full generation for one user: deterministic pure function of (params, user).
std::pair<GeneratedModel, GenerationTape> generate_model(const MetaParams& params,
                                                         std::size_t user_index);

/// Exact vector-Jacobian product of the generation map: folds a gradient with
/// respect to the generated model into `accum` (same shapes as MetaParams).
/// Contributions are accumulated in a fixed order: item embeddings first, then
/// layers in ascending order.
void backprop_to_meta(const MetaParams& params, const GenerationTape& tape,
                      const ModelGradient& model_grad, MetaParams& accum);

/// Convenience wrapper returning a fresh gradient.
MetaParams backprop_to_meta(const MetaParams& params, const GenerationTape& tape,
                            const ModelGradient& model_grad);

/// L2 term: value = 0.5 * ||params||^2 over every trainable field; adds
/// weight * field into `grad_accum` when non-null.
double regularization(const MetaParams& params, double weight, MetaParams* grad_accum);

template <class Self, class F>
void MetaParams::visit(Self& self, F&& f) {
    f(std::string("user_embeddings"), self.user_embeddings);
    f(std::string("memory"), self.memory);
    if (self.dims.variant == Variant::SharedItems) {
        f(std::string("shared_item_embeddings"), self.shared_item_embeddings);
    } else {
        f(std::string("itemgen.low.hidden_weight"), self.low_factor_gen.hidden_weight);
        f(std::string("itemgen.low.hidden_bias"), self.low_factor_gen.hidden_bias);
        f(std::string("itemgen.low.output_proj"), self.low_factor_gen.output_proj);
        f(std::string("itemgen.rise.hidden_weight"), self.rise_factor_gen.hidden_weight);
        f(std::string("itemgen.rise.hidden_bias"), self.rise_factor_gen.hidden_bias);
        f(std::string("itemgen.rise.output_proj"), self.rise_factor_gen.output_proj);
    }
    if (self.dims.variant == Variant::SharedModel) {
        for (std::size_t l = 0; l < self.shared_layers.size(); ++l) {
            const std::string prefix = "shared_layer." + std::to_string(l);
            f(prefix + ".weight", self.shared_layers[l].weight);
            f(prefix + ".bias", self.shared_layers[l].bias);
        }
    } else {
        for (std::size_t l = 0; l < self.layer_gens.size(); ++l) {
            const std::string prefix = "layergen." + std::to_string(l);
            f(prefix + ".hidden_weight", self.layer_gens[l].hidden_weight);
            f(prefix + ".hidden_bias", self.layer_gens[l].hidden_bias);
            f(prefix + ".weight_proj", self.layer_gens[l].weight_proj);
            f(prefix + ".weight_offset", self.layer_gens[l].weight_offset);
            f(prefix + ".bias_proj", self.layer_gens[l].bias_proj);
            f(prefix + ".bias_offset", self.layer_gens[l].bias_offset);
        }
    }
}

}  // namespace metamf
