#include "metamf/metanet.hpp"

#include "metamf/optim.hpp"

namespace metamf {

namespace {

constexpr std::uint64_t kInitStream = 0x4D455441;  // parameter init seed stream

MetaParams shaped(const ModelDims& dims) {
    dims.validate();
    MetaParams p;
    p.dims = dims;
    p.user_embeddings = Matrix(dims.user_dim, dims.num_users);
    p.memory = Matrix(dims.user_dim, dims.collab_dim);
    if (dims.variant == Variant::SharedItems) {
        p.shared_item_embeddings = Matrix(dims.item_dim, dims.num_items);
    } else {
        p.low_factor_gen.hidden_weight = Matrix(dims.hidden_dim, dims.collab_dim);
        p.low_factor_gen.hidden_bias = Matrix(dims.hidden_dim, 1);
        p.low_factor_gen.output_proj = Matrix(dims.low_rank * dims.num_items, dims.hidden_dim);
        p.rise_factor_gen.hidden_weight = Matrix(dims.hidden_dim, dims.collab_dim);
        p.rise_factor_gen.hidden_bias = Matrix(dims.hidden_dim, 1);
        p.rise_factor_gen.output_proj = Matrix(dims.item_dim * dims.low_rank, dims.hidden_dim);
    }
    if (dims.variant == Variant::SharedModel) {
        p.shared_layers.resize(dims.num_layers());
        for (std::size_t l = 0; l < dims.num_layers(); ++l) {
            p.shared_layers[l].weight = Matrix(dims.layer_out(l), dims.layer_in(l));
            p.shared_layers[l].bias = Matrix(dims.layer_out(l), 1);
        }
    } else {
        p.layer_gens.resize(dims.num_layers());
        for (std::size_t l = 0; l < dims.num_layers(); ++l) {
            const std::size_t flat = dims.layer_out(l) * dims.layer_in(l);
            p.layer_gens[l].hidden_weight = Matrix(dims.hidden_dim, dims.collab_dim);
            p.layer_gens[l].hidden_bias = Matrix(dims.hidden_dim, 1);
            p.layer_gens[l].weight_proj = Matrix(flat, dims.hidden_dim);
            p.layer_gens[l].weight_offset = Matrix(flat, 1);
            p.layer_gens[l].bias_proj = Matrix(dims.layer_out(l), dims.hidden_dim);
            p.layer_gens[l].bias_offset = Matrix(dims.layer_out(l), 1);
        }
    }
    return p;
}

void check_capacity(const ModelDims& dims) {
    const std::size_t bytes = dims.item_dim * dims.num_items * sizeof(double);
    if (bytes > dims.max_generated_bytes) {
        throw CapacityError("generated item embeddings need " + std::to_string(bytes) +
                            " bytes per user, over the " +
                            std::to_string(dims.max_generated_bytes) + " byte budget");
    }
}

/// hidden = ReLU(W*c + b); out = proj * hidden. Returns (out, hidden).
std::pair<Matrix, Matrix> run_factor_generator(const FactorGenerator& gen,
                                               const Matrix& collab_vec) {
    Matrix pre = matmul(gen.hidden_weight, collab_vec);
    add_in_place(pre, gen.hidden_bias);
    Matrix hidden = relu(pre);
    return {matmul(gen.output_proj, hidden), std::move(hidden)};
}

}  // namespace

MetaParams MetaParams::init(const ModelDims& dims, Seed seed) {
    check_capacity(dims);
    MetaParams p = shaped(dims);
    std::size_t ordinal = 0;
    p.for_each_param([&](const std::string&, Matrix& m) {
        m = xavier_init(m.rows(), m.cols(), derive_seed(seed, kInitStream, ordinal));
        ++ordinal;
    });
    return p;
}

MetaParams MetaParams::zeros(const ModelDims& dims) { return shaped(dims); }

MetaParams MetaParams::zeros_like(const MetaParams& other) { return shaped(other.dims); }

std::size_t MetaParams::param_field_count() const {
    std::size_t count = 0;
    for_each_param([&](const std::string&, const Matrix&) { ++count; });
    return count;
}

void MetaParams::validate_shapes() const {
    dims.validate();
    const auto expect = [](const std::string& name, const Matrix& m, std::size_t rows,
                           std::size_t cols) {
        if (m.rows() != rows || m.cols() != cols) {
            throw ShapeError("shape audit: " + name + " is " + m.shape_string() + ", expected " +
                             std::to_string(rows) + "x" + std::to_string(cols));
        }
    };
    expect("user_embeddings", user_embeddings, dims.user_dim, dims.num_users);
    expect("memory", memory, dims.user_dim, dims.collab_dim);
    if (dims.variant == Variant::SharedItems) {
        expect("shared_item_embeddings", shared_item_embeddings, dims.item_dim, dims.num_items);
    } else {
        expect("itemgen.low.hidden_weight", low_factor_gen.hidden_weight, dims.hidden_dim,
               dims.collab_dim);
        expect("itemgen.low.hidden_bias", low_factor_gen.hidden_bias, dims.hidden_dim, 1);
        expect("itemgen.low.output_proj", low_factor_gen.output_proj,
               dims.low_rank * dims.num_items, dims.hidden_dim);
        expect("itemgen.rise.hidden_weight", rise_factor_gen.hidden_weight, dims.hidden_dim,
               dims.collab_dim);
        expect("itemgen.rise.hidden_bias", rise_factor_gen.hidden_bias, dims.hidden_dim, 1);
        expect("itemgen.rise.output_proj", rise_factor_gen.output_proj,
               dims.item_dim * dims.low_rank, dims.hidden_dim);
    }
    if (dims.variant == Variant::SharedModel) {
        if (shared_layers.size() != dims.num_layers()) {
            throw ShapeError("shape audit: expected " + std::to_string(dims.num_layers()) +
                             " shared layers, have " + std::to_string(shared_layers.size()));
        }
        for (std::size_t l = 0; l < shared_layers.size(); ++l) {
            expect("shared_layer." + std::to_string(l) + ".weight", shared_layers[l].weight,
                   dims.layer_out(l), dims.layer_in(l));
            expect("shared_layer." + std::to_string(l) + ".bias", shared_layers[l].bias,
                   dims.layer_out(l), 1);
        }
    } else {
        if (layer_gens.size() != dims.num_layers()) {
            throw ShapeError("shape audit: expected " + std::to_string(dims.num_layers()) +
                             " layer generators, have " + std::to_string(layer_gens.size()));
        }
        for (std::size_t l = 0; l < layer_gens.size(); ++l) {
            const std::string prefix = "layergen." + std::to_string(l);
            const std::size_t flat = dims.layer_out(l) * dims.layer_in(l);
            expect(prefix + ".hidden_weight", layer_gens[l].hidden_weight, dims.hidden_dim,
                   dims.collab_dim);
            expect(prefix + ".hidden_bias", layer_gens[l].hidden_bias, dims.hidden_dim, 1);
            expect(prefix + ".weight_proj", layer_gens[l].weight_proj, flat, dims.hidden_dim);
            expect(prefix + ".weight_offset", layer_gens[l].weight_offset, flat, 1);
            expect(prefix + ".bias_proj", layer_gens[l].bias_proj, dims.layer_out(l),
                   dims.hidden_dim);
            expect(prefix + ".bias_offset", layer_gens[l].bias_offset, dims.layer_out(l), 1);
        }
    }
}

Matrix user_embedding(const MetaParams& params, std::size_t user_index) {
    if (user_index >= params.dims.num_users) {
        throw ShapeError("user index " + std::to_string(user_index) + " out of range for " +
                         std::to_string(params.dims.num_users) + " users");
    }
    return extract_column(params.user_embeddings, user_index);
}

Matrix collaborative_vector(const MetaParams& params, const Matrix& user_vec) {
    if (user_vec.rows() != params.dims.user_dim || user_vec.cols() != 1) {
        throw ShapeError("collaborative_vector: user vector is " + user_vec.shape_string() +
                         ", expected " + std::to_string(params.dims.user_dim) + "x1");
    }
    return matmul_at_b(params.memory, user_vec);
}

Matrix generate_item_embeddings(const MetaParams& params, const Matrix& collab_vec,
                                GenerationTape& tape) {
    check_capacity(params.dims);
    auto [low_flat, low_hidden] = run_factor_generator(params.low_factor_gen, collab_vec);
    auto [rise_flat, rise_hidden] = run_factor_generator(params.rise_factor_gen, collab_vec);
    tape.low_hidden = std::move(low_hidden);
    tape.rise_hidden = std::move(rise_hidden);
    tape.low_factor = reshape(low_flat, params.dims.low_rank, params.dims.num_items);
    tape.rise_factor = reshape(rise_flat, params.dims.item_dim, params.dims.low_rank);
    return matmul(tape.rise_factor, tape.low_factor);
}

GeneratedModel::Layer generate_layer(const MetaParams& params, const Matrix& collab_vec,
                                     std::size_t layer, GenerationTape& tape) {
    if (layer >= params.dims.num_layers()) {
        throw ShapeError("layer index " + std::to_string(layer) + " out of range");
    }
    const LayerGenerator& gen = params.layer_gens[layer];
    Matrix pre = matmul(gen.hidden_weight, collab_vec);
    add_in_place(pre, gen.hidden_bias);
    Matrix hidden = relu(pre);

    Matrix weight_flat = matmul(gen.weight_proj, hidden);
    add_in_place(weight_flat, gen.weight_offset);
    Matrix bias = matmul(gen.bias_proj, hidden);
    add_in_place(bias, gen.bias_offset);

    if (tape.layer_hidden.size() <= layer) tape.layer_hidden.resize(layer + 1);
    tape.layer_hidden[layer] = std::move(hidden);
    return {reshape(weight_flat, params.dims.layer_out(layer), params.dims.layer_in(layer)),
            std::move(bias)};
}

std::pair<GeneratedModel, GenerationTape> generate_model(const MetaParams& params,
                                                         std::size_t user_index) {
    GenerationTape tape;
    tape.user_index = user_index;
    tape.user_vec = user_embedding(params, user_index);
    tape.collab_vec = collaborative_vector(params, tape.user_vec);

    GeneratedModel model;
    if (params.dims.variant == Variant::SharedItems) {
        check_capacity(params.dims);
        model.item_embeddings = params.shared_item_embeddings;
    } else {
        model.item_embeddings = generate_item_embeddings(params, tape.collab_vec, tape);
    }
    model.layers.resize(params.dims.num_layers());
    for (std::size_t l = 0; l < params.dims.num_layers(); ++l) {
        if (params.dims.variant == Variant::SharedModel) {
            model.layers[l] = params.shared_layers[l];
        } else {
            model.layers[l] = generate_layer(params, tape.collab_vec, l, tape);
        }
    }
    return {std::move(model), std::move(tape)};
}

namespace {

/// Backward through one factor generator; adds parameter gradients and the
/// collaborative-vector contribution.
void factor_generator_backward(const FactorGenerator& gen, const Matrix& hidden,
                               const Matrix& collab_vec, const Matrix& out_grad_flat,
                               FactorGenerator& accum, Matrix& collab_grad) {
    add_outer_product(accum.output_proj, out_grad_flat, hidden);
    const Matrix up = matmul_at_b(gen.output_proj, out_grad_flat);
    const Matrix hidden_grad = relu_backward(hidden, up);
    add_outer_product(accum.hidden_weight, hidden_grad, collab_vec);
    add_in_place(accum.hidden_bias, hidden_grad);
    add_in_place(collab_grad, matmul_at_b(gen.hidden_weight, hidden_grad));
}

}  // namespace

void backprop_to_meta(const MetaParams& params, const GenerationTape& tape,
                      const ModelGradient& model_grad, MetaParams& accum) {
    const ModelDims& dims = params.dims;
    if (model_grad.layers.size() != dims.num_layers()) {
        throw ShapeError("model gradient has " + std::to_string(model_grad.layers.size()) +
                         " layers, expected " + std::to_string(dims.num_layers()));
    }
    Matrix collab_grad(dims.collab_dim, 1);

    if (dims.variant == Variant::SharedItems) {
        add_in_place(accum.shared_item_embeddings, model_grad.item_embeddings);
    } else {
        // item_embeddings = rise_factor * low_factor
        const Matrix rise_grad = matmul(model_grad.item_embeddings, transpose(tape.low_factor));
        const Matrix low_grad = matmul(transpose(tape.rise_factor), model_grad.item_embeddings);
        factor_generator_backward(params.low_factor_gen, tape.low_hidden, tape.collab_vec,
                                  reshape(low_grad, low_grad.size(), 1), accum.low_factor_gen,
                                  collab_grad);
        factor_generator_backward(params.rise_factor_gen, tape.rise_hidden, tape.collab_vec,
                                  reshape(rise_grad, rise_grad.size(), 1), accum.rise_factor_gen,
                                  collab_grad);
    }

    for (std::size_t l = 0; l < dims.num_layers(); ++l) {
        const Matrix& weight_grad = model_grad.layers[l].weight;
        const Matrix& bias_grad = model_grad.layers[l].bias;
        if (dims.variant == Variant::SharedModel) {
            add_in_place(accum.shared_layers[l].weight, weight_grad);
            add_in_place(accum.shared_layers[l].bias, bias_grad);
            continue;
        }
        const LayerGenerator& gen = params.layer_gens[l];
        LayerGenerator& gacc = accum.layer_gens[l];
        const Matrix& hidden = tape.layer_hidden[l];

        const Matrix weight_grad_flat = reshape(weight_grad, weight_grad.size(), 1);
        add_outer_product(gacc.weight_proj, weight_grad_flat, hidden);
        add_in_place(gacc.weight_offset, weight_grad_flat);
        Matrix hidden_up = matmul_at_b(gen.weight_proj, weight_grad_flat);

        add_outer_product(gacc.bias_proj, bias_grad, hidden);
        add_in_place(gacc.bias_offset, bias_grad);
        add_in_place(hidden_up, matmul_at_b(gen.bias_proj, bias_grad));

        const Matrix hidden_grad = relu_backward(hidden, hidden_up);
        add_outer_product(gacc.hidden_weight, hidden_grad, tape.collab_vec);
        add_in_place(gacc.hidden_bias, hidden_grad);
        add_in_place(collab_grad, matmul_at_b(gen.hidden_weight, hidden_grad));
    }

    // c = memory^T e: scatter back through the weighted row-sum and the
    // user-embedding column lookup.
    add_outer_product(accum.memory, tape.user_vec, collab_grad);
    const Matrix user_grad = matmul(params.memory, collab_grad);
    add_to_column(accum.user_embeddings, tape.user_index, user_grad);
}

MetaParams backprop_to_meta(const MetaParams& params, const GenerationTape& tape,
                            const ModelGradient& model_grad) {
    MetaParams accum = MetaParams::zeros_like(params);
    backprop_to_meta(params, tape, model_grad, accum);
    return accum;
}

double regularization(const MetaParams& params, double weight, MetaParams* grad_accum) {
    if (weight < 0.0) {
        throw std::invalid_argument("regularization weight must be nonnegative");
    }
    double value = 0.0;
    params.for_each_param(
        [&](const std::string&, const Matrix& m) { value += 0.5 * squared_norm(m); });
    if (grad_accum != nullptr && weight != 0.0) {
        // Walk the two structures in lockstep; both follow the canonical order.
        std::vector<const Matrix*> fields;
        params.for_each_param(
            [&](const std::string&, const Matrix& m) { fields.push_back(&m); });
        std::size_t i = 0;
        grad_accum->for_each_param([&](const std::string&, Matrix& g) {
            add_scaled(g, *fields[i], weight);
            ++i;
        });
    }
    return value;
}

}  // namespace metamf
