#include <doctest.h>

#include <filesystem>

#include "metamf/checkpoint.hpp"
#include "metamf/metanet.hpp"
#include "metamf/serialize.hpp"
#include "support/test_support.hpp"

using namespace metamf;
using test::tiny_dims;

TEST_CASE("deliver-model messages round-trip bit-exactly") {
    Rng rng(Seed{7});
    for (int trial = 0; trial < 10; ++trial) {
        ModelDims dims = tiny_dims();
        dims.num_items = 1 + rng.next_below(6);
        dims.item_dim = 1 + rng.next_below(4);
        auto [model, tape] = generate_model(MetaParams::init(dims, Seed{rng.next_u64()}), 0);
        const DeliverModel msg{3, 17, std::move(model)};
        const auto bytes = encode_deliver_model(msg);
        const DeliverModel back = decode_deliver_model(bytes);
        CHECK(back.user_index == 3);
        CHECK(back.round == 17);
        CHECK(back.model == msg.model);
    }
}

TEST_CASE("deliver-model size follows the documented layout") {
    ModelDims dims = tiny_dims();  // 2x3 embeddings, layers 2x2+2 and 1x2+1
    auto [model, tape] = generate_model(MetaParams::init(dims, Seed{5}), 0);
    const auto bytes = encode_deliver_model({0, 0, model});
    // 1 tag + 2*8 header + (16 + 6*8) embeddings + 8 layer count
    //   + (16 + 4*8 + 16 + 2*8) layer0 + (16 + 2*8 + 16 + 1*8) layer1
    const std::size_t expected = 1 + 16 + (16 + 48) + 8 + (16 + 32 + 16 + 16) + (16 + 16 + 16 + 8);
    CHECK(bytes.size() == expected);
}

TEST_CASE("gradient uploads round-trip with sparse columns densified") {
    const ModelDims dims = tiny_dims();
    auto [model, tape] = generate_model(MetaParams::init(dims, Seed{11}), 0);
    const DeviceState state{0, model, UserShard{}};
    const LocalGradient grad = local_gradient(state, {{1, 4.0}});

    const auto bytes = encode_gradient_upload({0, 9, grad});
    const GradientUpload back = decode_gradient_upload(bytes, dims.num_items);
    CHECK(back.round == 9);
    CHECK(back.gradient.loss == grad.loss);
    CHECK(back.gradient.batch_size == 1);
    CHECK(back.gradient.grad.item_embeddings == grad.grad.item_embeddings);
    for (std::size_t l = 0; l < grad.grad.layers.size(); ++l) {
        CHECK(back.gradient.grad.layers[l].weight == grad.grad.layers[l].weight);
        CHECK(back.gradient.grad.layers[l].bias == grad.grad.layers[l].bias);
    }
}

TEST_CASE("upload size scales with touched items, not the catalogue") {
    ModelDims dims = tiny_dims();
    dims.num_items = 500;
    auto [model, tape] = generate_model(MetaParams::init(dims, Seed{13}), 0);
    const DeviceState state{0, model, UserShard{}};
    const auto one = encode_gradient_upload({0, 0, local_gradient(state, {{7, 4.0}})});
    const auto two =
        encode_gradient_upload({0, 0, local_gradient(state, {{7, 4.0}, {431, 1.0}})});
    CHECK(two.size() - one.size() == 8 + dims.item_dim * 8);  // one extra column
    // far below a dense 500-column payload
    CHECK(one.size() < 500 * dims.item_dim * 8 / 4);
}

TEST_CASE("the upload schema carries no rating fields") {
    // Privacy boundary: what leaves the device is exactly loss, batch size,
    // layer gradients, and touched embedding-gradient columns. Recomputing
    // the serialized size from those fields alone proves nothing else rides
    // along.
    const ModelDims dims = tiny_dims();
    auto [model, tape] = generate_model(MetaParams::init(dims, Seed{17}), 0);
    const DeviceState state{0, model, UserShard{}};
    const LocalGradient grad = local_gradient(state, {{0, 4.0}, {2, 1.0}});
    const auto bytes = encode_gradient_upload({0, 0, grad});

    std::size_t expected = 1 + 8 + 8;  // tag, round, user
    expected += 8 + 8;                 // loss, batch size
    expected += 8;                     // layer count
    for (const auto& layer : grad.grad.layers) {
        expected += 16 + layer.weight.size() * 8;
        expected += 16 + layer.bias.size() * 8;
    }
    expected += 8 + 8;  // item dim, touched count
    std::size_t touched = 0;
    for (std::size_t j = 0; j < grad.grad.item_embeddings.cols(); ++j) {
        for (std::size_t i = 0; i < grad.grad.item_embeddings.rows(); ++i) {
            if (grad.grad.item_embeddings(i, j) != 0.0) {
                ++touched;
                break;
            }
        }
    }
    expected += touched * (8 + dims.item_dim * 8);
    CHECK(bytes.size() == expected);
}

TEST_CASE("decoders reject corrupted buffers") {
    const ModelDims dims = tiny_dims();
    auto [model, tape] = generate_model(MetaParams::init(dims, Seed{19}), 0);
    auto bytes = encode_deliver_model({0, 0, model});
    CHECK_THROWS_AS(decode_gradient_upload(bytes, dims.num_items), WireError);  // wrong tag
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(decode_deliver_model(bytes), WireError);  // truncated
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    ModelDims dims = tiny_dims();
    for (const Variant v : {Variant::Full, Variant::SharedItems, Variant::SharedModel}) {
        dims.variant = v;
        const MetaParams params = MetaParams::init(dims, Seed{23});
        CheckpointMeta meta;
        meta.split_seed = 99;
        meta.root_seed = 42;
        meta.user_ids = {"alice", "bob"};
        meta.item_ids = {"x", "y", "z"};

        const auto path = test::temp_dir("ckpt") + "/model.bin";
        save_checkpoint(path, params, meta);
        auto [loaded, loaded_meta] = load_checkpoint(path);

        CHECK(loaded.dims.variant == v);
        CHECK(loaded_meta.user_ids == meta.user_ids);
        CHECK(loaded_meta.item_ids == meta.item_ids);
        CHECK(loaded_meta.root_seed == 42);

        std::vector<const Matrix*> original;
        params.for_each_param(
            [&](const std::string&, const Matrix& m) { original.push_back(&m); });
        std::size_t i = 0;
        loaded.for_each_param([&](const std::string&, const Matrix& m) {
            CHECK(m == *original[i]);  // bitwise equality via exact compare
            ++i;
        });
        CHECK(i == original.size());
    }
}

TEST_CASE("checkpoint loader rejects foreign files") {
    const auto path = test::write_temp_file("notckpt", "just some text, long enough to read");
    CHECK_THROWS(load_checkpoint(path));
}
