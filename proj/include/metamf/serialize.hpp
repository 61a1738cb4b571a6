#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metamf/device.hpp"
#include "metamf/generated_model.hpp"

namespace metamf {

class WireError : public std::runtime_error {
public:
    explicit WireError(const std::string& what) : std::runtime_error(what) {}
};

// Round messages travel as flat byte buffers: all integers are 64-bit
// little-endian, all reals are IEEE-754 binary64 little-endian, matrices are
// row-major. The schema carries gradients and generated parameters only;
// there is no field that could hold a rating.
//
// DeliverModel (tag 0x01):
//   u8 tag, u64 round, u64 user
//   u64 item_dim, u64 num_items, f64[item_dim*num_items] item_embeddings
//   u64 num_layers, per layer: u64 out, u64 in, f64[out*in] weight, f64[out] bias
//
// GradientUpload (tag 0x02):
//   u8 tag, u64 round, u64 user
//   f64 loss, u64 batch_size
//   u64 num_layers, per layer: u64 out, u64 in, f64[out*in] dweight, f64[out] dbias
//   u64 item_dim, u64 touched_items,
//   per touched item: u64 item_index, f64[item_dim] embedding-gradient column
//
// The embedding gradient is sent as touched columns only (a batch touches at
// most |B_u| of the n items); the server re-densifies against zero.

struct DeliverModel {
    std::size_t user_index = 0;
    std::size_t round = 0;
    GeneratedModel model;
};

struct GradientUpload {
    std::size_t user_index = 0;
    std::size_t round = 0;
    LocalGradient gradient;
};

std::vector<std::uint8_t> encode_deliver_model(const DeliverModel& msg);
DeliverModel decode_deliver_model(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_gradient_upload(const GradientUpload& msg);

/// num_items is the receiver's own item count; touched columns are densified
/// against zero into an item_dim x num_items matrix.
GradientUpload decode_gradient_upload(const std::vector<std::uint8_t>& bytes,
                                      std::size_t num_items);

}  // namespace metamf
