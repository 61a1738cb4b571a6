#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metamf/metanet.hpp"

namespace metamf {

/// Checkpoint container: magic "MMF1CKPT", u32 version, model dims and
/// variant, the split configuration and root seed of the producing run, raw
/// user/item id tables, then every named parameter matrix with its shape.
/// All integers u64 little-endian, reals f64 little-endian, strings length
/// prefixed. Save followed by load is bit-exact.
struct CheckpointMeta {
    double train_frac = 0.8;
    double valid_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t split_seed = 1;
    std::uint64_t min_ratings = 3;
    std::uint64_t root_seed = 0;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
};

void save_checkpoint(const std::string& path, const MetaParams& params,
                     const CheckpointMeta& meta);

std::pair<MetaParams, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace metamf
