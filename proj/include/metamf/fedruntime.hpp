#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "metamf/checkpoint.hpp"
#include "metamf/dataset.hpp"
#include "metamf/device.hpp"
#include "metamf/metanet.hpp"
#include "metamf/optim.hpp"

namespace metamf {

struct TrainConfig {
    std::size_t users_per_round = 64;    // |S|
    std::size_t ratings_per_user = 32;   // |B_u| cap; clamped to the shard
    double learning_rate = 0.0001;
    double reg_weight = 0.001;           // L2 weight on the meta parameters
    std::size_t max_rounds = 20000;
    std::size_t patience = 10;           // evals without valid-MSE improvement
    std::size_t eval_every = 50;         // rounds between evaluations
    Seed seed{42};
    std::size_t threads = 0;             // device worker threads; 0 = hardware
};

/// One device simulator: the user's shard plus its private batch sampler.
struct DeviceSim {
    std::size_t user_index = 0;
    UserShard shard;
    EpochSampler sampler;
};

/// Devices indexed by user, built once from the split shards. Sampler seeds
/// derive from the root seed and the user index only, so device behavior does
/// not depend on scheduling.
struct DeviceFleet {
    std::vector<DeviceSim> devices;                    // ascending user_index
    std::vector<std::optional<std::size_t>> by_user;   // user_index -> devices slot

    DeviceSim& device_for(std::size_t user_index);
    const DeviceSim& device_for(std::size_t user_index) const;
};

DeviceFleet make_fleet(const std::vector<UserShard>& shards, Seed root_seed);

/// Seed streams shared with any reimplementation that must reproduce the
/// exact sampling sequences of a run.
Seed user_sampler_seed(Seed root);
Seed device_sampler_seed(Seed root, std::size_t user_index);

struct RoundEntry {
    std::size_t round = 0;
    double loss = 0.0;             // mean of device batch losses over S
    bool has_loss = false;
    double mae_valid = 0.0;
    double mse_valid = 0.0;
    bool has_eval = false;
    std::uint64_t bytes_down = 0;  // serialized model deliveries
    std::uint64_t bytes_up = 0;    // serialized gradient uploads
    double seconds = 0.0;          // wall time; excluded from the CSV contract
};

struct TrainLog {
    std::vector<RoundEntry> entries;

    /// Deterministic columns: round,loss,mae_valid,mse_valid,bytes_down,bytes_up.
    /// Byte-identical for identical (seed, config, dataset); wall time
    /// deliberately lives in write_timing_csv instead.
    void write_csv(std::ostream& out) const;
    /// Per-round wall time: round,seconds. Not deterministic.
    void write_timing_csv(std::ostream& out) const;
};

struct ServerState {
    MetaParams params;
    std::vector<AdamState> adam;   // one per parameter field, canonical order
    std::size_t round = 0;
    TrainConfig config;
    EpochSampler user_sampler;     // over users that have a training shard
    std::vector<std::size_t> trainable_users;
};

/// Xavier-initializes the meta parameters and zeroes the optimizer state.
ServerState init_server(const ModelDims& dims, const TrainConfig& config,
                        const std::vector<UserShard>& shards);

/// One pass of the round protocol: sample S; per sampled user generate the
/// model, deliver it as a serialized message, let the device compute its
/// batch gradient, upload it serialized; fold uploads through the generation
/// backward pass in ascending user order; take the mean over S, add the
/// regularization gradient, apply one Adam step. The parameter update is
/// atomic: any device or transport failure leaves params untouched.
RoundEntry run_round(ServerState& server, DeviceFleet& fleet);

/// run_round with an explicit user set (testing hook; the set is reduced in
/// ascending user order regardless of the order given here).
RoundEntry run_round_with_users(ServerState& server, DeviceFleet& fleet,
                                const std::vector<std::size_t>& users);

struct GlobalMetrics {
    double mae = 0.0;
    double mse = 0.0;
    std::size_t count = 0;
};

/// Regenerates each device's model from current params and aggregates the raw
/// local error sums into corpus-level MAE/MSE.
GlobalMetrics global_evaluate(const ServerState& server, const DeviceFleet& fleet, Chunk chunk);

/// Same aggregation against an explicit parameter set (e.g. a loaded
/// checkpoint) without server state.
GlobalMetrics evaluate_params(const MetaParams& params, const DeviceFleet& fleet, Chunk chunk,
                              std::size_t threads);

struct TrainResult {
    TrainLog log;
    double best_valid_mse = 0.0;
    double first_valid_mse = 0.0;
    std::size_t best_round = 0;
};

/// Runs rounds with periodic validation until max_rounds or until `patience`
/// consecutive evaluations fail to improve the valid MSE. The best-valid
/// parameters are kept and restored into the server before returning.
TrainResult train(ServerState& server, DeviceFleet& fleet);

}  // namespace metamf
