#include "metamf/fedruntime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "metamf/serialize.hpp"

namespace metamf {

namespace {

constexpr std::uint64_t kUserSamplerStream = 0x53414D50;
constexpr std::uint64_t kDeviceSamplerStream = 0x44455643;

/// Runs fn(i) for i in [0, count) on a small worker pool. Work items must be
/// independent; the first thrown exception is rethrown on the caller.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t workers = threads == 0 ? std::thread::hardware_concurrency() : threads;
    if (workers == 0) workers = 1;
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

DeviceSim& DeviceFleet::device_for(std::size_t user_index) {
    if (user_index >= by_user.size() || !by_user[user_index].has_value()) {
        throw std::out_of_range("no device for user " + std::to_string(user_index));
    }
    return devices[*by_user[user_index]];
}

const DeviceSim& DeviceFleet::device_for(std::size_t user_index) const {
    if (user_index >= by_user.size() || !by_user[user_index].has_value()) {
        throw std::out_of_range("no device for user " + std::to_string(user_index));
    }
    return devices[*by_user[user_index]];
}

Seed user_sampler_seed(Seed root) { return derive_seed(root, kUserSamplerStream); }

Seed device_sampler_seed(Seed root, std::size_t user_index) {
    return derive_seed(root, kDeviceSamplerStream, user_index);
}

DeviceFleet make_fleet(const std::vector<UserShard>& shards, Seed root_seed) {
    DeviceFleet fleet;
    fleet.devices.reserve(shards.size());
    std::size_t max_user = 0;
    for (const auto& shard : shards) max_user = std::max(max_user, shard.user_index);
    fleet.by_user.assign(max_user + 1, std::nullopt);
    for (const auto& shard : shards) {
        DeviceSim dev;
        dev.user_index = shard.user_index;
        dev.shard = shard;
        std::vector<std::size_t> positions(shard.train.size());
        for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
        dev.sampler = EpochSampler(std::move(positions),
                                   device_sampler_seed(root_seed, shard.user_index));
        fleet.by_user[shard.user_index] = fleet.devices.size();
        fleet.devices.push_back(std::move(dev));
    }
    std::sort(fleet.devices.begin(), fleet.devices.end(),
              [](const DeviceSim& a, const DeviceSim& b) { return a.user_index < b.user_index; });
    for (std::size_t i = 0; i < fleet.devices.size(); ++i) {
        fleet.by_user[fleet.devices[i].user_index] = i;
    }
    return fleet;
}

ServerState init_server(const ModelDims& dims, const TrainConfig& config,
                        const std::vector<UserShard>& shards) {
    dims.validate();
    if (config.users_per_round == 0 || config.ratings_per_user == 0) {
        throw std::invalid_argument("users_per_round and ratings_per_user must be at least 1");
    }
    if (config.reg_weight < 0.0) throw std::invalid_argument("reg_weight must be nonnegative");
    if (shards.empty()) throw std::invalid_argument("no trainable users (all shards empty)");
    for (const auto& shard : shards) {
        if (shard.user_index >= dims.num_users) {
            throw std::invalid_argument("shard user " + std::to_string(shard.user_index) +
                                        " out of range for " + std::to_string(dims.num_users) +
                                        " users");
        }
    }

    ServerState server;
    server.params = MetaParams::init(dims, config.seed);
    server.params.for_each_param([&](const std::string&, const Matrix& m) {
        server.adam.emplace_back(m.rows(), m.cols(), config.learning_rate);
    });
    server.round = 0;
    server.config = config;
    server.trainable_users.reserve(shards.size());
    for (const auto& shard : shards) {
        if (!shard.train.empty()) server.trainable_users.push_back(shard.user_index);
    }
    std::sort(server.trainable_users.begin(), server.trainable_users.end());
    if (server.trainable_users.empty()) {
        throw std::invalid_argument("no user has a non-empty training chunk");
    }
    server.user_sampler = EpochSampler(server.trainable_users, user_sampler_seed(config.seed));
    return server;
}

namespace {

struct UserWorkResult {
    GenerationTape tape;
    LocalGradient gradient;
    std::uint64_t bytes_down = 0;
    std::uint64_t bytes_up = 0;
};

}  // namespace

RoundEntry run_round_with_users(ServerState& server, DeviceFleet& fleet,
                                const std::vector<std::size_t>& users) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t round_tag = server.round;

    // Fixed reduction order: ascending user index, independent of sampling or
    // scheduling order.
    std::vector<std::size_t> ordered(users);
    std::sort(ordered.begin(), ordered.end());

    std::vector<UserWorkResult> results(ordered.size());
    parallel_for(ordered.size(), server.config.threads, [&](std::size_t slot) {
        const std::size_t user = ordered[slot];
        DeviceSim& dev = fleet.device_for(user);

        auto [model, tape] = generate_model(server.params, user);
        const auto down = encode_deliver_model({user, round_tag, std::move(model)});

        // Device side: decode the delivered model, draw a private batch,
        // compute the local gradient, upload it serialized.
        DeliverModel delivered = decode_deliver_model(down);
        if (delivered.round != round_tag || delivered.user_index != user) {
            throw WireError("delivery round/user tag mismatch");
        }
        DeviceState state{user, std::move(delivered.model), dev.shard};
        const std::size_t batch_size =
            std::min(server.config.ratings_per_user, dev.shard.train.size());
        std::vector<std::pair<std::size_t, double>> batch;
        batch.reserve(batch_size);
        for (const auto pos : dev.sampler.next(batch_size)) {
            batch.push_back(dev.shard.train[pos]);
        }
        const auto up = encode_gradient_upload({user, round_tag, local_gradient(state, batch)});

        // Back on the server: decode and validate the upload.
        GradientUpload upload = decode_gradient_upload(up, server.params.dims.num_items);
        if (upload.round != round_tag || upload.user_index != user) {
            throw WireError("upload round/user tag mismatch");
        }
        if (!all_finite(upload.gradient.grad.item_embeddings)) {
            throw WireError("non-finite gradient uploaded by user " + std::to_string(user));
        }
        for (const auto& layer : upload.gradient.grad.layers) {
            if (!all_finite(layer.weight) || !all_finite(layer.bias)) {
                throw WireError("non-finite gradient uploaded by user " + std::to_string(user));
            }
        }

        results[slot] = UserWorkResult{std::move(tape), std::move(upload.gradient),
                                       static_cast<std::uint64_t>(down.size()),
                                       static_cast<std::uint64_t>(up.size())};
    });

    // Serialized reduction in ascending user order, then mean over S,
    // regularization gradient, and a single optimizer step.
    MetaParams grad = MetaParams::zeros_like(server.params);
    double loss_sum = 0.0;
    std::uint64_t bytes_down = 0;
    std::uint64_t bytes_up = 0;
    for (std::size_t slot = 0; slot < ordered.size(); ++slot) {
        backprop_to_meta(server.params, results[slot].tape, results[slot].gradient.grad, grad);
        loss_sum += results[slot].gradient.loss;
        bytes_down += results[slot].bytes_down;
        bytes_up += results[slot].bytes_up;
    }
    const double inv_users = 1.0 / static_cast<double>(ordered.size());
    grad.for_each_param([&](const std::string&, Matrix& g) { scale_in_place(g, inv_users); });
    regularization(server.params, server.config.reg_weight, &grad);

    std::vector<Matrix*> grad_fields;
    grad.for_each_param([&](const std::string&, Matrix& g) { grad_fields.push_back(&g); });
    std::size_t field = 0;
    server.params.for_each_param([&](const std::string&, Matrix& p) {
        adam_step(p, *grad_fields[field], server.adam[field]);
        ++field;
    });

    server.round += 1;
    RoundEntry entry;
    entry.round = server.round;
    entry.loss = loss_sum * inv_users;
    entry.has_loss = true;
    entry.bytes_down = bytes_down;
    entry.bytes_up = bytes_up;
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return entry;
}

RoundEntry run_round(ServerState& server, DeviceFleet& fleet) {
    return run_round_with_users(server, fleet,
                                server.user_sampler.next(server.config.users_per_round));
}

GlobalMetrics global_evaluate(const ServerState& server, const DeviceFleet& fleet, Chunk chunk) {
    return evaluate_params(server.params, fleet, chunk, server.config.threads);
}

GlobalMetrics evaluate_params(const MetaParams& params, const DeviceFleet& fleet, Chunk chunk,
                              std::size_t threads) {
    std::vector<EvalSums> sums(fleet.devices.size());
    parallel_for(fleet.devices.size(), threads, [&](std::size_t i) {
        const DeviceSim& dev = fleet.devices[i];
        const auto& ratings = chunk == Chunk::Valid ? dev.shard.valid : dev.shard.test;
        if (ratings.empty()) return;
        auto [model, tape] = generate_model(params, dev.user_index);
        (void)tape;
        DeviceState state{dev.user_index, std::move(model), dev.shard};
        sums[i] = evaluate_local(state, chunk);
    });
    GlobalMetrics metrics;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (const auto& s : sums) {  // devices are sorted by user index
        abs_sum += s.sum_abs_err;
        sq_sum += s.sum_sq_err;
        metrics.count += s.count;
    }
    if (metrics.count == 0) {
        throw std::invalid_argument("global_evaluate: chunk is empty across all users");
    }
    metrics.mae = abs_sum / static_cast<double>(metrics.count);
    metrics.mse = sq_sum / static_cast<double>(metrics.count);
    return metrics;
}

TrainResult train(ServerState& server, DeviceFleet& fleet) {
    TrainResult result;

    const auto evaluate_now = [&]() { return global_evaluate(server, fleet, Chunk::Valid); };

    RoundEntry initial;
    initial.round = server.round;
    const GlobalMetrics first = evaluate_now();
    initial.mae_valid = first.mae;
    initial.mse_valid = first.mse;
    initial.has_eval = true;
    result.log.entries.push_back(initial);

    result.first_valid_mse = first.mse;
    result.best_valid_mse = first.mse;
    result.best_round = server.round;
    MetaParams best_params = server.params;
    std::size_t evals_without_improvement = 0;

    while (server.round < server.config.max_rounds) {
        RoundEntry entry = run_round(server, fleet);
        if (server.config.eval_every != 0 && server.round % server.config.eval_every == 0) {
            const GlobalMetrics metrics = evaluate_now();
            entry.mae_valid = metrics.mae;
            entry.mse_valid = metrics.mse;
            entry.has_eval = true;
            if (metrics.mse < result.best_valid_mse) {
                result.best_valid_mse = metrics.mse;
                result.best_round = server.round;
                best_params = server.params;
                evals_without_improvement = 0;
            } else {
                evals_without_improvement += 1;
            }
        }
        result.log.entries.push_back(entry);
        if (entry.has_eval && evals_without_improvement >= server.config.patience) break;
    }

    server.params = std::move(best_params);
    return result;
}

void TrainLog::write_csv(std::ostream& out) const {
    out << "round,loss,mae_valid,mse_valid,bytes_down,bytes_up\n";
    for (const auto& e : entries) {
        out << e.round << ",";
        if (e.has_loss) out << format_double(e.loss);
        out << ",";
        if (e.has_eval) out << format_double(e.mae_valid);
        out << ",";
        if (e.has_eval) out << format_double(e.mse_valid);
        out << "," << e.bytes_down << "," << e.bytes_up << "\n";
    }
}

void TrainLog::write_timing_csv(std::ostream& out) const {
    out << "round,seconds\n";
    for (const auto& e : entries) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", e.seconds);
        out << e.round << "," << buf << "\n";
    }
}

}  // namespace metamf
