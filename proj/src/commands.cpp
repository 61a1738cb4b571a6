#include "metamf/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "metamf/checkpoint.hpp"

namespace metamf {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_dataset(const std::string& path) {
    if (path.empty()) {
        throw ConfigError("no dataset path configured (set 'dataset = <file>' or --dataset)");
    }
    if (!fs::exists(path)) {
        throw ConfigError("dataset file '" + path + "' does not exist");
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

CheckpointMeta make_meta(const RunConfig& cfg, const RatingsTable& table) {
    CheckpointMeta meta;
    meta.train_frac = cfg.train_frac;
    meta.valid_frac = cfg.valid_frac;
    meta.test_frac = cfg.test_frac;
    meta.split_seed = cfg.seed;
    meta.min_ratings = cfg.min_ratings;
    meta.root_seed = cfg.seed;
    meta.user_ids = table.user_ids;
    meta.item_ids = table.item_ids;
    return meta;
}

/// Rebuilds the shards and fleet a checkpoint was trained against.
std::pair<RatingsTable, DeviceFleet> fleet_from_checkpoint(const CheckpointMeta& meta,
                                                           const std::string& dataset,
                                                           Separator format) {
    require_dataset(dataset);
    RatingsTable table = load_ratings(dataset, format);
    if (table.user_ids != meta.user_ids || table.item_ids != meta.item_ids) {
        throw ConfigError("checkpoint was trained on a different dataset: it has " +
                          std::to_string(meta.user_ids.size()) + " users / " +
                          std::to_string(meta.item_ids.size()) + " items, the file has " +
                          std::to_string(table.num_users) + " / " +
                          std::to_string(table.num_items));
    }
    SplitConfig split_cfg;
    split_cfg.train_frac = meta.train_frac;
    split_cfg.valid_frac = meta.valid_frac;
    split_cfg.test_frac = meta.test_frac;
    split_cfg.seed = Seed{meta.split_seed};
    split_cfg.min_ratings = meta.min_ratings;
    SplitResult split = split_per_user(table, split_cfg);
    DeviceFleet fleet = make_fleet(split.shards, Seed{meta.root_seed});
    return {std::move(table), std::move(fleet)};
}

}  // namespace

void run_train(const RunConfig& cfg, std::ostream& out) {
    require_dataset(cfg.dataset);
    const RatingsTable table = load_ratings(cfg.dataset, cfg.format);
    const SplitResult split = split_per_user(table, cfg.split_config());
    if (split.shards.empty()) {
        throw std::runtime_error("no user kept enough ratings to train (min_ratings = " +
                                 std::to_string(cfg.min_ratings) + ")");
    }

    const ModelDims dims = cfg.model_dims(table.num_users, table.num_items);
    ServerState server = init_server(dims, cfg.train_config(), split.shards);
    DeviceFleet fleet = make_fleet(split.shards, Seed{cfg.seed});

    out << "training on '" << cfg.dataset << "': " << table.num_users << " users, "
        << table.num_items << " items, " << table.ratings.size() << " ratings ("
        << split.shards.size() << " devices, " << split.dropped_users.size() << " dropped)\n";

    const TrainResult result = train(server, fleet);
    const GlobalMetrics valid = global_evaluate(server, fleet, Chunk::Valid);
    const GlobalMetrics test = global_evaluate(server, fleet, Chunk::Test);

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);

    {
        auto f = open_out(dir / "config.txt");
        emit_config(cfg, f);
    }
    {
        auto f = open_out(dir / "trainlog.csv");
        result.log.write_csv(f);
    }
    {
        auto f = open_out(dir / "timing.csv");
        result.log.write_timing_csv(f);
    }
    write_shard_manifest((dir / "shards.txt").string(), table, cfg.split_config(), split);
    save_checkpoint((dir / "checkpoint.bin").string(), server.params, make_meta(cfg, table));
    {
        auto f = open_out(dir / "metrics.txt");
        f << "best_round = " << result.best_round << "\n";
        f << "valid_mae = " << fmt(valid.mae) << "\n";
        f << "valid_mse = " << fmt(valid.mse) << "\n";
        f << "test_mae = " << fmt(test.mae) << "\n";
        f << "test_mse = " << fmt(test.mse) << "\n";
    }

    out << "stopped after " << server.round << " rounds; best valid MSE "
        << fmt(result.best_valid_mse) << " at round " << result.best_round << "\n";
    out << "test MAE " << fmt(test.mae) << "  test MSE " << fmt(test.mse) << "\n";
    out << "artifacts in " << dir.string() << ": config.txt checkpoint.bin trainlog.csv metrics.txt\n";
}

void run_evaluate(const EvaluateArgs& args, std::ostream& out) {
    auto [params, meta] = load_checkpoint(args.checkpoint);
    auto [table, fleet] = fleet_from_checkpoint(meta, args.dataset, args.format);
    const GlobalMetrics metrics = evaluate_params(params, fleet, args.chunk, args.threads);
    const std::string chunk_name = args.chunk == Chunk::Valid ? "valid" : "test";
    out << chunk_name << "_mae = " << fmt(metrics.mae) << "\n";
    out << chunk_name << "_mse = " << fmt(metrics.mse) << "\n";
    if (!args.out_path.empty()) {
        auto f = open_out(args.out_path);
        f << chunk_name << "_mae = " << fmt(metrics.mae) << "\n";
        f << chunk_name << "_mse = " << fmt(metrics.mse) << "\n";
    }
}

void run_export(const ExportArgs& args, std::ostream& out) {
    auto [params, meta] = load_checkpoint(args.checkpoint);
    if (args.item.empty()) {
        throw ConfigError("export needs --item <raw item id>");
    }

    // Raw ids resolve against the checkpoint's own tables; no dataset needed.
    const auto index_of = [](const std::vector<std::string>& ids, const std::string& raw,
                             const char* what) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] == raw) return i;
        }
        throw ConfigError(std::string("unknown ") + what + " id '" + raw + "'");
    };
    const std::size_t item_index = index_of(meta.item_ids, args.item, "item");

    std::vector<std::size_t> users;
    if (args.users.empty()) {
        users.resize(meta.user_ids.size());
        for (std::size_t i = 0; i < users.size(); ++i) users[i] = i;
    } else {
        for (const auto& raw : args.users) users.push_back(index_of(meta.user_ids, raw, "user"));
    }

    auto f = open_out(args.out_path);
    for (const auto u : users) {
        auto [model, tape] = generate_model(params, u);
        (void)tape;
        f << meta.user_ids[u] << ",hidden_weights";
        const Matrix& w = model.layers.front().weight;
        for (std::size_t i = 0; i < w.size(); ++i) f << "," << fmt(w.at(i));
        f << "\n";
        f << meta.user_ids[u] << ",item_embedding";
        const Matrix col = extract_column(model.item_embeddings, item_index);
        for (std::size_t i = 0; i < col.size(); ++i) f << "," << fmt(col.at(i));
        f << "\n";
    }
    out << "exported " << users.size() << " users to " << args.out_path << "\n";
}

int dispatch(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace metamf
