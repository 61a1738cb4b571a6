#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "metamf/commands.hpp"

namespace {

using metamf::RunConfig;

struct TrainFlags {
    std::string config_path;
    std::string dataset;
    std::string out_dir;
    std::string variant;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::uint64_t max_rounds = 0;
    bool has_max_rounds = false;
    std::uint64_t threads = 0;
    bool has_threads = false;
};

// Flag overrides win over the config file.
RunConfig resolve_config(const TrainFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = metamf::parse_config_file(flags.config_path);
    if (!flags.dataset.empty()) cfg.dataset = flags.dataset;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.variant.empty()) cfg.variant = metamf::variant_from_string(flags.variant);
    if (flags.has_seed) cfg.seed = flags.seed;
    if (flags.has_max_rounds) cfg.max_rounds = flags.max_rounds;
    if (flags.has_threads) cfg.threads = flags.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated rating prediction with server-side model generation"};
    app.require_subcommand(1);

    TrainFlags flags;
    auto* train = app.add_subcommand("train", "train a model and write run artifacts");
    train->add_option("--config", flags.config_path, "config file (key = value lines)");
    train->add_option("--dataset", flags.dataset, "ratings file (user item rating per line)");
    train->add_option("--out", flags.out_dir, "output directory");
    train->add_option("--variant", flags.variant, "full|si|sm")
        ->check(CLI::IsMember({"full", "si", "sm"}));
    train->add_option("--seed", flags.seed, "root seed")->each([&](const std::string&) {
        flags.has_seed = true;
    });
    train->add_option("--max-rounds", flags.max_rounds, "round cap")
        ->each([&](const std::string&) { flags.has_max_rounds = true; });
    train->add_option("--threads", flags.threads, "device worker threads (0 = hardware)")
        ->each([&](const std::string&) { flags.has_threads = true; });

    metamf::EvaluateArgs eval_args;
    std::string eval_chunk = "test";
    auto* evaluate = app.add_subcommand("evaluate", "report MAE/MSE for a checkpoint");
    evaluate->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
    evaluate->add_option("--dataset", eval_args.dataset, "ratings file")->required();
    evaluate->add_option("--chunk", eval_chunk, "valid|test")
        ->check(CLI::IsMember({"valid", "test"}));
    evaluate->add_option("--out", eval_args.out_path, "also write the metrics to this file");
    evaluate->add_option("--threads", eval_args.threads, "worker threads");

    metamf::ExportArgs export_args;
    std::string export_users;
    auto* exp = app.add_subcommand("export", "dump generated weights and item embeddings");
    exp->add_option("--checkpoint", export_args.checkpoint, "checkpoint file")->required();
    exp->add_option("--users", export_users, "comma-separated raw user ids, or 'all'");
    exp->add_option("--item", export_args.item, "raw item id for the embedding rows")->required();
    exp->add_option("--out", export_args.out_path, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? metamf::kExitOk : metamf::kExitUsage;
    }

    if (train->parsed()) {
        return metamf::dispatch(
            [&] { metamf::run_train(resolve_config(flags), std::cout); }, std::cerr);
    }
    if (evaluate->parsed()) {
        eval_args.chunk = eval_chunk == "valid" ? metamf::Chunk::Valid : metamf::Chunk::Test;
        return metamf::dispatch([&] { metamf::run_evaluate(eval_args, std::cout); }, std::cerr);
    }
    if (exp->parsed()) {
        if (!export_users.empty() && export_users != "all") {
            std::stringstream ss(export_users);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) export_args.users.push_back(tok);
            }
        }
        return metamf::dispatch([&] { metamf::run_export(export_args, std::cout); }, std::cerr);
    }
    return metamf::kExitUsage;
}
