#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "metamf/config.hpp"

namespace metamf {

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Trains per the config and writes into cfg.out_dir: config.txt (resolved
/// config), checkpoint.bin (best-valid parameters), trainlog.csv,
/// metrics.txt (valid/test metrics at the best checkpoint), plus shards.txt
/// and timing.csv.
void run_train(const RunConfig& cfg, std::ostream& out);

struct EvaluateArgs {
    std::string checkpoint;
    std::string dataset;
    Separator format = Separator::Auto;
    Chunk chunk = Chunk::Test;
    std::string out_path;  // optional metrics file
    std::size_t threads = 0;
};

void run_evaluate(const EvaluateArgs& args, std::ostream& out);

struct ExportArgs {
    std::string checkpoint;
    std::vector<std::string> users;  // raw ids; empty means every user
    std::string item;                // raw id of the item whose embedding is exported
    std::string out_path;
};

/// Writes, per user, one "hidden_weights" row (flattened first-layer weights)
/// and one "item_embedding" row (the chosen item's embedding column), keyed
/// by raw user id.
void run_export(const ExportArgs& args, std::ostream& out);

/// Maps exceptions from the run_* functions onto exit codes, printing the
/// message to err.
int dispatch(const std::function<void()>& body, std::ostream& err);

}  // namespace metamf
