#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "metamf/commands.hpp"
#include "support/test_support.hpp"

using namespace metamf;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string small_dataset() {
    std::ostringstream data;
    Rng rng(Seed{2718});
    for (int u = 0; u < 6; ++u) {
        for (int i = 0; i < 8; ++i) {
            data << "u" << u << " i" << i << " "
                 << 1.0 + static_cast<double>(rng.next_below(9)) * 0.5 << "\n";
        }
    }
    return test::write_temp_file("cmd_ratings", data.str());
}

RunConfig small_config(const std::string& dataset, const std::string& out_dir) {
    RunConfig cfg;
    cfg.dataset = dataset;
    cfg.out_dir = out_dir;
    cfg.user_dim = 3;
    cfg.item_dim = 3;
    cfg.collab_dim = 4;
    cfg.low_rank = 2;
    cfg.hidden_dim = 4;
    cfg.layer_sizes = {3, 1};
    cfg.users_per_round = 4;
    cfg.ratings_per_user = 4;
    cfg.learning_rate = 0.01;
    cfg.max_rounds = 6;
    cfg.eval_every = 2;
    cfg.patience = 50;
    cfg.threads = 1;
    cfg.seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("train reports a missing dataset path as a usage error") {
    RunConfig cfg;
    cfg.dataset = "/no/such/ratings.dat";
    std::ostringstream out;
    std::ostringstream err;
    const int code = dispatch([&] { run_train(cfg, out); }, err);
    CHECK(code == kExitUsage);
    CHECK(err.str().find("/no/such/ratings.dat") != std::string::npos);

    RunConfig empty;
    const int code2 = dispatch([&] { run_train(empty, out); }, err);
    CHECK(code2 == kExitUsage);
}

TEST_CASE("a small training run writes every artifact and is reproducible") {
    const std::string dataset = small_dataset();
    const std::string dir_a = test::temp_dir("run_a");
    const std::string dir_b = test::temp_dir("run_b");

    std::ostringstream out;
    run_train(small_config(dataset, dir_a), out);
    for (const char* name : {"config.txt", "checkpoint.bin", "trainlog.csv", "metrics.txt",
                             "timing.csv", "shards.txt"}) {
        CHECK(fs::exists(fs::path(dir_a) / name));
    }

    run_train(small_config(dataset, dir_b), out);
    CHECK(read_file(fs::path(dir_a) / "trainlog.csv") ==
          read_file(fs::path(dir_b) / "trainlog.csv"));
    CHECK(read_file(fs::path(dir_a) / "metrics.txt") ==
          read_file(fs::path(dir_b) / "metrics.txt"));

    // the resolved config re-parses to the run's configuration
    std::ifstream cfg_in(fs::path(dir_a) / "config.txt");
    const RunConfig echoed = parse_config(cfg_in, "config.txt");
    CHECK(echoed == small_config(dataset, dir_a));
}

TEST_CASE("evaluate reproduces the train-time test metrics exactly") {
    const std::string dataset = small_dataset();
    const std::string dir = test::temp_dir("run_eval");
    std::ostringstream out;
    run_train(small_config(dataset, dir), out);

    EvaluateArgs args;
    args.checkpoint = (fs::path(dir) / "checkpoint.bin").string();
    args.dataset = dataset;
    args.chunk = Chunk::Test;
    std::ostringstream eval_out;
    run_evaluate(args, eval_out);

    const std::string metrics = read_file(fs::path(dir) / "metrics.txt");
    std::istringstream eval_lines(eval_out.str());
    std::string mae_line, mse_line;
    std::getline(eval_lines, mae_line);
    std::getline(eval_lines, mse_line);
    CHECK(metrics.find(mae_line) != std::string::npos);
    CHECK(metrics.find(mse_line) != std::string::npos);
}

TEST_CASE("evaluate rejects a checkpoint from a different dataset") {
    const std::string dataset = small_dataset();
    const std::string dir = test::temp_dir("run_mismatch");
    std::ostringstream out;
    run_train(small_config(dataset, dir), out);

    // same shape of file, one extra item
    const std::string other = test::write_temp_file(
        "cmd_ratings_other", read_file(dataset) + "u0 extra_item 3.0\n");
    EvaluateArgs args;
    args.checkpoint = (fs::path(dir) / "checkpoint.bin").string();
    args.dataset = other;
    std::ostringstream sink;
    std::ostringstream err;
    const int code = dispatch([&] { run_evaluate(args, sink); }, err);
    CHECK(code == kExitUsage);
    CHECK(err.str().find("different dataset") != std::string::npos);
}

namespace {

/// Parses an export CSV into (user, kind) -> values.
std::map<std::pair<std::string, std::string>, std::vector<std::string>> parse_export(
    const std::string& text) {
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::istringstream fs_line(line);
        std::string tok;
        while (std::getline(fs_line, tok, ',')) fields.push_back(tok);
        REQUIRE(fields.size() > 2);
        rows[{fields[0], fields[1]}] =
            std::vector<std::string>(fields.begin() + 2, fields.end());
    }
    return rows;
}

}  // namespace

TEST_CASE("export writes weight and embedding rows with the documented arity") {
    const std::string dataset = small_dataset();
    const std::string dir = test::temp_dir("run_export");
    RunConfig cfg = small_config(dataset, dir);
    std::ostringstream out;
    run_train(cfg, out);

    ExportArgs args;
    args.checkpoint = (fs::path(dir) / "checkpoint.bin").string();
    args.users = {"u0", "u3"};
    args.item = "i2";
    args.out_path = (fs::path(dir) / "export.csv").string();
    run_export(args, out);

    const auto rows = parse_export(read_file(args.out_path));
    REQUIRE(rows.size() == 4);  // two users x two kinds
    CHECK(rows.at({"u0", "hidden_weights"}).size() ==
          cfg.layer_sizes[0] * cfg.item_dim);  // flattened first layer
    CHECK(rows.at({"u0", "item_embedding"}).size() == cfg.item_dim);
    CHECK_FALSE(rows.at({"u0", "hidden_weights"}) == rows.at({"u3", "hidden_weights"}));

    ExportArgs bad = args;
    bad.users = {"nobody"};
    std::ostringstream err;
    CHECK(dispatch([&] { run_export(bad, out); }, err) == kExitUsage);
    bad = args;
    bad.item = "no_item";
    CHECK(dispatch([&] { run_export(bad, out); }, err) == kExitUsage);
}

TEST_CASE("export reflects the sharing pattern of each ablation variant") {
    const std::string dataset = small_dataset();

    const auto export_rows = [&](Variant variant, const std::string& tag) {
        const std::string dir = test::temp_dir("run_variant_" + tag);
        RunConfig cfg = small_config(dataset, dir);
        cfg.variant = variant;
        std::ostringstream out;
        run_train(cfg, out);
        ExportArgs args;
        args.checkpoint = (fs::path(dir) / "checkpoint.bin").string();
        args.item = "i1";
        args.out_path = (fs::path(dir) / "export.csv").string();
        run_export(args, out);  // all users
        return parse_export(read_file(args.out_path));
    };

    const auto si = export_rows(Variant::SharedItems, "si");
    CHECK(si.at({"u0", "item_embedding"}) == si.at({"u5", "item_embedding"}));
    CHECK_FALSE(si.at({"u0", "hidden_weights"}) == si.at({"u5", "hidden_weights"}));

    const auto sm = export_rows(Variant::SharedModel, "sm");
    CHECK(sm.at({"u0", "hidden_weights"}) == sm.at({"u5", "hidden_weights"}));
    CHECK_FALSE(sm.at({"u0", "item_embedding"}) == sm.at({"u5", "item_embedding"}));
}
