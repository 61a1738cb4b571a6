#pragma once

#include <iosfwd>
#include <string>

#include "metamf/dataset.hpp"
#include "metamf/fedruntime.hpp"
#include "metamf/generated_model.hpp"

namespace metamf {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// One resolved run: dataset location and format, split policy, model dims,
/// training schedule, output directory. Parses from a plain-text
/// "key = value" file; emit() materializes every default such that
/// parse(emit(c)) == c.
struct RunConfig {
    std::string dataset;
    Separator format = Separator::Auto;
    double train_frac = 0.8;
    double valid_frac = 0.1;
    double test_frac = 0.1;
    std::size_t min_ratings = 3;

    std::size_t user_dim = 32;
    std::size_t item_dim = 32;
    std::size_t collab_dim = 128;
    std::size_t low_rank = 8;
    std::size_t hidden_dim = 512;
    std::vector<std::size_t> layer_sizes = {8, 1};
    Variant variant = Variant::Full;
    std::size_t max_generated_mb = 64;

    std::size_t users_per_round = 64;
    std::size_t ratings_per_user = 32;
    double learning_rate = 0.0001;
    double reg_weight = 0.001;
    std::size_t max_rounds = 20000;
    std::size_t patience = 10;
    std::size_t eval_every = 50;
    std::size_t threads = 0;

    std::uint64_t seed = 42;  // root seed; every random stream derives from it
    std::string out_dir = "out";

    bool operator==(const RunConfig&) const = default;

    SplitConfig split_config() const;
    ModelDims model_dims(std::size_t num_users, std::size_t num_items) const;
    TrainConfig train_config() const;
};

RunConfig parse_config(std::istream& in, const std::string& origin);
RunConfig parse_config_file(const std::string& path);
void emit_config(const RunConfig& cfg, std::ostream& out);

}  // namespace metamf
