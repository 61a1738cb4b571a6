#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metamf/rng.hpp"

namespace metamf {

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct Rating {
    std::size_t user;
    std::size_t item;
    double value;
};

/// Global rating triples with dense 0-based user/item indices.
///
/// Raw ids are remapped by sorted raw id (numeric order when every id in the
/// column parses as an unsigned integer, lexicographic otherwise), so the dense
/// indices do not depend on the order of lines in the input file.
struct RatingsTable {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::vector<Rating> ratings;
    std::vector<std::string> user_ids;  // dense index -> raw id
    std::vector<std::string> item_ids;

    std::size_t user_index_of(const std::string& raw_id) const;
    std::size_t item_index_of(const std::string& raw_id) const;
};

enum class Separator { Auto, Tab, Comma, DoubleColon, Whitespace };

Separator separator_from_string(const std::string& name);
std::string to_string(Separator sep);

/// Reads "user item rating [timestamp]" lines. The optional fourth column is
/// ignored. Auto detection picks "::", tab, comma, then whitespace per line.
RatingsTable load_ratings(const std::string& path, Separator sep = Separator::Auto);

/// Builds a RatingsTable from in-memory triples (raw string ids); used by
/// generators and tests. Applies the same remapping rules as load_ratings.
RatingsTable table_from_triples(
    const std::vector<std::pair<std::pair<std::string, std::string>, double>>& triples);

struct SplitConfig {
    double train_frac = 0.8;
    double valid_frac = 0.1;
    double test_frac = 0.1;
    Seed seed{1};
    std::size_t min_ratings = 3;
};

/// Private per-device slice of the ratings, split into train/valid/test.
struct UserShard {
    std::size_t user_index = 0;
    std::vector<std::pair<std::size_t, double>> train;
    std::vector<std::pair<std::size_t, double>> valid;
    std::vector<std::pair<std::size_t, double>> test;

    std::size_t total() const { return train.size() + valid.size() + test.size(); }
};

struct SplitResult {
    std::vector<UserShard> shards;           // ascending user_index, retained users only
    std::vector<std::size_t> dropped_users;  // users below min_ratings (or empty train)
};

/// Per-user random split, deterministic in the seed and independent of input
/// file line order. Chunk sizes follow: test = max(1, floor(test_frac*count)),
/// valid = max(1, floor(valid_frac*count)), remainder to train.
SplitResult split_per_user(const RatingsTable& table, const SplitConfig& cfg);

/// Writes one line per retained user: raw id, train/valid/test sizes; plus the
/// split seed, so a shard layout can be audited outside the process.
void write_shard_manifest(const std::string& path, const RatingsTable& table,
                          const SplitConfig& cfg, const SplitResult& split);

/// Uniform sampling without replacement within an epoch pass: a shuffled order
/// over the population is consumed batch by batch and reshuffled once
/// exhausted (a batch never spans two epochs, so the tail batch may be short).
class EpochSampler {
public:
    EpochSampler() = default;
    EpochSampler(std::vector<std::size_t> population, Seed seed);

    /// Returns up to batch_size indices; batch_size larger than the population
    /// is clamped. Never returns an empty batch for a non-empty population.
    std::vector<std::size_t> next(std::size_t batch_size);

    std::size_t population_size() const { return order_.size(); }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    Rng rng_{Seed{0}};
    bool clamp_logged_ = false;
};

/// One-shot helpers over EpochSampler, for callers without sampler state.
std::vector<std::size_t> sample_user_batch(const std::vector<std::size_t>& users,
                                           std::size_t batch_size, Seed seed);
std::vector<std::pair<std::size_t, double>> sample_rating_batch(const UserShard& shard,
                                                                std::size_t batch_size, Seed seed);

}  // namespace metamf
