#include <doctest.h>

#include <algorithm>
#include <set>

#include "metamf/dataset.hpp"
#include "support/test_support.hpp"

using namespace metamf;
using test::write_temp_file;

TEST_CASE("loads a small whitespace file") {
    const auto path = write_temp_file("ratings", "u1 i1 4.0\nu1 i2 3.0\n");
    const RatingsTable table = load_ratings(path);
    CHECK(table.num_users == 1);
    CHECK(table.num_items == 2);
    CHECK(table.ratings.size() == 2);
    CHECK(table.user_ids[0] == "u1");
}

TEST_CASE("separator variants parse the same content") {
    const auto tab = write_temp_file("ratings", "1\t2\t4.5\n1\t3\t2.0\n2\t2\t3.0\n");
    const auto comma = write_temp_file("ratings", "1,2,4.5\n1,3,2.0\n2,2,3.0\n");
    const auto colons = write_temp_file("ratings", "1::2::4.5\n1::3::2.0\n2::2::3.0\n");
    const RatingsTable a = load_ratings(tab);
    const RatingsTable b = load_ratings(comma);
    const RatingsTable c = load_ratings(colons);
    CHECK(a.num_users == 2);
    CHECK(a.num_items == 2);
    CHECK(a.user_ids == b.user_ids);
    CHECK(b.item_ids == c.item_ids);
    for (std::size_t i = 0; i < a.ratings.size(); ++i) {
        CHECK(a.ratings[i].value == b.ratings[i].value);
        CHECK(b.ratings[i].value == c.ratings[i].value);
    }
}

TEST_CASE("timestamp column is ignored") {
    const auto path = write_temp_file("ratings", "1::2::4::978300760\n1::3::5::978302109\n2::2::3::978301968\n");
    const RatingsTable table = load_ratings(path);
    CHECK(table.num_users == 2);
    CHECK(table.ratings[0].value == 4.0);
}

TEST_CASE("numeric raw ids sort numerically, not lexicographically") {
    const auto path = write_temp_file("ratings", "10 5 1.0\n2 5 2.0\n2 40 1.5\n10 40 3.0\n");
    const RatingsTable table = load_ratings(path);
    CHECK(table.user_ids == std::vector<std::string>{"2", "10"});
    CHECK(table.item_ids == std::vector<std::string>{"5", "40"});
}

TEST_CASE("empty file is an error") {
    const auto path = write_temp_file("ratings", "");
    CHECK_THROWS_AS(load_ratings(path), DataError);
}

TEST_CASE("duplicate pair error names the pair") {
    const auto path = write_temp_file("ratings", "u1 i1 4.0\nu1 i1 2.0\n");
    try {
        load_ratings(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("u1") != std::string::npos);
        CHECK(what.find("i1") != std::string::npos);
    }
}

TEST_CASE("malformed line reports its number") {
    const auto path = write_temp_file("ratings", "u1 i1 4.0\nu2 i2\n");
    try {
        load_ratings(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("missing file names the path") {
    try {
        load_ratings("/nonexistent/ratings.dat");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/ratings.dat") != std::string::npos);
    }
}

namespace {

RatingsTable user_with_n_ratings(std::size_t n) {
    std::vector<std::pair<std::pair<std::string, std::string>, double>> triples;
    for (std::size_t i = 0; i < n; ++i) {
        triples.push_back({{"u", "i" + std::to_string(i)}, 3.0});
    }
    return table_from_triples(triples);
}

}  // namespace

TEST_CASE("split sizes follow the rounding rule") {
    SplitConfig cfg;
    cfg.seed = Seed{5};

    const SplitResult ten = split_per_user(user_with_n_ratings(10), cfg);
    REQUIRE(ten.shards.size() == 1);
    CHECK(ten.shards[0].train.size() == 8);
    CHECK(ten.shards[0].valid.size() == 1);
    CHECK(ten.shards[0].test.size() == 1);

    // floor(0.1 * 7) = 0, floored chunks are lifted to one rating each.
    const SplitResult seven = split_per_user(user_with_n_ratings(7), cfg);
    REQUIRE(seven.shards.size() == 1);
    CHECK(seven.shards[0].train.size() == 5);
    CHECK(seven.shards[0].valid.size() == 1);
    CHECK(seven.shards[0].test.size() == 1);
}

TEST_CASE("split is deterministic in the seed") {
    const RatingsTable table = user_with_n_ratings(20);
    SplitConfig cfg;
    cfg.seed = Seed{77};
    const SplitResult a = split_per_user(table, cfg);
    const SplitResult b = split_per_user(table, cfg);
    REQUIRE(a.shards.size() == b.shards.size());
    CHECK(a.shards[0].train == b.shards[0].train);
    CHECK(a.shards[0].valid == b.shards[0].valid);
    CHECK(a.shards[0].test == b.shards[0].test);
}

TEST_CASE("split rejects fractions that do not sum to one") {
    SplitConfig cfg;
    cfg.train_frac = 0.8;
    cfg.valid_frac = 0.3;
    CHECK_THROWS_AS(split_per_user(user_with_n_ratings(10), cfg), DataError);
}

TEST_CASE("users below min_ratings are dropped and reported") {
    std::vector<std::pair<std::pair<std::string, std::string>, double>> triples;
    for (int i = 0; i < 10; ++i) triples.push_back({{"big", "i" + std::to_string(i)}, 4.0});
    triples.push_back({{"small", "i0"}, 2.0});
    triples.push_back({{"small", "i1"}, 2.0});
    const RatingsTable table = table_from_triples(triples);
    const SplitResult split = split_per_user(table, SplitConfig{});
    CHECK(split.shards.size() == 1);
    REQUIRE(split.dropped_users.size() == 1);
    CHECK(table.user_ids[split.dropped_users[0]] == "small");
}

TEST_CASE("shard chunks partition the user's ratings") {
    Rng rng(Seed{13});
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::pair<std::pair<std::string, std::string>, double>> triples;
        const std::size_t users = 1 + rng.next_below(5);
        for (std::size_t u = 0; u < users; ++u) {
            const std::size_t count = 3 + rng.next_below(30);
            for (std::size_t i = 0; i < count; ++i) {
                triples.push_back({{"u" + std::to_string(u), "i" + std::to_string(i)},
                                   1.0 + static_cast<double>(rng.next_below(5))});
            }
        }
        const RatingsTable table = table_from_triples(triples);
        SplitConfig cfg;
        cfg.seed = Seed{rng.next_u64()};
        const SplitResult split = split_per_user(table, cfg);

        std::vector<std::vector<std::pair<std::size_t, double>>> per_user(table.num_users);
        for (const auto& r : table.ratings) per_user[r.user].push_back({r.item, r.value});

        for (const auto& shard : split.shards) {
            std::set<std::size_t> seen;
            std::vector<std::pair<std::size_t, double>> joined;
            for (const auto* chunk : {&shard.train, &shard.valid, &shard.test}) {
                for (const auto& entry : *chunk) {
                    CHECK(seen.insert(entry.first).second);  // disjoint
                    joined.push_back(entry);
                }
            }
            auto expected = per_user[shard.user_index];
            std::sort(expected.begin(), expected.end());
            std::sort(joined.begin(), joined.end());
            CHECK(joined == expected);  // union equals the full set
        }
    }
}

TEST_CASE("splits do not depend on input line order") {
    const std::string fwd = "u1 a 1\nu1 b 2\nu1 c 3\nu1 d 4\nu1 e 5\nu2 a 1\nu2 b 2\nu2 c 3\n";
    const std::string rev = "u2 c 3\nu2 b 2\nu2 a 1\nu1 e 5\nu1 d 4\nu1 c 3\nu1 b 2\nu1 a 1\n";
    const RatingsTable ta = load_ratings(write_temp_file("ratings", fwd));
    const RatingsTable tb = load_ratings(write_temp_file("ratings", rev));
    CHECK(ta.user_ids == tb.user_ids);
    CHECK(ta.item_ids == tb.item_ids);
    SplitConfig cfg;
    cfg.seed = Seed{99};
    const SplitResult sa = split_per_user(ta, cfg);
    const SplitResult sb = split_per_user(tb, cfg);
    REQUIRE(sa.shards.size() == sb.shards.size());
    for (std::size_t i = 0; i < sa.shards.size(); ++i) {
        CHECK(sa.shards[i].train == sb.shards[i].train);
        CHECK(sa.shards[i].valid == sb.shards[i].valid);
        CHECK(sa.shards[i].test == sb.shards[i].test);
    }
}

TEST_CASE("remapping is a bijection") {
    const auto path = write_temp_file("ratings", "x i1 1\ny i2 2\nz i3 3\nx i2 4\n");
    const RatingsTable table = load_ratings(path);
    std::set<std::string> uniq(table.user_ids.begin(), table.user_ids.end());
    CHECK(uniq.size() == table.num_users);
    for (std::size_t i = 0; i < table.num_users; ++i) {
        CHECK(table.user_index_of(table.user_ids[i]) == i);
    }
    for (std::size_t i = 0; i < table.num_items; ++i) {
        CHECK(table.item_index_of(table.item_ids[i]) == i);
    }
}

TEST_CASE("epoch sampler returns a permutation when batch covers the population") {
    std::vector<std::size_t> pop{4, 9, 2, 7};
    const auto batch = sample_user_batch(pop, 4, Seed{8});
    auto sorted = batch;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{2, 4, 7, 9});
}

TEST_CASE("single-element population always yields that element") {
    const auto batch = sample_user_batch({42}, 1, Seed{0});
    REQUIRE(batch.size() == 1);
    CHECK(batch[0] == 42);
}

TEST_CASE("oversized batch is clamped to the population") {
    const auto batch = sample_user_batch({1, 2, 3}, 10, Seed{0});
    CHECK(batch.size() == 3);
}

TEST_CASE("epoch passes visit every element exactly once per epoch") {
    std::vector<std::size_t> pop(10);
    for (std::size_t i = 0; i < pop.size(); ++i) pop[i] = i;
    EpochSampler sampler(pop, Seed{21});
    for (int epoch = 0; epoch < 5; ++epoch) {
        std::set<std::size_t> seen;
        std::size_t drawn = 0;
        while (drawn < pop.size()) {
            for (const auto v : sampler.next(3)) {
                CHECK(seen.insert(v).second);
                ++drawn;
            }
        }
        CHECK(seen.size() == pop.size());
    }
}

TEST_CASE("first-batch membership is uniform within 3 sigma") {
    // Each epoch's first batch of size 3 from 10 elements includes a given
    // element with p = 0.3; binomial check over the shuffles.
    const std::size_t population = 10;
    const std::size_t batch_size = 3;
    const int epochs = 4000;
    std::vector<std::size_t> pop(population);
    for (std::size_t i = 0; i < pop.size(); ++i) pop[i] = i;
    std::vector<int> counts(population, 0);
    EpochSampler sampler(pop, Seed{33});
    for (int e = 0; e < epochs; ++e) {
        for (const auto v : sampler.next(batch_size)) counts[v] += 1;
        sampler.next(population - batch_size);  // finish the epoch
    }
    const double p = static_cast<double>(batch_size) / static_cast<double>(population);
    const double mean = epochs * p;
    const double sigma = std::sqrt(epochs * p * (1.0 - p));
    for (const auto c : counts) {
        CHECK(std::abs(c - mean) <= 3.0 * sigma);
    }
}

TEST_CASE("rating batch sampler draws from the train chunk only") {
    UserShard shard;
    shard.user_index = 0;
    shard.train = {{0, 1.0}, {1, 2.0}, {2, 3.0}, {3, 4.0}};
    shard.valid = {{4, 5.0}};
    shard.test = {{5, 1.0}};
    const auto batch = sample_rating_batch(shard, 4, Seed{2});
    CHECK(batch.size() == 4);
    for (const auto& [item, rating] : batch) {
        CHECK(item < 4);
        (void)rating;
    }
}

TEST_CASE("shard manifest lists every retained user") {
    const RatingsTable table = user_with_n_ratings(12);
    SplitConfig cfg;
    const SplitResult split = split_per_user(table, cfg);
    const auto path = test::temp_dir("manifest") + "/shards.txt";
    write_shard_manifest(path, table, cfg, split);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("u 10 1 1") != std::string::npos);
}
