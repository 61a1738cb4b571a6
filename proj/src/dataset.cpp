#include "metamf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace metamf {

namespace {

bool parses_as_unsigned(const std::string& s, std::uint64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

// Numeric order when every raw id is an unsigned integer, lexicographic otherwise.
std::vector<std::string> sorted_ids(const std::set<std::string>& raw) {
    std::vector<std::string> ids(raw.begin(), raw.end());
    bool all_numeric = true;
    std::vector<std::pair<std::uint64_t, std::string>> numeric;
    numeric.reserve(ids.size());
    for (const auto& id : ids) {
        std::uint64_t v = 0;
        if (!parses_as_unsigned(id, v)) {
            all_numeric = false;
            break;
        }
        numeric.emplace_back(v, id);
    }
    if (all_numeric) {
        std::sort(numeric.begin(), numeric.end());
        ids.clear();
        for (auto& [v, id] : numeric) ids.push_back(std::move(id));
    }  // std::set already yields lexicographic order otherwise
    return ids;
}

std::vector<std::string> split_line(const std::string& line, Separator sep) {
    std::vector<std::string> fields;
    if (sep == Separator::Auto) {
        if (line.find("::") != std::string::npos) {
            sep = Separator::DoubleColon;
        } else if (line.find('\t') != std::string::npos) {
            sep = Separator::Tab;
        } else if (line.find(',') != std::string::npos) {
            sep = Separator::Comma;
        } else {
            sep = Separator::Whitespace;
        }
    }
    if (sep == Separator::Whitespace) {
        std::istringstream iss(line);
        std::string tok;
        while (iss >> tok) fields.push_back(tok);
        return fields;
    }
    const std::string delim = sep == Separator::DoubleColon ? "::"
                              : sep == Separator::Tab       ? "\t"
                                                            : ",";
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = line.find(delim, pos);
        if (hit == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, hit - pos));
        pos = hit + delim.size();
    }
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.pop_back();
    }
    return fields;
}

RatingsTable build_table(
    std::vector<std::pair<std::pair<std::string, std::string>, double>>&& triples,
    const std::string& origin) {
    if (triples.empty()) {
        throw DataError(origin + ": empty ratings table");
    }
    std::set<std::string> users_raw;
    std::set<std::string> items_raw;
    for (const auto& t : triples) {
        users_raw.insert(t.first.first);
        items_raw.insert(t.first.second);
    }
    RatingsTable table;
    table.user_ids = sorted_ids(users_raw);
    table.item_ids = sorted_ids(items_raw);
    table.num_users = table.user_ids.size();
    table.num_items = table.item_ids.size();

    std::unordered_map<std::string, std::size_t> user_index;
    std::unordered_map<std::string, std::size_t> item_index;
    for (std::size_t i = 0; i < table.user_ids.size(); ++i) user_index[table.user_ids[i]] = i;
    for (std::size_t i = 0; i < table.item_ids.size(); ++i) item_index[table.item_ids[i]] = i;

    std::set<std::pair<std::size_t, std::size_t>> seen;
    table.ratings.reserve(triples.size());
    for (const auto& t : triples) {
        const std::size_t u = user_index.at(t.first.first);
        const std::size_t i = item_index.at(t.first.second);
        if (!seen.insert({u, i}).second) {
            throw DataError(origin + ": duplicate rating for (user " + t.first.first + ", item " +
                            t.first.second + ")");
        }
        table.ratings.push_back(Rating{u, i, t.second});
    }
    return table;
}

}  // namespace

std::size_t RatingsTable::user_index_of(const std::string& raw_id) const {
    const auto it = std::find(user_ids.begin(), user_ids.end(), raw_id);
    if (it == user_ids.end()) throw DataError("unknown user id '" + raw_id + "'");
    return static_cast<std::size_t>(it - user_ids.begin());
}

std::size_t RatingsTable::item_index_of(const std::string& raw_id) const {
    const auto it = std::find(item_ids.begin(), item_ids.end(), raw_id);
    if (it == item_ids.end()) throw DataError("unknown item id '" + raw_id + "'");
    return static_cast<std::size_t>(it - item_ids.begin());
}

Separator separator_from_string(const std::string& name) {
    if (name == "auto") return Separator::Auto;
    if (name == "tab") return Separator::Tab;
    if (name == "comma") return Separator::Comma;
    if (name == "colons") return Separator::DoubleColon;
    if (name == "space" || name == "whitespace") return Separator::Whitespace;
    throw ParseError("unknown separator '" + name + "' (expected auto|tab|comma|colons|space)");
}

std::string to_string(Separator sep) {
    switch (sep) {
        case Separator::Auto: return "auto";
        case Separator::Tab: return "tab";
        case Separator::Comma: return "comma";
        case Separator::DoubleColon: return "colons";
        case Separator::Whitespace: return "space";
    }
    return "auto";
}

RatingsTable load_ratings(const std::string& path, Separator sep) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open ratings file '" + path + "'");
    }
    std::vector<std::pair<std::pair<std::string, std::string>, double>> triples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line, sep);
        if (fields.size() < 3 || fields.size() > 4) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 3 or 4 fields, got " +
                             std::to_string(fields.size()));
        }
        double rating = 0.0;
        try {
            std::size_t consumed = 0;
            rating = std::stod(fields[2], &consumed);
            if (consumed != fields[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad rating value '" +
                             fields[2] + "'");
        }
        if (!std::isfinite(rating)) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": non-finite rating");
        }
        triples.push_back({{fields[0], fields[1]}, rating});
    }
    return build_table(std::move(triples), path);
}

RatingsTable table_from_triples(
    const std::vector<std::pair<std::pair<std::string, std::string>, double>>& triples) {
    auto copy = triples;
    return build_table(std::move(copy), "<memory>");
}

SplitResult split_per_user(const RatingsTable& table, const SplitConfig& cfg) {
    const double sum = cfg.train_frac + cfg.valid_frac + cfg.test_frac;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DataError("split fractions sum to " + std::to_string(sum) + ", expected 1");
    }
    if (cfg.min_ratings < 3) {
        throw DataError("min_ratings must be at least 3 (one rating per chunk)");
    }

    std::vector<std::vector<std::pair<std::size_t, double>>> per_user(table.num_users);
    for (const auto& r : table.ratings) {
        per_user[r.user].push_back({r.item, r.value});
    }

    SplitResult result;
    for (std::size_t u = 0; u < table.num_users; ++u) {
        auto& items = per_user[u];
        if (items.size() < cfg.min_ratings) {
            result.dropped_users.push_back(u);
            continue;
        }
        // Canonical base order, then a per-user shuffle: the outcome depends
        // only on the rating set and the seed, not on file line order.
        std::sort(items.begin(), items.end());
        Rng rng(derive_seed(cfg.seed, u));
        rng.shuffle(items);

        const std::size_t count = items.size();
        // The 1e-9 nudge keeps floor() faithful to the exact rational value
        // (0.3 * 10 is 2.9999... in binary but means 3).
        const std::size_t test_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::floor(cfg.test_frac * static_cast<double>(count) + 1e-9)));
        const std::size_t valid_n = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::floor(cfg.valid_frac * static_cast<double>(count) + 1e-9)));
        if (test_n + valid_n >= count) {
            result.dropped_users.push_back(u);
            continue;
        }
        const std::size_t train_n = count - test_n - valid_n;

        UserShard shard;
        shard.user_index = u;
        shard.train.assign(items.begin(), items.begin() + train_n);
        shard.valid.assign(items.begin() + train_n, items.begin() + train_n + valid_n);
        shard.test.assign(items.begin() + train_n + valid_n, items.end());
        result.shards.push_back(std::move(shard));
    }
    return result;
}

void write_shard_manifest(const std::string& path, const RatingsTable& table,
                          const SplitConfig& cfg, const SplitResult& split) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write shard manifest '" + path + "'");
    out << "# seed=" << cfg.seed.value << " train_frac=" << cfg.train_frac
        << " valid_frac=" << cfg.valid_frac << " test_frac=" << cfg.test_frac
        << " min_ratings=" << cfg.min_ratings << "\n";
    out << "# user_id train valid test\n";
    for (const auto& shard : split.shards) {
        out << table.user_ids[shard.user_index] << " " << shard.train.size() << " "
            << shard.valid.size() << " " << shard.test.size() << "\n";
    }
    for (const auto u : split.dropped_users) {
        out << "# dropped " << table.user_ids[u] << "\n";
    }
}

EpochSampler::EpochSampler(std::vector<std::size_t> population, Seed seed)
    : order_(std::move(population)), rng_(seed) {
    rng_.shuffle(order_);
}

std::vector<std::size_t> EpochSampler::next(std::size_t batch_size) {
    if (order_.empty()) return {};
    if (batch_size > order_.size()) {
        if (!clamp_logged_) {
            std::cerr << "sampler: batch size " << batch_size << " clamped to population "
                      << order_.size() << "\n";
            clamp_logged_ = true;
        }
        batch_size = order_.size();
    }
    if (cursor_ >= order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
    }
    const std::size_t take = std::min(batch_size, order_.size() - cursor_);
    std::vector<std::size_t> batch(order_.begin() + cursor_, order_.begin() + cursor_ + take);
    cursor_ += take;
    return batch;
}

std::vector<std::size_t> sample_user_batch(const std::vector<std::size_t>& users,
                                           std::size_t batch_size, Seed seed) {
    EpochSampler sampler(users, seed);
    return sampler.next(batch_size);
}

std::vector<std::pair<std::size_t, double>> sample_rating_batch(const UserShard& shard,
                                                                std::size_t batch_size, Seed seed) {
    std::vector<std::size_t> positions(shard.train.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    EpochSampler sampler(std::move(positions), seed);
    std::vector<std::pair<std::size_t, double>> batch;
    for (const auto pos : sampler.next(batch_size)) batch.push_back(shard.train[pos]);
    return batch;
}

}  // namespace metamf
