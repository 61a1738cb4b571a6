#include "metamf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace metamf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + value + "'");
    }
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad count '" + value + "'");
    }
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) throw ConfigError("config key '" + key + "': empty list entry");
        sizes.push_back(parse_count(key, tok));
    }
    if (sizes.empty()) throw ConfigError("config key '" + key + "': empty list");
    return sizes;
}

}  // namespace

SplitConfig RunConfig::split_config() const {
    SplitConfig cfg;
    cfg.train_frac = train_frac;
    cfg.valid_frac = valid_frac;
    cfg.test_frac = test_frac;
    cfg.seed = Seed{seed};
    cfg.min_ratings = min_ratings;
    return cfg;
}

ModelDims RunConfig::model_dims(std::size_t num_users, std::size_t num_items) const {
    ModelDims dims;
    dims.num_users = num_users;
    dims.num_items = num_items;
    dims.user_dim = user_dim;
    dims.item_dim = item_dim;
    dims.collab_dim = collab_dim;
    dims.low_rank = low_rank;
    dims.hidden_dim = hidden_dim;
    dims.layer_sizes = layer_sizes;
    dims.variant = variant;
    dims.max_generated_bytes = max_generated_mb * 1024 * 1024;
    return dims;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.users_per_round = users_per_round;
    cfg.ratings_per_user = ratings_per_user;
    cfg.learning_rate = learning_rate;
    cfg.reg_weight = reg_weight;
    cfg.max_rounds = max_rounds;
    cfg.patience = patience;
    cfg.eval_every = eval_every;
    cfg.seed = Seed{seed};
    cfg.threads = threads;
    return cfg;
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value'");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");

        if (key == "dataset") cfg.dataset = value;
        else if (key == "format") cfg.format = separator_from_string(value);
        else if (key == "train_frac") cfg.train_frac = parse_double(key, value);
        else if (key == "valid_frac") cfg.valid_frac = parse_double(key, value);
        else if (key == "test_frac") cfg.test_frac = parse_double(key, value);
        else if (key == "min_ratings") cfg.min_ratings = parse_count(key, value);
        else if (key == "user_dim") cfg.user_dim = parse_count(key, value);
        else if (key == "item_dim") cfg.item_dim = parse_count(key, value);
        else if (key == "collab_dim") cfg.collab_dim = parse_count(key, value);
        else if (key == "low_rank") cfg.low_rank = parse_count(key, value);
        else if (key == "hidden_dim") cfg.hidden_dim = parse_count(key, value);
        else if (key == "layers") cfg.layer_sizes = parse_sizes(key, value);
        else if (key == "variant") {
            try {
                cfg.variant = variant_from_string(value);
            } catch (const std::exception& e) {
                throw ConfigError(where + ": " + e.what());
            }
        }
        else if (key == "max_generated_mb") cfg.max_generated_mb = parse_count(key, value);
        else if (key == "users_per_round") cfg.users_per_round = parse_count(key, value);
        else if (key == "ratings_per_user") cfg.ratings_per_user = parse_count(key, value);
        else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
        else if (key == "reg_weight") cfg.reg_weight = parse_double(key, value);
        else if (key == "max_rounds") cfg.max_rounds = parse_count(key, value);
        else if (key == "patience") cfg.patience = parse_count(key, value);
        else if (key == "eval_every") cfg.eval_every = parse_count(key, value);
        else if (key == "threads") cfg.threads = parse_count(key, value);
        else if (key == "seed") cfg.seed = parse_count(key, value);
        else if (key == "out") cfg.out_dir = value;
        else throw ConfigError(where + ": unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

void emit_config(const RunConfig& cfg, std::ostream& out) {
    out << "dataset = " << cfg.dataset << "\n";
    out << "format = " << to_string(cfg.format) << "\n";
    out << "train_frac = " << fmt(cfg.train_frac) << "\n";
    out << "valid_frac = " << fmt(cfg.valid_frac) << "\n";
    out << "test_frac = " << fmt(cfg.test_frac) << "\n";
    out << "min_ratings = " << cfg.min_ratings << "\n";
    out << "user_dim = " << cfg.user_dim << "\n";
    out << "item_dim = " << cfg.item_dim << "\n";
    out << "collab_dim = " << cfg.collab_dim << "\n";
    out << "low_rank = " << cfg.low_rank << "\n";
    out << "hidden_dim = " << cfg.hidden_dim << "\n";
    out << "layers = ";
    for (std::size_t i = 0; i < cfg.layer_sizes.size(); ++i) {
        if (i) out << ",";
        out << cfg.layer_sizes[i];
    }
    out << "\n";
    out << "variant = " << to_string(cfg.variant) << "\n";
    out << "max_generated_mb = " << cfg.max_generated_mb << "\n";
    out << "users_per_round = " << cfg.users_per_round << "\n";
    out << "ratings_per_user = " << cfg.ratings_per_user << "\n";
    out << "learning_rate = " << fmt(cfg.learning_rate) << "\n";
    out << "reg_weight = " << fmt(cfg.reg_weight) << "\n";
    out << "max_rounds = " << cfg.max_rounds << "\n";
    out << "patience = " << cfg.patience << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "out = " << cfg.out_dir << "\n";
}

}  // namespace metamf
