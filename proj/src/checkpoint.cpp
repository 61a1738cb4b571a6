#include "metamf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace metamf {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'F', '1', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class FileWriter {
public:
    explicit FileWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    }
    void raw(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("failed writing checkpoint '" + path_ + "'");
    }

private:
    std::ofstream out_;
    std::string path_;
};

class FileReader {
public:
    explicit FileReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    }
    void raw(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw std::runtime_error("checkpoint '" + path_ + "' is truncated");
        }
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw std::runtime_error("checkpoint string too long");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const MetaParams& params,
                     const CheckpointMeta& meta) {
    params.validate_shapes();
    FileWriter w(path);
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);

    const ModelDims& d = params.dims;
    w.u64(d.num_users);
    w.u64(d.num_items);
    w.u64(d.user_dim);
    w.u64(d.item_dim);
    w.u64(d.collab_dim);
    w.u64(d.low_rank);
    w.u64(d.hidden_dim);
    w.u64(d.layer_sizes.size());
    for (const auto s : d.layer_sizes) w.u64(s);
    w.str(to_string(d.variant));
    w.u64(d.max_generated_bytes);

    w.f64(meta.train_frac);
    w.f64(meta.valid_frac);
    w.f64(meta.test_frac);
    w.u64(meta.split_seed);
    w.u64(meta.min_ratings);
    w.u64(meta.root_seed);

    w.u64(meta.user_ids.size());
    for (const auto& id : meta.user_ids) w.str(id);
    w.u64(meta.item_ids.size());
    for (const auto& id : meta.item_ids) w.str(id);

    w.u64(params.param_field_count());
    params.for_each_param([&](const std::string& name, const Matrix& m) {
        w.str(name);
        w.u64(m.rows());
        w.u64(m.cols());
        w.raw(m.data(), m.size() * sizeof(double));
    });
    w.close();
}

std::pair<MetaParams, CheckpointMeta> load_checkpoint(const std::string& path) {
    FileReader r(path);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    }
    if (r.u32() != kVersion) {
        throw std::runtime_error("unsupported checkpoint version in '" + path + "'");
    }

    ModelDims dims;
    dims.num_users = r.u64();
    dims.num_items = r.u64();
    dims.user_dim = r.u64();
    dims.item_dim = r.u64();
    dims.collab_dim = r.u64();
    dims.low_rank = r.u64();
    dims.hidden_dim = r.u64();
    const std::uint64_t num_layers = r.u64();
    if (num_layers > 1024) throw std::runtime_error("implausible layer count in checkpoint");
    dims.layer_sizes.resize(num_layers);
    for (auto& s : dims.layer_sizes) s = r.u64();
    dims.variant = variant_from_string(r.str());
    dims.max_generated_bytes = r.u64();

    CheckpointMeta meta;
    meta.train_frac = r.f64();
    meta.valid_frac = r.f64();
    meta.test_frac = r.f64();
    meta.split_seed = r.u64();
    meta.min_ratings = r.u64();
    meta.root_seed = r.u64();

    meta.user_ids.resize(r.u64());
    for (auto& id : meta.user_ids) id = r.str();
    meta.item_ids.resize(r.u64());
    for (auto& id : meta.item_ids) id = r.str();
    if (meta.user_ids.size() != dims.num_users || meta.item_ids.size() != dims.num_items) {
        throw std::runtime_error("checkpoint id tables disagree with model dims");
    }

    MetaParams params = MetaParams::zeros(dims);

    std::map<std::string, Matrix> fields;
    const std::uint64_t field_count = r.u64();
    for (std::uint64_t i = 0; i < field_count; ++i) {
        const std::string name = r.str();
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        if (rows == 0 || cols == 0 || rows * cols > (1ull << 31)) {
            throw std::runtime_error("implausible matrix shape for '" + name + "'");
        }
        Matrix m(rows, cols);
        r.raw(m.data(), m.size() * sizeof(double));
        fields.emplace(name, std::move(m));
    }

    params.for_each_param([&](const std::string& name, Matrix& m) {
        const auto it = fields.find(name);
        if (it == fields.end()) {
            throw std::runtime_error("checkpoint is missing parameter '" + name + "'");
        }
        if (!it->second.same_shape(m)) {
            throw ShapeError("checkpoint parameter '" + name + "' is " +
                             it->second.shape_string() + ", expected " + m.shape_string());
        }
        m = std::move(it->second);
    });
    params.validate_shapes();
    return {std::move(params), std::move(meta)};
}

}  // namespace metamf
