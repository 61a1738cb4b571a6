#include "metamf/serialize.hpp"

#include <bit>
#include <cstring>

namespace metamf {

namespace {

constexpr std::uint8_t kDeliverTag = 0x01;
constexpr std::uint8_t kUploadTag = 0x02;

static_assert(std::endian::native == std::endian::little,
              "wire codecs assume a little-endian host");

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u64(std::uint64_t v) {
        const std::size_t at = buf_.size();
        buf_.resize(at + sizeof v);
        std::memcpy(buf_.data() + at, &v, sizeof v);
    }
    void f64(double v) {
        const std::size_t at = buf_.size();
        buf_.resize(at + sizeof v);
        std::memcpy(buf_.data() + at, &v, sizeof v);
    }
    void doubles(const double* data, std::size_t count) {
        const std::size_t at = buf_.size();
        buf_.resize(at + count * sizeof(double));
        std::memcpy(buf_.data() + at, data, count * sizeof(double));
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint64_t u64() {
        need(sizeof(std::uint64_t));
        std::uint64_t v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    double f64() {
        need(sizeof(double));
        double v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    void doubles(double* out, std::size_t count) {
        need(count * sizeof(double));
        std::memcpy(out, bytes_.data() + pos_, count * sizeof(double));
        pos_ += count * sizeof(double);
    }
    void expect_end() const {
        if (pos_ != bytes_.size()) {
            throw WireError("message has " + std::to_string(bytes_.size() - pos_) +
                            " trailing bytes");
        }
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw WireError("message truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

void write_matrix(ByteWriter& w, const Matrix& m) {
    w.u64(m.rows());
    w.u64(m.cols());
    w.doubles(m.data(), m.size());
}

Matrix read_matrix(ByteReader& r, std::size_t max_elements = 1ull << 31) {
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows == 0 || cols == 0 || rows > max_elements || cols > max_elements ||
        rows * cols > max_elements) {
        throw WireError("implausible matrix shape " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    Matrix m(rows, cols);
    r.doubles(m.data(), m.size());
    return m;
}

}  // namespace

std::vector<std::uint8_t> encode_deliver_model(const DeliverModel& msg) {
    ByteWriter w;
    w.u8(kDeliverTag);
    w.u64(msg.round);
    w.u64(msg.user_index);
    write_matrix(w, msg.model.item_embeddings);
    w.u64(msg.model.layers.size());
    for (const auto& layer : msg.model.layers) {
        write_matrix(w, layer.weight);
        write_matrix(w, layer.bias);
    }
    return w.take();
}

DeliverModel decode_deliver_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.u8() != kDeliverTag) throw WireError("not a DeliverModel message");
    DeliverModel msg;
    msg.round = r.u64();
    msg.user_index = r.u64();
    msg.model.item_embeddings = read_matrix(r);
    const std::uint64_t num_layers = r.u64();
    if (num_layers > 1024) throw WireError("implausible layer count");
    msg.model.layers.resize(num_layers);
    for (auto& layer : msg.model.layers) {
        layer.weight = read_matrix(r);
        layer.bias = read_matrix(r);
        if (layer.bias.cols() != 1 || layer.bias.rows() != layer.weight.rows()) {
            throw WireError("layer bias shape does not match weight");
        }
    }
    r.expect_end();
    return msg;
}

std::vector<std::uint8_t> encode_gradient_upload(const GradientUpload& msg) {
    ByteWriter w;
    w.u8(kUploadTag);
    w.u64(msg.round);
    w.u64(msg.user_index);
    w.f64(msg.gradient.loss);
    w.u64(msg.gradient.batch_size);
    w.u64(msg.gradient.grad.layers.size());
    for (const auto& layer : msg.gradient.grad.layers) {
        write_matrix(w, layer.weight);
        write_matrix(w, layer.bias);
    }
    const Matrix& items = msg.gradient.grad.item_embeddings;
    w.u64(items.rows());
    std::vector<std::size_t> touched;
    for (std::size_t j = 0; j < items.cols(); ++j) {
        for (std::size_t i = 0; i < items.rows(); ++i) {
            if (items(i, j) != 0.0) {
                touched.push_back(j);
                break;
            }
        }
    }
    w.u64(touched.size());
    for (const auto j : touched) {
        w.u64(j);
        for (std::size_t i = 0; i < items.rows(); ++i) w.f64(items(i, j));
    }
    return w.take();
}

GradientUpload decode_gradient_upload(const std::vector<std::uint8_t>& bytes,
                                      std::size_t num_items) {
    ByteReader r(bytes);
    if (r.u8() != kUploadTag) throw WireError("not a GradientUpload message");
    GradientUpload msg;
    msg.round = r.u64();
    msg.user_index = r.u64();
    msg.gradient.loss = r.f64();
    msg.gradient.batch_size = r.u64();
    const std::uint64_t num_layers = r.u64();
    if (num_layers > 1024) throw WireError("implausible layer count");
    msg.gradient.grad.layers.resize(num_layers);
    for (auto& layer : msg.gradient.grad.layers) {
        layer.weight = read_matrix(r);
        layer.bias = read_matrix(r);
    }
    const std::uint64_t item_dim = r.u64();
    const std::uint64_t touched = r.u64();
    if (touched > num_items) throw WireError("more touched columns than items");
    msg.gradient.grad.item_embeddings = Matrix(item_dim, num_items);
    for (std::uint64_t t = 0; t < touched; ++t) {
        const std::uint64_t j = r.u64();
        if (j >= num_items) {
            throw WireError("touched item " + std::to_string(j) + " out of range for " +
                            std::to_string(num_items) + " items");
        }
        for (std::size_t i = 0; i < item_dim; ++i) {
            msg.gradient.grad.item_embeddings(i, j) = r.f64();
        }
    }
    r.expect_end();
    return msg;
}

}  // namespace metamf
