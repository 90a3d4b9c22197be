#include "fstl/nn/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fstl/error.hpp"

namespace fstl {

namespace {

constexpr std::size_t kMagicLen = sizeof(kWeightsMagic) - 1;

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void shape(const Shape& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        for (auto d : s) u32(static_cast<std::uint32_t>(d));
    }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    Shape shape() {
        const auto rank = u32();
        if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank) + " in weights header");
        Shape s(rank);
        for (auto& d : s) d = u32();
        return s;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("unexpected end of weights");
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t pos() const { return pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_weights(const Network& net) {
    Writer w;
    for (std::size_t i = 0; i < kMagicLen; ++i) w.out.push_back(static_cast<std::uint8_t>(kWeightsMagic[i]));
    w.u32(static_cast<std::uint32_t>(net.layer_count()));
    for (const auto& l : net.layers()) {
        w.u32(static_cast<std::uint32_t>(l.kind));
        w.shape(l.input_shape);
        w.shape(l.output_shape);
        w.u32(static_cast<std::uint32_t>(l.params.size()));
        for (const auto& p : l.params) w.shape(p.shape());
    }
    for (const auto& l : net.layers())
        for (const auto& p : l.params)
            for (float v : p.values()) w.f32(v);
    return std::move(w.out);
}

Network load_weights(std::span<const std::uint8_t> bytes, const NetworkSpec& spec, Backend backend) {
    Reader r(bytes);
    if (bytes.size() < kMagicLen) throw FormatError("unexpected end of weights");
    if (std::memcmp(bytes.data(), kWeightsMagic, kMagicLen - 1) != 0) throw FormatError("bad weights magic");
    if (bytes[kMagicLen - 1] != static_cast<std::uint8_t>(kWeightsMagic[kMagicLen - 1]))
        throw FormatError(std::string("unsupported weights version '") + static_cast<char>(bytes[kMagicLen - 1]) + "'");
    r.skip(kMagicLen);

    Network net = init_network(spec, 0, backend);
    const auto count = r.u32();
    if (count != net.layer_count())
        throw ShapeError("weights file has " + std::to_string(count) + " layers, spec has " +
                         std::to_string(net.layer_count()));
    for (std::size_t i = 0; i < count; ++i) {
        const auto& l = net.layers()[i];
        const auto kind = r.u32();
        const Shape in = r.shape();
        const Shape out = r.shape();
        const auto tensors = r.u32();
        if (kind != static_cast<std::uint32_t>(l.kind))
            throw ShapeError("layer " + std::to_string(i) + ": weights file has kind code " + std::to_string(kind) +
                             ", spec has " + layer_kind_name(l.kind));
        if (in != l.input_shape || out != l.output_shape)
            throw ShapeError("layer " + std::to_string(i) + ": shape mismatch " + shape_to_string(in) + "->" +
                             shape_to_string(out) + " vs " + shape_to_string(l.input_shape) + "->" +
                             shape_to_string(l.output_shape));
        if (tensors != l.params.size())
            throw ShapeError("layer " + std::to_string(i) + ": parameter tensor count mismatch");
        for (const auto& p : l.params)
            if (r.shape() != p.shape())
                throw ShapeError("layer " + std::to_string(i) + ": parameter shape mismatch");
    }
    for (auto& l : net.layers())
        for (auto& p : l.params)
            for (auto& v : p.values()) v = r.f32();
    if (r.remaining() != 0)
        throw FormatError(std::to_string(r.remaining()) + " trailing bytes after weights data");
    return net;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_weights_file(const std::filesystem::path& path, const Network& net) {
    write_file_atomic(path, save_weights(net));
}

Network read_weights_file(const std::filesystem::path& path, const NetworkSpec& spec, Backend backend) {
    const auto bytes = read_file_bytes(path);
    return load_weights(bytes, spec, backend);
}

}  // namespace fstl
