#include "fump/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace fump::num {
namespace {

constexpr char kMagic[8] = {'F', 'U', 'M', 'P', 'C', 'K', 'P', 'T'};

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
void put(std::string& buf, T v) {
    v = to_little(v);
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

void write_tensor_block(ByteWriter& w, const std::string& name, const Tensor& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
}

std::pair<std::string, Tensor> read_tensor_block(ByteReader& r) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
        d = static_cast<std::size_t>(r.u64());
        n *= d;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

void copy_checked(const std::string& name, const Tensor& src, Tensor& dst) {
    if (src.shape() != dst.shape()) {
        throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " + shape_string(src.shape()) +
                                 ", model expects " + shape_string(dst.shape()));
    }
    dst = src;
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { put(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put(buf_, v); }
void ByteWriter::f64(double v) { put(buf_, v); }
void ByteWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
}

std::string_view ByteReader::bytes(std::size_t n) {
    if (n > data_.size() - pos_) throw std::runtime_error("checkpoint: truncated data");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::uint32_t ByteReader::u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return to_little(v);
}

std::uint64_t ByteReader::u64() {
    std::uint64_t v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return to_little(v);
}

double ByteReader::f64() {
    double v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return to_little(v);
}

std::string ByteReader::str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
}

void CheckpointFile::put(std::string name, std::string payload) {
    for (auto& [n, p] : sections) {
        if (n == name) {
            p = std::move(payload);
            return;
        }
    }
    sections.emplace_back(std::move(name), std::move(payload));
}

const std::string* CheckpointFile::find(std::string_view name) const {
    for (const auto& [n, p] : sections) {
        if (n == name) return &p;
    }
    return nullptr;
}

const std::string& CheckpointFile::require(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw std::runtime_error("checkpoint: missing section '" + std::string(name) + "'");
}

std::string serialize_checkpoint(const CheckpointFile& file) {
    ByteWriter w;
    w.bytes(std::string_view(kMagic, sizeof kMagic));
    w.u32(file.format_version);
    w.u64(file.config_hash);
    w.u32(static_cast<std::uint32_t>(file.sections.size()));
    for (const auto& [name, payload] : file.sections) {
        w.str(name);
        w.u64(payload.size());
        w.bytes(payload);
    }
    return w.take();
}

CheckpointFile parse_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    if (bytes.size() < sizeof kMagic || r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    CheckpointFile file;
    file.format_version = r.u32();
    if (file.format_version != kCheckpointFormatVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(file.format_version));
    }
    file.config_hash = r.u64();
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint64_t len = r.u64();
        file.sections.emplace_back(std::move(name), std::string(r.bytes(static_cast<std::size_t>(len))));
    }
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
    return file;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
    const std::string bytes = serialize_checkpoint(file);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

std::string encode_parameters(const ParameterStore& store) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(store.size()));
    for (const auto& p : store) write_tensor_block(w, p.name, p.value);
    return w.take();
}

std::string encode_adam_state(const ParameterStore& store) {
    ByteWriter w;
    w.u64(static_cast<std::uint64_t>(store.adam_steps()));
    w.u32(static_cast<std::uint32_t>(store.size()));
    for (const auto& p : store) {
        write_tensor_block(w, p.name, p.moment1);
        write_tensor_block(w, p.name, p.moment2);
    }
    return w.take();
}

void decode_parameters(std::string_view payload, ParameterStore& store) {
    ByteReader r(payload);
    const std::uint32_t count = r.u32();
    if (count != store.size()) {
        throw std::runtime_error("checkpoint: " + std::to_string(count) + " parameters stored, model has " +
                                 std::to_string(store.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor_block(r);
        if (!store.contains(name)) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        copy_checked(name, t, store.at(name).value);
    }
}

void decode_adam_state(std::string_view payload, ParameterStore& store) {
    ByteReader r(payload);
    store.set_adam_steps(static_cast<std::int64_t>(r.u64()));
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [n1, m1] = read_tensor_block(r);
        auto [n2, m2] = read_tensor_block(r);
        if (!store.contains(n1)) throw std::runtime_error("checkpoint: unknown parameter '" + n1 + "'");
        copy_checked(n1, m1, store.at(n1).moment1);
        copy_checked(n2, m2, store.at(n2).moment2);
    }
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace fump::num
