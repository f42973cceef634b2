#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fump/numerics/params.hpp"

namespace fump::num {

// Checkpoint container, all integers and doubles little-endian:
//
//   "FUMPCKPT" | u32 format_version | u64 config_hash | u32 section_count
//   section := u32 name_len | name | u64 payload_len | payload
//
// The "params" section holds, per parameter in store order:
//   u32 name_len | name | u32 rank | u64 dims[rank] | f64 values[prod(dims)]
// and "adam" holds u64 step_count followed by the same layout for the two
// moment buffers of each parameter.

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

class ByteWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(std::string_view s);
    void bytes(std::string_view s) { buf_.append(s); }
    std::string take() { return std::move(buf_); }
    const std::string& buffer() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    std::string_view bytes(std::size_t n);
    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

struct CheckpointFile {
    std::uint32_t format_version = kCheckpointFormatVersion;
    std::uint64_t config_hash = 0;
    std::vector<std::pair<std::string, std::string>> sections;

    void put(std::string name, std::string payload);
    const std::string* find(std::string_view name) const;
    const std::string& require(std::string_view name) const;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const CheckpointFile& file);
CheckpointFile parse_checkpoint(std::string_view bytes);

std::string encode_parameters(const ParameterStore& store);
std::string encode_adam_state(const ParameterStore& store);
/// Copies values into matching parameters. Every stored name must exist in
/// `store` with the same shape.
void decode_parameters(std::string_view payload, ParameterStore& store);
void decode_adam_state(std::string_view payload, ParameterStore& store);

/// FNV-1a over bytes; used for config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace fump::num
