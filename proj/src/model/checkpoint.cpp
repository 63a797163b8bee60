// Checkpoint file: little-endian binary, format-versioned.
//   magic "MDLMCKPT" | u32 version | u8 role | config (7 x i32, u64 seed) |
//   u32 tensor count | per tensor: u16 name len, name bytes, i32 rows,
//   i32 cols, f32 data.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "mdlm/model.hpp"

namespace mdlm::model {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(static_cast<bool>(in), ErrorCategory::io, "truncated checkpoint file: " + path);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ParamSet<float>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot open checkpoint for write: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<uint8_t>(params.role));
    const ModelConfig& c = params.config;
    write_pod(out, static_cast<int32_t>(c.vocab_size));
    write_pod(out, static_cast<int32_t>(c.max_len));
    write_pod(out, static_cast<int32_t>(c.num_layers));
    write_pod(out, static_cast<int32_t>(c.num_heads));
    write_pod(out, static_cast<int32_t>(c.hidden_dim));
    write_pod(out, static_cast<int32_t>(c.ffn_dim));
    write_pod(out, static_cast<int32_t>(c.adapter_rank));
    write_pod(out, static_cast<uint64_t>(c.seed));
    write_pod(out, static_cast<uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        write_pod(out, static_cast<uint16_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod(out, static_cast<int32_t>(t.value.rows));
        write_pod(out, static_cast<int32_t>(t.value.cols));
        out.write(reinterpret_cast<const char*>(t.value.data.data()),
                  static_cast<std::streamsize>(t.value.size() * sizeof(float)));
    }
    require(static_cast<bool>(out), ErrorCategory::io, "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    require(static_cast<bool>(in) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
            ErrorCategory::io, "not a checkpoint file: " + path);
    const auto version = read_pod<uint32_t>(in, path);
    require(version == kVersion, ErrorCategory::io,
            "unsupported checkpoint version " + std::to_string(version) + ": " + path);

    Checkpoint ckpt;
    ckpt.role = static_cast<Role>(read_pod<uint8_t>(in, path));
    ckpt.config.vocab_size = read_pod<int32_t>(in, path);
    ckpt.config.max_len = read_pod<int32_t>(in, path);
    ckpt.config.num_layers = read_pod<int32_t>(in, path);
    ckpt.config.num_heads = read_pod<int32_t>(in, path);
    ckpt.config.hidden_dim = read_pod<int32_t>(in, path);
    ckpt.config.ffn_dim = read_pod<int32_t>(in, path);
    ckpt.config.adapter_rank = read_pod<int32_t>(in, path);
    ckpt.config.seed = read_pod<uint64_t>(in, path);
    ckpt.config.validate();

    // Rebuild the structural refs, then overwrite tensor values from file.
    ckpt.params = init_params(ckpt.config, ckpt.role);
    const auto count = read_pod<uint32_t>(in, path);
    require(count == ckpt.params.tensors.size(), ErrorCategory::io,
            "checkpoint tensor count mismatch: " + path);
    for (auto& t : ckpt.params.tensors) {
        const auto name_len = read_pod<uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_pod<int32_t>(in, path);
        const auto cols = read_pod<int32_t>(in, path);
        require(static_cast<bool>(in) && name == t.name && rows == t.value.rows &&
                    cols == t.value.cols,
                ErrorCategory::io, "checkpoint tensor layout mismatch at '" + name + "': " + path);
        in.read(reinterpret_cast<char*>(t.value.data.data()),
                static_cast<std::streamsize>(t.value.size() * sizeof(float)));
        require(static_cast<bool>(in), ErrorCategory::io, "truncated checkpoint file: " + path);
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.config.same_architecture(expected), ErrorCategory::config,
            "checkpoint config disagrees with requested config: " + path);
    return ckpt;
}

std::string checkpoint_id(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open checkpoint: " + path);
    uint64_t h = 1469598103934665603ull; // FNV-1a
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

} // namespace mdlm::model
