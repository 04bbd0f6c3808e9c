#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "patclass/config.hpp"
#include "patclass/params.hpp"

namespace patclass {

// Checkpoint layout: magic "PBRT", u32 LE version, u64 LE header length, a
// JSON header {config, tensors: name -> {dtype, shape, byte_offset}}, then the
// raw little-endian f32 payload in the canonical tensor order. byte_offset is
// relative to the start of the payload.
inline constexpr char kCheckpointMagic[4] = {'P', 'B', 'R', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline void save_checkpoint(const ParameterStore<float>& params, const std::string& path) {
    nlohmann::json dir = nlohmann::json::object();
    std::uint64_t offset = 0;
    std::vector<const Tensor<float>*> order;
    for_each_tensor(params, [&](const std::string& name, const Tensor<float>& t) {
        nlohmann::json entry;
        entry["dtype"] = "f32";
        entry["shape"] = t.shape;
        entry["byte_offset"] = offset;
        dir[name] = entry;
        offset += t.size() * sizeof(float);
        order.push_back(&t);
    });

    nlohmann::json header;
    header["config"] = params.config;
    header["tensors"] = dir;
    const std::string header_text = header.dump();

    std::string prefix;
    prefix.append(kCheckpointMagic, 4);
    detail::put_u32_le(prefix, kCheckpointVersion);
    detail::put_u64_le(prefix, header_text.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const Tensor<float>* t : order) {
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
    out.flush();
    if (!out) throw DataError("write failed for checkpoint: " + path);
}

inline std::pair<ParameterStore<float>, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 16) throw CorruptError("checkpoint shorter than its fixed prefix");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic");
    }
    const std::uint32_t version = detail::get_u32_le(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t header_len = detail::get_u64_le(bytes.data() + 8);
    if (bytes.size() < 16 + header_len) throw CorruptError("checkpoint header truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16,
                                       bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!header.contains("config") || !header.contains("tensors")) {
        throw FormatError("checkpoint header missing config or tensor directory");
    }

    ModelConfig config;
    try {
        config = header.at("config").get<ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config malformed: ") + e.what());
    }
    config.validate();

    const nlohmann::json& dir = header.at("tensors");
    const unsigned char* payload = bytes.data() + 16 + header_len;
    const std::uint64_t payload_size = bytes.size() - 16 - header_len;

    ParameterStore<float> store = zeros_like<float>(config);
    std::size_t consumed = 0;
    for_each_tensor(store, [&](const std::string& name, Tensor<float>& t) {
        if (!dir.contains(name)) throw FormatError("checkpoint is missing tensor " + name);
        const nlohmann::json& entry = dir.at(name);
        if (entry.value("dtype", "") != "f32") {
            throw FormatError("tensor " + name + " has unsupported dtype");
        }
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape) {
            throw ShapeError("tensor " + name + " has shape inconsistent with config");
        }
        const auto offset = entry.at("byte_offset").get<std::uint64_t>();
        const std::uint64_t nbytes = t.size() * sizeof(float);
        if (offset + nbytes > payload_size) {
            throw CorruptError("payload truncated inside tensor " + name);
        }
        std::memcpy(t.data.data(), payload + offset, nbytes);
        ++consumed;
    });
    if (dir.size() != consumed) {
        throw FormatError("checkpoint directory lists unknown tensors");
    }
    return {std::move(store), config};
}

}  // namespace patclass
