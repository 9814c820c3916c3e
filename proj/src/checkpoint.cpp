#include "mgrpo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mgrpo {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian host");

namespace {

template <typename T>
void write_raw(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error("checkpoint truncated: " + path);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet<float>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open checkpoint for writing: " + path);
    }
    out.write("MGRP", 4);
    write_raw<uint32_t>(out, kCheckpointVersion);
    write_raw<uint32_t>(out, static_cast<uint32_t>(params.count()));
    for (const auto& e : params.entries()) {
        if (e.name.size() > 0xffff) {
            throw std::invalid_argument("checkpoint: name too long: " + e.name);
        }
        write_raw<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_raw<uint8_t>(out, static_cast<uint8_t>(e.tensor.shape.size()));
        for (int d : e.tensor.shape) {
            write_raw<uint32_t>(out, static_cast<uint32_t>(d));
        }
        out.write(reinterpret_cast<const char*>(e.tensor.data.data()),
                  static_cast<std::streamsize>(e.tensor.data.size() * sizeof(float)));
    }
    if (!out) {
        throw std::runtime_error("checkpoint write failed: " + path);
    }
}

ParamSet<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MGRP", 4) != 0) {
        throw std::runtime_error("bad checkpoint magic: " + path);
    }
    const auto version = read_raw<uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    }
    const auto count = read_raw<uint32_t>(in, path);
    ParamSet<float> params;
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_raw<uint8_t>(in, path);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            d = static_cast<int>(read_raw<uint32_t>(in, path));
        }
        Tensor<float> t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) {
            throw std::runtime_error("checkpoint truncated: " + path);
        }
        params.add(name, std::move(t));
    }
    return params;
}

}  // namespace mgrpo
