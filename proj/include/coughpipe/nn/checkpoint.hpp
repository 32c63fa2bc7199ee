#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughpipe/nn/network.hpp"

namespace coughpipe::nn {

// Checkpoint layout: "CPCK1" magic, little-endian u32 header length, JSON
// header (network spec, seed, block table, training metadata), then the
// parameter blocks as little-endian float64 in spec order.

constexpr char kCheckpointMagic[5] = {'C', 'P', 'C', 'K', '1'};

struct Checkpoint {
    NetworkSpec spec;
    std::uint64_t seed = 0;
    nlohmann::json metadata;  // training history etc.; must stay deterministic
    std::vector<std::string> block_names;
    std::vector<std::vector<double>> blocks;

    /// Rebuilds a runnable network carrying these parameters.
    Network instantiate() const {
        Network net(spec, seed);
        if (net.param_blocks().size() != blocks.size()) {
            throw std::runtime_error("checkpoint: block count does not match spec");
        }
        net.restore_parameters(blocks);
        return net;
    }
};

inline Checkpoint make_checkpoint(const Network& net, nlohmann::json metadata = {}) {
    Checkpoint c;
    c.spec = net.spec();
    c.seed = net.seed();
    c.metadata = std::move(metadata);
    c.block_names = net.block_names();
    c.blocks = net.snapshot_parameters();
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    nlohmann::json header = {{"spec", network_spec_to_json(c.spec)}, {"seed", c.seed}, {"metadata", c.metadata}};
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t i = 0; i < c.blocks.size(); ++i) {
        table.push_back({{"name", c.block_names[i]}, {"count", c.blocks[i].size()}});
    }
    header["blocks"] = table;
    const std::string header_str = header.dump();

    std::string out;
    out.append(kCheckpointMagic, 5);
    const auto len = static_cast<std::uint32_t>(header_str.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out.append(header_str);
    for (const auto& block : c.blocks) {
        for (double v : block) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 9 || std::memcmp(bytes.data(), kCheckpointMagic, 5) != 0) {
        throw std::runtime_error("bad checkpoint magic: " + path);
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[5 + i]) << (8 * i);
    if (bytes.size() < 9 + len) throw std::runtime_error("truncated checkpoint header: " + path);
    const auto header = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);

    Checkpoint c;
    c.spec = network_spec_from_json(header.at("spec"));
    c.seed = header.at("seed").get<std::uint64_t>();
    c.metadata = header.value("metadata", nlohmann::json{});
    std::size_t pos = 9 + len;
    for (const auto& entry : header.at("blocks")) {
        c.block_names.push_back(entry.at("name").get<std::string>());
        const auto count = entry.at("count").get<std::size_t>();
        if (bytes.size() < pos + count * 8) throw std::runtime_error("truncated checkpoint blocks: " + path);
        std::vector<double> block(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[pos + i * 8 + k]) << (8 * k);
            std::memcpy(&block[i], &bits, 8);
        }
        pos += count * 8;
        c.blocks.push_back(std::move(block));
    }
    return c;
}

}  // namespace coughpipe::nn
