#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughpipe/features/feature_matrix.hpp"

namespace coughpipe::features {

// Cache file layout: "CPFM1" magic, u32 rows, u32 cols (little-endian),
// rows*cols float64 row-major, then a UTF-8 JSON trailer up to EOF with
// the config and identity fields.

constexpr char kFeatureMagic[5] = {'C', 'P', 'F', 'M', '1'};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f64le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline double get_f64le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline nlohmann::json feature_config_to_json(const FeatureConfig& c) {
    return {{"mfcc_count", c.mfcc_count},   {"frame_length", c.frame_length},
            {"frame_count", c.frame_count}, {"sample_rate_hz", c.sample_rate_hz},
            {"n_mel_filters", c.n_mel_filters}, {"delta_window", c.delta_window}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig c;
    c.mfcc_count = j.at("mfcc_count").get<int>();
    c.frame_length = j.at("frame_length").get<int>();
    c.frame_count = j.at("frame_count").get<int>();
    c.sample_rate_hz = j.at("sample_rate_hz").get<int>();
    c.n_mel_filters = j.at("n_mel_filters").get<int>();
    c.delta_window = j.at("delta_window").get<int>();
    return c;
}

inline void write_feature_file(const std::string& path, const FeatureMatrix& fm) {
    fm.validate();
    std::string out;
    out.reserve(13 + fm.values.size() * 8 + 256);
    out.append(kFeatureMagic, 5);
    detail::put_u32le(out, static_cast<std::uint32_t>(fm.rows));
    detail::put_u32le(out, static_cast<std::uint32_t>(fm.cols));
    for (double v : fm.values) detail::put_f64le(out, v);

    nlohmann::json trailer = {{"config", feature_config_to_json(fm.config)},
                              {"event_id", fm.event_id},
                              {"patient_id", fm.patient_id},
                              {"label", label_name(fm.label)},
                              {"synthetic", fm.synthetic}};
    out.append(trailer.dump());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write feature file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

inline FeatureMatrix read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 13 || std::memcmp(bytes.data(), kFeatureMagic, 5) != 0) {
        throw std::runtime_error("bad feature file magic: " + path);
    }
    FeatureMatrix fm;
    fm.rows = detail::get_u32le(bytes.data() + 5);
    fm.cols = detail::get_u32le(bytes.data() + 9);
    const std::size_t n = fm.rows * fm.cols;
    const std::size_t body_end = 13 + n * 8;
    if (bytes.size() < body_end) throw std::runtime_error("truncated feature file: " + path);
    fm.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) fm.values[i] = detail::get_f64le(bytes.data() + 13 + i * 8);

    const auto trailer = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(body_end), bytes.end());
    fm.config = feature_config_from_json(trailer.at("config"));
    fm.event_id = trailer.at("event_id").get<std::string>();
    fm.patient_id = trailer.at("patient_id").get<std::string>();
    fm.label = parse_label(trailer.at("label").get<std::string>());
    fm.synthetic = trailer.at("synthetic").get<bool>();
    fm.validate();
    return fm;
}

}  // namespace coughpipe::features
