#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughpipe::audio {

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

struct WavData {
    std::vector<double> samples;  // mono, [-1, 1]
    int sample_rate_hz = 0;
};

/// Reads a 16-bit PCM WAV file. Stereo (or any multi-channel) input is
/// averaged down to mono; 16-bit samples map onto [-1, 1) via /32768.
inline WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("not a RIFF/WAVE file: " + path);
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        std::uint32_t len = detail::read_u32le(bytes.data() + pos + 4);
        pos += 8;
        if (pos + len > bytes.size()) len = static_cast<std::uint32_t>(bytes.size() - pos);
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            format = detail::read_u16le(bytes.data() + pos);
            channels = detail::read_u16le(bytes.data() + pos + 2);
            rate = detail::read_u32le(bytes.data() + pos + 4);
            bits = detail::read_u16le(bytes.data() + pos + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + pos;
            data_len = len;
        }
        pos += len + (len & 1);  // chunks are word-aligned
    }

    if (format != 1 || bits != 16) throw std::runtime_error("unsupported WAV encoding (need 16-bit PCM): " + path);
    if (channels == 0 || rate == 0 || data == nullptr) throw std::runtime_error("malformed WAV file: " + path);

    const std::size_t frames = data_len / (2 * channels);
    WavData out;
    out.sample_rate_hz = static_cast<int>(rate);
    out.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * 2;
            auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            acc += static_cast<double>(v) / 32768.0;
        }
        out.samples[i] = acc / channels;
    }
    return out;
}

/// Writes mono 16-bit PCM. Values are clamped to [-1, 1] then scaled by 32767.
inline void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate_hz) {
    if (sample_rate_hz <= 0) throw std::invalid_argument("write_wav: bad sample rate");
    std::string out;
    out.reserve(44 + samples.size() * 2);
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.append("RIFF");
    detail::put_u32le(out, 36 + data_bytes);
    out.append("WAVE");
    out.append("fmt ");
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);  // PCM
    detail::put_u16le(out, 1);  // mono
    detail::put_u32le(out, static_cast<std::uint32_t>(sample_rate_hz));
    detail::put_u32le(out, static_cast<std::uint32_t>(sample_rate_hz) * 2);
    detail::put_u16le(out, 2);
    detail::put_u16le(out, 16);
    out.append("data");
    detail::put_u32le(out, data_bytes);
    for (double s : samples) {
        double c = std::clamp(s, -1.0, 1.0);
        auto v = static_cast<std::int16_t>(std::lrint(c * 32767.0));
        detail::put_u16le(out, static_cast<std::uint16_t>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write WAV file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace coughpipe::audio
