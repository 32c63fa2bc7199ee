#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace coughpipe::features {

/// Frame start offsets for exactly S frames of length F covering the whole
/// signal: hop = (len - F)/(S - 1), start_i = round(i * hop). Returns the
/// padded length the signal must reach (len, or F + S - 1 when the signal
/// is too short for unit hops).
struct FramePlan {
    std::vector<std::size_t> starts;
    std::size_t padded_len = 0;
};

inline FramePlan plan_frames(std::size_t len, int frame_length, int frame_count) {
    if (len == 0) throw std::invalid_argument("frame_signal: empty signal");
    if (frame_length < 1 || frame_count < 1) throw std::invalid_argument("frame_signal: F and S must be >= 1");
    const auto f = static_cast<std::size_t>(frame_length);
    const auto s = static_cast<std::size_t>(frame_count);

    FramePlan plan;
    plan.padded_len = std::max(len, s == 1 ? f : f + s - 1);
    plan.starts.resize(s);
    if (s == 1) {
        plan.starts[0] = 0;
        return plan;
    }
    const double hop = static_cast<double>(plan.padded_len - f) / static_cast<double>(s - 1);
    for (std::size_t i = 0; i < s; ++i) {
        plan.starts[i] = static_cast<std::size_t>(std::llround(hop * static_cast<double>(i)));
    }
    return plan;
}

/// Slices the signal into exactly S frames of F samples, zero-padding the
/// tail when the signal is shorter than F + S - 1 samples.
inline std::vector<std::vector<double>> frame_signal(const std::vector<double>& samples, int frame_length,
                                                     int frame_count) {
    const auto plan = plan_frames(samples.size(), frame_length, frame_count);
    const auto f = static_cast<std::size_t>(frame_length);
    std::vector<std::vector<double>> frames(plan.starts.size(), std::vector<double>(f, 0.0));
    for (std::size_t i = 0; i < plan.starts.size(); ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            const std::size_t src = plan.starts[i] + j;
            if (src < samples.size()) frames[i][j] = samples[src];
        }
    }
    return frames;
}

}  // namespace coughpipe::features
