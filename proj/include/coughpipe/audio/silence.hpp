#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coughpipe/audio/recording.hpp"

namespace coughpipe::audio {

/// Thrown when every analysis window falls below the energy threshold.
struct AllSilentError : std::runtime_error {
    explicit AllSilentError(const std::string& event_id)
        : std::runtime_error("all-silent recording: " + event_id) {}
};

namespace detail {

/// Mean-square energy over consecutive non-overlapping windows; the final
/// partial window is averaged over its own length.
inline std::vector<double> window_energies(const std::vector<double>& x, std::size_t win) {
    std::vector<double> e;
    e.reserve(x.size() / win + 1);
    for (std::size_t start = 0; start < x.size(); start += win) {
        const std::size_t end = std::min(x.size(), start + win);
        double acc = 0.0;
        for (std::size_t i = start; i < end; ++i) acc += x[i] * x[i];
        e.push_back(acc / static_cast<double>(end - start));
    }
    return e;
}

inline double percentile95(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace detail

/// Energy-based silence removal. Short-time energy is measured on 10 ms
/// non-overlapping windows and compared against `energy_threshold` times
/// the 95th-percentile window energy, so the cut level tracks the
/// recording's own loudness. Samples within `margin_ms` of any active
/// window stay, so only silent stretches longer than 2*margin_ms lose
/// their middle; everything kept is copied sample-exact.
inline Recording remove_silence(const Recording& r, double energy_threshold = 0.01, double margin_ms = 50.0) {
    r.validate();
    if (!(energy_threshold > 0.0 && energy_threshold < 1.0)) {
        throw std::invalid_argument("remove_silence: energy_threshold must be in (0, 1)");
    }
    if (margin_ms < 0.0) throw std::invalid_argument("remove_silence: margin_ms must be >= 0");

    const auto win = static_cast<std::size_t>(std::max(1l, std::lround(0.010 * r.sample_rate_hz)));
    const auto margin = static_cast<long long>(std::lround(margin_ms / 1000.0 * r.sample_rate_hz));

    const auto energies = detail::window_energies(r.samples, win);
    const double threshold = energy_threshold * detail::percentile95(energies);

    const auto n = static_cast<long long>(r.samples.size());
    std::vector<char> keep(r.samples.size(), 0);
    bool any_active = false;
    for (std::size_t w = 0; w < energies.size(); ++w) {
        if (energies[w] > threshold) {
            any_active = true;
            const auto lo = std::max(0ll, static_cast<long long>(w * win) - margin);
            const auto hi = std::min(n, static_cast<long long>(std::min<std::size_t>((w + 1) * win, r.samples.size())) + margin);
            std::fill(keep.begin() + lo, keep.begin() + hi, char(1));
        }
    }
    if (!any_active) throw AllSilentError(r.event_id);

    Recording out = r;
    out.samples.clear();
    out.samples.reserve(r.samples.size());
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        if (keep[i]) out.samples.push_back(r.samples[i]);
    }
    return out;
}

}  // namespace coughpipe::audio
