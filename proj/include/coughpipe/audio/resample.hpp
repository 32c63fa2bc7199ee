#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "coughpipe/audio/recording.hpp"

namespace coughpipe::audio {

namespace detail {

inline double bessel_i0(double x) {
    // power series; converges fast for the beta values used here
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

inline double sinc(double u) {
    if (u == 0.0) return 1.0;
    const double pu = M_PI * u;
    return std::sin(pu) / pu;
}

}  // namespace detail

/// Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel
/// (16 zero crossings per side, beta 8.6). The kernel is evaluated per
/// output sample at its fractional phase and normalized to unity DC gain,
/// which also keeps the signal edges from drooping.
inline std::vector<double> resample_signal(const std::vector<double>& x, int src_hz, int target_hz) {
    if (x.empty()) throw std::invalid_argument("resample: empty signal");
    if (src_hz <= 0 || target_hz <= 0) throw std::invalid_argument("resample: rates must be positive");
    if (src_hz == target_hz) return x;

    const auto len = static_cast<long long>(x.size());
    const auto out_len = static_cast<long long>(
        std::llround(static_cast<long double>(len) * target_hz / src_hz));

    const double step = static_cast<double>(src_hz) / target_hz;        // input samples per output sample
    const double cutoff = std::min(1.0, static_cast<double>(target_hz) / src_hz);
    const int zero_crossings = 16;
    const double half_width = zero_crossings / cutoff;
    const double beta = 8.6;
    const double i0_beta = detail::bessel_i0(beta);

    std::vector<double> y(static_cast<std::size_t>(std::max(1ll, out_len)));
    for (long long n = 0; n < out_len; ++n) {
        const double center = n * step;
        const auto k0 = static_cast<long long>(std::ceil(center - half_width));
        const auto k1 = static_cast<long long>(std::floor(center + half_width));
        double acc = 0.0, wsum = 0.0;
        for (long long k = std::max(0ll, k0); k <= std::min(len - 1, k1); ++k) {
            const double d = static_cast<double>(k) - center;
            const double frac = d / half_width;
            const double win = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
            const double h = cutoff * detail::sinc(cutoff * d) * win;
            acc += x[static_cast<std::size_t>(k)] * h;
            wsum += h;
        }
        y[static_cast<std::size_t>(n)] = wsum != 0.0 ? acc / wsum : 0.0;  // unity DC gain
    }
    return y;
}

/// Resamples a recording; output length is round(len * target / src) and
/// the call is the identity (bitwise) when the rate already matches.
inline Recording resample(const Recording& r, int target_hz) {
    r.validate();
    if (target_hz <= 0) throw std::invalid_argument("resample: target rate must be positive");
    Recording out = r;
    if (r.sample_rate_hz == target_hz) return out;
    out.samples = resample_signal(r.samples, r.sample_rate_hz, target_hz);
    out.sample_rate_hz = target_hz;
    return out;
}

}  // namespace coughpipe::audio
