// Independent reference implementations used as test oracles. These share
// nothing with the library paths they check beyond the published constants:
// the MFCC reference uses a naive O(N^2) DFT and direct triangle sums, the
// delta reference evaluates the regression formula term by term.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "coughpipe/features/feature_matrix.hpp"

namespace test_oracles {

inline std::vector<double> reference_mfcc(const std::vector<double>& frame,
                                          const coughpipe::features::FeatureConfig& cfg) {
    const std::size_t f = frame.size();
    std::size_t n_fft = 1;
    while (n_fft < f) n_fft *= 2;

    std::vector<double> windowed(n_fft, 0.0);
    for (std::size_t i = 0; i < f; ++i) {
        const double w = f == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (f - 1));
        windowed[i] = frame[i] * w;
    }
    const std::size_t n_bins = n_fft / 2 + 1;
    std::vector<double> power(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < n_fft; ++n) {
            const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) / n_fft;
            re += windowed[n] * std::cos(ang);
            im += windowed[n] * std::sin(ang);
        }
        power[k] = re * re + im * im;
    }

    auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto from_mel = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    const int nm = cfg.n_mel_filters;
    const double mel_max = to_mel(cfg.sample_rate_hz / 2.0);
    std::vector<double> log_mel(nm, 0.0);
    for (int m = 0; m < nm; ++m) {
        const double lo = from_mel(mel_max * m / (nm + 1));
        const double mid = from_mel(mel_max * (m + 1) / (nm + 1));
        const double hi = from_mel(mel_max * (m + 2) / (nm + 1));
        double e = 0.0;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double hz = static_cast<double>(k) * cfg.sample_rate_hz / static_cast<double>(n_fft);
            double w = 0.0;
            if (hz > lo && hz < mid) w = (hz - lo) / (mid - lo);
            else if (hz >= mid && hz < hi) w = (hi - hz) / (hi - mid);
            e += w * power[k];
        }
        log_mel[m] = std::log(std::max(e, 1e-10));
    }

    std::vector<double> out(cfg.mfcc_count, 0.0);
    for (int m = 0; m < cfg.mfcc_count; ++m) {
        double acc = 0.0;
        for (int j = 0; j < nm; ++j) acc += log_mel[j] * std::cos(M_PI * m * (2.0 * j + 1.0) / (2.0 * nm));
        out[m] = acc * (m == 0 ? std::sqrt(1.0 / nm) : std::sqrt(2.0 / nm));
    }
    return out;
}

inline std::vector<double> reference_delta(const std::vector<double>& series, std::size_t rows, std::size_t cols,
                                           int n) {
    std::vector<double> out(series.size(), 0.0);
    double denom = 0.0;
    for (int k = 1; k <= n; ++k) denom += 2.0 * k * k;
    for (std::size_t r = 0; r < rows; ++r) {
        for (long long t = 0; t < static_cast<long long>(cols); ++t) {
            double acc = 0.0;
            for (int k = 1; k <= n; ++k) {
                const long long hi = std::min<long long>(t + k, static_cast<long long>(cols) - 1);
                const long long lo = std::max<long long>(t - k, 0);
                acc += k * (series[r * cols + static_cast<std::size_t>(hi)] -
                            series[r * cols + static_cast<std::size_t>(lo)]);
            }
            out[r * cols + static_cast<std::size_t>(t)] = acc / denom;
        }
    }
    return out;
}

}  // namespace test_oracles
