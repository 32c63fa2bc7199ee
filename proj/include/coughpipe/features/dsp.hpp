#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "coughpipe/features/feature_matrix.hpp"

namespace coughpipe::features {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return w;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank over FFT power bins 0..n_fft/2. Filters have
/// unit peak and centers equally spaced on the mel scale from 0 Hz to Nyquist.
/// Returned as dense weights, one row of (n_fft/2 + 1) per filter.
inline std::vector<std::vector<double>> mel_filterbank(int n_filters, std::size_t n_fft, int sample_rate_hz) {
    const std::size_t n_bins = n_fft / 2 + 1;
    const double nyquist = sample_rate_hz / 2.0;
    std::vector<double> centers_hz(static_cast<std::size_t>(n_filters) + 2);
    const double mel_max = hz_to_mel(nyquist);
    for (std::size_t i = 0; i < centers_hz.size(); ++i) {
        centers_hz[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_filters + 1));
    }
    std::vector<std::vector<double>> fb(static_cast<std::size_t>(n_filters), std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < n_filters; ++m) {
        const double lo = centers_hz[static_cast<std::size_t>(m)];
        const double mid = centers_hz[static_cast<std::size_t>(m) + 1];
        const double hi = centers_hz[static_cast<std::size_t>(m) + 2];
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);
            if (f > lo && f < mid) {
                fb[static_cast<std::size_t>(m)][k] = (f - lo) / (mid - lo);
            } else if (f >= mid && f < hi) {
                fb[static_cast<std::size_t>(m)][k] = (hi - f) / (hi - mid);
            }
        }
    }
    return fb;
}

constexpr double kMelLogFloor = 1e-10;

/// Orthonormal DCT-II of `v`, keeping coefficients 0..m_keep-1.
inline std::vector<double> dct2_orthonormal(const std::vector<double>& v, int m_keep) {
    const auto n = static_cast<int>(v.size());
    std::vector<double> out(static_cast<std::size_t>(m_keep), 0.0);
    for (int m = 0; m < m_keep; ++m) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            acc += v[static_cast<std::size_t>(j)] * std::cos(M_PI * m * (2.0 * j + 1.0) / (2.0 * n));
        }
        const double scale = m == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        out[static_cast<std::size_t>(m)] = acc * scale;
    }
    return out;
}

/// Per-frame MFCC pipeline with the window, filterbank (stored sparse: the
/// triangles only touch a narrow bin range) and DCT basis built once, so
/// extracting hundreds of frames per event stays cheap.
class MfccPipeline {
public:
    explicit MfccPipeline(const FeatureConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        n_fft_ = next_pow2(static_cast<std::size_t>(cfg.frame_length));
        window_ = hamming_window(static_cast<std::size_t>(cfg.frame_length));
        const auto dense = mel_filterbank(cfg.n_mel_filters, n_fft_, cfg.sample_rate_hz);
        for (const auto& row : dense) {
            SparseFilter f;
            std::size_t k = 0;
            while (k < row.size() && row[k] == 0.0) ++k;
            f.first_bin = k;
            while (k < row.size() && row[k] != 0.0) f.weights.push_back(row[k++]);
            filters_.push_back(std::move(f));
        }
        const int n = cfg.n_mel_filters;
        dct_.resize(static_cast<std::size_t>(cfg.mfcc_count) * static_cast<std::size_t>(n));
        for (int m = 0; m < cfg.mfcc_count; ++m) {
            const double scale = m == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            for (int j = 0; j < n; ++j) {
                dct_[static_cast<std::size_t>(m) * n + j] =
                    scale * std::cos(M_PI * m * (2.0 * j + 1.0) / (2.0 * n));
            }
        }
        buf_.resize(n_fft_);
        power_.resize(n_fft_ / 2 + 1);
        log_mel_.resize(static_cast<std::size_t>(n));
    }

    /// Hamming window, zero-padded power spectrum at the next power-of-two
    /// FFT size, mel filterbank, floored log, orthonormal DCT-II, keep the
    /// first M coefficients.
    std::vector<double> compute(const std::vector<double>& frame) {
        if (frame.size() != static_cast<std::size_t>(cfg_.frame_length)) {
            throw std::invalid_argument("mfcc_frame: frame length does not match config");
        }
        std::fill(buf_.begin(), buf_.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t i = 0; i < frame.size(); ++i) buf_[i] = frame[i] * window_[i];
        fft_inplace(buf_);
        for (std::size_t k = 0; k < power_.size(); ++k) power_[k] = std::norm(buf_[k]);

        for (std::size_t m = 0; m < filters_.size(); ++m) {
            const auto& f = filters_[m];
            double e = 0.0;
            for (std::size_t k = 0; k < f.weights.size(); ++k) e += f.weights[k] * power_[f.first_bin + k];
            log_mel_[m] = std::log(std::max(e, kMelLogFloor));
        }
        std::vector<double> out(static_cast<std::size_t>(cfg_.mfcc_count), 0.0);
        const auto n = static_cast<std::size_t>(cfg_.n_mel_filters);
        for (std::size_t m = 0; m < out.size(); ++m) {
            double acc = 0.0;
            const double* row = &dct_[m * n];
            for (std::size_t j = 0; j < n; ++j) acc += row[j] * log_mel_[j];
            out[m] = acc;
        }
        return out;
    }

private:
    struct SparseFilter {
        std::size_t first_bin = 0;
        std::vector<double> weights;
    };
    FeatureConfig cfg_;
    std::size_t n_fft_ = 0;
    std::vector<double> window_;
    std::vector<SparseFilter> filters_;
    std::vector<double> dct_;
    std::vector<std::complex<double>> buf_;
    std::vector<double> power_;
    std::vector<double> log_mel_;
};

/// One-shot MFCC of a single frame.
inline std::vector<double> mfcc_frame(const std::vector<double>& frame, const FeatureConfig& cfg) {
    return MfccPipeline(cfg).compute(frame);
}

/// Fraction of consecutive-sample sign changes; zero counts as positive.
inline double zcr_frame(const std::vector<double>& frame) {
    if (frame.size() < 2) throw std::invalid_argument("zcr_frame: need at least 2 samples");
    std::size_t changes = 0;
    for (std::size_t i = 1; i < frame.size(); ++i) {
        const bool a = frame[i - 1] >= 0.0;
        const bool b = frame[i] >= 0.0;
        if (a != b) ++changes;
    }
    return static_cast<double>(changes) / static_cast<double>(frame.size() - 1);
}

/// Population kurtosis m4/m2^2 (non-excess, biased moments); 0 for frames
/// with variance below 1e-12.
inline double kurtosis_frame(const std::vector<double>& frame) {
    if (frame.size() < 2) throw std::invalid_argument("kurtosis_frame: need at least 2 samples");
    const auto n = static_cast<double>(frame.size());
    double mean = 0.0;
    for (double v : frame) mean += v;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : frame) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if (m2 < 1e-12) return 0.0;
    return m4 / (m2 * m2);
}

/// Regression delta along time: d_t = sum_n n*(c[t+n]-c[t-n]) / (2*sum n^2),
/// with first/last columns replicated past the edges. Input and output are
/// rows x cols, row-major, columns indexed by frame.
inline std::vector<double> delta(const std::vector<double>& series, std::size_t rows, std::size_t cols,
                                 int half_width) {
    if (half_width < 1) throw std::invalid_argument("delta: half_width must be >= 1");
    if (series.size() != rows * cols) throw std::invalid_argument("delta: bad series size");
    double denom = 0.0;
    for (int n = 1; n <= half_width; ++n) denom += static_cast<double>(n) * n;
    denom *= 2.0;

    std::vector<double> out(series.size(), 0.0);
    auto col_clamped = [&](std::size_t r, long long t) {
        const long long tc = std::clamp<long long>(t, 0, static_cast<long long>(cols) - 1);
        return series[r * cols + static_cast<std::size_t>(tc)];
    };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t t = 0; t < cols; ++t) {
            double acc = 0.0;
            for (int n = 1; n <= half_width; ++n) {
                acc += n * (col_clamped(r, static_cast<long long>(t) + n) -
                            col_clamped(r, static_cast<long long>(t) - n));
            }
            out[r * cols + t] = acc / denom;
        }
    }
    return out;
}

}  // namespace coughpipe::features
