#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/common.hpp"

namespace coughpipe::features {

/// Feature-extraction hyperparameters. The grid ranges used for search are
/// M in {13,26,39,52,65}, F in {512,1024,2048,4096}, S in {70,100,120,150,200};
/// any positive combination is accepted for direct construction.
struct FeatureConfig {
    int mfcc_count = 13;       // M: lower-order MFCCs kept
    int frame_length = 1024;   // F: samples per frame
    int frame_count = 100;     // S: frames per event
    int sample_rate_hz = 16000;
    int n_mel_filters = 40;    // defaults to max(40, M) via make()
    int delta_window = 2;      // regression half-width, in frames

    static FeatureConfig make(int m, int f, int s, int rate_hz = 16000) {
        FeatureConfig c;
        c.mfcc_count = m;
        c.frame_length = f;
        c.frame_count = s;
        c.sample_rate_hz = rate_hz;
        c.n_mel_filters = std::max(40, m);
        return c;
    }

    void validate() const {
        if (mfcc_count < 1) throw std::invalid_argument("FeatureConfig: M must be >= 1");
        if (frame_length < 2) throw std::invalid_argument("FeatureConfig: F must be >= 2");
        if (frame_count < 1) throw std::invalid_argument("FeatureConfig: S must be >= 1");
        if (sample_rate_hz <= 0) throw std::invalid_argument("FeatureConfig: bad sample rate");
        if (n_mel_filters < mfcc_count) throw std::invalid_argument("FeatureConfig: n_mel_filters must be >= M");
        if (delta_window < 1) throw std::invalid_argument("FeatureConfig: delta_window must be >= 1");
    }

    int rows() const { return 3 * mfcc_count + 2; }
    int cols() const { return frame_count; }

    std::string canonical_string() const {
        std::ostringstream os;
        os << "m=" << mfcc_count << ";f=" << frame_length << ";s=" << frame_count << ";rate=" << sample_rate_hz
           << ";mel=" << n_mel_filters << ";dw=" << delta_window;
        return os.str();
    }

    std::uint64_t content_hash() const { return fnv1a64(canonical_string()); }

    bool operator==(const FeatureConfig&) const = default;
};

/// Fixed-dimension per-event feature image, (3M+2) rows by S columns,
/// row-major. Rows 0..M-1 hold MFCCs, M..2M-1 velocity, 2M..3M-1
/// acceleration, row 3M the zero-crossing rate and row 3M+1 kurtosis.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // rows * cols, row-major
    FeatureConfig config;
    std::string event_id;
    std::string patient_id;
    Label label = Label::HEALTHY;
    bool synthetic = false;

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    void validate() const {
        if (rows != static_cast<std::size_t>(config.rows()) || cols != static_cast<std::size_t>(config.cols())) {
            throw std::invalid_argument("FeatureMatrix: shape does not match config");
        }
        if (values.size() != rows * cols) throw std::invalid_argument("FeatureMatrix: bad value count");
        for (double v : values) {
            if (!std::isfinite(v)) throw std::invalid_argument("FeatureMatrix: non-finite entry");
        }
    }
};

}  // namespace coughpipe::features
