#pragma once

#include <stdexcept>
#include <vector>

#include "coughpipe/audio/recording.hpp"
#include "coughpipe/features/dsp.hpp"
#include "coughpipe/features/feature_matrix.hpp"
#include "coughpipe/features/framing.hpp"

namespace coughpipe::features {

/// Builds the (3M+2) x S feature image of a recording: per-frame MFCCs,
/// their regression velocity and acceleration, then one ZCR row and one
/// kurtosis row.
inline FeatureMatrix extract_features(const audio::Recording& r, const FeatureConfig& cfg) {
    cfg.validate();
    r.validate();
    if (r.sample_rate_hz != cfg.sample_rate_hz) {
        throw std::invalid_argument("extract_features: recording rate " + std::to_string(r.sample_rate_hz) +
                                    " does not match config rate " + std::to_string(cfg.sample_rate_hz));
    }

    const auto frames = frame_signal(r.samples, cfg.frame_length, cfg.frame_count);
    const auto m = static_cast<std::size_t>(cfg.mfcc_count);
    const auto s = static_cast<std::size_t>(cfg.frame_count);

    FeatureMatrix out;
    out.rows = static_cast<std::size_t>(cfg.rows());
    out.cols = s;
    out.values.assign(out.rows * out.cols, 0.0);
    out.config = cfg;
    out.event_id = r.event_id;
    out.patient_id = r.patient_id;
    out.label = r.label;

    MfccPipeline mfcc(cfg);
    std::vector<double> statics(m * s);
    for (std::size_t t = 0; t < s; ++t) {
        const auto coeffs = mfcc.compute(frames[t]);
        for (std::size_t i = 0; i < m; ++i) statics[i * s + t] = coeffs[i];
        out.at(3 * m, t) = zcr_frame(frames[t]);
        out.at(3 * m + 1, t) = kurtosis_frame(frames[t]);
    }
    const auto velocity = delta(statics, m, s, cfg.delta_window);
    const auto acceleration = delta(velocity, m, s, cfg.delta_window);

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < s; ++t) {
            out.at(i, t) = statics[i * s + t];
            out.at(m + i, t) = velocity[i * s + t];
            out.at(2 * m + i, t) = acceleration[i * s + t];
        }
    }
    out.validate();
    return out;
}

}  // namespace coughpipe::features
