#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/common.hpp"

namespace coughpipe::audio {

/// One labeled audio event. Samples are mono amplitudes in [-1, 1].
struct Recording {
    std::vector<double> samples;
    int sample_rate_hz = 0;
    std::string event_id;
    std::string patient_id;
    Label label = Label::HEALTHY;
    std::string dataset_name;

    void validate() const {
        if (samples.empty()) throw std::invalid_argument("recording '" + event_id + "': no samples");
        if (sample_rate_hz <= 0) throw std::invalid_argument("recording '" + event_id + "': bad sample rate");
        for (double s : samples) {
            if (!std::isfinite(s)) throw std::invalid_argument("recording '" + event_id + "': non-finite sample");
        }
    }

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

}  // namespace coughpipe::audio
