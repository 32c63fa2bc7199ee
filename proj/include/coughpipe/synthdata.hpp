#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coughpipe/audio/manifest.hpp"
#include "coughpipe/audio/recording.hpp"
#include "coughpipe/audio/wav.hpp"
#include "coughpipe/common.hpp"

namespace coughpipe::synth {

/// Class-distinct spectral signatures: two tone bands per label, far enough
/// apart that mel-spectral features separate the classes cleanly. Noise is
/// the exception and carries broadband energy only.
inline std::pair<double, double> label_band(Label l) {
    switch (l) {
        case Label::TB: return {450.0, 950.0};
        case Label::COVID19: return {1500.0, 2100.0};
        case Label::HEALTHY: return {2900.0, 3600.0};
        case Label::SNEEZE: return {650.0, 2500.0};
        case Label::SPEECH: return {1100.0, 350.0};
        case Label::NOISE: return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

struct SynthSpec {
    std::vector<Label> labels{Label::TB, Label::COVID19, Label::HEALTHY};
    int patients_per_class = 30;
    int events_per_patient = 2;
    int sample_rate_hz = 16000;
    double event_duration_s = 0.4;
    std::uint64_t seed = 1;
};

/// One deterministic synthetic event: the label's tone pair with
/// patient-specific detuning, light noise, and a short leading/trailing
/// silence so the energy detector has something to trim.
inline audio::Recording make_recording(Label label, int patient_idx, int event_idx, const SynthSpec& spec) {
    std::mt19937_64 rng(spec.seed ^ (static_cast<std::uint64_t>(label) << 40) ^
                        (static_cast<std::uint64_t>(patient_idx) << 20) ^ static_cast<std::uint64_t>(event_idx));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double fs = spec.sample_rate_hz;
    const auto n_active = static_cast<std::size_t>(spec.event_duration_s * fs);
    const auto n_pad = static_cast<std::size_t>(0.08 * fs);

    const auto [f1, f2] = label_band(label);
    const double detune = 1.0 + 0.01 * ((patient_idx % 9) - 4);  // +-4% per patient
    const double amp = 0.35 + 0.2 * unit(rng);
    const double phase1 = 2.0 * M_PI * unit(rng);
    const double phase2 = 2.0 * M_PI * unit(rng);
    std::normal_distribution<double> noise(0.0, label == Label::NOISE ? 0.25 : 0.02);

    audio::Recording r;
    r.sample_rate_hz = spec.sample_rate_hz;
    r.label = label;
    r.patient_id = std::string(label_name(label)) + "-patient-" + std::to_string(patient_idx);
    r.event_id = std::string(label_name(label)) + "-p" + std::to_string(patient_idx) + "-e" +
                 std::to_string(event_idx);
    r.dataset_name = "synthetic";
    r.samples.assign(2 * n_pad + n_active, 0.0);
    for (std::size_t i = 0; i < n_active; ++i) {
        const double t = static_cast<double>(i) / fs;
        double v = noise(rng);
        if (f1 > 0.0) {
            // amplitude-modulated tone pair, vaguely cough-shaped envelope
            const double env = std::exp(-3.0 * t / spec.event_duration_s);
            v += amp * env * (std::sin(2.0 * M_PI * f1 * detune * t + phase1) +
                              0.7 * std::sin(2.0 * M_PI * f2 * detune * t + phase2));
        }
        r.samples[n_pad + i] = std::clamp(v, -1.0, 1.0);
    }
    return r;
}

/// Generates the WAV tree plus manifest.csv under `out_dir`; returns the
/// manifest path.
inline std::string generate_dataset(const std::string& out_dir, const SynthSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "wav");
    audio::Manifest manifest;
    for (Label label : spec.labels) {
        for (int p = 0; p < spec.patients_per_class; ++p) {
            for (int e = 0; e < spec.events_per_patient; ++e) {
                const audio::Recording r = make_recording(label, p, e, spec);
                const std::string rel = "wav/" + r.event_id + ".wav";
                audio::write_wav((fs::path(out_dir) / rel).string(), r.samples, r.sample_rate_hz);
                manifest.entries.push_back({rel, r.event_id, r.patient_id, label, r.dataset_name});
            }
        }
    }
    const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    audio::write_manifest(manifest_path, manifest);
    return manifest_path;
}

}  // namespace coughpipe::synth
