#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "coughpipe/audio/manifest.hpp"
#include "coughpipe/audio/resample.hpp"
#include "coughpipe/audio/silence.hpp"
#include "coughpipe/audio/wav.hpp"
#include "coughpipe/features/dsp.hpp"

using namespace coughpipe;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("coughpipe_audio_" + name)).string();
}

audio::Recording tone_recording(double freq_hz, double seconds, int rate, double amp = 0.5) {
    audio::Recording r;
    r.sample_rate_hz = rate;
    r.event_id = "tone";
    r.patient_id = "p0";
    r.label = Label::TB;
    const auto n = static_cast<std::size_t>(seconds * rate);
    r.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate);
    }
    return r;
}

}  // namespace

TEST(Wav, RoundTripMono) {
    const std::string path = temp_path("roundtrip.wav");
    std::vector<double> samples(1000);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-0.9, 0.9);
    for (auto& s : samples) s = d(rng);
    audio::write_wav(path, samples, 16000);
    const audio::WavData back = audio::read_wav(path);
    ASSERT_EQ(back.samples.size(), samples.size());
    EXPECT_EQ(back.sample_rate_hz, 16000);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_NEAR(back.samples[i], samples[i], 1.0 / 32768.0);
    }
    std::filesystem::remove(path);
}

TEST(Wav, RejectsGarbage) {
    const std::string path = temp_path("garbage.wav");
    std::ofstream(path) << "this is not audio";
    EXPECT_THROW(audio::read_wav(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(Manifest, ReadsThreeRowsBack) {
    const std::string path = temp_path("manifest3.csv");
    std::ofstream(path) << "audio_path,event_id,patient_id,label,dataset_name\n"
                           "a.wav,e1,p1,tb,d\n"
                           "b.wav,e2,p2,covid19,d\n"
                           "c.wav,e3,p3,healthy,d\n";
    const audio::Manifest m = audio::load_manifest(path);
    ASSERT_EQ(m.entries.size(), 3u);
    EXPECT_EQ(m.entries[0].event_id, "e1");
    EXPECT_EQ(m.entries[0].label, Label::TB);
    EXPECT_EQ(m.entries[2].label, Label::HEALTHY);
    std::filesystem::remove(path);
}

TEST(Manifest, TrimsAndLowercasesLabels) {
    const std::string path = temp_path("manifest_trim.csv");
    std::ofstream(path) << "audio_path,event_id,patient_id,label,dataset_name\n"
                           "a.wav,e1,p1,tb ,d\n"
                           "b.wav,e2,p2, COVID19,d\n";
    const audio::Manifest m = audio::load_manifest(path);
    ASSERT_EQ(m.entries.size(), 2u);
    EXPECT_EQ(m.entries[0].label, Label::TB);
    EXPECT_EQ(m.entries[1].label, Label::COVID19);
    std::filesystem::remove(path);
}

TEST(Manifest, UnknownLabelNamesLineAndToken) {
    const std::string path = temp_path("manifest_bad.csv");
    std::ofstream(path) << "audio_path,event_id,patient_id,label,dataset_name\n"
                           "a.wav,e1,p1,tb,d\n"
                           "b.wav,e2,p2,flu,d\n";
    try {
        audio::load_manifest(path);
        FAIL() << "expected error";
    } catch (const std::runtime_error& ex) {
        const std::string msg = ex.what();
        EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
        EXPECT_NE(msg.find("flu"), std::string::npos) << msg;
    }
    std::filesystem::remove(path);
}

TEST(Manifest, MissingFileAndDuplicates) {
    EXPECT_THROW(audio::load_manifest(temp_path("nonexistent.csv")), std::runtime_error);
    const std::string path = temp_path("manifest_dup.csv");
    std::ofstream(path) << "audio_path,event_id,patient_id,label,dataset_name\n"
                           "a.wav,e1,p1,tb,d\n"
                           "b.wav,e1,p2,tb,d\n";
    EXPECT_THROW(audio::load_manifest(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(Manifest, WriteLoadRoundTrip) {
    const std::string path = temp_path("manifest_rt.csv");
    audio::Manifest m;
    m.entries.push_back({"x/a.wav", "ev-1", "pat-1", Label::COVID19, "set1"});
    m.entries.push_back({"x/b.wav", "ev-2", "pat-2", Label::NOISE, "set2"});
    audio::write_manifest(path, m);
    const audio::Manifest back = audio::load_manifest(path);
    ASSERT_EQ(back.entries.size(), m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        EXPECT_EQ(back.entries[i].audio_path, m.entries[i].audio_path);
        EXPECT_EQ(back.entries[i].event_id, m.entries[i].event_id);
        EXPECT_EQ(back.entries[i].patient_id, m.entries[i].patient_id);
        EXPECT_EQ(back.entries[i].label, m.entries[i].label);
        EXPECT_EQ(back.entries[i].dataset_name, m.entries[i].dataset_name);
    }
    std::filesystem::remove(path);
}

TEST(Resample, LengthFollowsRateRatio) {
    const audio::Recording r = tone_recording(440.0, 1.0, 44100);
    ASSERT_EQ(r.samples.size(), 44100u);
    const audio::Recording out = audio::resample(r, 16000);
    EXPECT_EQ(out.samples.size(), 16000u);
    EXPECT_EQ(out.sample_rate_hz, 16000);
    EXPECT_EQ(out.event_id, r.event_id);
    EXPECT_EQ(out.patient_id, r.patient_id);
}

TEST(Resample, IdentityAtTargetRate) {
    const audio::Recording r = tone_recording(440.0, 0.5, 16000);
    const audio::Recording out = audio::resample(r, 16000);
    ASSERT_EQ(out.samples.size(), r.samples.size());
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        EXPECT_EQ(out.samples[i], r.samples[i]);  // bitwise
    }
}

TEST(Resample, IdempotentAtTargetRate) {
    const audio::Recording r = tone_recording(440.0, 0.3, 22050);
    const audio::Recording once = audio::resample(r, 16000);
    const audio::Recording twice = audio::resample(once, 16000);
    ASSERT_EQ(once.samples.size(), twice.samples.size());
    for (std::size_t i = 0; i < once.samples.size(); ++i) {
        EXPECT_EQ(once.samples[i], twice.samples[i]);
    }
}

// FFT-peak oracle: a pure 1 kHz tone must stay the dominant bin after
// 44.1 kHz -> 16 kHz conversion.
TEST(Resample, SinePeakSurvivesDownsampling) {
    const audio::Recording r = tone_recording(1000.0, 1.0, 44100);
    const audio::Recording out = audio::resample(r, 16000);
    ASSERT_EQ(out.samples.size(), 16000u);

    const std::size_t n_fft = 16384;
    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    for (std::size_t i = 0; i < out.samples.size(); ++i) buf[i] = out.samples[i];
    features::fft_inplace(buf);
    std::size_t peak = 1;
    for (std::size_t k = 1; k <= n_fft / 2; ++k) {
        if (std::abs(buf[k]) > std::abs(buf[peak])) peak = k;
    }
    const double peak_hz = static_cast<double>(peak) * 16000.0 / static_cast<double>(n_fft);
    const double bin_width = 16000.0 / static_cast<double>(n_fft);
    EXPECT_NEAR(peak_hz, 1000.0, bin_width + 1e-9);
}

TEST(Resample, UpsamplingPreservesTone) {
    const audio::Recording r = tone_recording(1000.0, 0.5, 16000);
    const audio::Recording out = audio::resample(r, 44100);
    EXPECT_EQ(out.samples.size(), 22050u);
    // mid-signal samples should still trace a 1 kHz sine
    double max_err = 0.0;
    for (std::size_t i = 2000; i < 20000; ++i) {
        const double t = static_cast<double>(i) / 44100.0;
        max_err = std::max(max_err, std::abs(out.samples[i] - 0.5 * std::sin(2.0 * M_PI * 1000.0 * t)));
    }
    EXPECT_LT(max_err, 0.01);
}

TEST(Silence, ExcisesLongGapKeepingMargins) {
    const int rate = 16000;
    audio::Recording r;
    r.sample_rate_hz = rate;
    r.event_id = "gap";
    const auto tone = tone_recording(440.0, 0.5, rate).samples;  // 8000 samples
    r.samples = tone;
    r.samples.insert(r.samples.end(), 16000, 0.0);  // 1 s of true silence
    r.samples.insert(r.samples.end(), tone.begin(), tone.end());
    ASSERT_EQ(r.samples.size(), 32000u);

    const audio::Recording out = audio::remove_silence(r, 0.01, 50.0);
    // keep = [0, 8800) U [23200 - 8000 = 15200+8000... [15200, 32000)
    ASSERT_EQ(out.samples.size(), 8800u + (32000u - 15200u));
    for (std::size_t i = 0; i < 8800; ++i) ASSERT_EQ(out.samples[i], r.samples[i]) << i;
    for (std::size_t i = 0; i < 32000 - 15200; ++i) {
        ASSERT_EQ(out.samples[8800 + i], r.samples[15200 + i]) << i;
    }
}

TEST(Silence, NoSubThresholdRegionIsIdentity) {
    const audio::Recording r = tone_recording(300.0, 0.7, 16000);
    const audio::Recording out = audio::remove_silence(r, 0.01, 50.0);
    ASSERT_EQ(out.samples.size(), r.samples.size());
    for (std::size_t i = 0; i < r.samples.size(); ++i) EXPECT_EQ(out.samples[i], r.samples[i]);
}

TEST(Silence, AllZeroSignalThrows) {
    audio::Recording r;
    r.sample_rate_hz = 16000;
    r.event_id = "silent";
    r.samples.assign(16000, 0.0);
    EXPECT_THROW(audio::remove_silence(r), audio::AllSilentError);
}

TEST(Silence, ShortGapFullyPreserved) {
    const int rate = 16000;
    audio::Recording r;
    r.sample_rate_hz = rate;
    r.event_id = "short-gap";
    const auto tone = tone_recording(440.0, 0.3, rate).samples;
    r.samples = tone;
    r.samples.insert(r.samples.end(), 1600, 0.0);  // exactly 2 * 50 ms
    r.samples.insert(r.samples.end(), tone.begin(), tone.end());
    const audio::Recording out = audio::remove_silence(r, 0.01, 50.0);
    ASSERT_EQ(out.samples.size(), r.samples.size());
}

TEST(Silence, Idempotent) {
    const int rate = 16000;
    audio::Recording r;
    r.sample_rate_hz = rate;
    r.event_id = "idem";
    const auto tone = tone_recording(650.0, 0.4, rate).samples;
    r.samples = tone;
    r.samples.insert(r.samples.end(), 9000, 0.0);
    r.samples.insert(r.samples.end(), tone.begin(), tone.end());
    r.samples.insert(r.samples.end(), 5000, 0.0);
    const audio::Recording once = audio::remove_silence(r, 0.01, 50.0);
    const audio::Recording twice = audio::remove_silence(once, 0.01, 50.0);
    ASSERT_EQ(once.samples.size(), twice.samples.size());
    for (std::size_t i = 0; i < once.samples.size(); ++i) EXPECT_EQ(once.samples[i], twice.samples[i]);
}

TEST(Silence, OutputNeverLongerThanInput) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-0.8, 0.8);
    for (int trial = 0; trial < 20; ++trial) {
        audio::Recording r;
        r.sample_rate_hz = 16000;
        r.event_id = "rand" + std::to_string(trial);
        r.samples.resize(8000 + static_cast<std::size_t>(trial) * 500);
        for (auto& s : r.samples) s = d(rng);
        // random signals are active everywhere; sprinkle silent stretches
        if (trial % 2 == 0) {
            std::fill(r.samples.begin() + 1000, r.samples.begin() + 4000, 0.0);
        }
        const audio::Recording out = audio::remove_silence(r, 0.05, 20.0);
        EXPECT_LE(out.samples.size(), r.samples.size());
    }
}

TEST(Resample, RejectsBadArguments) {
    const audio::Recording r = tone_recording(100.0, 0.1, 8000);
    EXPECT_THROW(audio::resample(r, 0), std::invalid_argument);
    audio::Recording empty;
    empty.sample_rate_hz = 8000;
    EXPECT_THROW(audio::resample(empty, 16000), std::invalid_argument);
}
