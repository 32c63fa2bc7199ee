#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "coughpipe/features/cache.hpp"
#include "coughpipe/features/dsp.hpp"
#include "coughpipe/features/extract.hpp"
#include "coughpipe/features/framing.hpp"
#include "test_oracles.hpp"

using namespace coughpipe;
using features::FeatureConfig;

namespace {

audio::Recording random_recording(std::size_t n, int rate, std::uint64_t seed, double amp = 0.4) {
    audio::Recording r;
    r.sample_rate_hz = rate;
    r.event_id = "rand";
    r.patient_id = "p";
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-amp, amp);
    r.samples.resize(n);
    for (auto& s : r.samples) s = d(rng);
    return r;
}

}  // namespace

TEST(Framing, ExactDivision) {
    std::vector<double> x(10);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    const auto plan = features::plan_frames(x.size(), 4, 3);
    ASSERT_EQ(plan.starts, (std::vector<std::size_t>{0, 3, 6}));
    const auto frames = features::frame_signal(x, 4, 3);
    ASSERT_EQ(frames.size(), 3u);
    EXPECT_EQ(frames[1], (std::vector<double>{3, 4, 5, 6}));
}

TEST(Framing, SingleFrameEqualsSignal) {
    std::vector<double> x{1, 2, 3, 4, 5};
    const auto frames = features::frame_signal(x, 5, 1);
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0], x);
}

TEST(Framing, CoversWholeEventWithMonotoneStarts) {
    const auto plan = features::plan_frames(16000, 1024, 150);
    ASSERT_EQ(plan.starts.size(), 150u);
    EXPECT_EQ(plan.starts.front(), 0u);
    EXPECT_EQ(plan.starts.back(), 16000u - 1024u);
    for (std::size_t i = 1; i < plan.starts.size(); ++i) {
        EXPECT_LT(plan.starts[i - 1], plan.starts[i]);
    }
}

TEST(Framing, ShortSignalZeroPads) {
    std::vector<double> x{1, 1, 1};
    const auto frames = features::frame_signal(x, 4, 3);  // needs 6 samples, pads to 6
    ASSERT_EQ(frames.size(), 3u);
    EXPECT_EQ(frames[0], (std::vector<double>{1, 1, 1, 0}));
    EXPECT_EQ(frames[2], (std::vector<double>{1, 0, 0, 0}));
}

TEST(Framing, EmptySignalThrows) {
    EXPECT_THROW(features::frame_signal({}, 4, 3), std::invalid_argument);
}

TEST(Mfcc, AllZeroFrameIsDctOfLogFloor) {
    const auto cfg = FeatureConfig::make(13, 512, 10);
    const std::vector<double> frame(512, 0.0);
    const auto c = features::mfcc_frame(frame, cfg);
    ASSERT_EQ(c.size(), 13u);
    EXPECT_NEAR(c[0], std::sqrt(static_cast<double>(cfg.n_mel_filters)) * std::log(1e-10), 1e-9);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_NEAR(c[i], 0.0, 1e-9);
}

TEST(Mfcc, GainShiftsOnlyCoefficientZero) {
    const auto cfg = FeatureConfig::make(13, 512, 10);
    auto frame = random_recording(512, 16000, 42).samples;
    auto doubled = frame;
    for (auto& v : doubled) v *= 2.0;
    const auto a = features::mfcc_frame(frame, cfg);
    const auto b = features::mfcc_frame(doubled, cfg);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
    EXPECT_NEAR(b[0] - a[0], 2.0 * std::log(2.0) * std::sqrt(static_cast<double>(cfg.n_mel_filters)), 1e-9);
}

TEST(Mfcc, MatchesIndependentReferenceOnPureTones) {
    const auto cfg = FeatureConfig::make(13, 512, 10);
    // tones at a few mel filter centers
    const double mel_max = features::hz_to_mel(8000.0);
    for (int m : {5, 12, 25}) {
        const double hz = features::mel_to_hz(mel_max * (m + 1) / (cfg.n_mel_filters + 1));
        std::vector<double> frame(512);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            frame[i] = 0.6 * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / 16000.0);
        }
        const auto got = features::mfcc_frame(frame, cfg);
        const auto want = test_oracles::reference_mfcc(frame, cfg);
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i) {
            err += (got[i] - want[i]) * (got[i] - want[i]);
            norm += want[i] * want[i];
        }
        EXPECT_LT(std::sqrt(err), 1e-6 * std::sqrt(norm)) << "tone at " << hz << " Hz";
    }
}

TEST(Delta, ConstantSeriesIsExactlyZero) {
    std::vector<double> series(3 * 9, 4.25);
    const auto d = features::delta(series, 3, 9, 2);
    for (double v : d) EXPECT_EQ(v, 0.0);
}

TEST(Delta, LinearRampInteriorIsOne) {
    const std::size_t cols = 11;
    std::vector<double> series(cols);
    for (std::size_t t = 0; t < cols; ++t) series[t] = static_cast<double>(t);
    const auto d = features::delta(series, 1, cols, 2);
    for (std::size_t t = 2; t + 2 < cols; ++t) EXPECT_DOUBLE_EQ(d[t], 1.0);
}

TEST(Delta, MatchesDirectFormulaOnRandomMatrix) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> series(3 * 7);
    for (auto& v : series) v = dist(rng);
    const auto got = features::delta(series, 3, 7, 2);
    const auto want = test_oracles::reference_delta(series, 3, 7, 2);
    for (std::size_t i = 0; i < series.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
}

TEST(Zcr, CountsSignChanges) {
    EXPECT_DOUBLE_EQ(features::zcr_frame({1, -1, 1, -1}), 1.0);
    EXPECT_DOUBLE_EQ(features::zcr_frame({1, 1, 1, 1}), 0.0);
    // zeros count as positive
    EXPECT_DOUBLE_EQ(features::zcr_frame({0, 1, 0, -1}), 0.5);
}

TEST(Zcr, MatchesCountingOracle) {
    std::mt19937_64 rng(9);
    std::vector<double> frame(513);
    for (auto& v : frame) v = rng() % 2 ? 1.0 : -1.0;
    std::size_t changes = 0;
    for (std::size_t i = 1; i < frame.size(); ++i) {
        if ((frame[i - 1] >= 0) != (frame[i] >= 0)) ++changes;
    }
    EXPECT_NEAR(features::zcr_frame(frame), static_cast<double>(changes) / 512.0, 1e-9);
}

TEST(Kurtosis, TwoPointSymmetricIsOne) {
    std::vector<double> frame(100);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = i % 2 ? 1.0 : -1.0;
    EXPECT_NEAR(features::kurtosis_frame(frame), 1.0, 1e-12);
}

TEST(Kurtosis, ConstantFrameIsZero) {
    EXPECT_DOUBLE_EQ(features::kurtosis_frame(std::vector<double>(64, 0.7)), 0.0);
}

TEST(Kurtosis, GaussianSamplesNearThree) {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> frame(10000);
    for (auto& v : frame) v = d(rng);
    EXPECT_NEAR(features::kurtosis_frame(frame), 3.0, 0.15);
}

TEST(Extract, PaperGridShapes) {
    {
        const auto cfg = FeatureConfig::make(26, 2048, 100);
        const auto fm = features::extract_features(random_recording(16000, 16000, 1), cfg);
        EXPECT_EQ(fm.rows, 80u);
        EXPECT_EQ(fm.cols, 100u);
    }
    {
        const auto cfg = FeatureConfig::make(39, 1024, 150);
        const auto fm = features::extract_features(random_recording(16000, 16000, 2), cfg);
        EXPECT_EQ(fm.rows, 119u);
        EXPECT_EQ(fm.cols, 150u);
    }
}

TEST(Extract, RowLayoutMatchesPerFrameFeatures) {
    const auto cfg = FeatureConfig::make(5, 256, 8);
    const auto rec = random_recording(4000, 16000, 3);
    const auto fm = features::extract_features(rec, cfg);
    const auto frames = features::frame_signal(rec.samples, cfg.frame_length, cfg.frame_count);
    for (std::size_t t = 0; t < 8; ++t) {
        const auto c = features::mfcc_frame(frames[t], cfg);
        for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(fm.at(i, t), c[i]);
        EXPECT_DOUBLE_EQ(fm.at(15, t), features::zcr_frame(frames[t]));
        EXPECT_DOUBLE_EQ(fm.at(16, t), features::kurtosis_frame(frames[t]));
    }
    // zcr row within [0,1], kurtosis row non-negative
    for (std::size_t t = 0; t < 8; ++t) {
        EXPECT_GE(fm.at(15, t), 0.0);
        EXPECT_LE(fm.at(15, t), 1.0);
        EXPECT_GE(fm.at(16, t), 0.0);
    }
}

TEST(Extract, GainInvarianceAwayFromFloor) {
    const auto cfg = FeatureConfig::make(13, 512, 20);
    audio::Recording rec = random_recording(8000, 16000, 4, 0.3);
    audio::Recording scaled = rec;
    for (auto& v : scaled.samples) v *= 2.0;
    const auto a = features::extract_features(rec, cfg);
    const auto b = features::extract_features(scaled, cfg);
    const std::size_t m = 13;
    for (std::size_t i = 1; i < m; ++i) {
        for (std::size_t t = 0; t < a.cols; ++t) {
            EXPECT_NEAR(a.at(i, t), b.at(i, t), 1e-6);                // static rows 1..M-1
            EXPECT_NEAR(a.at(m + i, t), b.at(m + i, t), 1e-6);        // velocity
            EXPECT_NEAR(a.at(2 * m + i, t), b.at(2 * m + i, t), 1e-6);  // acceleration
        }
    }
}

TEST(Extract, RateMismatchThrows) {
    const auto cfg = FeatureConfig::make(13, 512, 20, 16000);
    const auto rec = random_recording(8000, 22050, 5);
    EXPECT_THROW(features::extract_features(rec, cfg), std::invalid_argument);
}

TEST(Cache, WriteReadRoundTrip) {
    const auto cfg = FeatureConfig::make(7, 256, 12);
    audio::Recording rec = random_recording(4000, 16000, 6);
    rec.event_id = "ev-7";
    rec.patient_id = "pat-3";
    rec.label = Label::COVID19;
    const auto fm = features::extract_features(rec, cfg);

    const auto path = (std::filesystem::temp_directory_path() / "coughpipe_cache_rt.cpfm").string();
    features::write_feature_file(path, fm);
    const auto back = features::read_feature_file(path);
    EXPECT_EQ(back.rows, fm.rows);
    EXPECT_EQ(back.cols, fm.cols);
    EXPECT_EQ(back.event_id, fm.event_id);
    EXPECT_EQ(back.patient_id, fm.patient_id);
    EXPECT_EQ(back.label, fm.label);
    EXPECT_EQ(back.synthetic, false);
    EXPECT_TRUE(back.config == fm.config);
    ASSERT_EQ(back.values.size(), fm.values.size());
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
        EXPECT_EQ(back.values[i], fm.values[i]);  // bit-exact doubles
    }
    std::filesystem::remove(path);
}

TEST(Cache, RejectsBadMagic) {
    const auto path = (std::filesystem::temp_directory_path() / "coughpipe_cache_bad.cpfm").string();
    std::ofstream(path) << "NOPE.............";
    EXPECT_THROW(features::read_feature_file(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(Config, ValidationAndHash) {
    EXPECT_THROW(FeatureConfig::make(0, 512, 10).validate(), std::invalid_argument);
    EXPECT_THROW(FeatureConfig::make(13, 1, 10).validate(), std::invalid_argument);
    auto a = FeatureConfig::make(13, 512, 10);
    auto b = FeatureConfig::make(26, 512, 10);
    EXPECT_NE(a.content_hash(), b.content_hash());
    EXPECT_EQ(a.content_hash(), FeatureConfig::make(13, 512, 10).content_hash());
    // n_mel defaults to max(40, M)
    EXPECT_EQ(FeatureConfig::make(65, 512, 10).n_mel_filters, 65);
    EXPECT_EQ(FeatureConfig::make(13, 512, 10).n_mel_filters, 40);
}
