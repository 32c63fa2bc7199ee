#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "coughpipe/balance/smote.hpp"

using namespace coughpipe;
using balance::FoldTag;
using balance::SmoteConfig;
using balance::TaggedExample;
using features::FeatureMatrix;

namespace {

FeatureMatrix point(std::vector<double> values, Label label, const std::string& id,
                    const std::string& patient = "p") {
    FeatureMatrix fm;
    fm.rows = 1;
    fm.cols = values.size();
    fm.values = std::move(values);
    fm.label = label;
    fm.event_id = id;
    fm.patient_id = patient;
    return fm;
}

/// Recovers lambda for a synthetic point against a candidate (parent,
/// neighbor) pair; returns the max rowwise residual, or infinity when the
/// pair cannot explain the point.
double lambda_residual(const FeatureMatrix& s, const FeatureMatrix& x, const FeatureMatrix& nn,
                       double* lambda_out = nullptr) {
    double lambda = 0.0;
    double best_denom = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double denom = nn.values[i] - x.values[i];
        if (std::fabs(denom) > std::fabs(best_denom)) {
            best_denom = denom;
            lambda = (s.values[i] - x.values[i]) / denom;
        }
    }
    if (best_denom == 0.0) {
        // degenerate pair: explains s only if s == x
        double res = 0.0;
        for (std::size_t i = 0; i < s.values.size(); ++i) res = std::max(res, std::fabs(s.values[i] - x.values[i]));
        return res;
    }
    if (lambda < -1e-9 || lambda > 1.0 + 1e-9) return std::numeric_limits<double>::infinity();
    double res = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double expect = x.values[i] + lambda * (nn.values[i] - x.values[i]);
        res = std::max(res, std::fabs(s.values[i] - expect));
    }
    if (lambda_out) *lambda_out = lambda;
    return res;
}

}  // namespace

TEST(Smote, SyntheticPointsLieOnSegment) {
    std::vector<TaggedExample> in;
    in.push_back({point({0.0, 0.0}, Label::COVID19, "c0"), FoldTag::Train});
    in.push_back({point({1.0, 1.0}, Label::COVID19, "c1"), FoldTag::Train});
    for (int i = 0; i < 10; ++i) {
        in.push_back({point({5.0 + i, 9.0}, Label::TB, "t" + std::to_string(i)), FoldTag::Train});
    }
    SmoteConfig cfg;
    cfg.k_neighbors = 1;
    cfg.seed = 3;
    const auto out = balance::smote(in, cfg);
    ASSERT_EQ(out.size(), 12u + 8u);  // originals + 8 synthetics to reach 10
    for (std::size_t i = 12; i < out.size(); ++i) {
        EXPECT_EQ(out[i].label, Label::COVID19);
        EXPECT_TRUE(out[i].synthetic);
        EXPECT_EQ(out[i].patient_id, "synthetic");
        // on the segment (lambda, lambda)
        EXPECT_NEAR(out[i].values[0], out[i].values[1], 1e-12);
        EXPECT_GE(out[i].values[0], -1e-12);
        EXPECT_LE(out[i].values[0], 1.0 + 1e-12);
    }
}

TEST(Smote, EqualizeRuleMatchesMajorityCounts) {
    std::vector<TaggedExample> in;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int i = 0; i < 100; ++i) {
        in.push_back({point({d(rng), d(rng), d(rng)}, Label::TB, "t" + std::to_string(i)), FoldTag::Train});
    }
    for (int i = 0; i < 20; ++i) {
        in.push_back({point({d(rng), d(rng), d(rng)}, Label::COVID19, "c" + std::to_string(i)), FoldTag::Train});
    }
    const auto out = balance::smote(in, SmoteConfig{});
    std::size_t tb = 0, covid = 0;
    for (const auto& fm : out) (fm.label == Label::TB ? tb : covid)++;
    EXPECT_EQ(tb, 100u);
    EXPECT_EQ(covid, 100u);
}

TEST(Smote, ExplicitTargets) {
    std::vector<TaggedExample> in;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int i = 0; i < 5; ++i) {
        in.push_back({point({d(rng), d(rng)}, Label::SNEEZE, "s" + std::to_string(i)), FoldTag::Train});
    }
    SmoteConfig cfg;
    cfg.explicit_targets[Label::SNEEZE] = 17;
    const auto out = balance::smote(in, cfg);
    EXPECT_EQ(out.size(), 17u);
}

TEST(Smote, NeighborChoicesComeFromTrueKnn) {
    const int n = 50, dim = 5, k = 5;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-3, 3);
    std::vector<TaggedExample> in;
    std::vector<FeatureMatrix> minority;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(dim);
        for (auto& x : v) x = d(rng);
        minority.push_back(point(v, Label::COVID19, "c" + std::to_string(i)));
        in.push_back({minority.back(), FoldTag::Train});
    }
    for (int i = 0; i < 120; ++i) {
        std::vector<double> v(dim);
        for (auto& x : v) x = d(rng) + 40.0;
        in.push_back({point(v, Label::TB, "t" + std::to_string(i)), FoldTag::Train});
    }
    SmoteConfig cfg;
    cfg.k_neighbors = k;
    cfg.seed = 11;
    const auto out = balance::smote(in, cfg);

    auto sq_dist = [&](const FeatureMatrix& a, const FeatureMatrix& b) {
        double acc = 0;
        for (int i = 0; i < dim; ++i) {
            acc += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        }
        return acc;
    };

    int checked = 0;
    for (const auto& fm : out) {
        if (!fm.synthetic) continue;
        // find the explaining (parent, neighbor) pair by lambda recovery
        double best_res = 1e9;
        int best_x = -1, best_nn = -1;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (a == b) continue;
                const double res = lambda_residual(fm, minority[a], minority[b]);
                if (res < best_res) {
                    best_res = res;
                    best_x = a;
                    best_nn = b;
                }
            }
        }
        ASSERT_LT(best_res, 1e-9);
        // synthetic-to-parent distance never exceeds parent-to-neighbor distance
        EXPECT_LE(sq_dist(fm, minority[best_x]), sq_dist(minority[best_nn], minority[best_x]) + 1e-12);
        // the chosen neighbor must be among the parent's true k nearest
        std::vector<std::pair<double, int>> dists;
        for (int b = 0; b < n; ++b) {
            if (b != best_x) dists.push_back({sq_dist(minority[best_x], minority[b]), b});
        }
        std::sort(dists.begin(), dists.end());
        bool in_knn = false;
        for (int i = 0; i < k; ++i) in_knn = in_knn || dists[i].second == best_nn;
        // lambda == 0 collapses the synthetic onto its parent; any pair then fits
        double lambda = 0.0;
        lambda_residual(fm, minority[best_x], minority[best_nn], &lambda);
        if (lambda > 1e-6) EXPECT_TRUE(in_knn);
        ++checked;
    }
    EXPECT_EQ(checked, 120 - 50);
}

TEST(Smote, OriginalsPassThroughBitExact) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<TaggedExample> in;
    for (int i = 0; i < 6; ++i) {
        in.push_back({point({d(rng), d(rng)}, i < 4 ? Label::TB : Label::COVID19,
                            "e" + std::to_string(i)), FoldTag::Train});
    }
    const auto out = balance::smote(in, SmoteConfig{});
    ASSERT_GE(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        EXPECT_EQ(out[i].event_id, in[i].features.event_id);
        ASSERT_EQ(out[i].values.size(), in[i].features.values.size());
        EXPECT_EQ(0, std::memcmp(out[i].values.data(), in[i].features.values.data(),
                                 out[i].values.size() * sizeof(double)));
    }
}

TEST(Smote, FixedSeedIsByteIdentical) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<TaggedExample> in;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> v{d(rng), d(rng), d(rng), d(rng)};
        in.push_back({point(v, i < 20 ? Label::TB : Label::COVID19, "e" + std::to_string(i)), FoldTag::Train});
    }
    SmoteConfig cfg;
    cfg.seed = 99;
    const auto a = balance::smote(in, cfg);
    const auto b = balance::smote(in, cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].event_id, b[i].event_id);
        ASSERT_EQ(0, std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * sizeof(double)));
    }
}

TEST(Smote, RejectsTestTaggedExamples) {
    std::vector<TaggedExample> in;
    in.push_back({point({0, 0}, Label::TB, "a"), FoldTag::Train});
    in.push_back({point({1, 1}, Label::TB, "b"), FoldTag::Test});
    EXPECT_THROW(balance::smote(in, SmoteConfig{}), std::invalid_argument);
}

TEST(Smote, MinorityOfOneThrows) {
    std::vector<TaggedExample> in;
    in.push_back({point({0, 0}, Label::COVID19, "c"), FoldTag::Train});
    for (int i = 0; i < 5; ++i) {
        in.push_back({point({1.0 * i, 1}, Label::TB, "t" + std::to_string(i)), FoldTag::Train});
    }
    EXPECT_THROW(balance::smote(in, SmoteConfig{}), std::runtime_error);
}

TEST(Smote, KClampedToClassSizeMinusOne) {
    std::vector<TaggedExample> in;
    in.push_back({point({0, 0}, Label::COVID19, "c0"), FoldTag::Train});
    in.push_back({point({1, 1}, Label::COVID19, "c1"), FoldTag::Train});
    in.push_back({point({2, 0}, Label::COVID19, "c2"), FoldTag::Train});
    for (int i = 0; i < 9; ++i) {
        in.push_back({point({5.0 + i, 5}, Label::TB, "t" + std::to_string(i)), FoldTag::Train});
    }
    SmoteConfig cfg;
    cfg.k_neighbors = 10;  // larger than class size; clamps with a warning
    const auto out = balance::smote(in, cfg);
    std::size_t covid = 0;
    for (const auto& fm : out) {
        if (fm.label == Label::COVID19) ++covid;
    }
    EXPECT_EQ(covid, 9u);
}
