#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughpipe::eval {

/// Patient-disjoint nested cross-validation assignment: `outer_k` disjoint
/// test-patient sets covering every patient, and for each outer fold an
/// `inner_k`-way split of the remaining (outer-training) patients.
struct FoldPlan {
    struct OuterFold {
        std::vector<std::string> test_patients;
        std::vector<std::vector<std::string>> inner_folds;  // inner validation patient sets
    };
    std::vector<OuterFold> outer;

    bool is_test_patient(std::size_t fold, const std::string& patient) const {
        const auto& t = outer[fold].test_patients;
        return std::find(t.begin(), t.end(), patient) != t.end();
    }
};

namespace detail {

/// Stratified round-robin deal: per class, shuffle the patients with the
/// given RNG, then deal patient j of a class into fold j % k.
inline std::vector<std::vector<std::string>> deal(const std::map<int, std::vector<std::string>>& by_class, int k,
                                                  std::mt19937_64& rng) {
    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
    for (const auto& [cls, patients] : by_class) {
        std::vector<std::string> shuffled = patients;
        std::sort(shuffled.begin(), shuffled.end());
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t j = 0; j < shuffled.size(); ++j) {
            folds[j % static_cast<std::size_t>(k)].push_back(shuffled[j]);
        }
    }
    return folds;
}

}  // namespace detail

/// Builds the fold plan from a patient -> class map. Every class must have
/// at least `outer_k` patients. Deterministic for a given seed.
inline FoldPlan make_folds(const std::map<std::string, int>& patient_class, int outer_k = 5, int inner_k = 4,
                           std::uint64_t seed = 0) {
    if (outer_k < 2) throw std::invalid_argument("make_folds: outer_k must be >= 2");
    if (inner_k < 2) throw std::invalid_argument("make_folds: inner_k must be >= 2");

    std::map<int, std::vector<std::string>> by_class;
    for (const auto& [pid, cls] : patient_class) {
        if (pid == "synthetic") throw std::invalid_argument("make_folds: synthetic examples cannot be folded");
        by_class[cls].push_back(pid);
    }
    if (by_class.empty()) throw std::invalid_argument("make_folds: no patients");
    for (const auto& [cls, patients] : by_class) {
        if (patients.size() < static_cast<std::size_t>(outer_k)) {
            throw std::invalid_argument("make_folds: class " + std::to_string(cls) + " has only " +
                                        std::to_string(patients.size()) + " patients, need >= " +
                                        std::to_string(outer_k));
        }
    }

    std::mt19937_64 rng(seed);
    FoldPlan plan;
    const auto outer_sets = detail::deal(by_class, outer_k, rng);
    plan.outer.resize(static_cast<std::size_t>(outer_k));
    for (int f = 0; f < outer_k; ++f) {
        auto& fold = plan.outer[static_cast<std::size_t>(f)];
        fold.test_patients = outer_sets[static_cast<std::size_t>(f)];
        std::set<std::string> test_set(fold.test_patients.begin(), fold.test_patients.end());

        std::map<int, std::vector<std::string>> train_by_class;
        for (const auto& [cls, patients] : by_class) {
            for (const auto& pid : patients) {
                if (!test_set.count(pid)) train_by_class[cls].push_back(pid);
            }
        }
        std::mt19937_64 inner_rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(f + 1)));
        fold.inner_folds = detail::deal(train_by_class, inner_k, inner_rng);
    }
    return plan;
}

}  // namespace coughpipe::eval
