#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace coughpipe {

/// Closed label set: three cough disease labels plus the three
/// pre-training (non-cough) labels.
enum class Label { TB, COVID19, HEALTHY, SNEEZE, SPEECH, NOISE };

enum class Task { TwoClass, ThreeClass, Pretrain };

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Parses a manifest label token. Case-insensitive, surrounding
/// whitespace ignored. Throws on anything outside the closed set.
inline Label parse_label(std::string_view token) {
    const std::string t = to_lower(trim(token));
    if (t == "tb") return Label::TB;
    if (t == "covid19") return Label::COVID19;
    if (t == "healthy") return Label::HEALTHY;
    if (t == "sneeze") return Label::SNEEZE;
    if (t == "speech") return Label::SPEECH;
    if (t == "noise") return Label::NOISE;
    throw std::invalid_argument("unknown label token '" + std::string(token) + "'");
}

inline const char* label_name(Label l) {
    switch (l) {
        case Label::TB: return "tb";
        case Label::COVID19: return "covid19";
        case Label::HEALTHY: return "healthy";
        case Label::SNEEZE: return "sneeze";
        case Label::SPEECH: return "speech";
        case Label::NOISE: return "noise";
    }
    return "?";
}

inline bool is_cough_label(Label l) {
    return l == Label::TB || l == Label::COVID19 || l == Label::HEALTHY;
}

inline int task_class_count(Task t) { return t == Task::TwoClass ? 2 : 3; }

/// Class index of a label under a task, or -1 when the label does not
/// participate in the task. Index 1 is COVID-19 in both cough tasks,
/// which is the default positive class for two-class metrics.
inline int task_class_index(Task t, Label l) {
    switch (t) {
        case Task::TwoClass:
            if (l == Label::TB) return 0;
            if (l == Label::COVID19) return 1;
            return -1;
        case Task::ThreeClass:
            if (l == Label::TB) return 0;
            if (l == Label::COVID19) return 1;
            if (l == Label::HEALTHY) return 2;
            return -1;
        case Task::Pretrain:
            if (l == Label::SNEEZE) return 0;
            if (l == Label::SPEECH) return 1;
            if (l == Label::NOISE) return 2;
            return -1;
    }
    return -1;
}

inline Task parse_task(std::string_view s) {
    const std::string t = to_lower(trim(s));
    if (t == "two_class") return Task::TwoClass;
    if (t == "three_class") return Task::ThreeClass;
    if (t == "pretrain") return Task::Pretrain;
    throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

inline const char* task_name(Task t) {
    switch (t) {
        case Task::TwoClass: return "two_class";
        case Task::ThreeClass: return "three_class";
        case Task::Pretrain: return "pretrain";
    }
    return "?";
}

/// FNV-1a, used for content-addressing feature cache directories.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace coughpipe
