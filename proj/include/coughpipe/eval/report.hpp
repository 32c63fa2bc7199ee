#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughpipe/common.hpp"
#include "coughpipe/eval/metrics.hpp"
#include "coughpipe/features/cache.hpp"
#include "coughpipe/models/configs.hpp"

namespace coughpipe::eval {

struct FoldMetrics {
    int fold = 0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::optional<double> auc;  // two-class only
    features::FeatureConfig best_feature;
    models::ClassifierConfig best_classifier;
};

/// Aggregate nested-CV result. For the three-class task AUC/ROC/triage
/// fields stay empty and accuracy is the headline companion metric.
struct MetricsReport {
    std::string task;
    std::string architecture;
    std::uint64_t seed = 0;
    std::vector<FoldMetrics> folds;
    double mean_f1 = 0.0;
    double sigma_f1 = 0.0;
    double mean_accuracy = 0.0;
    std::optional<double> pooled_auc;
    std::vector<RocPoint> pooled_roc;
    std::optional<double> sensitivity_at_spec70;
    std::optional<double> sensitivity_at_spec80;
    std::optional<bool> triage_pass;
    std::vector<int> head_widths;  // transfer mode: {16, classes}
};

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) {
        nlohmann::json jf = {{"fold", f.fold},
                             {"f1", f.f1},
                             {"accuracy", f.accuracy},
                             {"best_feature", features::feature_config_to_json(f.best_feature)},
                             {"best_classifier", models::classifier_config_to_json(f.best_classifier)}};
        if (f.auc) jf["auc"] = *f.auc;
        folds.push_back(jf);
    }
    nlohmann::json j = {{"task", r.task},       {"architecture", r.architecture}, {"seed", r.seed},
                        {"folds", folds},       {"mean_f1", r.mean_f1},           {"sigma_f1", r.sigma_f1},
                        {"mean_accuracy", r.mean_accuracy}};
    if (r.pooled_auc) j["pooled_auc"] = *r.pooled_auc;
    if (!r.pooled_roc.empty()) {
        nlohmann::json roc = nlohmann::json::array();
        for (const auto& p : r.pooled_roc) {
            nlohmann::json jp = {{"fpr", p.fpr}, {"tpr", p.tpr}};
            if (std::isfinite(p.threshold)) {
                jp["threshold"] = p.threshold;
            } else {
                jp["threshold"] = nullptr;
            }
            roc.push_back(jp);
        }
        j["pooled_roc"] = roc;
    }
    if (r.sensitivity_at_spec70) j["sensitivity_at_spec70"] = *r.sensitivity_at_spec70;
    if (r.sensitivity_at_spec80) j["sensitivity_at_spec80"] = *r.sensitivity_at_spec80;
    if (r.triage_pass) j["triage_pass"] = *r.triage_pass;
    if (!r.head_widths.empty()) j["head_widths"] = r.head_widths;
    return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.task = j.at("task").get<std::string>();
    r.architecture = j.at("architecture").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jf : j.at("folds")) {
        FoldMetrics f;
        f.fold = jf.at("fold").get<int>();
        f.f1 = jf.at("f1").get<double>();
        f.accuracy = jf.at("accuracy").get<double>();
        if (jf.contains("auc")) f.auc = jf.at("auc").get<double>();
        f.best_feature = features::feature_config_from_json(jf.at("best_feature"));
        f.best_classifier = models::classifier_config_from_json(jf.at("best_classifier"));
        r.folds.push_back(f);
    }
    r.mean_f1 = j.at("mean_f1").get<double>();
    r.sigma_f1 = j.at("sigma_f1").get<double>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    if (j.contains("pooled_auc")) r.pooled_auc = j.at("pooled_auc").get<double>();
    if (j.contains("pooled_roc")) {
        for (const auto& jp : j.at("pooled_roc")) {
            RocPoint p;
            p.fpr = jp.at("fpr").get<double>();
            p.tpr = jp.at("tpr").get<double>();
            p.threshold = jp.at("threshold").is_null() ? std::numeric_limits<double>::infinity()
                                                       : jp.at("threshold").get<double>();
            r.pooled_roc.push_back(p);
        }
    }
    if (j.contains("sensitivity_at_spec70")) r.sensitivity_at_spec70 = j.at("sensitivity_at_spec70").get<double>();
    if (j.contains("sensitivity_at_spec80")) r.sensitivity_at_spec80 = j.at("sensitivity_at_spec80").get<double>();
    if (j.contains("triage_pass")) r.triage_pass = j.at("triage_pass").get<bool>();
    if (j.contains("head_widths")) r.head_widths = j.at("head_widths").get<std::vector<int>>();
    return r;
}

/// ROC points as CSV rows `fpr,tpr,threshold` ("inf" on the anchor point).
inline std::string roc_to_csv(const std::vector<RocPoint>& roc) {
    std::ostringstream os;
    os << "fpr,tpr,threshold\n";
    os.precision(17);
    for (const auto& p : roc) {
        os << p.fpr << ',' << p.tpr << ',';
        if (std::isfinite(p.threshold)) {
            os << p.threshold;
        } else {
            os << "inf";
        }
        os << '\n';
    }
    return os.str();
}

/// Human-readable summary; prints the JSON's numbers verbatim, no
/// recomputation.
inline std::string format_report_summary(const MetricsReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "task: " << r.task << "\n";
    os << "architecture: " << r.architecture << "\n";
    os << "folds: " << r.folds.size() << "\n";
    os << "mean F1: " << r.mean_f1 << "\n";
    os << "sigma_F1: " << r.sigma_f1 << "\n";
    if (r.pooled_auc) {
        os << "AUC: " << *r.pooled_auc << "\n";
    } else {
        os << "accuracy: " << r.mean_accuracy << "\n";
    }
    if (r.sensitivity_at_spec70) os << "sensitivity @ 70% specificity: " << *r.sensitivity_at_spec70 << "\n";
    if (r.sensitivity_at_spec80) os << "sensitivity @ 80% specificity: " << *r.sensitivity_at_spec80 << "\n";
    if (r.triage_pass) os << "WHO triage: " << (*r.triage_pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace coughpipe::eval
