// coughpipe CLI: dataset synthesis, feature extraction, pre-training,
// nested cross-validation and report inspection.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coughpipe/audio/manifest.hpp"
#include "coughpipe/audio/resample.hpp"
#include "coughpipe/audio/silence.hpp"
#include "coughpipe/audio/wav.hpp"
#include "coughpipe/balance/smote.hpp"
#include "coughpipe/eval/nested_cv.hpp"
#include "coughpipe/eval/report.hpp"
#include "coughpipe/features/cache.hpp"
#include "coughpipe/features/extract.hpp"
#include "coughpipe/models/train.hpp"
#include "coughpipe/parallel.hpp"
#include "coughpipe/synthdata.hpp"

namespace fs = std::filesystem;
using namespace coughpipe;

namespace {

constexpr int kPipelineRateHz = 16000;

struct CommonOpts {
    std::string config_path;
    nlohmann::json config;  // parsed config file (may be null)

    void load_config() {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + config_path);
        in >> config;
    }

    template <typename T>
    T pick(const CLI::Option* opt, const T& cli_value, const std::string& key, const T& fallback) const {
        if (opt != nullptr && opt->count() > 0) return cli_value;
        if (!config.is_null() && config.contains(key)) return config.at(key).get<T>();
        return fallback;
    }
};

std::string resolve_cache_dir(const CLI::Option* opt, const std::string& cli_value, const CommonOpts& common) {
    if (opt != nullptr && opt->count() > 0) return cli_value;
    if (!common.config.is_null() && common.config.contains("cache")) {
        return common.config.at("cache").get<std::string>();
    }
    if (const char* env = std::getenv("COUGHPIPE_CACHE")) return env;
    return cli_value;
}

/// Loads, resamples and de-silences one manifest entry.
audio::Recording load_event(const audio::ManifestEntry& entry, const std::string& manifest_dir) {
    fs::path p(entry.audio_path);
    if (p.is_relative()) p = fs::path(manifest_dir) / p;
    const audio::WavData wav = audio::read_wav(p.string());
    audio::Recording r;
    r.samples = wav.samples;
    r.sample_rate_hz = wav.sample_rate_hz;
    r.event_id = entry.event_id;
    r.patient_id = entry.patient_id;
    r.label = entry.label;
    r.dataset_name = entry.dataset_name;
    r = audio::resample(r, kPipelineRateHz);
    return audio::remove_silence(r);
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ExtractStats {
    int written = 0;
    int skipped = 0;
    std::vector<std::string> failures;
};

/// Extract features for every manifest entry into cache_dir/<config hash>/.
/// Existing files are left alone, so reruns with an unchanged config write
/// nothing.
ExtractStats extract_to_cache(const audio::Manifest& manifest, const std::string& manifest_dir,
                              const features::FeatureConfig& cfg, const std::string& cache_dir, int workers) {
    const fs::path dir = fs::path(cache_dir) / hash_hex(cfg.content_hash());
    fs::create_directories(dir);

    ExtractStats stats;
    std::mutex mu;
    parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
        const auto& entry = manifest.entries[i];
        const fs::path target = dir / (entry.event_id + ".cpfm");
        if (fs::exists(target)) {
            std::lock_guard<std::mutex> lock(mu);
            ++stats.skipped;
            return;
        }
        try {
            const audio::Recording r = load_event(entry, manifest_dir);
            const features::FeatureMatrix fm = features::extract_features(r, cfg);
            features::write_feature_file(target.string(), fm);
            std::lock_guard<std::mutex> lock(mu);
            ++stats.written;
        } catch (const std::exception& ex) {
            std::lock_guard<std::mutex> lock(mu);
            stats.failures.push_back(entry.event_id + ": " + ex.what());
        }
    });

    nlohmann::json index;
    index["config"] = features::feature_config_to_json(cfg);
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& entry : manifest.entries) {
        const fs::path target = dir / (entry.event_id + ".cpfm");
        if (fs::exists(target)) entries[entry.event_id] = target.filename().string();
    }
    index["entries"] = entries;
    eval::write_text_file((dir / "index.json").string(), index.dump(2) + "\n");
    return stats;
}

/// Feature provider for cv: consult the cache when one is configured,
/// extract (and populate the cache) otherwise.
features::FeatureMatrix cached_extract(const audio::Recording& r, const features::FeatureConfig& cfg,
                                       const std::string& cache_dir) {
    if (cache_dir.empty()) return features::extract_features(r, cfg);
    const fs::path dir = fs::path(cache_dir) / hash_hex(cfg.content_hash());
    const fs::path target = dir / (r.event_id + ".cpfm");
    if (fs::exists(target)) {
        features::FeatureMatrix fm = features::read_feature_file(target.string());
        if (fm.config == cfg && fm.event_id == r.event_id) return fm;
    }
    features::FeatureMatrix fm = features::extract_features(r, cfg);
    fs::create_directories(dir);
    features::write_feature_file(target.string(), fm);
    return fm;
}

std::vector<audio::Recording> load_all_events(const audio::Manifest& manifest, const std::string& manifest_dir,
                                              int workers) {
    std::vector<audio::Recording> events(manifest.entries.size());
    parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
        events[i] = load_event(manifest.entries[i], manifest_dir);
    });
    return events;
}

std::vector<features::FeatureConfig> feature_grid_from_lists(const std::vector<int>& ms, const std::vector<int>& fs_,
                                                             const std::vector<int>& ss) {
    std::vector<features::FeatureConfig> grid;
    for (int m : ms) {
        for (int f : fs_) {
            for (int s : ss) grid.push_back(features::FeatureConfig::make(m, f, s, kPipelineRateHz));
        }
    }
    return grid;
}

std::vector<models::ClassifierConfig> classifier_grid_from_config(const nlohmann::json& config,
                                                                  const models::ClassifierConfig& fallback) {
    std::vector<models::ClassifierConfig> grid;
    if (!config.is_null() && config.contains("classifier_grid")) {
        for (const auto& jc : config.at("classifier_grid")) {
            grid.push_back(models::classifier_config_from_json(jc));
        }
    }
    if (grid.empty()) grid.push_back(fallback);
    return grid;
}

int run_extract(const audio::Manifest& manifest, const std::string& manifest_dir,
                const features::FeatureConfig& cfg, const std::string& cache_dir, int workers) {
    if (cache_dir.empty()) throw std::runtime_error("extract: no cache directory (use --cache or COUGHPIPE_CACHE)");
    const ExtractStats stats = extract_to_cache(manifest, manifest_dir, cfg, cache_dir, workers);
    std::cout << "extracted " << stats.written << ", skipped " << stats.skipped << ", failed "
              << stats.failures.size() << "\n";
    for (const auto& f : stats.failures) std::cout << "  failed: " << f << "\n";
    return stats.failures.empty() ? 0 : 2;
}

models::TrainResult run_pretrain(const audio::Manifest& manifest, const std::string& manifest_dir,
                                 models::Architecture arch, const features::FeatureConfig& cfg,
                                 const models::TrainConfig& tc, int smote_k, const std::string& cache_dir,
                                 int workers, int resnet_depth, int resnet_stem) {
    for (const auto& entry : manifest.entries) {
        if (is_cough_label(entry.label)) {
            throw std::runtime_error("pretrain: manifest contains cough label '" +
                                     std::string(label_name(entry.label)) + "' (event '" + entry.event_id +
                                     "'); coughs are excluded from pre-training");
        }
    }
    const auto events = load_all_events(manifest, manifest_dir, workers);
    std::vector<features::FeatureMatrix> feats(events.size());
    parallel_for(events.size(), workers, [&](std::size_t i) { feats[i] = cached_extract(events[i], cfg, cache_dir); });

    std::vector<balance::TaggedExample> tagged;
    tagged.reserve(feats.size());
    for (auto& fm : feats) tagged.push_back({fm, balance::FoldTag::Train});
    balance::SmoteConfig sc;
    sc.k_neighbors = smote_k;
    sc.seed = tc.seed ^ 0x505e11u;
    const auto balanced = balance::smote(tagged, sc);

    std::vector<const features::FeatureMatrix*> ptrs;
    ptrs.reserve(balanced.size());
    for (const auto& fm : balanced) ptrs.push_back(&fm);
    return models::pretrain(arch, ptrs, tc, resnet_depth, resnet_stem);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cough classification pipeline"};
    app.require_subcommand(1);

    CommonOpts common;

    // --- synth ---------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    std::string synth_out = "synth_data";
    std::string synth_labels = "tb,covid19,healthy";
    int synth_patients = 30, synth_events = 2, synth_rate = 16000;
    std::uint64_t synth_seed = 1;
    double synth_duration = 0.4;
    synth_cmd->add_option("--out", synth_out, "output directory");
    synth_cmd->add_option("--labels", synth_labels, "comma list of labels");
    synth_cmd->add_option("--patients-per-class", synth_patients, "patients per class");
    synth_cmd->add_option("--events-per-patient", synth_events, "events per patient");
    synth_cmd->add_option("--rate", synth_rate, "sample rate of the generated WAVs");
    synth_cmd->add_option("--duration", synth_duration, "active event duration in seconds");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    // --- extract -------------------------------------------------------
    auto* extract_cmd = app.add_subcommand("extract", "extract features into the cache");
    std::string ex_manifest, ex_cache;
    int ex_m = 13, ex_f = 1024, ex_s = 100, ex_workers = static_cast<int>(std::thread::hardware_concurrency());
    auto* ex_manifest_opt = extract_cmd->add_option("--manifest", ex_manifest, "dataset manifest CSV")->required();
    auto* ex_cache_opt = extract_cmd->add_option("--cache", ex_cache, "feature cache directory");
    extract_cmd->add_option("--m", ex_m, "MFCC count");
    extract_cmd->add_option("--f", ex_f, "frame length in samples");
    extract_cmd->add_option("--s", ex_s, "frames per event");
    extract_cmd->add_option("--workers", ex_workers, "worker threads");
    extract_cmd->add_option("--config", common.config_path, "JSON config file");

    // --- pretrain ------------------------------------------------------
    auto* pre_cmd = app.add_subcommand("pretrain", "pre-train on sneeze/speech/noise");
    std::string pre_manifest, pre_out = "out", pre_cache, pre_arch = "cnn";
    std::uint64_t pre_seed = 0;
    int pre_m = 39, pre_f = 1024, pre_s = 150;  // Table-defaults for the pre-training features
    int pre_epochs = 200, pre_patience = 10, pre_batch = 128, pre_workers = 1, pre_smote_k = 5;
    int pre_resnet_depth = 1, pre_resnet_stem = 8;
    double pre_lr = 1e-3;
    auto* pre_manifest_opt =
        pre_cmd->add_option("--pretrain-manifest", pre_manifest, "pre-training manifest CSV")->required();
    pre_cmd->add_option("--arch", pre_arch, "cnn|lstm|resnet_mini");
    auto* pre_seed_opt = pre_cmd->add_option("--seed", pre_seed, "training seed")->required();
    pre_cmd->add_option("--out", pre_out, "output directory");
    auto* pre_cache_opt = pre_cmd->add_option("--cache", pre_cache, "feature cache directory");
    pre_cmd->add_option("--m", pre_m, "MFCC count");
    pre_cmd->add_option("--f", pre_f, "frame length");
    pre_cmd->add_option("--s", pre_s, "frames per event");
    pre_cmd->add_option("--epochs", pre_epochs, "max epochs");
    pre_cmd->add_option("--patience", pre_patience, "early-stop patience");
    pre_cmd->add_option("--lr", pre_lr, "learning rate");
    pre_cmd->add_option("--batch-size", pre_batch, "batch size");
    pre_cmd->add_option("--smote-k", pre_smote_k, "SMOTE neighbor count");
    pre_cmd->add_option("--workers", pre_workers, "worker threads");
    pre_cmd->add_option("--resnet-depth", pre_resnet_depth, "residual blocks (resnet_mini)");
    pre_cmd->add_option("--resnet-stem", pre_resnet_stem, "stem channels (resnet_mini)");
    pre_cmd->add_option("--config", common.config_path, "JSON config file");

    // --- cv ------------------------------------------------------------
    auto* cv_cmd = app.add_subcommand("cv", "nested cross-validation");
    std::string cv_manifest, cv_out = "out", cv_cache, cv_task = "two_class", cv_arch = "cnn";
    std::string cv_pretrain_ckpt, cv_pretrain_manifest;
    bool cv_transfer = false;
    std::uint64_t cv_seed = 0;
    std::vector<int> cv_ms{13}, cv_fs{1024}, cv_ss{100};
    int cv_epochs = 30, cv_patience = 5, cv_batch = 64, cv_workers = 1, cv_smote_k = 5;
    int cv_outer = 5, cv_inner = 4, cv_resnet_depth = 1, cv_resnet_stem = 8;
    double cv_lr = 1e-3;
    auto* cv_manifest_opt = cv_cmd->add_option("--manifest", cv_manifest, "classification manifest CSV")->required();
    cv_cmd->add_option("--task", cv_task, "two_class|three_class");
    cv_cmd->add_option("--arch", cv_arch, "cnn|lstm|resnet_mini");
    auto* cv_seed_opt = cv_cmd->add_option("--seed", cv_seed, "run seed")->required();
    cv_cmd->add_option("--out", cv_out, "output directory");
    auto* cv_cache_opt = cv_cmd->add_option("--cache", cv_cache, "feature cache directory");
    cv_cmd->add_flag("--transfer", cv_transfer, "start folds from a pre-trained checkpoint");
    cv_cmd->add_option("--pretrain-checkpoint", cv_pretrain_ckpt, "checkpoint for transfer mode");
    cv_cmd->add_option("--pretrain-manifest", cv_pretrain_manifest, "pre-train inline for transfer mode");
    cv_cmd->add_option("--m", cv_ms, "MFCC counts (grid)");
    cv_cmd->add_option("--f", cv_fs, "frame lengths (grid)");
    cv_cmd->add_option("--s", cv_ss, "frame counts (grid)");
    cv_cmd->add_option("--epochs", cv_epochs, "max epochs");
    cv_cmd->add_option("--patience", cv_patience, "early-stop patience");
    cv_cmd->add_option("--lr", cv_lr, "learning rate (default grid cell)");
    cv_cmd->add_option("--batch-size", cv_batch, "batch size (default grid cell)");
    cv_cmd->add_option("--smote-k", cv_smote_k, "SMOTE neighbor count");
    cv_cmd->add_option("--outer-k", cv_outer, "outer folds");
    cv_cmd->add_option("--inner-k", cv_inner, "inner folds");
    cv_cmd->add_option("--workers", cv_workers, "worker threads");
    cv_cmd->add_option("--resnet-depth", cv_resnet_depth, "residual blocks (resnet_mini)");
    cv_cmd->add_option("--resnet-stem", cv_resnet_stem, "stem channels (resnet_mini)");
    cv_cmd->add_option("--config", common.config_path, "JSON config file");

    // --- report --------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "summarize a metrics report");
    std::string report_path;
    report_cmd->add_option("report", report_path, "report JSON path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        common.load_config();

        if (synth_cmd->parsed()) {
            synth::SynthSpec spec;
            spec.labels.clear();
            std::stringstream ss(synth_labels);
            std::string token;
            while (std::getline(ss, token, ',')) spec.labels.push_back(parse_label(token));
            spec.patients_per_class = synth_patients;
            spec.events_per_patient = synth_events;
            spec.sample_rate_hz = synth_rate;
            spec.event_duration_s = synth_duration;
            spec.seed = synth_seed;
            const std::string manifest = synth::generate_dataset(synth_out, spec);
            std::cout << "wrote " << manifest << "\n";
            return 0;
        }

        if (extract_cmd->parsed()) {
            const std::string manifest_path = common.pick(ex_manifest_opt, ex_manifest, "manifest", ex_manifest);
            const std::string cache = resolve_cache_dir(ex_cache_opt, ex_cache, common);
            const auto manifest = audio::load_manifest(manifest_path);
            const auto cfg = features::FeatureConfig::make(ex_m, ex_f, ex_s, kPipelineRateHz);
            return run_extract(manifest, fs::path(manifest_path).parent_path().string(), cfg, cache, ex_workers);
        }

        if (pre_cmd->parsed()) {
            const std::string manifest_path =
                common.pick(pre_manifest_opt, pre_manifest, "pretrain_manifest", pre_manifest);
            const std::string cache = resolve_cache_dir(pre_cache_opt, pre_cache, common);
            const std::uint64_t seed = common.pick(pre_seed_opt, pre_seed, "seed", pre_seed);
            const auto manifest = audio::load_manifest(manifest_path);
            const auto arch = models::parse_architecture(pre_arch);
            const auto cfg = features::FeatureConfig::make(pre_m, pre_f, pre_s, kPipelineRateHz);
            models::TrainConfig tc;
            tc.max_epochs = pre_epochs;
            tc.patience = pre_patience;
            tc.seed = seed;
            tc.learning_rate = pre_lr;
            tc.batch_size = pre_batch;
            const auto result =
                run_pretrain(manifest, fs::path(manifest_path).parent_path().string(), arch, cfg, tc, pre_smote_k,
                             cache, pre_workers, pre_resnet_depth, pre_resnet_stem);
            fs::create_directories(pre_out);
            const std::string ckpt_path = (fs::path(pre_out) / ("pretrain_" + pre_arch + ".cpck")).string();
            nn::save_checkpoint(ckpt_path, result.checkpoint);
            eval::write_text_file((fs::path(pre_out) / "pretrain_history.json").string(),
                                  result.checkpoint.metadata.dump(2) + "\n");
            std::cout << "wrote " << ckpt_path << " (best epoch " << result.best_epoch << ", F1 "
                      << result.best_val_f1 << ")\n";
            return 0;
        }

        if (cv_cmd->parsed()) {
            const std::string manifest_path = common.pick(cv_manifest_opt, cv_manifest, "manifest", cv_manifest);
            const std::string cache = resolve_cache_dir(cv_cache_opt, cv_cache, common);
            const std::uint64_t seed = common.pick(cv_seed_opt, cv_seed, "seed", cv_seed);
            const auto manifest = audio::load_manifest(manifest_path);
            const std::string manifest_dir = fs::path(manifest_path).parent_path().string();

            eval::NestedCvOptions opt;
            opt.task = parse_task(cv_task);
            opt.arch = models::parse_architecture(cv_arch);
            opt.seed = seed;
            opt.outer_k = cv_outer;
            opt.inner_k = cv_inner;
            opt.train.max_epochs = cv_epochs;
            opt.train.patience = cv_patience;
            opt.train.seed = seed;
            opt.smote_k_neighbors = cv_smote_k;
            opt.resnet_depth = cv_resnet_depth;
            opt.resnet_stem_channels = cv_resnet_stem;
            opt.workers = cv_workers;

            eval::GridSpace grid;
            grid.feature_configs = feature_grid_from_lists(cv_ms, cv_fs, cv_ss);
            models::ClassifierConfig default_cell;
            default_cell.learning_rate = cv_lr;
            default_cell.batch_size = cv_batch;
            grid.classifier_configs = classifier_grid_from_config(common.config, default_cell);

            if (cv_transfer) {
                if (!cv_pretrain_ckpt.empty()) {
                    opt.pretrained = nn::load_checkpoint(cv_pretrain_ckpt);
                } else if (!cv_pretrain_manifest.empty()) {
                    const auto pre_manifest_loaded = audio::load_manifest(cv_pretrain_manifest);
                    models::TrainConfig ptc;
                    ptc.max_epochs = cv_epochs;
                    ptc.patience = cv_patience;
                    ptc.seed = seed ^ 0x17e5a2u;
                    ptc.learning_rate = cv_lr;
                    ptc.batch_size = cv_batch;
                    if (grid.feature_configs.size() != 1) {
                        throw std::runtime_error("cv --transfer: need exactly one feature config");
                    }
                    const auto pre_result = run_pretrain(
                        pre_manifest_loaded, fs::path(cv_pretrain_manifest).parent_path().string(), opt.arch,
                        grid.feature_configs.front(), ptc, cv_smote_k, cache, cv_workers, cv_resnet_depth,
                        cv_resnet_stem);
                    opt.pretrained = pre_result.checkpoint;
                } else {
                    throw std::runtime_error("cv --transfer: give --pretrain-checkpoint or --pretrain-manifest");
                }
            }

            if (!cache.empty()) {
                opt.feature_provider = [cache](const audio::Recording& r, const features::FeatureConfig& fc) {
                    return cached_extract(r, fc, cache);
                };
            }

            const auto events = load_all_events(manifest, manifest_dir, cv_workers);
            const auto result = eval::nested_cv(events, grid, opt);

            fs::create_directories(cv_out);
            eval::write_text_file((fs::path(cv_out) / "report.json").string(),
                                  eval::report_to_json(result.report).dump(2) + "\n");
            if (!result.report.pooled_roc.empty()) {
                eval::write_text_file((fs::path(cv_out) / "roc.csv").string(),
                                      eval::roc_to_csv(result.report.pooled_roc));
            }
            for (std::size_t f = 0; f < result.fold_checkpoints.size(); ++f) {
                nn::save_checkpoint((fs::path(cv_out) / ("fold" + std::to_string(f) + ".cpck")).string(),
                                    result.fold_checkpoints[f]);
            }
            std::cout << eval::format_report_summary(result.report);
            std::cout << "wrote " << (fs::path(cv_out) / "report.json").string() << "\n";
            return 0;
        }

        if (report_cmd->parsed()) {
            std::ifstream in(report_path);
            if (!in) throw std::runtime_error("cannot open report: " + report_path);
            nlohmann::json j;
            in >> j;
            std::cout << eval::format_report_summary(eval::report_from_json(j));
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
