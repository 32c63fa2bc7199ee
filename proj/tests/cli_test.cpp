#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "coughpipe/audio/manifest.hpp"
#include "coughpipe/synthdata.hpp"

namespace fs = std::filesystem;
using namespace coughpipe;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "coughpipe_cli_out.txt";
    const std::string cmd = std::string(COUGHPIPE_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        base_ = fs::temp_directory_path() / ("coughpipe_cli_" + std::to_string(::getpid()));
        fs::remove_all(base_);
        fs::create_directories(base_);
    }
    void TearDown() override { fs::remove_all(base_); }
    fs::path base_;
};

}  // namespace

TEST_F(CliTest, SynthWritesManifestAndWavs) {
    const auto r = run_cli("synth --out " + (base_ / "data").string() +
                           " --patients-per-class 2 --events-per-patient 1 --seed 5");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto manifest = audio::load_manifest((base_ / "data" / "manifest.csv").string());
    EXPECT_EQ(manifest.entries.size(), 6u);  // 3 classes x 2 patients x 1 event
    for (const auto& e : manifest.entries) {
        EXPECT_TRUE(fs::exists(base_ / "data" / e.audio_path)) << e.audio_path;
    }
}

TEST_F(CliTest, ExtractIsIdempotentAndRekeysOnConfigChange) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "data").string() +
                      " --patients-per-class 2 --events-per-patient 1 --seed 5")
                  .exit_code,
              0);
    const std::string manifest = (base_ / "data" / "manifest.csv").string();
    const std::string cache = (base_ / "cache").string();

    const auto first =
        run_cli("extract --manifest " + manifest + " --cache " + cache + " --m 13 --f 512 --s 40 --workers 1");
    ASSERT_EQ(first.exit_code, 0) << first.output;
    EXPECT_NE(first.output.find("extracted 6, skipped 0"), std::string::npos) << first.output;

    // one hash directory with 6 cache files + index
    std::size_t dirs = 0;
    fs::path hash_dir;
    for (const auto& entry : fs::directory_iterator(cache)) {
        ++dirs;
        hash_dir = entry.path();
    }
    ASSERT_EQ(dirs, 1u);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(hash_dir)) {
        if (entry.path().extension() == ".cpfm") ++files;
    }
    EXPECT_EQ(files, 6u);
    EXPECT_TRUE(fs::exists(hash_dir / "index.json"));
    const auto index = nlohmann::json::parse(read_file(hash_dir / "index.json"));
    EXPECT_EQ(index.at("entries").size(), 6u);

    const auto rerun =
        run_cli("extract --manifest " + manifest + " --cache " + cache + " --m 13 --f 512 --s 40 --workers 1");
    ASSERT_EQ(rerun.exit_code, 0);
    EXPECT_NE(rerun.output.find("extracted 0, skipped 6"), std::string::npos) << rerun.output;

    const auto changed =
        run_cli("extract --manifest " + manifest + " --cache " + cache + " --m 26 --f 512 --s 40 --workers 1");
    ASSERT_EQ(changed.exit_code, 0);
    EXPECT_NE(changed.output.find("extracted 6, skipped 0"), std::string::npos) << changed.output;
    dirs = 0;
    for (const auto& entry : fs::directory_iterator(cache)) {
        ++dirs;
        (void)entry;
    }
    EXPECT_EQ(dirs, 2u);  // second config hash directory
}

TEST_F(CliTest, ExtractReportsFailuresAndContinues) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "data").string() +
                      " --patients-per-class 2 --events-per-patient 1 --seed 5")
                  .exit_code,
              0);
    // append a manifest row pointing at a garbage file
    std::ofstream(base_ / "data" / "broken.wav") << "not audio";
    {
        std::ofstream m(base_ / "data" / "manifest.csv", std::ios::app);
        m << "broken.wav,broken-ev,broken-pat,tb,synthetic\n";
    }
    const auto r = run_cli("extract --manifest " + (base_ / "data" / "manifest.csv").string() + " --cache " +
                           (base_ / "cache").string() + " --m 13 --f 512 --s 40 --workers 1");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("extracted 6"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("failed: broken-ev"), std::string::npos) << r.output;
}

TEST_F(CliTest, CacheDirFallsBackToEnvironmentVariable) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "data").string() +
                      " --patients-per-class 2 --events-per-patient 1 --seed 5")
                  .exit_code,
              0);
    const std::string cache = (base_ / "envcache").string();
    ::setenv("COUGHPIPE_CACHE", cache.c_str(), 1);
    const auto r = run_cli("extract --manifest " + (base_ / "data" / "manifest.csv").string() +
                           " --m 13 --f 512 --s 40 --workers 1");
    ::unsetenv("COUGHPIPE_CACHE");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_TRUE(fs::exists(cache));
}

TEST_F(CliTest, PretrainRefusesCoughLabels) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "data").string() +
                      " --patients-per-class 2 --events-per-patient 1 --seed 5")
                  .exit_code,
              0);
    const auto r = run_cli("pretrain --pretrain-manifest " + (base_ / "data" / "manifest.csv").string() +
                           " --arch resnet_mini --seed 1 --out " + (base_ / "out").string());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("cough"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(base_ / "out" / "pretrain_resnet_mini.cpck"));
}

TEST_F(CliTest, PretrainWritesDeterministicCheckpoint) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "pre").string() +
                      " --labels sneeze,speech,noise --patients-per-class 4 --events-per-patient 1 --seed 6 "
                      "--duration 0.25")
                  .exit_code,
              0);
    const std::string args = "pretrain --pretrain-manifest " + (base_ / "pre" / "manifest.csv").string() +
                             " --arch resnet_mini --resnet-depth 1 --resnet-stem 4 --seed 9 --m 13 --f 512 --s 40"
                             " --epochs 2 --patience 2 --batch-size 8 --workers 1 --out ";
    ASSERT_EQ(run_cli(args + (base_ / "out1").string()).exit_code, 0);
    ASSERT_EQ(run_cli(args + (base_ / "out2").string()).exit_code, 0);
    const auto a = read_file(base_ / "out1" / "pretrain_resnet_mini.cpck");
    const auto b = read_file(base_ / "out2" / "pretrain_resnet_mini.cpck");
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, b);
}

TEST_F(CliTest, ReportPrintsSummaryWithoutRecomputation) {
    nlohmann::json j = {{"task", "two_class"},
                        {"architecture", "cnn"},
                        {"seed", 1},
                        {"folds", nlohmann::json::array()},
                        {"mean_f1", 0.91239},
                        {"sigma_f1", 0.03256},
                        {"mean_accuracy", 0.9},
                        {"pooled_auc", 0.9245},
                        {"sensitivity_at_spec70", 0.96},
                        {"sensitivity_at_spec80", 0.93},
                        {"triage_pass", true}};
    const auto path = base_ / "report.json";
    std::ofstream(path) << j.dump(2);
    const auto r = run_cli("report " + path.string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("mean F1: 0.9124"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("sigma_F1: 0.0326"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("AUC: 0.9245"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("WHO triage: PASS"), std::string::npos) << r.output;
}

TEST_F(CliTest, ReportFailsOnMalformedInput) {
    const auto path = base_ / "bad.json";
    std::ofstream(path) << "{ not json";
    EXPECT_NE(run_cli("report " + path.string()).exit_code, 0);
}

TEST_F(CliTest, CvSmokeRunWritesReportRocAndCheckpoints) {
    ASSERT_EQ(run_cli("synth --out " + (base_ / "data").string() +
                      " --labels tb,covid19 --patients-per-class 6 --events-per-patient 1 --seed 11 "
                      "--duration 0.25")
                  .exit_code,
              0);
    const auto r = run_cli("cv --manifest " + (base_ / "data" / "manifest.csv").string() +
                           " --task two_class --arch cnn --seed 4 --m 13 --f 512 --s 40 --epochs 2 --patience 2"
                           " --lr 2e-3 --batch-size 8 --outer-k 3 --inner-k 2 --workers 1 --out " +
                           (base_ / "cvout").string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    ASSERT_TRUE(fs::exists(base_ / "cvout" / "report.json"));
    EXPECT_TRUE(fs::exists(base_ / "cvout" / "roc.csv"));
    EXPECT_TRUE(fs::exists(base_ / "cvout" / "fold0.cpck"));
    EXPECT_TRUE(fs::exists(base_ / "cvout" / "fold2.cpck"));
    const auto report = nlohmann::json::parse(read_file(base_ / "cvout" / "report.json"));
    EXPECT_EQ(report.at("task"), "two_class");
    EXPECT_EQ(report.at("folds").size(), 3u);
    EXPECT_TRUE(report.contains("pooled_auc"));
    EXPECT_NE(r.output.find("WHO triage:"), std::string::npos) << r.output;
}
