#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "utad/data/volume.hpp"

using utad::cli::run;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int quiet(const std::vector<std::string>& args) {
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    const int rc = run(args);
    testing::internal::GetCapturedStdout();
    testing::internal::GetCapturedStderr();
    return rc;
}

std::vector<std::string> tiny_flags() {
    return {"--resolution", "16", "--depth", "2", "--base-channels", "4", "--critic-channels", "4",
            "--critic-layers", "2", "--batch-size", "4", "--epochs", "1", "--lr-constant-epochs", "1",
            "--max-steps-per-epoch", "2", "--seed", "3", "--no-samples", "--validation-slices", "0"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

int data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) n += !line.empty() && line[0] != '#';
    return n - 1;  // header
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new fixture::TempDir("cli");
        ASSERT_EQ(quiet({"utad", "phantom-gen", "--out", (tmp_->path() / "d").string(), "--seed", "7", "--subjects", "5",
                         "--depth", "6", "--height", "24", "--width", "24", "--val", "1", "--test", "1"}),
                  0);
        ASSERT_EQ(quiet(concat({"utad", "train", "--role", "teacher", "--data", data(), "--out", path("teacher")}, tiny_flags())), 0);
    }
    static void TearDownTestSuite() { delete tmp_; }
    static std::string data() { return (tmp_->path() / "d").string(); }
    static std::string path(const std::string& rel) { return (tmp_->path() / rel).string(); }
    static std::string teacher() { return path("teacher/final.utad"); }
    static fixture::TempDir* tmp_;
};
fixture::TempDir* Cli::tmp_ = nullptr;

}  // namespace

TEST(CliBasics, ExitCodes) {
    EXPECT_EQ(quiet({"utad", "--help"}), utad::cli::kExitOk);
    EXPECT_EQ(quiet({"utad"}), utad::cli::kExitUsage);
    EXPECT_EQ(quiet({"utad", "no-such-command"}), utad::cli::kExitUsage);
    EXPECT_EQ(quiet({"utad", "phantom-gen", "--seed", "7"}), utad::cli::kExitUsage);  // missing --out
    EXPECT_EQ(quiet({"utad", "train", "--data", "/nonexistent"}), utad::cli::kExitUsage);
}

TEST(CliBasics, KebabAndSuffixPolicy) {
    EXPECT_EQ(utad::cli::kebab("lambda_gp"), "lambda-gp");
    fixture::TempDir tmp("suffix");
    const auto a = tmp / "run";
    EXPECT_EQ(utad::cli::fresh_run_dir(a), a);
    fs::create_directories(a);
    EXPECT_EQ(utad::cli::fresh_run_dir(a), a);  // empty directory is reused
    std::ofstream(a / "x") << 1;
    EXPECT_EQ(utad::cli::fresh_run_dir(a), tmp / "run-1");
    fs::create_directories(tmp / "run-1");
    std::ofstream(tmp / "run-1" / "x") << 1;
    EXPECT_EQ(utad::cli::fresh_run_dir(a), tmp / "run-2");
}

TEST(CliBasics, PhantomTreesAreIdentical) {
    fixture::TempDir tmp("pg");
    const std::vector<std::string> common{"--seed", "7", "--subjects", "3", "--depth", "4", "--height", "16", "--width", "16",
                                          "--val", "1", "--test", "1"};
    ASSERT_EQ(quiet(concat({"utad", "phantom-gen", "--out", (tmp / "a").string()}, common)), 0);
    ASSERT_EQ(quiet(concat({"utad", "phantom-gen", "--out", (tmp / "b").string()}, common)), 0);
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
        if (!e.is_regular_file() || e.path().filename() == "run.json") continue;
        const auto rel = fs::relative(e.path(), tmp / "a");
        EXPECT_EQ(slurp(e.path()), slurp(tmp / "b" / rel)) << rel;
        if (rel.extension() == ".gz") EXPECT_NO_THROW(utad::data::load_volume(e.path()));
        ++files;
    }
    EXPECT_EQ(files, 3 * 5 + 1);  // four modalities + labels per subject, one manifest
}

TEST_F(Cli, TrainWritesARunDirectoryAndNeverOverwrites) {
    const fs::path dir = path("teacher");
    for (const char* f : {"run.json", "losses.csv", "config.resolved", "final.utad", "checkpoint_e001.utad"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "run.json"));
    EXPECT_EQ(manifest.at("status"), "completed");
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_FALSE(manifest.at("config_hash").get<std::string>().empty());

    ASSERT_EQ(quiet(concat({"utad", "train", "--data", data(), "--out", path("teacher")}, tiny_flags())), 0);
    ASSERT_TRUE(fs::exists(path("teacher-1") + "/losses.csv"));
    EXPECT_EQ(slurp(dir / "losses.csv"), slurp(path("teacher-1") + "/losses.csv"));  // same seed, same log
}

TEST_F(Cli, StudentNeedsTeacherAndRejectsBadModes) {
    EXPECT_EQ(quiet(concat({"utad", "train", "--role", "student", "--data", data(), "--out", path("s0")}, tiny_flags())),
              utad::cli::kExitUsage);
    EXPECT_EQ(quiet(concat({"utad", "train", "--mask-mode", "banana", "--data", data(), "--out", path("s1")}, tiny_flags())),
              utad::cli::kExitUsage);
    EXPECT_EQ(quiet(concat({"utad", "train", "--role", "student", "--scheme", "b", "--teacher-checkpoint", teacher(), "--data",
                            data(), "--out", path("student_b")},
                           tiny_flags())),
              0);
    EXPECT_EQ(utad::core::ExperimentConfig::load(path("student_b/config.resolved")).student_scheme, utad::core::StudentScheme::B);
}

TEST_F(Cli, TranslateRequiresMaskForTeachers) {
    const auto subject = fs::directory_iterator(tmp_->path() / "d");
    fs::path flair, seg;
    for (const auto& e : fs::recursive_directory_iterator(tmp_->path() / "d")) {
        const auto n = e.path().filename().string();
        if (n.size() > 13 && n.substr(n.size() - 13) == "_flair.nii.gz" && flair.empty()) {
            flair = e.path();
            seg = e.path().parent_path() / (n.substr(0, n.size() - 13) + "_seg.nii.gz");
        }
    }
    ASSERT_FALSE(flair.empty());
    EXPECT_EQ(quiet({"utad", "translate", "--checkpoint", teacher(), "--input", flair.string(), "--source", "flair",
                     "--target", "t2", "--out", path("tr0")}),
              utad::cli::kExitUsage);
    EXPECT_EQ(quiet({"utad", "translate", "--checkpoint", teacher(), "--input", flair.string(), "--source", "flair",
                     "--target", "t7", "--mask", seg.string(), "--out", path("tr1")}),
              utad::cli::kExitUsage);
    ASSERT_EQ(quiet({"utad", "translate", "--checkpoint", teacher(), "--input", flair.string(), "--source", "flair", "--target",
                     "t2", "--mask", seg.string(), "--out", path("tr2")}),
              0);
    const auto out = utad::data::load_volume(path("tr2/flair_to_t2.nii.gz"));
    const auto in = utad::data::load_volume(flair);
    EXPECT_EQ(out.depth, in.depth);
    EXPECT_TRUE(fs::exists(path("tr2/flair_to_t2_tumor.nii.gz")));

    ASSERT_EQ(quiet(concat({"utad", "train", "--role", "student", "--teacher-checkpoint", teacher(), "--data", data(), "--out",
                            path("student_a")},
                           tiny_flags())),
              0);
    EXPECT_EQ(quiet({"utad", "translate", "--checkpoint", path("student_a/final.utad"), "--input", flair.string(), "--source",
                     "flair", "--target", "flair", "--out", path("tr3")}),
              0);
    EXPECT_TRUE(fs::exists(path("tr3/flair_to_flair.nii.gz")));
}

TEST_F(Cli, EvaluateReportsTwelvePairsAndAggregate) {
    ASSERT_EQ(quiet({"utad", "evaluate", "--checkpoint", teacher(), "--data", data(), "--out", path("ev"), "--perceptual",
                     "surrogate"}),
              0);
    EXPECT_EQ(data_rows(path("ev/metrics.csv")), 13);
    EXPECT_EQ(slurp(path("ev/metrics.csv")).rfind("# config_hash=", 0), 0u);
    const auto j = nlohmann::json::parse(slurp(path("ev/metrics.json")));
    EXPECT_EQ(j.at("pairs").size(), 12u);
    EXPECT_EQ(quiet({"utad", "evaluate", "--identity", "--checkpoint", teacher(), "--data", data()}), utad::cli::kExitUsage);
    ASSERT_EQ(quiet(concat({"utad", "evaluate", "--identity", "--data", data(), "--out", path("evid"), "--perceptual", "none",
                            "--no-error-maps"},
                           {"--resolution", "16"})),
              0);
    EXPECT_EQ(data_rows(path("evid/metrics.csv")), 13);
}

TEST_F(Cli, SegMetricsOnIdenticalMasks) {
    fs::path seg;
    for (const auto& e : fs::recursive_directory_iterator(tmp_->path() / "d")) {
        if (e.path().string().find("_seg.nii.gz") != std::string::npos) seg = e.path();
    }
    ASSERT_EQ(quiet({"utad", "seg-metrics", "--pred", seg.string(), "--gt", seg.string(), "--region", "wt,tc,et", "--out",
                     path("seg")}),
              0);
    const auto j = nlohmann::json::parse(slurp(path("seg/seg_metrics.json")));
    const auto& rows = j.at("rows");
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.at("dsc").get<double>(), 1.0);
        if (!r.at("assd_mm").is_null()) {
            EXPECT_EQ(r.at("assd_mm").get<double>(), 0.0);
            EXPECT_EQ(r.at("hd95_mm").get<double>(), 0.0);
        }
    }
    EXPECT_EQ(quiet({"utad", "seg-metrics", "--pred", seg.string(), "--region", "xx", "--gt", seg.string()}), utad::cli::kExitUsage);
}

TEST_F(Cli, FeatureErrorRowsPerScheme) {
    for (const char* s : {"c", "d"}) {
        ASSERT_EQ(quiet(concat({"utad", "train", "--role", "student", "--scheme", s, "--teacher-checkpoint", teacher(), "--data",
                                data(), "--out", path(std::string("fe_") + s)},
                               tiny_flags())),
                  0);
    }
    ASSERT_EQ(quiet({"utad", "feature-error", "--teacher", teacher(), "--student", path("fe_c/final.utad"), "--student",
                     path("fe_d/final.utad"), "--data", data(), "--out", path("fe")}),
              0);
    EXPECT_EQ(data_rows(path("fe/feature_error.csv")), 2);
    EXPECT_TRUE(fs::exists(path("fe/error_map_C.png")) || fs::exists(path("fe/error_map_c.png")));
    EXPECT_TRUE(fs::exists(path("fe/run.json")));
}
