#include "shapedis/common/error.hpp"
#include "shapedis/pipeline/commands.hpp"
#include "shapedis/pipeline/config.hpp"
#include "shapedis/pipeline/manifest.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shapedis;
using namespace shapedis::pipeline;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(seed = 5
[geometry]
n = 8
samples = 1024
surface_resolution = 24
mesh_resolution = 24
[stage1]
latent_dim = 8
hidden = [32, 32, 32]
skip_layer = 1
epochs = 3
points_per_step = 64
[stage2]
latent_dim = 4
encoder_hidden = [16]
decoder_hidden = [16]
epochs = 2
batch = 4
sdf_points = 16
seeds = [0]
[eval]
cd_points = 300
recon_resolution = 16
recon_shapes = 2
traversal_points = 3
traversal_resolution = 16
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class PipelineTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("shapedis_pipe_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    CommandOptions opts(const std::string& id, bool with_config = true) const {
        CommandOptions o;
        o.runs_root = root_;
        o.run_id = id;
        if (with_config) o.config = parse_config(kTiny);
        return o;
    }

    fs::path root_;
};

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

}  // namespace

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config("[stage2]\nlatnet_dim = 4\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("stage2.latnet_dim"), std::string::npos) << e.what();
    }
    try {
        parse_config("[bogus]\nx = 1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
    }
    try {
        parse_config("[stage1]\nepochs = \"many\"\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("stage1.epochs"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config("[stage1\n"), ConfigError);
}

TEST(Config, RejectsLatentNotSmallerThanCode) {
    EXPECT_THROW(parse_config("[stage1]\nlatent_dim = 8\n[stage2]\nlatent_dim = 8\n"), ConfigError);
    EXPECT_THROW(parse_config("[stage1]\nlatent_dim = 8\n[stage2]\nlatent_dim = 12\n"), ConfigError);
    EXPECT_NO_THROW(parse_config("[stage1]\nlatent_dim = 8\n[stage2]\nlatent_dim = 7\n"));
    EXPECT_THROW(parse_config("[stage2]\ndisease_coord = 1\nage_coord = 1\n"), ConfigError);
}

TEST(Config, ResolvesSharedValues) {
    const auto c = parse_config(kTiny);
    EXPECT_EQ(c.stage2.model.vae.input_dim, 8);
    EXPECT_EQ(c.stage1.seed, 5u);
    EXPECT_EQ(c.geometry.cohort.seed, 5u);
    EXPECT_EQ(c.geometry.sampling.count, 1024u);
}

TEST(Config, TomlRoundTripKeepsHash) {
    for (const auto& cfg : {PipelineConfig{}, parse_config(kTiny), desk_config()}) {
        auto c = cfg;
        c.resolve();
        const auto back = parse_config(config_to_toml(c));
        EXPECT_EQ(config_hash(back), config_hash(c));
        EXPECT_EQ(config_snapshot(back), config_snapshot(c));
    }
    auto a = parse_config(kTiny), b = parse_config(kTiny);
    b.stage2.model.lambda_cov = 0.5;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, Ablations) {
    stage2::Stage2Config c;
    apply_ablation(c, "no_disentangle");
    EXPECT_EQ(c.lambda_snnl, 0.0);
    EXPECT_EQ(c.lambda_cov, 0.0);
    EXPECT_EQ(c.lambda_dis_sen, 0.0);
    EXPECT_GT(c.lambda_sdf, 0.0);
    c = {};
    apply_ablation(c, "beta_vae");
    EXPECT_EQ(c.lambda_sdf, 0.0);
    c = {};
    apply_ablation(c, "no_cov");
    EXPECT_EQ(c.lambda_cov, 0.0);
    EXPECT_GT(c.lambda_snnl, 0.0);
    c = {};
    apply_ablation(c, "fixed_t");
    EXPECT_EQ(c.temperature, stage2::TemperatureMode::Fixed);
    EXPECT_THROW(apply_ablation(c, "nope"), ConfigError);
}

TEST(Manifest, JsonRoundTrip) {
    RunManifest m;
    m.run_id = "r";
    m.config_snapshot = "{}";
    m.config_hash = "abc";
    m.seeds["global"] = {1, 2};
    m.artifacts["x"] = {"a/x.bin", "ff", "make-data", {{"y", "ee"}}};
    m.timings["make-data"] = 1.5;
    const auto back = manifest_from_json(manifest_to_json(m));
    EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
    EXPECT_EQ(back.find("x")->depends_on.at("y"), "ee");
    EXPECT_THROW(manifest_from_json("not json"), FormatError);
}

TEST_F(PipelineTest, LockIsExclusive) {
    const auto dir = root_ / "locked";
    {
        RunLock a(dir);
        EXPECT_THROW(RunLock b(dir), Error);
        EXPECT_THROW(cmd_make_data(opts("locked")), Error);
    }
    EXPECT_FALSE(fs::exists(dir / kLockFile));
    EXPECT_NO_THROW(RunLock c(dir));
}

TEST_F(PipelineTest, MakeDataFileCountsAndDeterminism) {
    cmd_make_data(opts("a"));
    cmd_make_data(opts("b"));
    EXPECT_EQ(count_files(root_ / "a/data/meshes"), 8u);
    EXPECT_EQ(count_files(root_ / "a/data/samples"), 8u);
    EXPECT_TRUE(fs::exists(root_ / "a/data/metadata.csv"));
    for (const auto& e : fs::directory_iterator(root_ / "a/data/samples")) {
        EXPECT_EQ(slurp(e.path()), slurp(root_ / "b/data/samples" / e.path().filename()));
    }
    EXPECT_THROW(cmd_make_data(opts("a")), InputError);
    auto forced = opts("a");
    forced.force = true;
    EXPECT_NO_THROW(cmd_make_data(forced));
    EXPECT_TRUE(cmd_orphans(opts("a", false)).empty());
}

TEST_F(PipelineTest, ClusterBeforeStage1IsDependencyError) {
    EXPECT_THROW(cmd_cluster(opts("never", false)), DependencyError);
    cmd_make_data(opts("c"));
    try {
        cmd_cluster(opts("c", false));
        FAIL();
    } catch (const DependencyError& e) {
        EXPECT_NE(std::string(e.what()).find("train-stage1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(cmd_train_stage2(opts("c", false)), DependencyError);
    EXPECT_THROW(cmd_eval(opts("c", false)), DependencyError);
}

TEST_F(PipelineTest, ConfigMismatchRejected) {
    cmd_make_data(opts("m"));
    auto other = opts("m");
    other.config->stage1.epochs = 4;
    EXPECT_THROW(cmd_train_stage1(other), ConfigError);
    auto reseeded = opts("m", false);
    reseeded.seed = 99;
    EXPECT_THROW(cmd_train_stage1(reseeded), ConfigError);
}

TEST_F(PipelineTest, TamperedUpstreamIsDetected) {
    cmd_make_data(opts("t"));
    cmd_train_stage1(opts("t", false));
    {
        std::ofstream out(root_ / "t/stage1/checkpoint.s1ckpt", std::ios::binary | std::ios::app);
        out << "x";
    }
    EXPECT_THROW(cmd_cluster(opts("t", false)), DependencyError);
}

TEST_F(PipelineTest, FullToyRunWritesEverythingWithoutOrphans) {
    const auto o = opts("full");
    cmd_make_data(o);
    const auto s = opts("full", false);
    cmd_train_stage1(s);
    cmd_cluster(s);
    cmd_train_stage2(s);
    cmd_eval(s);
    cmd_traverse(s);
    auto nc = s;
    nc.ablation = "no_cov";
    cmd_train_stage2(nc);
    cmd_eval(nc);
    const auto dir = root_ / "full";
    for (const char* p : {"stage1/checkpoint.s1ckpt", "stage1/history.csv", "cluster/pseudo_labels.csv",
                          "cluster/report.json", "stage2/full/seed_5.s2ckpt", "stage2/full/seed_5_log.csv",
                          "eval/full/metrics.json", "eval/full/table2.csv", "eval/no_cov/metrics.json",
                          "traversals/full/disease_0.obj", "traversals/full/volumes.csv", "config.toml"}) {
        EXPECT_TRUE(fs::exists(dir / p)) << p;
    }
    EXPECT_TRUE(cmd_orphans(s).empty());
    const auto m = load_manifest(dir);
    const auto* ck = m.find("stage2/full/seed_5");
    ASSERT_NE(ck, nullptr);
    EXPECT_EQ(ck->depends_on.at("stage1_checkpoint"), m.find("stage1_checkpoint")->sha256);

    // rerunning a stage replaces its outputs instead of leaving strays
    cmd_train_stage1(s);
    EXPECT_TRUE(cmd_orphans(s).empty());
    EXPECT_THROW(cmd_eval(s), DependencyError);

    {
        std::ofstream stray(dir / "eval/full/extra.txt");
        stray << "?";
    }
    EXPECT_EQ(cmd_orphans(s), std::vector<std::string>{"eval/full/extra.txt"});
}

TEST_F(PipelineTest, RunsRootFromEnvironment) {
    ::setenv("SHAPEDIS_RUNS_DIR", root_.c_str(), 1);
    EXPECT_EQ(runs_root(), root_);
    ::unsetenv("SHAPEDIS_RUNS_DIR");
    EXPECT_EQ(runs_root(), fs::path("runs"));
}
