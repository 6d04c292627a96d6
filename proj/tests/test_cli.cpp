#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "foliflow/io/csv.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(FOLIFLOW_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const char* name) { return std::string(FOLIFLOW_CONFIGS) + "/" + name; }

fs::path scratch(const char* name) {
    const auto dir = fs::temp_directory_path() / "foliflow_cli_test" / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Cli, UsageErrorsExitThree) {
    EXPECT_EQ(run(""), 3);
    EXPECT_EQ(run("residual"), 3);
    EXPECT_EQ(run("frobnicate --config x.json"), 3);
    EXPECT_EQ(run("residual --config /nonexistent.json"), 3);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, BadConfigExitsThree) {
    const auto dir = scratch("bad");
    fs::create_directories(dir);
    foliflow::io::write_atomic(dir / "bad.json", "{\"domain\": {\"xmin\": 0}}");
    EXPECT_EQ(run("residual --config " + (dir / "bad.json").string() + " --out " + dir.string()), 3);
    EXPECT_EQ(run("residual --config " + config("residual_linear.json") + " --seed 1,2,3 --out " + dir.string()), 3);
}

TEST(Cli, ResidualVerdicts) {
    const auto dir = scratch("residual");
    EXPECT_EQ(run("residual --quiet --config " + config("residual_linear.json") + " --out " + (dir / "lin").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "lin" / "residual.csv"));
    EXPECT_TRUE(fs::exists(dir / "lin" / "summary.json"));
    EXPECT_TRUE(fs::exists(dir / "lin" / "manifest.json"));
    EXPECT_EQ(run("residual --quiet --config " + config("residual_polar_rays.json") + " --out " + (dir / "rays").string()), 0);
    EXPECT_EQ(run("residual --quiet --config " + config("residual_polar_quarter.json") + " --out " + (dir / "q").string()), 1);
}

TEST(Cli, SeedOverrideReplacesConfigSeeds) {
    const auto dir = scratch("seeds");
    ASSERT_EQ(run("reconstruct --quiet --config " + config("reconstruct_reaper.json") + " --seed 0.1,0 --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "sheet_00_leaves.csv"));
    EXPECT_FALSE(fs::exists(dir / "sheet_01_leaves.csv"));
    const auto base = foliflow::io::parse_csv(foliflow::io::read_file(dir / "sheet_00_base.csv"));
    ASSERT_FALSE(base.rows.empty());
    EXPECT_DOUBLE_EQ(base.rows[0][base.column("x")], 0.1);
}

TEST(Cli, PlotWritesSvg) {
    const auto dir = scratch("plot");
    ASSERT_EQ(run("residual --quiet --config " + config("residual_polar_rays.json") + " --out " + dir.string()), 0);
    EXPECT_EQ(run("plot --quiet --kind field --column residual " + (dir / "residual.csv").string() + " --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "residual.svg"));
    EXPECT_EQ(run("plot --quiet " + (dir / "missing.csv").string() + " --out " + dir.string()), 3);
}
