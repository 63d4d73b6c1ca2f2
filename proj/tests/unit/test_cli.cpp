#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "ihtp/io.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(IHTP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, VersionAndUsage) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("invert --no-such-flag"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST(Cli, VerifyPasses) { EXPECT_EQ(run("verify"), 0); }

TEST(Cli, MissingModelIsIoError) {
  const auto dir = fresh_dir("ihtp_cli_models");
  EXPECT_EQ(run("invert --models " + dir.string()), 6);
}

TEST(Cli, InvalidConfigValue) { EXPECT_EQ(run("invert --noise -3"), 3); }

TEST(Cli, SimulateWritesTrainingSignalAndManifest) {
  const auto dir = fresh_dir("ihtp_cli_sim");
  const auto out = dir / "sim.csv";
  ASSERT_EQ(run("simulate --flux builtin-train --probe 0.82,0.089 --out " + out.string()), 0);
  const auto table = ihtp::io::read_csv(out);
  EXPECT_EQ(table.rows.size(), 6794u);
  EXPECT_EQ(table.header.front(), "k");
  EXPECT_TRUE(fs::exists(dir / "sim.csv.manifest.json"));
}

}  // namespace
