// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the hedist-cli binary as a user would.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(HEDIST_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hedist_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// Every column except wall_ms, which is a timing.
std::vector<std::vector<std::string>> without_time(std::vector<std::vector<std::string>> rows) {
  for (auto& r : rows)
    if (r.size() > 2) r.erase(r.begin() + 2);
  return rows;
}

const std::string kSynth =
    "-s dataset=synth -s synth_n=400 -s synth_d=8 -s profile=small -s backend=mock ";

TEST(Cli, TrainDistWritesOneRowPerRound) {
  const auto dir = scratch("dist");
  const CliRun r = cli("train-dist -q " + kSynth +
                    "-s workers=2 -s refresh_interval=1 -s iterations=4 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = read_csv(dir / "metrics.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "round");
  EXPECT_EQ(rows[0].size(), 11u);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][0], std::to_string(i));
  EXPECT_TRUE(fs::exists(dir / "manifest.txt"));
  EXPECT_TRUE(fs::exists(dir / "plot.py"));
}

TEST(Cli, TrainPlainSeparatesSynthetic) {
  const auto dir = scratch("plain");
  const CliRun r = cli("train-plain -q " + kSynth + "-s iterations=40 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = read_csv(dir / "metrics.csv");
  ASSERT_GE(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(std::stod(rows.back()[3]), 1.0);
}

TEST(Cli, ManifestReproducesRun) {
  const auto a = scratch("repro_a");
  const auto b = scratch("repro_b");
  ASSERT_EQ(cli("train-dist -q " + kSynth + "-s poly_source=fit -s fit_samples=5000 "
                "-s workers=2 -s iterations=6 -o " + a.string())
                .code,
            0);
  const CliRun r = cli("train-dist -q -c " + (a / "manifest.txt").string() + " -o " + b.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(without_time(read_csv(a / "metrics.csv")), without_time(read_csv(b / "metrics.csv")));
}

TEST(Cli, TcpWorkerProcessesMatchInproc) {
  const auto a = scratch("inproc");
  const auto b = scratch("tcp");
  const std::string common = "train-dist -q " + kSynth + "-s workers=2 -s iterations=4 ";
  ASSERT_EQ(cli(common + "-o " + a.string()).code, 0);
  const CliRun r = cli(common + "-s carrier=tcp -o " + b.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(without_time(read_csv(a / "metrics.csv")), without_time(read_csv(b / "metrics.csv")));
}

TEST(Cli, ConfigErrorsExitTwo) {
  CliRun r = cli("train-plain -s no_such_key=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("no_such_key"), std::string::npos);
  r = cli("train-plain -s eta=fast");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("eta"), std::string::npos);
  EXPECT_EQ(cli("train-dist -s refresh_interval=2 -s profile=toy").code, 2);
  EXPECT_EQ(cli("train-plain -c /nonexistent/config.txt").code, 2);
  EXPECT_EQ(cli("no-such-command").code, 2);
}

TEST(Cli, RuntimeFailureExitsThree) {
  const CliRun r = cli("train-plain -s dataset=mnist -s mnist_dir=/nonexistent -o " +
                    scratch("missing").string());
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST(Cli, FitPolyAndBench) {
  CliRun r = cli("fit-poly --loss hinge --samples 20000");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("poly_alpha="), std::string::npos);
  r = cli("bench-ops --profile small --backend mock --reps 2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("rotate"), std::string::npos);
  EXPECT_EQ(cli("bench-ops --profile nope").code, 2);
}

}  // namespace
