#include "fesc/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace fesc;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  Run r;
  r.code = run_cli(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

std::string data(const std::string& f) { return std::string(FESC_DATA_DIR) + "/" + f; }

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"verify", "ct-highorder", "--p", "2"}).code, kExitUsage);
  EXPECT_EQ(run({"verify", "no-such-element"}).code, kExitUsage);
  EXPECT_EQ(run({"verify", "ct-full"}).code, kExitOk);
}

TEST(Cli, VerifyJsonIsDeterministic) {
  auto a = run({"verify", "ct-minimal"}), b = run({"verify", "ct-minimal"});
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["status"], "pass");
  // nlohmann::json keeps object keys sorted
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(Cli, CohomologyOfAnnulus) {
  auto r = run({"cohomology", "--element", "ct-dg-minimal", "--mesh", data("annulus.msh")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["cohomology"], (std::vector<int>{1, 1, 0}));
}

TEST(Cli, CorruptedElementFile) {
  const std::string path = testing::TempDir() + "fesc_bad_element.json";
  {
    std::ofstream f(path);
    f << "{\"name\": \"ct-full\", \"p\": ";
  }
  EXPECT_EQ(run({"cohomology", "--element-file", path}).code, kExitFailure);
  std::remove(path.c_str());
}

TEST(Cli, MeshSplit) {
  auto r = run({"mesh", "split", data("tri.msh"), "--m", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_FALSE(r.out.empty());
  EXPECT_EQ(run({"mesh", "split", data("tri.msh"), "--strategy", "worsey-farin"}).code, kExitFailure);
}
