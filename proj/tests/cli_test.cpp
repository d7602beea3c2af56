#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace {

struct CliRun {
  int status = -1;
  std::string out;
};

// Runs the CLI through the shell; `redirect` decides what lands in `out`.
CliRun run(const std::string& args, const std::string& redirect = "2>/dev/null") {
  const std::string cmd = std::string(SPECTR_CLI_PATH) + " " + args + " " + redirect;
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

// Value of the alpha column for the row whose first cell is `method`.
std::string alpha_of(const std::string& csv, const std::string& method) {
  for (const auto& l : lines(csv)) {
    if (l.rfind(method + ",", 0) == 0) {
      std::vector<std::string> cells;
      std::istringstream is(l);
      for (std::string c; std::getline(is, c, ',');) cells.push_back(c);
      return cells.size() > 2 ? cells[2] : "";
    }
  }
  return "";
}

TEST(Cli, CouplingIdenticalDistributions) {
  const CliRun r = run("coupling --p 0.3,0.7 --q 0.3,0.7 --k 2 --method otm");
  ASSERT_EQ(r.status, 0);
  const auto ls = lines(r.out);
  ASSERT_GE(ls.size(), 3u);
  EXPECT_EQ(ls[0].rfind("# spectr coupling", 0), 0u);
  EXPECT_EQ(ls[1], "method,k,alpha,detail");
  EXPECT_EQ(std::stod(alpha_of(r.out, "otm")), 1.0);
}

TEST(Cli, CouplingBernoulliOptimum) {
  const CliRun r = run("coupling --p 0.25,0.75 --q 0.75,0.25 --k 2 --method otm");
  ASSERT_EQ(r.status, 0);
  EXPECT_NEAR(std::stod(alpha_of(r.out, "otm")), 0.6875, 1e-7);
}

TEST(Cli, CouplingAllReportsOrdering) {
  const CliRun r = run("coupling --p 0.25,0.75 --q 0.75,0.25 --k 2 --method all");
  ASSERT_EQ(r.status, 0);
  const double mx = std::stod(alpha_of(r.out, "maximal"));
  const double ks = std::stod(alpha_of(r.out, "kseq"));
  const double lp = std::stod(alpha_of(r.out, "otm"));
  const double ub = std::stod(alpha_of(r.out, "upper"));
  EXPECT_LE(mx, ks + 1e-12);
  EXPECT_LE(ks, lp + 1e-7);
  EXPECT_LE(lp, ub + 1e-7);
  const CliRun err = run("coupling --p 0.25,0.75 --q 0.75,0.25 --k 2 --method all", "2>&1 >/dev/null");
  EXPECT_NE(err.out.find("ordering"), std::string::npos);
}

TEST(Cli, CouplingAllSkipsOverCap) {
  const CliRun r = run("coupling --p 0.5,0.5 --q 0.9,0.1 --k 13 --method all");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(alpha_of(r.out, "otm"), "skipped");
  EXPECT_NE(alpha_of(r.out, "kseq"), "skipped");
}

TEST(Cli, CouplingPlanCsv) {
  const auto path = std::filesystem::temp_directory_path() / "spectr_cli_plan.csv";
  const CliRun r = run("coupling --p 1,0 --q 0.5,0.5 --k 2 --method otm --plan-out " + path.string());
  ASSERT_EQ(r.status, 0);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "draft_tuple,output_token,mass\n0-0,0,0.5\n0-0,1,0.5\n");
  std::filesystem::remove(path);
}

TEST(Cli, CouplingJson) {
  const CliRun r = run("coupling --p 0.25,0.75 --q 0.75,0.25 --k 2 --method otm --format json");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["config"]["k"], 2);
  EXPECT_NEAR(j["reports"][0]["alpha"].get<double>(), 0.6875, 1e-7);
}

TEST(Cli, SweepBernoulli) {
  const CliRun r = run("sweep --family bernoulli --p 0.25 --b 0.75 --k-max 3 --with-lp");
  ASSERT_EQ(r.status, 0);
  const auto ls = lines(r.out);
  EXPECT_EQ(ls[1], "family,param,k,method,alpha");
  EXPECT_EQ(ls.size(), 2u + 3 * 3);
  EXPECT_NE(r.out.find("bernoulli,0.75,2,closed_form,0.6875"), std::string::npos);
  EXPECT_NE(r.out.find("bernoulli,0.75,2,otm,0.6875"), std::string::npos);
}

TEST(Cli, SweepUniform) {
  const CliRun r = run("sweep --family uniform --d 120 --r 2 --k-max 4");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("uniform,2,4,closed_form,0.9375"), std::string::npos);
  EXPECT_EQ(run("sweep --family uniform --d 10 --r 3").status, 2);
}

TEST(Cli, SweepSkipsLpRowsOverCap) {
  const CliRun r = run("sweep --family uniform --d 120 --r 2 --k-max 2 --with-lp");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("uniform,2,2,otm,skipped"), std::string::npos);
}

TEST(Cli, VerifyPassesAndFails) {
  EXPECT_EQ(run("verify --scope token --cases 20").status, 0);
  const CliRun bad = run("verify --scope token --cases 10 --k-min 4 --k-max 4 --gamma 1", "2>&1");
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("worst"), std::string::npos);
  EXPECT_EQ(run("verify --scope sequence").status, 0);
  EXPECT_EQ(run("verify --scope sequence --vocab 9").status, 3);
}

TEST(Cli, DecodeRows) {
  const CliRun r = run("decode --prompts 10 --tokens 24 --K 1,2 --L 2,4");
  ASSERT_EQ(r.status, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u + 1 + 4);
  EXPECT_EQ(ls[1], "algorithm,K,L,mean_block_efficiency,stderr_block_efficiency,simulated_speedup");
  EXPECT_EQ(ls[2].rfind("baseline,0,0,1,0,1", 0), 0u);
  EXPECT_EQ(ls[3].rfind("speculative,1,2,", 0), 0u);
  EXPECT_EQ(ls[4].rfind("spectr_kseq,2,2,", 0), 0u);
}

TEST(Cli, DecodeIdenticalModelsHitCeiling) {
  const CliRun r = run("decode --eps 0 --prompts 5 --tokens 25 --K 1,3 --L 4");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("speculative,1,4,5,0,5"), std::string::npos);
  EXPECT_NE(r.out.find("spectr_kseq,3,4,5,0,5"), std::string::npos);
}

TEST(Cli, DecodeTraces) {
  const auto dir = std::filesystem::temp_directory_path() / "spectr_cli_traces";
  std::filesystem::remove_all(dir);
  ASSERT_EQ(run("decode --prompts 2 --tokens 8 --K 2 --L 2 --trace-dir " + dir.string()).status, 0);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    ++files;
    std::ifstream in(e.path());
    const auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(j.contains("per_iteration"));
  }
  EXPECT_EQ(files, 4u);  // baseline + one K=2 row, two prompts each
  std::filesystem::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("coupling --p 0.5,0.6 --q 0.5,0.5").status, 2);
  EXPECT_EQ(run("coupling --p 0.5,0.5 --q 0.5,0.5,0").status, 2);
  EXPECT_EQ(run("coupling --p 0.5,0.5 --q 0.5,0.5 --k 20 --method otm").status, 3);
  EXPECT_EQ(run("decode --method maximal --K 2").status, 2);
  EXPECT_EQ(run("decode --format xml").status, 2);
  EXPECT_EQ(run("decode --drafting tree:2,0").status, 2);
}

TEST(Cli, RerunsAreByteIdentical) {
  for (const std::string args : {"coupling --p 0.2,0.3,0.5 --q 0.5,0.3,0.2 --k 3 --method all",
                                 "sweep --family bernoulli --k-max 4 --with-lp",
                                 "verify --scope token --cases 10 --seed 4",
                                 "decode --prompts 8 --tokens 20 --K 1,2 --L 3 --format json"}) {
    const CliRun a = run(args), b = run(args);
    EXPECT_EQ(a.status, 0) << args;
    EXPECT_EQ(a.out, b.out) << args;
  }
}

}  // namespace
