#include "cli.hpp"

#include "incentive/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <sstream>

using namespace incentive;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("incentive_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    io::write_file_atomic(dir_ / name, text);
    return dir_ / name;
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "incentive");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kTinyBench = R"(
seed = 5
[bench]
seeds = [11]
methods = ["CCPOvSIRE"]
budgets = [2.0]
n_per_action = 30
n_test = 40
n_probe = 40
binary_pehe = false
[sire]
hidden_widths = [8]
repr_dim = 4
epochs = 2
kappa_grid = [0.0, 0.1]
)";

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_F(CliTest, BenchOneSeedOneMethodWritesOneRow) {
  const auto cfg = write("bench.toml", kTinyBench);
  ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 0) << err_.str();
  const std::string csv = io::read_file(dir_ / "o" / "results.csv");
  EXPECT_EQ(count_lines(csv), 2);
  EXPECT_NE(csv.find("CCPOvSIRE,11,2,"), std::string::npos);
  EXPECT_EQ(count_lines(out_.str()), 1);
  const auto resolved = nlohmann::json::parse(io::read_file(dir_ / "o" / "resolved_config.json"));
  EXPECT_EQ(resolved.at("seed"), 5);
  EXPECT_EQ(resolved.at("bench").at("seeds")[0], 11);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "o" / "timings.csv"));
}

TEST_F(CliTest, BenchIsByteIdenticalAcrossRunsAndJobs) {
  std::string cfg_text = kTinyBench;
  cfg_text.replace(cfg_text.find("seeds = [11]"), 12, "seeds = [1, 2, 3]");
  const auto cfg = write("bench.toml", cfg_text);
  ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir_ / "a").string()}), 0) << err_.str();
  ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir_ / "b").string(), "--jobs", "3"}), 0);
  ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir_ / "c").string()}), 0);
  const auto a = io::read_file(dir_ / "a" / "results.csv");
  EXPECT_EQ(a, io::read_file(dir_ / "b" / "results.csv"));
  EXPECT_EQ(a, io::read_file(dir_ / "c" / "results.csv"));
  EXPECT_EQ(count_lines(a), 4);
}

TEST_F(CliTest, MissingInputPathNamesKey) {
  const auto cfg = write("train.toml", "seed = 1\n[train]\ndataset = \"/nonexistent/data.csv\"\n");
  EXPECT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 3);
  EXPECT_NE(err_.str().find("train.dataset"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(dir_ / "o"));
}

TEST_F(CliTest, MissingRequiredKeyNamesKey) {
  const auto cfg = write("policy.toml", "seed = 1\n[policy]\ncosts = [0, 1]\n");
  EXPECT_EQ(run({"policy", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 3);
  EXPECT_NE(err_.str().find("policy.budget"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UnknownKeyIsValidationError) {
  const auto cfg = write("rates.toml", "seed = 1\n[rates]\ntrails = 3\n");
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 3);
  EXPECT_NE(err_.str().find("rates.trails"), std::string::npos) << err_.str();
}

TEST_F(CliTest, SeedMustBeExplicit) {
  const auto cfg = write("rates.toml", "[rates]\ntrials = 2\n");
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 3);
  EXPECT_NE(err_.str().find("seed"), std::string::npos);
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string(), "--seed", "4"}), 0);
  const auto resolved = nlohmann::json::parse(io::read_file(dir_ / "o" / "resolved_config.json"));
  EXPECT_EQ(resolved.at("seed"), 4);
}

TEST_F(CliTest, ParseErrorsExitTwo) {
  const auto cfg = write("broken.toml", "seed = \n");
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 2);
  EXPECT_NE(err_.str().find("line 1"), std::string::npos);
  EXPECT_EQ(run({"rates"}), 2);
  EXPECT_EQ(run({"frobnicate", "--config", cfg.string()}), 2);
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--jobs", "many"}), 2);
}

TEST_F(CliTest, CommandMismatchRejected) {
  const auto cfg = write("rates.toml", "command = \"bench\"\nseed = 1\n");
  EXPECT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 3);
}

TEST_F(CliTest, RuntimeFailureExitsOne) {
  // Budget below the cheapest cost: the solver reports infeasibility.
  write("F.csv", "f1,f2\n0.1,0.5\n0.2,0.4\n");
  const auto cfg = write("policy.toml", "seed = 1\n[policy]\nestimates = \"" + (dir_ / "F.csv").string() +
                                            "\"\ncosts = [1, 2]\nbudget = 0.5\n");
  EXPECT_EQ(run({"policy", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 1);
}

TEST_F(CliTest, SimulateTrainPolicyPipeline) {
  const auto sim = write("sim.toml", "seed = 3\n[simulate]\nn_per_action = 40\nn_test = 25\n");
  ASSERT_EQ(run({"simulate", "--config", sim.string(), "--out", (dir_ / "sim").string()}), 0) << err_.str();
  for (const char* f : {"dataset.csv", "ground_truth.json", "test_contexts.csv", "test_rewards.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  }
  const std::string dataset_before = io::read_file(dir_ / "sim" / "dataset.csv");

  const auto train = write("train.toml", "seed = 3\n[train]\ndataset = \"" + (dir_ / "sim" / "dataset.csv").string() +
                                             "\"\n[sire]\nhidden_widths = [8]\nrepr_dim = 4\nepochs = 3\n"
                                             "select_kappa = true\nkappa_grid = [0.0, 0.5]\n");
  ASSERT_EQ(run({"train", "--config", train.string(), "--out", (dir_ / "model").string()}), 0) << err_.str();
  EXPECT_EQ(count_lines(io::read_file(dir_ / "model" / "kappa_selection.csv")), 3);
  EXPECT_EQ(count_lines(io::read_file(dir_ / "model" / "training_log.csv")), 4);

  const auto policy = write("policy.toml", "seed = 3\n[policy]\nmodel = \"" + (dir_ / "model" / "model.json").string() +
                                               "\"\ncontexts = \"" + (dir_ / "sim" / "test_contexts.csv").string() +
                                               "\"\ncosts = [0, 1, 2, 3, 4]\nbudget = 2\nsolver = \"lagrangian\"\n");
  ASSERT_EQ(run({"policy", "--config", policy.string(), "--out", (dir_ / "pol").string()}), 0) << err_.str();
  const auto sol = nlohmann::json::parse(io::read_file(dir_ / "pol" / "solution.json"));
  EXPECT_EQ(sol.at("assignment").size(), 25u);
  EXPECT_LE(sol.at("avg_cost").get<double>(), 2.0 + 1e-12);
  EXPECT_EQ(io::read_file(dir_ / "sim" / "dataset.csv"), dataset_before);

  const auto crm = write("crm.toml", "seed = 3\n[crm]\ndataset = \"" + (dir_ / "sim" / "dataset.csv").string() +
                                         "\"\ncosts = [0, 1, 2, 3, 4]\nbudget = 2\nepochs = 2\neta_steps = 3\n"
                                         "lambda_grid = [0.0, 0.5]\n");
  ASSERT_EQ(run({"crm", "--config", crm.string(), "--out", (dir_ / "crm").string()}), 0) << err_.str();
  EXPECT_EQ(count_lines(io::read_file(dir_ / "crm" / "crm_diagnostics.csv")), 3);
  EXPECT_TRUE(fs::exists(dir_ / "crm" / "policy.json"));
}

TEST_F(CliTest, RatesWritesTable) {
  const auto cfg = write("rates.toml", "seed = 2\n[rates]\nK_grid = [2, 4]\ntrials = 5\n");
  ASSERT_EQ(run({"rates", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 0) << err_.str();
  EXPECT_EQ(count_lines(io::read_file(dir_ / "o" / "rates.csv")), 3);
}
