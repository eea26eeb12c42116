#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "anlf/checkpoint.hpp"
#include "anlf/cli.hpp"

namespace fs = std::filesystem;
using namespace anlf;

namespace {

const fs::path kWork = fs::current_path() / "cli-work";

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun run(const std::string& args) {
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(ANLF_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out.string());
  r.err = read_file(err.string());
  return r;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string quickstart(const std::string& out_dir) {
  return "model.variant = ANLF\n"
         "model.history_days = 2\n"
         "model.hidden = 16\n"
         "train.batch = 4\n"
         "train.epochs = 5\n"
         "train.lr = 0.005\n"
         "data.synthetic = true\n"
         "data.synthetic_days = 40\n"
         "data.synthetic_seed = 3\n"
         "data.synthetic_train_days = 30\n"
         "data.synthetic_validation_days = 5\n"
         "output.dir = " + out_dir + "\n";
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    write_file(kWork / "run.cfg", quickstart("run"));
    first_ = run("train --config " + (kWork / "run.cfg").string());
  }
  static CliRun first_;
};

CliRun Cli::first_;

}  // namespace

TEST_F(Cli, TrainQuickstartWritesArtifacts) {
  ASSERT_EQ(first_.code, 0) << first_.err;
  for (const char* f : {"checkpoint.anlf", "epochs.csv", "manifest.txt"}) EXPECT_TRUE(fs::exists(kWork / "run" / f)) << f;
  EXPECT_FALSE(fs::exists(kWork / "run" / ".anlf.lock"));
  const auto manifest = read_file((kWork / "run" / "manifest.txt").string());
  for (const char* key : {"config.model.seed 0", "config.train.seed 0", "fnv1a.data.synthetic ", "fnv1a.checkpoint ",
                          "version 0.1.0", "windows.train 28"})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
  const auto epochs = read_csv(kWork / "run" / "epochs.csv");
  ASSERT_EQ(epochs.size(), 7u);
  EXPECT_EQ(epochs[0], (std::vector<std::string>{"epoch", "train_mse", "val_mse", "seconds"}));
}

TEST_F(Cli, RerunIsByteIdentical) {
  ASSERT_EQ(first_.code, 0);
  write_file(kWork / "again.cfg", quickstart("again"));
  ASSERT_EQ(run("train --config " + (kWork / "again.cfg").string()).code, 0);
  for (const char* f : {"checkpoint.anlf", "epochs.csv"})
    EXPECT_EQ(read_file((kWork / "run" / f).string()), read_file((kWork / "again" / f).string())) << f;
}

TEST_F(Cli, ForecastOnTrainingDataWithAttention) {
  ASSERT_EQ(first_.code, 0);
  const auto data = (kWork / "train.csv").string();
  ASSERT_EQ(run("synth --days 30 --seed 3 --out " + data).code, 0);
  const auto r = run("forecast --checkpoint " + (kWork / "run" / "checkpoint.anlf").string() + " --data " + data +
                     " --dump-attention --out " + (kWork / "fc").string());
  ASSERT_EQ(r.code, 0) << r.err;

  const auto metrics = read_csv(kWork / "fc" / "metrics.csv");
  ASSERT_EQ(metrics.size(), 2u);
  EXPECT_EQ(metrics[0][2], "mape");
  EXPECT_LT(std::stod(metrics[1][2]), 5.0);

  const std::size_t samples = 28, history = 2 * 24;
  EXPECT_EQ(read_csv(kWork / "fc" / "forecast.csv").size(), 1 + samples * 24);
  const auto alpha = read_csv(kWork / "fc" / "alpha.csv");
  ASSERT_EQ(alpha.size(), 1 + samples * history);
  EXPECT_EQ(alpha[0].size(), 3 + feature::width);
  for (std::size_t i = 1; i < alpha.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 3; j < alpha[i].size(); ++j) {
      const double a = std::stod(alpha[i][j]);
      EXPECT_GT(a, 0.0);
      sum += a;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12) << "row " << i;
  }
  for (const char* f : {"beta.csv", "gamma.csv"}) EXPECT_TRUE(fs::exists(kWork / "fc" / f));
}

TEST_F(Cli, MissingCsvNamesPath) {
  const auto cfg = kWork / "missing.cfg";
  write_file(cfg, "data.train = nowhere/train.csv\ndata.validation = v.csv\ndata.holidays = h.csv\noutput.dir = m\n");
  const auto r = run("train --config " + cfg.string());
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("nowhere/train.csv"), std::string::npos) << r.err;
}

TEST_F(Cli, BadConfigExitsWithConfigCode) {
  const auto cfg = kWork / "bad.cfg";
  write_file(cfg, "data.synthetic = true\ntrain.batchsize = 4\n");
  const auto r = run("train --config " + cfg.string());
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("bad.cfg:2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("train.batchsize"), std::string::npos) << r.err;
}

TEST_F(Cli, IncompatibleCheckpointIsRejected) {
  Checkpoint ck;
  ck.model.history_days = 2;
  ck.model.hidden = 4;
  ck.model.features = 5;
  ck.params = init_params(ck.model);
  save_checkpoint((kWork / "narrow.anlf").string(), ck);
  const auto data = (kWork / "short.csv").string();
  ASSERT_EQ(run("synth --days 4 --seed 1 --out " + data).code, 0);
  const auto r = run("forecast --checkpoint " + (kWork / "narrow.anlf").string() + " --data " + data + " --out " +
                     (kWork / "narrow").string());
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("model.features"), std::string::npos) << r.err;
}

TEST_F(Cli, LockedOutputDirectoryIsRefused) {
  fs::create_directories(kWork / "locked");
  write_file(kWork / "locked" / ".anlf.lock", "");
  write_file(kWork / "locked.cfg", quickstart("locked"));
  const auto r = run("train --config " + (kWork / "locked.cfg").string());
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("in use"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(kWork / "locked" / "checkpoint.anlf"));
}

TEST_F(Cli, VerifyExitCodes) {
  const auto ok = run("verify");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("all checks passed"), std::string::npos);
  const auto bad = run("verify --inject-fault sigmoid");
  EXPECT_EQ(bad.code, kExitVerification);
  EXPECT_NE(bad.out.find("grad.sigmoid"), std::string::npos);
  EXPECT_EQ(run("verify --inject-fault gelu").code, kExitInternal);
}

TEST_F(Cli, SynthWritesCalendar) {
  const auto r = run("synth --days 3 --seed 9 --out " + (kWork / "s.csv").string() + " --holidays-out " +
                     (kWork / "h.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(kWork / "s.csv").size(), 1u + 3 * 24);
  EXPECT_TRUE(fs::exists(kWork / "h.csv"));
  EXPECT_EQ(run("synth --days 0 --seed 1 --out x.csv").code, kExitInternal);
}

TEST_F(Cli, SyntheticFlagAndOverrides) {
  const auto cfg = kWork / "partial.cfg";
  write_file(cfg, "model.history_days = 2\nmodel.hidden = 4\ntrain.batch = 8\noutput.dir = partial\n"
                  "data.synthetic_days = 12\ndata.synthetic_train_days = 6\ndata.synthetic_validation_days = 3\n");
  EXPECT_EQ(run("train --config " + cfg.string()).code, kExitConfig);
  const auto r = run("train --config " + cfg.string() + " --synthetic --set train.epochs=1 --set 'model.head_dim = 4'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = read_file((kWork / "partial" / "manifest.txt").string());
  EXPECT_NE(manifest.find("config.train.epochs 1\n"), std::string::npos);
  EXPECT_NE(manifest.find("config.model.head_dim 4\n"), std::string::npos);
  EXPECT_EQ(run("train --config " + cfg.string() + " --synthetic --set train.epochs").code, kExitConfig);
}
