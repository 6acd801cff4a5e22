#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "source=ura:2x3\n"
    "target=uca:6\n"
    "k_source=2\n"
    "k_target=2\n"
    "p_source=8\n"
    "l_source=4\n"
    "p_target=4\n"
    "l_target=3\n"
    "snapshots=30\n"
    "test_snr=0,20\n"
    "sweep_p_source=4,8\n"
    "gammas=0.01,1\n"
    "trials=5\n"
    "test_realizations=2\n"
    "theta_points_source=2\n"
    "theta_points_target=2\n"
    "conv_filters=4\n"
    "fc_units=8\n"
    "max_epochs=2\n"
    "batch_size=8\n"
    "threads=1\n";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("arraysel_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "tiny.cfg") << kTinyConfig;
  }
  void TearDown() override { fs::remove_all(root_); }

  int run(const std::string& args, const fs::path& out) const {
    const std::string cmd = std::string(ARRAYSEL_CLI_PATH) + " --log quiet --config " + (root_ / "tiny.cfg").string() +
                            " --out " + out.string() + " " + args + " > " + (root_ / "stdout.txt").string() +
                            " 2> " + (root_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static void expect_csv(const fs::path& p, const std::string& header) {
    ASSERT_TRUE(fs::exists(p)) << p;
    const std::string text = slurp(p);
    EXPECT_EQ(text.rfind(header + "\n", 0), 0u) << p;
    EXPECT_EQ(text.find('\r'), std::string::npos) << p;
    EXPECT_EQ(text.back(), '\n') << p;
  }

  fs::path root_;
};

const std::string kResultHeader = "x,series,value,stderr,n,config_hash";

}  // namespace

TEST_F(Cli, StagedWorkflow) {
  const fs::path out = root_ / "run";
  ASSERT_EQ(run("gen-data --domain source", out), 0);
  ASSERT_EQ(run("gen-data --domain target", out), 0);
  expect_csv(out / "source_classes.csv", "class_id,sensors,count");
  EXPECT_TRUE(fs::exists(out / "source.dataset"));
  ASSERT_EQ(run("train-source --data " + (out / "source.dataset").string(), out), 0);
  ASSERT_EQ(run("train-target --data " + (out / "target.dataset").string(), out), 0);
  expect_csv(out / "cnn_s_training.csv", "epoch,train_loss,validation_accuracy,learning_rate");
  ASSERT_EQ(run("transfer --data " + (out / "target.dataset").string(), out), 0);
  EXPECT_TRUE(fs::exists(out / "cnn_tr.classes"));
  ASSERT_EQ(run("eval-selection", out), 0);
  expect_csv(out / "selection.csv", kResultHeader);
  ASSERT_EQ(run("eval-doa --models " + out.string(), out), 0);
  expect_csv(out / "tl_doa.csv", kResultHeader);
  EXPECT_TRUE(fs::exists(out / "config.txt"));

  // A saved dataset trains the same network as one generated in memory.
  const fs::path direct = root_ / "direct";
  ASSERT_EQ(run("train-source", direct), 0);
  EXPECT_EQ(slurp(direct / "cnn_s.sann"), slurp(out / "cnn_s.sann"));
  EXPECT_EQ(slurp(direct / "cnn_s_training.csv"), slurp(out / "cnn_s_training.csv"));
}

TEST_F(Cli, SweepsAndReproduceAreByteStable) {
  for (const std::string args : {"sweep snr", "sweep coupling", "sweep tl", "reproduce source-doa",
                                 "reproduce perturbed-tl", "reproduce two-d"}) {
    const fs::path a = root_ / "a", b = root_ / "b";
    ASSERT_EQ(run(args, a), 0) << args << ": " << slurp(root_ / "stderr.txt");
    ASSERT_EQ(run("--threads 2 " + args, b), 0) << args;
    const std::string csv_path = slurp(root_ / "stdout.txt");
    ASSERT_FALSE(csv_path.empty()) << args;
    const std::string name = fs::path(csv_path.substr(0, csv_path.find('\n'))).filename().string();
    expect_csv(a / name, kResultHeader);
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << args;
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_F(Cli, BadInputExitCodes) {
  EXPECT_EQ(run("reproduce no-such-scenario", root_ / "x"), 2);
  EXPECT_EQ(run("--set k_target=1 reproduce tl-doa", root_ / "x"), 2);
  EXPECT_EQ(run("--set bogus=3 reproduce tl-doa", root_ / "x"), 2);
  EXPECT_NE(run("frobnicate", root_ / "x"), 0);
  EXPECT_EQ(run("transfer --source-model " + (root_ / "missing").string(), root_ / "x"), 1);
}

TEST_F(Cli, KeysListing) {
  ASSERT_EQ(run("keys", root_ / "k"), 0);
  const std::string text = slurp(root_ / "stdout.txt");
  EXPECT_NE(text.find("k_target"), std::string::npos);
  EXPECT_NE(text.find("crb_form"), std::string::npos);
}
