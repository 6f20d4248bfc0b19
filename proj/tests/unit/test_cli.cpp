#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "commands.hpp"
#include "grouprec/checkpoint.hpp"
#include "grouprec/data.hpp"

namespace fs = std::filesystem;
using grouprec::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "grouprec");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("grouprec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = (dir_ / "synth.csv").string();
    ASSERT_EQ(cli({"synth", "--out", data_, "--records", "300", "--groups", "12", "--items", "40", "--seed", "4"}).code, 0);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result train(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--data", data_, "--out", (dir_ / "runs").string(),
                                  "--run-name", name, "--set", "train.epochs=6", "--set", "model.dense_width=16"};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  }

  fs::path dir_;
  std::string data_;
};

}  // namespace

TEST_F(CliTest, TrainWritesOneMetricsRowPerEpoch) {
  const auto r = train("a");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = slurp(dir_ / "runs/a/metrics.csv");
  const auto lines = std::count(metrics.begin(), metrics.end(), '\n');
  EXPECT_EQ(std::to_string(lines - 1), value_of(r.out, "epochs_ran"));
  EXPECT_TRUE(fs::exists(dir_ / "runs/a/model.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "runs/a/config.txt"));
}

TEST_F(CliTest, SameSeedByteIdentical) {
  ASSERT_EQ(train("a").code, 0);
  ASSERT_EQ(train("b").code, 0);
  EXPECT_EQ(slurp(dir_ / "runs/a/metrics.csv"), slurp(dir_ / "runs/b/metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "runs/a/model.ckpt"), slurp(dir_ / "runs/b/model.ckpt"));
}

TEST_F(CliTest, EvaluateMatchesTrainTimeValidation) {
  const auto t = train("a");
  ASSERT_EQ(t.code, 0) << t.err;
  const auto e = cli({"evaluate", "--run-dir", (dir_ / "runs/a").string(), "--split", "val"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NEAR(std::stod(value_of(e.out, "rmse")), std::stod(value_of(t.out, "val_rmse")), 1e-12);
  const auto test = cli({"evaluate", "--run-dir", (dir_ / "runs/a").string()});
  EXPECT_NEAR(std::stod(value_of(test.out, "rmse")), std::stod(value_of(t.out, "test_rmse")), 1e-12);
}

TEST_F(CliTest, EvaluateRejectsSchemaMismatch) {
  ASSERT_EQ(train("g", {"--scenario", "GRS"}).code, 0);
  const auto e = cli({"evaluate", "--run-dir", (dir_ / "runs/g").string(), "--scenario", "MCGRS"});
  EXPECT_EQ(e.code, grouprec::cli::kExitConfig);
  EXPECT_NE(e.err.find("schema"), std::string::npos) << e.err;
}

TEST_F(CliTest, RecommendMatchesRequestedK) {
  ASSERT_EQ(train("a").code, 0);
  const auto r = cli({"recommend", "--run-dir", (dir_ / "runs/a").string(), "--group", "g1", "--ctx",
                      "Class=v1", "--k", "3", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = std::count(r.out.begin(), r.out.end(), '\n');
  EXPECT_EQ(lines, 4);
  EXPECT_EQ(r.out.rfind("rank,item_id,predicted", 0), 0u);
}

TEST_F(CliTest, RecommendNoCandidates) {
  // One group that rated every item.
  std::ofstream(dir_ / "full.csv") << "group_id,item_id,Class,App,overall\n"
                                      "g1,i1,A,3,3\ng1,i2,A,4,4\ng2,i1,B,5,5\ng2,i2,B,2,2\n"
                                      "g3,i1,A,3,3\ng3,i2,B,1,1\ng4,i1,B,4,4\ng4,i2,A,5,4\n"
                                      "g5,i1,A,2,2\ng5,i2,B,3,3\n";
  std::ofstream(dir_ / "full.csv.decl") << "group=group_id\nitem=item_id\noverall=overall\ncontext=Class\n"
                                           "criterion=App\nscale=1,5\n";
  const auto t = cli({"train", "--data", (dir_ / "full.csv").string(), "--out",
                      (dir_ / "runs").string(), "--run-name", "f", "--set", "train.epochs=2"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto r = cli({"recommend", "--run-dir", (dir_ / "runs/f").string(), "--group", "g1", "--ctx",
                      "Class=A", "--k", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("no candidates"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExitCodes) {
  const auto missing = cli({"train", "--data", (dir_ / "nope.csv").string()});
  EXPECT_EQ(missing.code, grouprec::cli::kExitData);
  EXPECT_NE(missing.err.find("nope.csv"), std::string::npos);
  EXPECT_EQ(cli({"train", "--data", data_, "--set", "model.heads=3"}).code, grouprec::cli::kExitConfig);
  EXPECT_EQ(cli({"train", "--data", data_, "--set", "no.such=1"}).code, grouprec::cli::kExitConfig);
  EXPECT_EQ(cli({"frobnicate"}).code, grouprec::cli::kExitConfig);
}

TEST_F(CliTest, GradcheckOutcomes) {
  EXPECT_EQ(cli({"gradcheck"}).code, 0);
  const auto corrupt = cli({"gradcheck", "--corrupt"});
  EXPECT_EQ(corrupt.code, grouprec::cli::kExitNumeric);
  EXPECT_NE(corrupt.err.find("hidden.w"), std::string::npos);
  EXPECT_EQ(cli({"gradcheck", "--tol", "1e-12"}).code, grouprec::cli::kExitNumeric);
}

TEST_F(CliTest, SynthRoundTripAndDeterminism) {
  const auto other = (dir_ / "again.csv").string();
  ASSERT_EQ(cli({"synth", "--out", other, "--records", "300", "--groups", "12", "--items", "40", "--seed", "4"}).code, 0);
  EXPECT_EQ(slurp(data_), slurp(other));
  const auto ds = grouprec::load_ratings_csv(data_, grouprec::load_schema_decl(data_ + ".decl"));
  EXPECT_EQ(ds.size(), 300u);
}
