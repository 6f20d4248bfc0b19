#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "grouprec/checkpoint.hpp"
#include "grouprec/error.hpp"
#include "oracles.hpp"

using namespace grouprec;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "grouprec_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}

Model sample_model() {
  Hyperparams hp;
  hp.d = 8;
  hp.heads = 2;
  hp.head_dim = 4;
  hp.dense_width = 10;
  hp.seed = 77;
  hp.attention_scale = AttentionScale::model_dim;
  return build_model(oracle::toy_schema(5), hp);
}

}  // namespace

TEST(Checkpoint, RoundTripPredictions) {
  const auto m = sample_model();
  const auto path = temp_path("round.ckpt");
  save_checkpoint(m, path);
  EXPECT_TRUE(fs::exists(path.string() + ".schema.txt"));
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.schema, m.schema);
  EXPECT_EQ(loaded.hp, m.hp);
  SeededRng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto ex = oracle::random_example(m, rng);
    EXPECT_EQ(predict(loaded, ex), predict(m, ex));
  }
}

TEST(Checkpoint, BadMagic) {
  const auto path = temp_path("magic.ckpt");
  save_checkpoint(sample_model(), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

TEST(Checkpoint, NewerVersionRejected) {
  const auto path = temp_path("version.ckpt");
  save_checkpoint(sample_model(), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const unsigned char v2[4] = {2, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(v2), 4);
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported checkpoint version 2"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, TruncatedFile) {
  const auto path = temp_path("trunc.ckpt");
  save_checkpoint(sample_model(), path);
  fs::resize_file(path, fs::file_size(path) - 9);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), CheckpointError);
}
