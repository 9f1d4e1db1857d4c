#include <gtest/gtest.h>

#include <filesystem>

#include "textunlock/checkpoint.hpp"

using namespace textunlock;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("textunlock_ckpt_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Checkpoint, MapperRoundTripIsBitExact) {
  MapperHyper h;
  h.n = 6;
  h.m = 3;
  h.hidden_layers = 2;
  h.dropout_p = 0.25;
  auto p = init_mapper<float>(h, 4);
  p.ln_scale[0](0, 1) = 1.5f;
  p.bias[1](0, 0) = -0.125f;
  const auto dir = scratch("roundtrip");
  save_mapper(dir, p);
  const auto q = load_mapper(dir);
  EXPECT_EQ(q.hyper.n, 6u);
  EXPECT_EQ(q.hyper.hidden_layers, 2u);
  EXPECT_DOUBLE_EQ(q.hyper.dropout_p, 0.25);
  EXPECT_EQ(q.weight, p.weight);
  EXPECT_EQ(q.bias, p.bias);
  EXPECT_EQ(q.ln_scale, p.ln_scale);
  EXPECT_EQ(q.ln_shift, p.ln_shift);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  const auto dir = scratch("mismatch");
  save_mapper(dir, init_mapper<float>(6, 3, 2, 1));
  io::write_tensor(dir / "layer0.weight.tukt", MatrixF(5, 6));
  try {
    load_mapper(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dim_mismatch);
  }
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  TrainConfig c;
  c.batch_size = 17;
  c.base_lr = 3e-3;
  c.epochs = 4;
  c.seed = 99;
  c.shuffle = false;
  c.dropout_p = 0.2;
  c.hidden_layers = 3;
  c.adam.beta2 = 0.99;
  const auto d = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"batch_size", "big"}}), Error);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"batch_size", 0}}), Error);
}

TEST(Checkpoint, ReportJson) {
  TrainReport r;
  r.epoch_loss = {1.0, 0.5};
  r.steps = 8;
  r.holdout_agreement = 0.75;
  const auto j = to_json(r);
  EXPECT_EQ(j["steps"], 8);
  EXPECT_DOUBLE_EQ(j["argmax_agreement"].get<double>(), 0.75);
  EXPECT_TRUE(j["holdout_kl"].is_null());
}
