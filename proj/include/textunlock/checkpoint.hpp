#pragma once

// Checkpoint directory layout:
//   mapper.json          hyperparameters
//   <tensor>.tukt        one file per parameter tensor (layer0.weight, ...)
//   train_config.json    TrainConfig used for the run
//   train_report.json    TrainReport

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "textunlock/io.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/trainer.hpp"

namespace textunlock {

inline nlohmann::json to_json(const MapperHyper& h) {
  return {{"n", h.n},
          {"m", h.m},
          {"dim_out_factor", h.dim_out_factor},
          {"dropout_p", h.dropout_p},
          {"hidden_layers", h.hidden_layers}};
}

inline MapperHyper mapper_hyper_from_json(const nlohmann::json& j) {
  try {
    MapperHyper h;
    h.n = j.at("n").get<std::size_t>();
    h.m = j.at("m").get<std::size_t>();
    h.dim_out_factor = j.at("dim_out_factor").get<std::size_t>();
    h.dropout_p = j.at("dropout_p").get<double>();
    h.hidden_layers = j.at("hidden_layers").get<std::size_t>();
    validate_hyper(h);
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::bad_manifest, std::string("mapper.json: ") + e.what());
  }
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"epochs", c.epochs},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
          {"seed", c.seed},
          {"shuffle", c.shuffle},
          {"holdout_fraction", c.holdout_fraction},
          {"dim_out_factor", c.dim_out_factor},
          {"dropout_p", c.dropout_p},
          {"hidden_layers", c.hidden_layers}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
    c.seed = j.value("seed", c.seed);
    c.shuffle = j.value("shuffle", c.shuffle);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.dim_out_factor = j.value("dim_out_factor", c.dim_out_factor);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("train config: ") + e.what());
  }
  validate_train_config(c);
  return c;
}

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["epoch_loss"] = r.epoch_loss;
  j["steps"] = r.steps;
  j["train_size"] = r.train_size;
  j["holdout_size"] = r.holdout_size;
  j["holdout_kl"] = r.holdout_kl ? nlohmann::json(*r.holdout_kl) : nlohmann::json(nullptr);
  j["argmax_agreement"] = r.holdout_agreement ? nlohmann::json(*r.holdout_agreement) : nlohmann::json(nullptr);
  return j;
}

inline void save_mapper(const std::filesystem::path& dir, const MapperParamsF& params) {
  std::filesystem::create_directories(dir);
  io::write_json(dir / "mapper.json", to_json(params.hyper));
  params.for_each([&](const std::string& name, const MatrixF& t) { io::write_tensor(dir / (name + ".tukt"), t); });
}

inline MapperParamsF load_mapper(const std::filesystem::path& dir) {
  const auto hyper = mapper_hyper_from_json(io::read_json(dir / "mapper.json"));
  // Start from a correctly shaped parameter set and overwrite every tensor.
  auto params = init_mapper<float>(hyper, 0);
  params.for_each([&](const std::string& name, MatrixF& t) {
    auto loaded = io::read_tensor(dir / (name + ".tukt"));
    require(loaded.rows() == t.rows() && loaded.cols() == t.cols(), ErrorKind::dim_mismatch,
            "checkpoint: " + name + " has shape " + shape_str(loaded.rows(), loaded.cols()) + ", expected " +
                shape_str(t.rows(), t.cols()));
    t = std::move(loaded);
  });
  return params;
}

inline void save_checkpoint(const std::filesystem::path& dir, const TrainResult& result, const TrainConfig& config) {
  save_mapper(dir, result.params);
  io::write_json(dir / "train_config.json", to_json(config));
  io::write_json(dir / "train_report.json", to_json(result.report));
}

}  // namespace textunlock
