#pragma once

#include <string>

#include <json.hpp>

#include "unimm/closedloop.hpp"
#include "unimm/model_config.hpp"
#include "unimm/simulator.hpp"
#include "unimm/synthworld.hpp"
#include "unimm/trainer.hpp"

namespace unimm {

// Whole-pipeline configuration: a single human-editable JSON document with
// flag overrides layered on top by the CLI. Unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 0;
  int threads = 1;
  WorldConfig world;
  MixtureConfig mixture;
  ModelConfig model;
  PosteriorConfig posterior;
  int epochs = 30;
  int batch_scenes = 8;
  TrainConfig::DataMode data_mode = TrainConfig::DataMode::kClosedLoop;
  double base_lr = 5e-4;
  double weight_decay = 1e-4;
  int num_rollouts = 32;
  double rollout_duration = 8.0;
};

RunConfig parse_run_config(const nlohmann::json& doc);
nlohmann::ordered_json dump_run_config(const RunConfig& cfg);
RunConfig read_run_config_file(const std::string& path);

// The four benchmark configurations; throws on unknown names.
// discrete | anchor-free | anchor-based-0.5s | anchor-based-4s
void apply_preset(RunConfig& cfg, const std::string& name);

TrainConfig to_train_config(const RunConfig& cfg);

}  // namespace unimm
