#pragma once

#include <optional>
#include <string>

#include "unimm/encoder.hpp"
#include "unimm/mixture.hpp"
#include "unimm/model_config.hpp"

namespace unimm {

// A trained (or initializing) behavior policy: parameters, architecture,
// mixture configuration, and the anchor vocabulary for anchor-based models.
struct BehaviorModel {
  nn::ParamStore store;
  ModelConfig model_config;
  MixtureConfig mixture_config;
  AnchorSet anchors;  // unused by anchor-free models

  BehaviorModel() : store(0) {}
  explicit BehaviorModel(uint64_t seed) : store(seed) {}
};

// Differentiable decode of one agent embedding on the caller's graph.
// Anchor-based models realize `selected` when regression is on.
DecodeTape decode_model(nn::Graph& g, BehaviorModel& m, nn::Var embedding,
                        AgentCategory category, std::optional<int> selected);

// Inference decode from a cached embedding at (track, window).
MixturePrediction predict_at(BehaviorModel& m, const EncoderCache& cache,
                             int track, int window, AgentCategory category,
                             std::optional<int> selected);

// Checkpoint I/O; mixture and architecture configs travel in the manifest.
void save_model(const BehaviorModel& m, const std::string& prefix);
// Anchors are stored in their own file and re-attached by the caller.
BehaviorModel load_model(const std::string& prefix);

nlohmann::json mixture_config_to_json(const MixtureConfig& c);
MixtureConfig mixture_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace unimm
