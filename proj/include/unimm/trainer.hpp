#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unimm/closedloop.hpp"
#include "unimm/model.hpp"
#include "unimm/scenario.hpp"

namespace unimm {

struct TrainConfig {
  enum class DataMode { kOpenLoop, kClosedLoop };

  int epochs = 30;
  int batch_scenes = 8;
  uint64_t seed = 0;
  DataMode mode = DataMode::kClosedLoop;
  MixtureConfig mixture;
  PosteriorConfig posterior;  // closed-loop mode only
  ModelConfig model;
  double base_lr = 5e-4;
  double weight_decay = 1e-4;

  void validate() const;
};

struct TraceRow {
  long step = 0;
  double loss = 0.0;
  double regression = 0.0;
  double classification = 0.0;
};

struct TrainResult {
  BehaviorModel model;
  std::vector<TraceRow> trace;
  int skipped_samples = 0;  // no valid target inside the matching prefix
};

// Winner-takes-all + classification objective over open-loop or (regenerated
// each optimization step) closed-loop samples; AdamW with cosine decay.
// Per-sample losses average the NLL over valid steps, then over samples.
// Aborts with a diagnostic naming the sample on a non-finite loss.
TrainResult train(const std::vector<Scenario>& dataset, const AnchorSet* anchors,
                  const TrainConfig& cfg);

// Retrains only the score head with z* matched over t_zstar (default tau);
// every other parameter is bit-identical afterwards.
BehaviorModel refit_scorer(BehaviorModel model, const std::vector<Scenario>& dataset,
                           int epochs, int batch_scenes, uint64_t seed,
                           double t_zstar = kTau,
                           std::vector<TraceRow>* trace = nullptr);

std::string trace_to_csv(const std::vector<TraceRow>& trace);

}  // namespace unimm
