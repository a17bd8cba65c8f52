#pragma once

#include <string>
#include <vector>

#include "unimm/model.hpp"
#include "unimm/scenario.hpp"

namespace unimm {

struct RolloutConfig {
  int num_rollouts = 32;
  double duration = 8.0;  // seconds, multiple of tau
  uint64_t seed = 0;
  // Re-encode the full scene each step and compare against the incremental
  // cache (1e-9 relative); throws std::runtime_error on mismatch.
  bool debug_check_incremental = false;
};

// One autoregressive simulation set: per rollout index, the full state
// sequences (history kept from the scenario) and the sampled component per
// (track, replanning step); -1 for agents not simulated.
struct Rollout {
  RolloutConfig config;
  std::vector<Scenario> rollouts;
  std::vector<std::vector<std::vector<int>>> choices;  // [rollout][track][step]
};

// Samples a component per agent from exp(log_scores), realizes its expected
// trajectory, and commits the first tau of every agent simultaneously.
// Agents invalid at the current time are excluded and keep their states.
Rollout rollout_scenario(BehaviorModel& model, const Scenario& scenario,
                         const RolloutConfig& config);

// Canonical rollout document (consumed by eval and plot).
std::string save_rollout(const Rollout& r, const std::string& scenario_ref);
Rollout load_rollout(const std::string& bytes, const Scenario& scenario,
                     std::string* scenario_ref = nullptr);
void write_rollout_file(const Rollout& r, const std::string& scenario_ref,
                        const std::string& path);
Rollout read_rollout_file(const std::string& path, const Scenario& scenario,
                          std::string* scenario_ref = nullptr);

// GT replayed as a single-rollout set (metrics calibration).
Rollout replay_ground_truth(const Scenario& scenario, int num_rollouts = 1);

}  // namespace unimm
