#pragma once

#include <optional>
#include <vector>

#include "unimm/model.hpp"
#include "unimm/scenario.hpp"

namespace unimm {

struct PosteriorConfig {
  double t_post = 0.5;               // seconds, >= tau, multiple of tau
  double execution_threshold = 1.0;  // meters, mean displacement over t_post
  bool approximate = true;           // anchors only, no model evaluation

  void validate(const MixtureConfig& mixture) const;
};

// Closed-loop states plus, per (track, replanning step), whether the
// posterior plan was executed (true) or ground truth retained (false).
struct ClosedLoopResult {
  Scenario scenario;
  std::vector<std::vector<bool>> provenance;
  int executed_count() const;
};

// Posterior component selection at one replanning time: argmin over k of the
// distance between the component trajectory (anchor-free: decoded mu_k;
// anchor-based and approximate: the anchor) and the ground-truth window over
// t_post. Throws std::domain_error when the window has no valid state.
int posterior_component(BehaviorModel& model, const EncoderCache* cache,
                        const Scenario& working, const Scenario& ground_truth,
                        int track, int step_j, const PosteriorConfig& pc);

// Autoregressive closed-loop sample generation (the approximate mode never
// touches model parameters). Plans replace ground truth only when their mean
// displacement from it over t_post is strictly below the threshold.
ClosedLoopResult generate_closed_loop_scenario(const Scenario& ground_truth,
                                               BehaviorModel& model,
                                               const PosteriorConfig& pc,
                                               double tau = kTau);

// Training pairs over a generated scenario: inputs read closed-loop states,
// targets read the original ground truth (identical slicing to the open-loop
// splitter).
struct ClosedLoopBatch {
  ClosedLoopResult generated;
  std::vector<OpenLoopSample> samples;  // indices into the original scenario
};
ClosedLoopBatch make_training_batch(const Scenario& ground_truth,
                                    ClosedLoopResult generated, double t_pred,
                                    double tau = kTau);

// Rolling-matching tokenization: anchors placed at the reconstructed pose,
// nearest anchor over tau picked, its first tau appended, repeat. Token -1
// marks a window with no valid ground truth (states copied through).
struct TokenSequence {
  std::vector<std::vector<int>> tokens;  // [track][step]
  Scenario reconstruction;
};
TokenSequence tokenize_rolling(const Scenario& scenario, const AnchorSet& anchors,
                               double tau = kTau);

// H1: under (anchor-based, regression off, t_post = tau, threshold = inf,
// approximate) closed-loop generation equals rolling tokenization
// state-for-state. Divergence is reported, not thrown.
struct EquivalenceReport {
  bool equal = false;
  std::vector<bool> agent_equal;
  int divergence_track = -1;
  int divergence_step_index = -1;  // scenario step index of first mismatch
  TokenSequence tokens;
};
EquivalenceReport check_tokenization_equivalence(const Scenario& scenario,
                                                 const AnchorSet& anchors,
                                                 double tau_tokenizer = kTau,
                                                 double tau_generator = kTau);

}  // namespace unimm
