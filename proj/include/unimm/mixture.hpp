#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unimm/geometry.hpp"
#include "unimm/graph.hpp"
#include "unimm/layers.hpp"
#include "unimm/model_config.hpp"
#include "unimm/types.hpp"

namespace unimm {

constexpr double kTau = 0.5;
constexpr double kDt = 0.1;
constexpr int kTauSteps = 5;

enum class Paradigm { kAnchorFree, kAnchorBased };

struct MixtureConfig {
  int k = 64;
  Paradigm paradigm = Paradigm::kAnchorBased;
  bool continuous_regression = true;
  double t_pred = 0.5;   // seconds, multiple of tau
  double t_zstar = 0.5;  // seconds, multiple of tau, <= t_pred

  int pred_steps() const;
  bool discrete() const {
    return paradigm == Paradigm::kAnchorBased && !continuous_regression;
  }
  void validate() const;
};

// Per-step Laplace (x, y) and von Mises (heading) parameters in the frame
// the decoder emitted them in.
struct ComponentParams {
  std::vector<double> loc_x, loc_y;
  std::vector<double> scale_x, scale_y;  // b > 0
  std::vector<double> mu_heading;
  std::vector<double> kappa;  // > 0, capped at 500
  int steps() const { return static_cast<int>(loc_x.size()); }
};

struct MixturePrediction {
  Eigen::VectorXd log_scores;  // K entries, exp sums to 1
  // Expected-value trajectories in the global frame, one per produced
  // component (anchor-free: K; anchor-based regression: the selected one;
  // discrete: the K anchors themselves).
  std::vector<int> component_ids;
  std::vector<TrajectorySegment> trajectories;
  std::vector<ComponentParams> params;  // empty in discrete mode
  Pose2 frame;
  double start_time = 0.0;
};

// K whole-horizon trajectories per category, 0.1 s spacing, one leading
// state pinned at the local origin followed by horizon_steps future states.
struct AnchorSet {
  int k = 0;
  int horizon_steps = 80;
  std::map<AgentCategory, std::vector<std::vector<AgentState>>> anchors;

  bool has(AgentCategory c) const { return anchors.count(c) > 0; }
  const std::vector<std::vector<AgentState>>& of(AgentCategory c) const;
};

std::string save_anchors(const AnchorSet& a);
AnchorSet load_anchors(const std::string& bytes);
void write_anchor_file(const AnchorSet& a, const std::string& path);
AnchorSet read_anchor_file(const std::string& path);

// --- decoding -------------------------------------------------------------

// Tape-side handles for one decoded component (all 1 x steps rows).
struct ComponentTape {
  int component_id = -1;
  nn::Var loc_x, loc_y, scale_x, scale_y, mu_heading, kappa;
};

struct DecodeTape {
  nn::Var log_scores;  // 1 x K
  std::vector<ComponentTape> comps;
};

DecodeTape decode_anchor_free(nn::Graph& g, nn::ParamStore& store,
                              const ModelConfig& mc, const MixtureConfig& cfg,
                              nn::Var embedding);

// `selected` picks the single component realized by the regression head;
// pass std::nullopt to decode scores only. Required range [0, K).
DecodeTape decode_anchor_based(nn::Graph& g, nn::ParamStore& store,
                               const ModelConfig& mc, const MixtureConfig& cfg,
                               nn::Var embedding, const AnchorSet& anchors,
                               AgentCategory category,
                               std::optional<int> selected);

// Converts tape values into a MixturePrediction in the global frame. In
// discrete mode the K trajectories are the transformed anchors.
MixturePrediction realize_prediction(const nn::Graph& g, const DecodeTape& tape,
                                     const MixtureConfig& cfg,
                                     const AnchorSet* anchors,
                                     AgentCategory category, const Pose2& frame,
                                     double start_time);

// --- matching and losses ----------------------------------------------------

// Argmin over component trajectories of traj_distance(mu_k, y, t_zstar);
// ties break to the lowest index. Throws std::domain_error when every
// distance is infinite (no valid shared steps).
int match_positive(const std::vector<TrajectorySegment>& components,
                   const TrajectorySegment& y, double t_zstar);

double laplace_nll(double y, double loc, double b);
double von_mises_nll(double theta, double mu, double kappa);

// Sum over valid steps of the per-coordinate Laplace NLL plus the heading
// von Mises NLL. y_local must be expressed in the params' frame.
double component_nll(const TrajectorySegment& y_local, const ComponentParams& p);

// Tape version; returns (nll_sum, valid_step_count).
std::pair<nn::Var, int> component_nll(nn::Graph& g, const TrajectorySegment& y_local,
                                      const ComponentTape& comp);

// Eq. 9 per-sample objective: cross-entropy against one-hot z* plus, with
// continuous regression, the matched component's NLL summed over T_pred.
struct LossTerms {
  nn::Var total;
  nn::Var classification;
  nn::Var regression;  // zero constant when regression is off
  int valid_steps = 0;
};
LossTerms training_loss(nn::Graph& g, const DecodeTape& tape, int z_star,
                        const TrajectorySegment& y_local, const MixtureConfig& cfg);

// --- anchors ----------------------------------------------------------------

// Agent-local future trajectories of one category (fully valid tracks only),
// flattened for clustering; the companion anchor builder wraps k-means with
// deterministic farthest-point reseeding for empty clusters.
struct KmeansTrace {
  std::vector<std::vector<AgentState>> centroids;  // horizon_steps + 1 states
  std::vector<double> objective;                   // one entry per iteration
};
KmeansTrace kmeans_anchors(const std::vector<Scenario>& dataset, int k,
                           AgentCategory category, double horizon, uint64_t seed);

// All categories present in the dataset with at least k distinct futures.
AnchorSet build_anchor_set(const std::vector<Scenario>& dataset, int k,
                           uint64_t seed, double horizon = 8.0);

// Anchor k of a category rigidly placed at `pose`; the whole stored
// trajectory including the leading origin state.
TrajectorySegment anchor_in_frame(const AnchorSet& a, AgentCategory category,
                                  int k, const Pose2& pose, double start_time);

// The K anchors transformed by the agent pose, truncated to `steps` future
// states (prefix of the 8 s anchors), starting 0.1 s after start_time.
std::vector<TrajectorySegment> anchor_futures(const AnchorSet& a,
                                              AgentCategory category,
                                              const Pose2& pose, int steps,
                                              double start_time);

// --- cost accounting ---------------------------------------------------------

// Exact matmul multiply-add count of one decoder call (validated against the
// instrumented tape in tests).
unsigned long long decoder_mac_count(const ModelConfig& mc, const MixtureConfig& cfg);

}  // namespace unimm
