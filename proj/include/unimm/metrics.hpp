#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unimm/simulator.hpp"
#include "unimm/types.hpp"

namespace unimm {

enum class FeatureId {
  kLinearSpeed,
  kLinearAccel,
  kAngularSpeed,
  kAngularAccel,
  kDistToNearest,
  kCollision,
  kTimeToCollision,
  kDistToRoadEdge,
  kOffroad,
};

const char* feature_name(FeatureId f);
constexpr int kFeatureCount = 9;

constexpr double kTtcCap = 5.0;

// Per-feature samples pooled over (agent, future step) pairs. Features that
// cannot be computed (single agent, no map) stay empty.
struct FeatureSeries {
  std::map<FeatureId, std::vector<double>> samples;
};

// Finite-difference kinematics (central where both neighbors exist),
// disc-footprint interaction terms, and signed road-edge distance (negative
// inside the road). `map_source` provides polylines; `states` the tracks.
FeatureSeries compute_features(const Scenario& states, const Scenario& map_source);

struct HistogramSpec {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 1;
};
HistogramSpec histogram_spec(FeatureId f);

// Histogram built from the pooled rollout samples (clamped into range),
// normalized to unit mass; evaluation floors each bin probability at
// 1 / (bins * n_samples). score = exp(mean over GT samples of log p);
// max_attainable = exp(-entropy of the GT empirical distribution).
struct HistogramScore {
  double score = 0.0;
  double max_attainable = 0.0;
  int gt_samples = 0;
};
HistogramScore histogram_likelihood(const std::vector<double>& rollout_samples,
                                    const std::vector<double>& gt_samples,
                                    const HistogramSpec& spec);

struct MetaWeights {
  double kinematic = 0.2;
  double interactive = 0.5;
  double map_based = 0.3;
};

struct RealismReport {
  std::map<std::string, double> feature_scores;
  std::map<std::string, double> feature_max;
  std::optional<double> kinematic, interactive, map_based;
  double meta = 0.0;
  double min_ade = 0.0;
  MetaWeights weights;
  std::string aggregation = "per-scenario histograms, feature scores averaged across scenarios";
};

// Group scores are plain means of their present features; the meta score is
// the weighted mean of present groups with weights renormalized.
RealismReport realism_meta(const std::map<FeatureId, double>& feature_scores,
                           const std::map<FeatureId, double>& feature_max,
                           const MetaWeights& weights);

// minADE: min over predictions of the mean displacement against GT over the
// valid steps within `horizon` seconds.
double min_ade(const std::vector<TrajectorySegment>& predictions,
               const TrajectorySegment& gt, double horizon);

// Fraction of (agent, rollout) pairs with any positive indicator.
double collision_rate(const Rollout& r, const Scenario& scenario);
double offroad_rate(const Rollout& r, const Scenario& scenario);

// Full WOSAC-style evaluation over a dataset (one Rollout per scenario).
RealismReport evaluate_realism(const std::vector<Scenario>& dataset,
                               const std::vector<Rollout>& rollouts,
                               const MetaWeights& weights = {});

std::string report_to_json(const RealismReport& r);
std::string report_to_csv(const RealismReport& r);
RealismReport report_from_json(const std::string& bytes);

}  // namespace unimm
