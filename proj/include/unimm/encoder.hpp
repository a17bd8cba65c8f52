#pragma once

#include <map>
#include <string>
#include <vector>

#include "unimm/geometry.hpp"
#include "unimm/graph.hpp"
#include "unimm/model_config.hpp"
#include "unimm/types.hpp"

namespace unimm {

// Map polylines downsampled to ~2.5 m points and split into ~5 m tokens;
// agent tracks cut into 0.5 s tracklet windows. All features live in each
// token's local frame, so the encoding is invariant to rigid scene motion.
struct MapToken {
  Pose2 frame;
  Eigen::MatrixXd point_feats;  // n_pts x 5: x, y, dir_x, dir_y, half_width
};

struct TrackletToken {
  Pose2 frame;                  // pose at the window's last step
  Eigen::MatrixXd state_feats;  // 6 x 6: x, y, cos dh, sin dh, valid, idx
  Eigen::RowVectorXd pool_weights;  // masked mean over valid states
  bool valid = false;           // end-state validity gates the embedding
  AgentCategory category = AgentCategory::kVehicle;
  double radius = 0.0;
};

struct SceneTokens {
  std::vector<MapToken> map_tokens;
  // tracklets[track][window]; window w covers step indices [5w, 5w+5].
  std::vector<std::vector<TrackletToken>> tracklets;
  int windows = 0;
};

SceneTokens build_tokens(const Scenario& scenario);
TrackletToken build_tracklet_token(const Scenario& scenario, const Track& track,
                                   int window);

// Embeddings for every valid (track, window); window w >= 1 corresponds to
// the prediction start time t = (w - 1) * tau.
struct SceneEmbeddings {
  // per track, per window; !ok() for invalid tokens
  std::vector<std::vector<nn::Var>> vars;
  std::vector<std::vector<Pose2>> frames;
  std::vector<std::vector<bool>> valid;
};

// Cached activations of a partially encoded scene (one rollout owns one
// cache). Stage values and per-sublayer key/value projections are stored per
// (track, window) and never rewritten.
struct EncoderCache {
  Eigen::MatrixXd map_final;  // n_map x D (after the map attention layer)
  std::vector<Pose2> map_frames;
  // stage values: [track][window][stage]; stage 0 = token embedding,
  // then 3 per block (temporal, agent-map, agent-agent outputs).
  std::vector<std::vector<std::vector<Eigen::RowVectorXd>>> stages;
  std::map<std::string, std::vector<std::vector<Eigen::RowVectorXd>>> kv;
  std::vector<std::vector<Pose2>> frames;
  std::vector<std::vector<bool>> valid;
  std::vector<std::vector<Eigen::RowVectorXd>> final_embed;
  int windows_done = 0;
  int tracks = 0;
};

class Encoder {
 public:
  Encoder(nn::ParamStore& store, const ModelConfig& mc) : store_(&store), mc_(mc) {}

  // Full differentiable encode on the caller's graph.
  SceneEmbeddings encode(nn::Graph& g, const SceneTokens& tokens) const;

  // Incremental inference: extends the cache with windows
  // [cache.windows_done, upto_window) read from the scenario's current
  // states. Throws std::logic_error if the cache belongs to another scene
  // shape. Returns embeddings for the newly added windows.
  void extend_cache(EncoderCache& cache, const Scenario& scenario,
                    int upto_window) const;

  EncoderCache make_cache(const Scenario& scenario) const;

  // Touches every encoder parameter so read-only sharing is safe afterwards.
  void ensure_params() const;

  const ModelConfig& config() const { return mc_; }

 private:
  nn::ParamStore* store_;
  ModelConfig mc_;
};

}  // namespace unimm
