#include "unimm/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "unimm/layers.hpp"
#include "unimm/mixture.hpp"
#include "unimm/synthworld.hpp"

namespace unimm {

namespace {

constexpr double kPointTarget = 2.5;  // resampled map point spacing
constexpr int kPointsPerToken = 3;    // ~5 m per token

std::vector<Eigen::Vector2d> resample_polyline(const MapPolyline& line) {
  double total = 0.0;
  for (size_t i = 0; i + 1 < line.points.size(); ++i) {
    total += (line.points[i + 1] - line.points[i]).norm();
  }
  const int intervals = std::max(1, static_cast<int>(std::ceil(total / kPointTarget)));
  const double spacing = total / intervals;
  std::vector<Eigen::Vector2d> out;
  out.reserve(intervals + 1);
  out.push_back(line.points.front());
  double carried = 0.0;
  size_t seg = 0;
  for (int i = 1; i <= intervals; ++i) {
    double remaining = spacing;
    while (seg + 1 < line.points.size()) {
      const Eigen::Vector2d a = line.points[seg];
      const Eigen::Vector2d b = line.points[seg + 1];
      const double seg_len = (b - a).norm();
      const double avail = seg_len - carried;
      if (remaining <= avail + 1e-12) {
        carried += remaining;
        out.push_back(a + (b - a) * (carried / seg_len));
        remaining = 0.0;
        break;
      }
      remaining -= avail;
      carried = 0.0;
      ++seg;
    }
    if (remaining > 0.0) out.push_back(line.points.back());
  }
  return out;
}

Eigen::MatrixXd rel_features(const Pose2& query, const std::vector<Pose2>& keys) {
  Eigen::MatrixXd f(static_cast<int>(keys.size()), 4);
  for (size_t i = 0; i < keys.size(); ++i) {
    const Eigen::Vector2d d = point_to_local({keys[i].x, keys[i].y}, query);
    f(static_cast<int>(i), 0) = d.x() / 10.0;
    f(static_cast<int>(i), 1) = d.y() / 10.0;
    f(static_cast<int>(i), 2) = wrap_angle(keys[i].heading - query.heading);
    f(static_cast<int>(i), 3) = std::log1p(d.norm());
  }
  return f;
}

}  // namespace

SceneTokens build_tokens(const Scenario& scenario) {
  SceneTokens tokens;
  tokens.windows = (scenario.step_count() - 1) / kTauSteps;

  for (const MapPolyline& line : scenario.polylines) {
    const std::vector<Eigen::Vector2d> pts = resample_polyline(line);
    for (size_t start = 0; start + 1 < pts.size(); start += kPointsPerToken - 1) {
      const size_t end = std::min(start + kPointsPerToken - 1, pts.size() - 1);
      MapToken tok;
      const Eigen::Vector2d dir0 = (pts[start + 1] - pts[start]).normalized();
      tok.frame = {pts[start].x(), pts[start].y(), std::atan2(dir0.y(), dir0.x())};
      const int n = static_cast<int>(end - start) + 1;
      tok.point_feats.resize(n, 5);
      for (int i = 0; i < n; ++i) {
        const size_t pi = start + i;
        const Eigen::Vector2d local = point_to_local(pts[pi], tok.frame);
        const size_t na = pi + 1 <= end ? pi + 1 : pi;
        const size_t nb = pi + 1 <= end ? pi : pi - 1;
        const Eigen::Vector2d dir = (pts[na] - pts[nb]).normalized();
        const Eigen::Vector2d dl = point_to_local(pts[nb] + dir, tok.frame) -
                                   point_to_local(pts[nb], tok.frame);
        tok.point_feats(i, 0) = local.x();
        tok.point_feats(i, 1) = local.y();
        tok.point_feats(i, 2) = dl.x();
        tok.point_feats(i, 3) = dl.y();
        tok.point_feats(i, 4) = line.half_width;
      }
      tokens.map_tokens.push_back(std::move(tok));
      if (end == pts.size() - 1) break;
    }
  }

  tokens.tracklets.resize(scenario.tracks.size());
  for (size_t ti = 0; ti < scenario.tracks.size(); ++ti) {
    tokens.tracklets[ti].reserve(tokens.windows);
    for (int w = 0; w < tokens.windows; ++w) {
      tokens.tracklets[ti].push_back(
          build_tracklet_token(scenario, scenario.tracks[ti], w));
    }
  }
  return tokens;
}

TrackletToken build_tracklet_token(const Scenario& scenario, const Track& track,
                                   int window) {
  TrackletToken tok;
  tok.category = track.category;
  tok.radius = track.radius;
  const int base = window * kTauSteps;
  const AgentState& end = track.states[base + kTauSteps];
  tok.valid = end.valid;
  tok.frame = {end.x, end.y, end.heading};
  tok.state_feats = Eigen::MatrixXd::Zero(kTauSteps + 1, 6);
  tok.pool_weights = Eigen::RowVectorXd::Zero(kTauSteps + 1);
  int valid_count = 0;
  for (int i = 0; i <= kTauSteps; ++i) {
    const AgentState& s = track.states[base + i];
    tok.state_feats(i, 5) = static_cast<double>(i) / kTauSteps;
    if (!s.valid || !tok.valid) continue;
    const AgentState local = to_local(s, tok.frame);
    tok.state_feats(i, 0) = local.x;
    tok.state_feats(i, 1) = local.y;
    tok.state_feats(i, 2) = std::cos(local.heading);
    tok.state_feats(i, 3) = std::sin(local.heading);
    tok.state_feats(i, 4) = 1.0;
    tok.pool_weights(i) = 1.0;
    ++valid_count;
  }
  if (valid_count > 0) {
    tok.pool_weights /= static_cast<double>(valid_count);
  } else {
    tok.valid = false;
  }
  return tok;
}

// ---------------------------------------------------------------------------

namespace {

using nn::Graph;
using nn::MlpSpec;
using nn::ParamStore;
using nn::Var;

struct Sublayer {
  std::string prefix;    // parameter prefix of this instance
  std::string rpe_name;  // shared per sublayer type
};

// One full or incremental encoding pass. Train mode records on the caller's
// graph; inference mode runs a private non-recording graph and persists
// values into the cache, so both modes execute identical arithmetic.
class EncodeRun {
 public:
  EncodeRun(Graph& g, ParamStore& store, const ModelConfig& mc)
      : g_(g), store_(store), mc_(mc) {}

  Var token_embedding(const TrackletToken& tok) {
    Var feats = g_.constant(tok.state_feats);
    Var h = nn::mlp_forward(g_, store_, "encoder.tracklet_point", feats,
                            MlpSpec{{6, mc_.token_hidden, mc_.token_hidden}});
    Var pooled = g_.matmul(g_.constant(tok.pool_weights), h);
    Eigen::MatrixXd stat(1, 4);
    stat.setZero();
    stat(0, static_cast<int>(tok.category)) = 1.0;
    stat(0, 3) = tok.radius;
    Var fused = g_.concat_cols(pooled, g_.constant(stat));
    return nn::mlp_forward(g_, store_, "encoder.tracklet_token", fused,
                           MlpSpec{{mc_.token_hidden + 4, mc_.embed_dim}});
  }

  Var map_token_embedding(const MapToken& tok) {
    Var feats = g_.constant(tok.point_feats);
    Var h = nn::mlp_forward(g_, store_, "encoder.map_point", feats,
                            MlpSpec{{5, mc_.token_hidden, mc_.token_hidden}});
    const int n = static_cast<int>(tok.point_feats.rows());
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Constant(n, 1.0 / n);
    Var pooled = g_.matmul(g_.constant(w), h);
    return nn::mlp_forward(g_, store_, "encoder.map_token", pooled,
                           MlpSpec{{mc_.token_hidden, mc_.embed_dim}});
  }

  Var rpe(const std::string& rpe_name, const Pose2& query,
          const std::vector<Pose2>& keys) {
    Var feats = g_.constant(rel_features(query, keys));
    return nn::mlp_forward(g_, store_, "encoder.rpe." + rpe_name, feats,
                           MlpSpec{{4, mc_.rpe_hidden, mc_.embed_dim}});
  }

  // k|v rows of one source token for a sublayer instance.
  std::pair<Var, Var> project_kv(const Sublayer& sl, Var source_row) {
    Var ln = nn::layer_norm(g_, store_, sl.prefix + ".ln", source_row);
    Var k = g_.add_rowvec(g_.matmul(ln, weight(sl.prefix + ".wk")),
                          bias(sl.prefix + ".bk"));
    Var v = g_.add_rowvec(g_.matmul(ln, weight(sl.prefix + ".wv")),
                          bias(sl.prefix + ".bv"));
    return {k, v};
  }

  Var attend(const Sublayer& sl, Var x_in, const Pose2& query_frame,
             const std::vector<Var>& k_rows, const std::vector<Var>& v_rows,
             const std::vector<Pose2>& key_frames) {
    Var ln_q = nn::layer_norm(g_, store_, sl.prefix + ".ln", x_in);
    Var q = g_.add_rowvec(g_.matmul(ln_q, weight(sl.prefix + ".wq")),
                          bias(sl.prefix + ".bq"));
    Var keys = k_rows.size() == 1 ? k_rows[0] : g_.concat_rows(k_rows);
    Var values = v_rows.size() == 1 ? v_rows[0] : g_.concat_rows(v_rows);
    Var rel = rpe(sl.rpe_name, query_frame, key_frames);
    Var attn = nn::attention_forward(g_, q, keys, values, {rel}, mc_.heads);
    Var out = g_.add_rowvec(g_.matmul(attn, weight(sl.prefix + ".wo")),
                            bias(sl.prefix + ".bo"));
    return g_.add(x_in, out);
  }

  Var weight(const std::string& name) {
    store_.weight(name, mc_.embed_dim, mc_.embed_dim);
    return g_.param(store_, name);
  }
  Var bias(const std::string& name) {
    store_.bias(name, mc_.embed_dim);
    return g_.param(store_, name);
  }

  Graph& g_;
  ParamStore& store_;
  const ModelConfig& mc_;
};

Sublayer sublayer_of(int block, const char* kind) {
  return Sublayer{"encoder.b" + std::to_string(block) + "." + kind, kind};
}

}  // namespace

SceneEmbeddings Encoder::encode(nn::Graph& g, const SceneTokens& tokens) const {
  EncodeRun run(g, *store_, mc_);
  const int n_tracks = static_cast<int>(tokens.tracklets.size());
  const int windows = tokens.windows;

  // Map tokens + one self-attention layer.
  std::vector<Pose2> map_frames;
  Var map_final{};
  const int n_map = static_cast<int>(tokens.map_tokens.size());
  if (n_map > 0) {
    std::vector<Var> rows;
    rows.reserve(n_map);
    for (const MapToken& mt : tokens.map_tokens) {
      rows.push_back(run.map_token_embedding(mt));
      map_frames.push_back(mt.frame);
    }
    Var x = n_map == 1 ? rows[0] : g.concat_rows(rows);
    const Sublayer sl{"encoder.map_attn", "map"};
    std::vector<Var> k_rows(n_map), v_rows(n_map);
    for (int i = 0; i < n_map; ++i) {
      auto kv = run.project_kv(sl, g.row(x, i));
      k_rows[i] = kv.first;
      v_rows[i] = kv.second;
    }
    std::vector<Var> out_rows(n_map);
    for (int i = 0; i < n_map; ++i) {
      out_rows[i] = run.attend(sl, g.row(x, i), map_frames[i], k_rows, v_rows, map_frames);
    }
    map_final = n_map == 1 ? out_rows[0] : g.concat_rows(out_rows);
  }

  SceneEmbeddings out;
  out.vars.assign(n_tracks, std::vector<nn::Var>(windows));
  out.frames.assign(n_tracks, std::vector<Pose2>(windows));
  out.valid.assign(n_tracks, std::vector<bool>(windows, false));

  // Stage 0: tracklet token embeddings.
  std::vector<std::vector<Var>> stage(n_tracks, std::vector<Var>(windows));
  for (int t = 0; t < n_tracks; ++t) {
    for (int w = 0; w < windows; ++w) {
      const TrackletToken& tok = tokens.tracklets[t][w];
      out.frames[t][w] = tok.frame;
      out.valid[t][w] = tok.valid;
      if (tok.valid) stage[t][w] = run.token_embedding(tok);
    }
  }

  for (int b = 0; b < mc_.blocks; ++b) {
    // Temporal: causal attention over the agent's own windows.
    const Sublayer sl_t = sublayer_of(b, "temporal");
    std::vector<std::vector<Var>> next(n_tracks, std::vector<Var>(windows));
    for (int t = 0; t < n_tracks; ++t) {
      std::vector<Var> k_rows, v_rows;
      std::vector<Pose2> key_frames;
      for (int w = 0; w < windows; ++w) {
        if (!out.valid[t][w]) continue;
        auto kv = run.project_kv(sl_t, stage[t][w]);
        k_rows.push_back(kv.first);
        v_rows.push_back(kv.second);
        key_frames.push_back(out.frames[t][w]);
        next[t][w] = run.attend(sl_t, stage[t][w], out.frames[t][w], k_rows, v_rows,
                                key_frames);
      }
    }
    stage = next;

    // Agent-map attention (skipped when the scene has no map).
    if (n_map > 0) {
      const Sublayer sl_m = sublayer_of(b, "agmap");
      std::vector<Var> k_rows(n_map), v_rows(n_map);
      for (int i = 0; i < n_map; ++i) {
        auto kv = run.project_kv(sl_m, g.row(map_final, i));
        k_rows[i] = kv.first;
        v_rows[i] = kv.second;
      }
      for (int t = 0; t < n_tracks; ++t) {
        for (int w = 0; w < windows; ++w) {
          if (!out.valid[t][w]) continue;
          stage[t][w] = run.attend(sl_m, stage[t][w], out.frames[t][w], k_rows,
                                   v_rows, map_frames);
        }
      }
    }

    // Agent-agent attention at the shared window index.
    const Sublayer sl_a = sublayer_of(b, "agag");
    next.assign(n_tracks, std::vector<Var>(windows));
    for (int w = 0; w < windows; ++w) {
      std::vector<Var> k_rows, v_rows;
      std::vector<Pose2> key_frames;
      std::vector<int> track_ids;
      for (int t = 0; t < n_tracks; ++t) {
        if (!out.valid[t][w]) continue;
        auto kv = run.project_kv(sl_a, stage[t][w]);
        k_rows.push_back(kv.first);
        v_rows.push_back(kv.second);
        key_frames.push_back(out.frames[t][w]);
        track_ids.push_back(t);
      }
      for (int t : track_ids) {
        next[t][w] = run.attend(sl_a, stage[t][w], out.frames[t][w], k_rows, v_rows,
                                key_frames);
      }
    }
    stage = next;
  }

  for (int t = 0; t < n_tracks; ++t) {
    for (int w = 0; w < windows; ++w) {
      if (!out.valid[t][w]) continue;
      out.vars[t][w] = nn::layer_norm(g, *store_, "encoder.final_ln", stage[t][w]);
    }
  }
  return out;
}

EncoderCache Encoder::make_cache(const Scenario& scenario) const {
  EncoderCache cache;
  cache.tracks = static_cast<int>(scenario.tracks.size());
  const int windows = (scenario.step_count() - 1) / kTauSteps;
  const int n_stages = 1 + 3 * mc_.blocks;
  cache.stages.assign(cache.tracks,
                      std::vector<std::vector<Eigen::RowVectorXd>>(
                          windows, std::vector<Eigen::RowVectorXd>(n_stages)));
  cache.frames.assign(cache.tracks, std::vector<Pose2>(windows));
  cache.valid.assign(cache.tracks, std::vector<bool>(windows, false));
  cache.final_embed.assign(cache.tracks, std::vector<Eigen::RowVectorXd>(windows));
  for (int b = 0; b < mc_.blocks; ++b) {
    cache.kv["b" + std::to_string(b) + ".temporal"].assign(
        cache.tracks, std::vector<Eigen::RowVectorXd>(windows));
  }

  // Map encoding happens once per cache.
  nn::Graph g(false);
  EncodeRun run(g, *store_, mc_);
  const SceneTokens full = [&] {
    Scenario map_only = scenario;
    map_only.tracks.clear();
    return build_tokens(map_only);
  }();
  const int n_map = static_cast<int>(full.map_tokens.size());
  if (n_map > 0) {
    std::vector<Var> rows;
    for (const MapToken& mt : full.map_tokens) {
      rows.push_back(run.map_token_embedding(mt));
      cache.map_frames.push_back(mt.frame);
    }
    Var x = n_map == 1 ? rows[0] : g.concat_rows(rows);
    const Sublayer sl{"encoder.map_attn", "map"};
    std::vector<Var> k_rows(n_map), v_rows(n_map);
    for (int i = 0; i < n_map; ++i) {
      auto kv = run.project_kv(sl, g.row(x, i));
      k_rows[i] = kv.first;
      v_rows[i] = kv.second;
    }
    cache.map_final.resize(n_map, mc_.embed_dim);
    for (int i = 0; i < n_map; ++i) {
      Var o = run.attend(sl, g.row(x, i), cache.map_frames[i], k_rows, v_rows,
                         cache.map_frames);
      cache.map_final.row(i) = g.value(o).row(0);
    }
  }
  return cache;
}

void Encoder::extend_cache(EncoderCache& cache, const Scenario& scenario,
                           int upto_window) const {
  const int windows_total = (scenario.step_count() - 1) / kTauSteps;
  if (cache.tracks != static_cast<int>(scenario.tracks.size())) {
    throw std::logic_error("extend_cache: cache does not match this scenario");
  }
  if (upto_window > windows_total) {
    throw std::logic_error("extend_cache: window beyond scenario end");
  }
  if (upto_window <= cache.windows_done) return;

  nn::Graph g(false);
  EncodeRun run(g, *store_, mc_);
  const int n_tracks = cache.tracks;
  const int n_map = static_cast<int>(cache.map_final.rows());
  const int w0 = cache.windows_done;

  // Stage 0 for new windows.
  for (int t = 0; t < n_tracks; ++t) {
    for (int w = w0; w < upto_window; ++w) {
      const TrackletToken tok = build_tracklet_token(scenario, scenario.tracks[t], w);
      cache.frames[t][w] = tok.frame;
      cache.valid[t][w] = tok.valid;
      if (tok.valid) cache.stages[t][w][0] = g.value(run.token_embedding(tok)).row(0);
    }
  }

  Var map_final{};
  if (n_map > 0) map_final = g.constant(cache.map_final);

  for (int b = 0; b < mc_.blocks; ++b) {
    const int stage_in = 3 * b;  // index of this block's input stage
    const Sublayer sl_t = sublayer_of(b, "temporal");
    auto& kv_store = cache.kv.at("b" + std::to_string(b) + ".temporal");
    for (int t = 0; t < n_tracks; ++t) {
      // Projected k|v rows for the new windows join the cached prefix.
      for (int w = w0; w < upto_window; ++w) {
        if (!cache.valid[t][w]) continue;
        auto kv = run.project_kv(sl_t, g.constant(cache.stages[t][w][stage_in]));
        Eigen::RowVectorXd row(2 * mc_.embed_dim);
        row << g.value(kv.first).row(0), g.value(kv.second).row(0);
        kv_store[t][w] = row;
      }
      for (int w = w0; w < upto_window; ++w) {
        if (!cache.valid[t][w]) continue;
        std::vector<Var> k_rows, v_rows;
        std::vector<Pose2> key_frames;
        for (int w2 = 0; w2 <= w; ++w2) {
          if (!cache.valid[t][w2]) continue;
          const Eigen::RowVectorXd& row = kv_store[t][w2];
          k_rows.push_back(g.constant(row.leftCols(mc_.embed_dim)));
          v_rows.push_back(g.constant(row.rightCols(mc_.embed_dim)));
          key_frames.push_back(cache.frames[t][w2]);
        }
        Var out = run.attend(sl_t, g.constant(cache.stages[t][w][stage_in]),
                             cache.frames[t][w], k_rows, v_rows, key_frames);
        cache.stages[t][w][stage_in + 1] = g.value(out).row(0);
      }
    }

    if (n_map > 0) {
      const Sublayer sl_m = sublayer_of(b, "agmap");
      const std::string key = "b" + std::to_string(b) + ".agmap";
      auto it = cache.kv.find(key);
      if (it == cache.kv.end()) {
        // Map k/v rows are time-independent; compute them once.
        std::vector<std::vector<Eigen::RowVectorXd>> rows(
            1, std::vector<Eigen::RowVectorXd>(n_map));
        for (int i = 0; i < n_map; ++i) {
          auto kv = run.project_kv(sl_m, g.row(map_final, i));
          Eigen::RowVectorXd row(2 * mc_.embed_dim);
          row << g.value(kv.first).row(0), g.value(kv.second).row(0);
          rows[0][i] = row;
        }
        it = cache.kv.emplace(key, std::move(rows)).first;
      }
      std::vector<Var> k_rows(n_map), v_rows(n_map);
      for (int i = 0; i < n_map; ++i) {
        k_rows[i] = g.constant(it->second[0][i].leftCols(mc_.embed_dim));
        v_rows[i] = g.constant(it->second[0][i].rightCols(mc_.embed_dim));
      }
      for (int t = 0; t < n_tracks; ++t) {
        for (int w = w0; w < upto_window; ++w) {
          if (!cache.valid[t][w]) continue;
          Var out = run.attend(sl_m, g.constant(cache.stages[t][w][stage_in + 1]),
                               cache.frames[t][w], k_rows, v_rows, cache.map_frames);
          cache.stages[t][w][stage_in + 2] = g.value(out).row(0);
        }
      }
    } else {
      for (int t = 0; t < n_tracks; ++t) {
        for (int w = w0; w < upto_window; ++w) {
          if (cache.valid[t][w]) cache.stages[t][w][stage_in + 2] = cache.stages[t][w][stage_in + 1];
        }
      }
    }

    const Sublayer sl_a = sublayer_of(b, "agag");
    for (int w = w0; w < upto_window; ++w) {
      std::vector<Var> k_rows, v_rows;
      std::vector<Pose2> key_frames;
      std::vector<int> track_ids;
      for (int t = 0; t < n_tracks; ++t) {
        if (!cache.valid[t][w]) continue;
        auto kv = run.project_kv(sl_a, g.constant(cache.stages[t][w][stage_in + 2]));
        k_rows.push_back(kv.first);
        v_rows.push_back(kv.second);
        key_frames.push_back(cache.frames[t][w]);
        track_ids.push_back(t);
      }
      for (int t : track_ids) {
        Var out = run.attend(sl_a, g.constant(cache.stages[t][w][stage_in + 2]),
                             cache.frames[t][w], k_rows, v_rows, key_frames);
        cache.stages[t][w][stage_in + 3] = g.value(out).row(0);
      }
    }
  }

  const int last_stage = 3 * mc_.blocks;
  for (int t = 0; t < n_tracks; ++t) {
    for (int w = w0; w < upto_window; ++w) {
      if (!cache.valid[t][w]) continue;
      Var e = nn::layer_norm(g, *store_, "encoder.final_ln",
                             g.constant(cache.stages[t][w][last_stage]));
      cache.final_embed[t][w] = g.value(e).row(0);
    }
  }
  cache.windows_done = upto_window;
}

void Encoder::ensure_params() const {
  WorldConfig tiny;
  tiny.n_vehicles = 1;
  tiny.n_pedestrians = 0;
  tiny.n_cyclists = 0;
  const std::vector<Scenario> probe = generate_synthetic_dataset(tiny, 1, 1);
  nn::Graph g(false);
  encode(g, build_tokens(probe[0]));
}

}  // namespace unimm
