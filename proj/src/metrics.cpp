#include "unimm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "unimm/geometry.hpp"

namespace unimm {

const char* feature_name(FeatureId f) {
  switch (f) {
    case FeatureId::kLinearSpeed: return "linear_speed";
    case FeatureId::kLinearAccel: return "linear_accel";
    case FeatureId::kAngularSpeed: return "angular_speed";
    case FeatureId::kAngularAccel: return "angular_accel";
    case FeatureId::kDistToNearest: return "dist_to_nearest_object";
    case FeatureId::kCollision: return "collision";
    case FeatureId::kTimeToCollision: return "time_to_collision";
    case FeatureId::kDistToRoadEdge: return "dist_to_road_edge";
    case FeatureId::kOffroad: return "offroad";
  }
  return "unknown";
}

HistogramSpec histogram_spec(FeatureId f) {
  switch (f) {
    case FeatureId::kLinearSpeed: return {0.0, 30.0, 60};
    case FeatureId::kLinearAccel: return {-10.0, 10.0, 80};
    case FeatureId::kAngularSpeed: return {-M_PI, M_PI, 63};
    case FeatureId::kAngularAccel: return {-4.0 * M_PI, 4.0 * M_PI, 80};
    case FeatureId::kDistToNearest: return {-2.0, 40.0, 84};
    case FeatureId::kCollision: return {-0.5, 1.5, 2};
    case FeatureId::kTimeToCollision: return {0.0, kTtcCap, 25};
    case FeatureId::kDistToRoadEdge: return {-2.0, 40.0, 84};
    case FeatureId::kOffroad: return {-0.5, 1.5, 2};
  }
  return {0.0, 1.0, 1};
}

namespace {

constexpr FeatureId kKinematic[] = {FeatureId::kLinearSpeed, FeatureId::kLinearAccel,
                                    FeatureId::kAngularSpeed, FeatureId::kAngularAccel};
constexpr FeatureId kInteractive[] = {FeatureId::kDistToNearest, FeatureId::kCollision,
                                      FeatureId::kTimeToCollision};
constexpr FeatureId kMapBased[] = {FeatureId::kDistToRoadEdge, FeatureId::kOffroad};

constexpr FeatureId kAllFeatures[] = {
    FeatureId::kLinearSpeed,    FeatureId::kLinearAccel,
    FeatureId::kAngularSpeed,   FeatureId::kAngularAccel,
    FeatureId::kDistToNearest,  FeatureId::kCollision,
    FeatureId::kTimeToCollision, FeatureId::kDistToRoadEdge,
    FeatureId::kOffroad};

// Time-to-collision between two constant-velocity discs.
double disc_ttc(const Eigen::Vector2d& rel_pos, const Eigen::Vector2d& rel_vel,
                double radius_sum) {
  const double c = rel_pos.squaredNorm() - radius_sum * radius_sum;
  if (c <= 0.0) return 0.0;  // already overlapping
  const double a = rel_vel.squaredNorm();
  const double b = 2.0 * rel_pos.dot(rel_vel);
  if (a <= 1e-12) return kTtcCap;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kTtcCap;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  if (t < 0.0) return kTtcCap;
  return std::min(t, kTtcCap);
}

}  // namespace

FeatureSeries compute_features(const Scenario& states, const Scenario& map_source) {
  FeatureSeries out;
  for (FeatureId f : kAllFeatures) out.samples[f];

  const int n_tracks = static_cast<int>(states.tracks.size());
  const int first = states.current_index() + 1;
  const int last = states.step_count() - 1;
  const double dt = states.dt;

  // Per-track speed and heading-rate series over the full grid (NaN where
  // a finite difference is unavailable).
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> speed(n_tracks), ang_speed(n_tracks);
  std::vector<std::vector<Eigen::Vector2d>> velocity(n_tracks);
  for (int t = 0; t < n_tracks; ++t) {
    const auto& st = states.tracks[t].states;
    const int n = static_cast<int>(st.size());
    speed[t].assign(n, nan);
    ang_speed[t].assign(n, nan);
    velocity[t].assign(n, Eigen::Vector2d::Zero());
    for (int i = 0; i < n; ++i) {
      if (!st[i].valid) continue;
      const bool prev_ok = i > 0 && st[i - 1].valid;
      const bool next_ok = i + 1 < n && st[i + 1].valid;
      Eigen::Vector2d v;
      double w = nan;
      if (prev_ok && next_ok) {
        v = (Eigen::Vector2d(st[i + 1].x, st[i + 1].y) -
             Eigen::Vector2d(st[i - 1].x, st[i - 1].y)) /
            (2.0 * dt);
        w = wrap_angle(st[i + 1].heading - st[i - 1].heading) / (2.0 * dt);
      } else if (next_ok) {
        v = (Eigen::Vector2d(st[i + 1].x, st[i + 1].y) -
             Eigen::Vector2d(st[i].x, st[i].y)) /
            dt;
        w = wrap_angle(st[i + 1].heading - st[i].heading) / dt;
      } else if (prev_ok) {
        v = (Eigen::Vector2d(st[i].x, st[i].y) -
             Eigen::Vector2d(st[i - 1].x, st[i - 1].y)) /
            dt;
        w = wrap_angle(st[i].heading - st[i - 1].heading) / dt;
      } else {
        continue;
      }
      velocity[t][i] = v;
      speed[t][i] = v.norm();
      ang_speed[t][i] = w;
    }
  }

  auto diff_series = [&](const std::vector<double>& s, int i) -> double {
    const int n = static_cast<int>(s.size());
    const bool prev_ok = i > 0 && std::isfinite(s[i - 1]);
    const bool next_ok = i + 1 < n && std::isfinite(s[i + 1]);
    if (prev_ok && next_ok) return (s[i + 1] - s[i - 1]) / (2.0 * dt);
    if (next_ok && std::isfinite(s[i])) return (s[i + 1] - s[i]) / dt;
    if (prev_ok && std::isfinite(s[i])) return (s[i] - s[i - 1]) / dt;
    return nan;
  };

  for (int t = 0; t < n_tracks; ++t) {
    const auto& st = states.tracks[t].states;
    for (int i = first; i <= last; ++i) {
      if (!st[i].valid) continue;
      if (std::isfinite(speed[t][i])) out.samples[FeatureId::kLinearSpeed].push_back(speed[t][i]);
      if (std::isfinite(ang_speed[t][i])) out.samples[FeatureId::kAngularSpeed].push_back(ang_speed[t][i]);
      const double la = diff_series(speed[t], i);
      if (std::isfinite(la)) out.samples[FeatureId::kLinearAccel].push_back(la);
      const double aa = diff_series(ang_speed[t], i);
      if (std::isfinite(aa)) out.samples[FeatureId::kAngularAccel].push_back(aa);

      // Interactive features need at least one other valid agent.
      double nearest = std::numeric_limits<double>::infinity();
      double ttc = std::numeric_limits<double>::infinity();
      bool has_other = false;
      for (int o = 0; o < n_tracks; ++o) {
        if (o == t || !states.tracks[o].states[i].valid) continue;
        has_other = true;
        const auto& so = states.tracks[o].states[i];
        const Eigen::Vector2d dpos(so.x - st[i].x, so.y - st[i].y);
        const double rsum = states.tracks[t].radius + states.tracks[o].radius;
        nearest = std::min(nearest, dpos.norm() - rsum);
        const Eigen::Vector2d dvel = velocity[o][i] - velocity[t][i];
        ttc = std::min(ttc, disc_ttc(dpos, dvel, rsum));
      }
      if (has_other) {
        out.samples[FeatureId::kDistToNearest].push_back(nearest);
        out.samples[FeatureId::kCollision].push_back(nearest < 0.0 ? 1.0 : 0.0);
        out.samples[FeatureId::kTimeToCollision].push_back(std::min(ttc, kTtcCap));
      }

      if (!map_source.polylines.empty()) {
        double edge = std::numeric_limits<double>::infinity();
        const Eigen::Vector2d p(st[i].x, st[i].y);
        for (const MapPolyline& line : map_source.polylines) {
          edge = std::min(edge, point_to_polyline_distance(p, line) - line.half_width);
        }
        out.samples[FeatureId::kDistToRoadEdge].push_back(edge);
        out.samples[FeatureId::kOffroad].push_back(edge > 0.0 ? 1.0 : 0.0);
      }
    }
  }
  return out;
}

HistogramScore histogram_likelihood(const std::vector<double>& rollout_samples,
                                    const std::vector<double>& gt_samples,
                                    const HistogramSpec& spec) {
  if (rollout_samples.empty()) {
    throw std::invalid_argument("histogram_likelihood: no rollout samples");
  }
  HistogramScore out;
  out.gt_samples = static_cast<int>(gt_samples.size());
  if (gt_samples.empty()) return out;  // absent feature, reported by caller

  const double width = (spec.hi - spec.lo) / spec.bins;
  // The 1e-9 guard keeps samples that sit exactly on a bin edge (common for
  // synthetic data: zero accelerations) in a stable bin under tiny rigid-
  // transform perturbations.
  auto bin_of = [&](double v) {
    int b = static_cast<int>(std::floor((v - spec.lo) / width + 1e-9));
    return std::clamp(b, 0, spec.bins - 1);
  };

  std::vector<double> p(spec.bins, 0.0);
  for (double v : rollout_samples) p[bin_of(v)] += 1.0;
  const double n = static_cast<double>(rollout_samples.size());
  for (double& x : p) x /= n;
  const double floor_mass = 1.0 / (static_cast<double>(spec.bins) * n);

  double log_sum = 0.0;
  for (double v : gt_samples) {
    log_sum += std::log(std::max(p[bin_of(v)], floor_mass));
  }
  out.score = std::exp(log_sum / gt_samples.size());

  std::vector<double> q(spec.bins, 0.0);
  for (double v : gt_samples) q[bin_of(v)] += 1.0;
  double ent = 0.0;
  for (double x : q) {
    if (x > 0.0) {
      const double f = x / gt_samples.size();
      ent += f * std::log(f);
    }
  }
  out.max_attainable = std::exp(ent);
  return out;
}

namespace {

bool in_group(FeatureId f, const FeatureId* group, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (group[i] == f) return true;
  }
  return false;
}

std::optional<double> group_mean(const std::map<FeatureId, double>& scores,
                                 const FeatureId* group, size_t n) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [f, s] : scores) {
    if (!in_group(f, group, n)) continue;
    sum += s;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

}  // namespace

RealismReport realism_meta(const std::map<FeatureId, double>& feature_scores,
                           const std::map<FeatureId, double>& feature_max,
                           const MetaWeights& weights) {
  RealismReport r;
  r.weights = weights;
  for (const auto& [f, s] : feature_scores) r.feature_scores[feature_name(f)] = s;
  for (const auto& [f, s] : feature_max) r.feature_max[feature_name(f)] = s;
  r.kinematic = group_mean(feature_scores, kKinematic, std::size(kKinematic));
  r.interactive = group_mean(feature_scores, kInteractive, std::size(kInteractive));
  r.map_based = group_mean(feature_scores, kMapBased, std::size(kMapBased));

  double wsum = 0.0;
  double acc = 0.0;
  if (r.kinematic) { acc += weights.kinematic * *r.kinematic; wsum += weights.kinematic; }
  if (r.interactive) { acc += weights.interactive * *r.interactive; wsum += weights.interactive; }
  if (r.map_based) { acc += weights.map_based * *r.map_based; wsum += weights.map_based; }
  r.meta = wsum > 0.0 ? acc / wsum : 0.0;
  return r;
}

double min_ade(const std::vector<TrajectorySegment>& predictions,
               const TrajectorySegment& gt, double horizon) {
  if (predictions.empty()) throw std::invalid_argument("min_ade: no predictions");
  double best = std::numeric_limits<double>::infinity();
  for (const TrajectorySegment& p : predictions) {
    best = std::min(best, traj_distance(p, gt, horizon));
  }
  return best;
}

namespace {

double indicator_rate(const Rollout& r, const Scenario& scenario, FeatureId f) {
  int positive = 0;
  int total = 0;
  for (const Scenario& sim : r.rollouts) {
    for (size_t t = 0; t < sim.tracks.size(); ++t) {
      ++total;
      bool any = false;
      const int first = sim.current_index() + 1;
      const int last = sim.step_count() - 1;
      for (int i = first; i <= last && !any; ++i) {
        const AgentState& st = sim.tracks[t].states[i];
        if (!st.valid) continue;
        if (f == FeatureId::kCollision) {
          for (size_t o = 0; o < sim.tracks.size(); ++o) {
            if (o == t || !sim.tracks[o].states[i].valid) continue;
            const double d = std::hypot(sim.tracks[o].states[i].x - st.x,
                                        sim.tracks[o].states[i].y - st.y) -
                             sim.tracks[t].radius - sim.tracks[o].radius;
            if (d < 0.0) { any = true; break; }
          }
        } else {
          double edge = std::numeric_limits<double>::infinity();
          for (const MapPolyline& line : scenario.polylines) {
            edge = std::min(edge, point_to_polyline_distance({st.x, st.y}, line) -
                                      line.half_width);
          }
          if (scenario.polylines.empty()) edge = -1.0;
          if (edge > 0.0) any = true;
        }
      }
      if (any) ++positive;
    }
  }
  return total > 0 ? static_cast<double>(positive) / total : 0.0;
}

}  // namespace

double collision_rate(const Rollout& r, const Scenario& scenario) {
  return indicator_rate(r, scenario, FeatureId::kCollision);
}

double offroad_rate(const Rollout& r, const Scenario& scenario) {
  return indicator_rate(r, scenario, FeatureId::kOffroad);
}

RealismReport evaluate_realism(const std::vector<Scenario>& dataset,
                               const std::vector<Rollout>& rollouts,
                               const MetaWeights& weights) {
  if (dataset.size() != rollouts.size()) {
    throw std::invalid_argument("evaluate_realism: one Rollout per scenario required");
  }
  std::map<FeatureId, std::vector<double>> scores, maxes;
  double ade_sum = 0.0;
  int ade_count = 0;

  for (size_t si = 0; si < dataset.size(); ++si) {
    const Scenario& gt = dataset[si];
    const FeatureSeries gt_features = compute_features(gt, gt);
    FeatureSeries pooled;
    for (const Scenario& sim : rollouts[si].rollouts) {
      const FeatureSeries f = compute_features(sim, gt);
      for (const auto& [id, vals] : f.samples) {
        auto& dst = pooled.samples[id];
        dst.insert(dst.end(), vals.begin(), vals.end());
      }
    }
    for (FeatureId f : kAllFeatures) {
      const auto& rs = pooled.samples[f];
      const auto& gs = gt_features.samples.at(f);
      if (rs.empty() || gs.empty()) continue;  // absent feature
      const HistogramScore h = histogram_likelihood(rs, gs, histogram_spec(f));
      scores[f].push_back(h.score);
      maxes[f].push_back(h.max_attainable);
    }

    // minADE over rollouts, averaged over agents.
    const double horizon = gt.future_steps * gt.dt;
    for (size_t t = 0; t < gt.tracks.size(); ++t) {
      if (!gt.tracks[t].states[gt.current_index()].valid) continue;
      TrajectorySegment gt_future;
      gt_future.start_time = gt.dt;
      for (int i = gt.current_index() + 1; i < gt.step_count(); ++i) {
        gt_future.states.push_back(gt.tracks[t].states[i]);
      }
      std::vector<TrajectorySegment> preds;
      for (const Scenario& sim : rollouts[si].rollouts) {
        TrajectorySegment p;
        p.start_time = gt.dt;
        for (int i = gt.current_index() + 1; i < gt.step_count(); ++i) {
          p.states.push_back(sim.tracks[t].states[i]);
        }
        preds.push_back(std::move(p));
      }
      const double ade = min_ade(preds, gt_future, horizon);
      if (std::isfinite(ade)) {
        ade_sum += ade;
        ++ade_count;
      }
    }
  }

  std::map<FeatureId, double> mean_scores, mean_max;
  for (const auto& [f, vals] : scores) {
    double s = 0.0;
    for (double v : vals) s += v;
    mean_scores[f] = s / vals.size();
  }
  for (const auto& [f, vals] : maxes) {
    double s = 0.0;
    for (double v : vals) s += v;
    mean_max[f] = s / vals.size();
  }
  RealismReport r = realism_meta(mean_scores, mean_max, weights);
  r.min_ade = ade_count > 0 ? ade_sum / ade_count : 0.0;
  return r;
}

std::string report_to_json(const RealismReport& r) {
  nlohmann::ordered_json j;
  j["aggregation"] = r.aggregation;
  j["weights"] = {{"kinematic", r.weights.kinematic},
                  {"interactive", r.weights.interactive},
                  {"map_based", r.weights.map_based}};
  nlohmann::ordered_json bins = nlohmann::ordered_json::object();
  for (FeatureId f : kAllFeatures) {
    const HistogramSpec s = histogram_spec(f);
    bins[feature_name(f)] = {{"lo", s.lo}, {"hi", s.hi}, {"bins", s.bins}};
  }
  j["bin_config"] = bins;
  j["features"] = r.feature_scores;
  j["feature_max_attainable"] = r.feature_max;
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  if (r.kinematic) groups["kinematic"] = *r.kinematic;
  if (r.interactive) groups["interactive"] = *r.interactive;
  if (r.map_based) groups["map_based"] = *r.map_based;
  j["groups"] = groups;
  j["meta"] = r.meta;
  j["min_ade"] = r.min_ade;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const RealismReport& r) {
  std::string out = "metric,value\n";
  for (const auto& [name, v] : r.feature_scores) {
    out += name + "," + std::to_string(v) + "\n";
  }
  if (r.kinematic) out += "kinematic," + std::to_string(*r.kinematic) + "\n";
  if (r.interactive) out += "interactive," + std::to_string(*r.interactive) + "\n";
  if (r.map_based) out += "map_based," + std::to_string(*r.map_based) + "\n";
  out += "meta," + std::to_string(r.meta) + "\n";
  out += "min_ade," + std::to_string(r.min_ade) + "\n";
  return out;
}

RealismReport report_from_json(const std::string& bytes) {
  const nlohmann::json j = nlohmann::json::parse(bytes);
  RealismReport r;
  r.aggregation = j.value("aggregation", "");
  r.weights.kinematic = j.at("weights").at("kinematic").get<double>();
  r.weights.interactive = j.at("weights").at("interactive").get<double>();
  r.weights.map_based = j.at("weights").at("map_based").get<double>();
  for (const auto& [k, v] : j.at("features").items()) r.feature_scores[k] = v.get<double>();
  for (const auto& [k, v] : j.at("feature_max_attainable").items()) r.feature_max[k] = v.get<double>();
  const auto& groups = j.at("groups");
  if (groups.contains("kinematic")) r.kinematic = groups.at("kinematic").get<double>();
  if (groups.contains("interactive")) r.interactive = groups.at("interactive").get<double>();
  if (groups.contains("map_based")) r.map_based = groups.at("map_based").get<double>();
  r.meta = j.at("meta").get<double>();
  r.min_ade = j.at("min_ade").get<double>();
  return r;
}

}  // namespace unimm
