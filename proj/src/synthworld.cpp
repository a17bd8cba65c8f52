#include "unimm/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "unimm/geometry.hpp"

namespace unimm {

uint64_t derive_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

constexpr double kApproachLen = 45.0;
constexpr double kBranchLen = 75.0;
constexpr double kArcRadius = 40.0;
constexpr double kRoadHalfWidth = 4.0;
constexpr double kSidewalkY = 14.0;
constexpr double kSidewalkHalf = 15.0;  // sidewalk spans x in [-15, 15]
constexpr double kSidewalkWidth = 2.0;
constexpr double kPointSpacing = 2.5;
constexpr double kAccel = 1.5;      // m/s^2 ramp of the trapezoidal profile
constexpr double kVehicleGap = 20.0;
constexpr double kVehicleLane = -1.0;
constexpr double kCyclistLane = 3.0;

double quant(double v) {
  const double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;
}

double uniform01(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Centerline pose at arc length s along approach + branch (+1 up, -1 down).
Pose2 road_pose(double s, int branch, double fork_angle) {
  if (s <= kApproachLen) {
    return {s - kApproachLen, 0.0, 0.0};
  }
  const double sb = s - kApproachLen;
  const double arc_len = kArcRadius * fork_angle;
  const double sign = branch > 0 ? 1.0 : -1.0;
  if (sb <= arc_len) {
    const double a = sb / kArcRadius;
    return {kArcRadius * std::sin(a), sign * kArcRadius * (1.0 - std::cos(a)),
            sign * a};
  }
  const double a = fork_angle;
  const Eigen::Vector2d arc_end(kArcRadius * std::sin(a),
                                sign * kArcRadius * (1.0 - std::cos(a)));
  const double tail = sb - arc_len;
  return {arc_end.x() + tail * std::cos(a), arc_end.y() + sign * tail * std::sin(a),
          sign * a};
}

AgentState road_state(double s, int branch, double fork_angle, double lateral) {
  const Pose2 c = road_pose(s, branch, fork_angle);
  AgentState st;
  st.x = quant(c.x - lateral * std::sin(c.heading));
  st.y = quant(c.y + lateral * std::cos(c.heading));
  st.heading = quant(wrap_angle(c.heading));
  st.valid = true;
  return st;
}

// Distance travelled after t seconds under v(t) = min(v0 + a*t, cruise).
double trapezoid_dist(double t, double v0, double cruise) {
  const double t_c = (cruise - v0) / kAccel;
  if (t <= t_c) return v0 * t + 0.5 * kAccel * t * t;
  return v0 * t_c + 0.5 * kAccel * t_c * t_c + cruise * (t - t_c);
}

MapPolyline sampled_polyline(const std::vector<Eigen::Vector2d>& anchor_pts,
                             double half_width) {
  // anchor_pts trace the centerline densely enough for chord resampling.
  MapPolyline line;
  line.half_width = half_width;
  line.points = anchor_pts;
  for (Eigen::Vector2d& p : line.points) p = {quant(p.x()), quant(p.y())};
  return line;
}

std::vector<Eigen::Vector2d> sample_road(int branch, double fork_angle) {
  std::vector<Eigen::Vector2d> pts;
  const double total = kApproachLen + kBranchLen;
  const int n = static_cast<int>(std::ceil(total / kPointSpacing));
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(total, i * kPointSpacing);
    const Pose2 p = road_pose(s, branch, fork_angle);
    pts.emplace_back(p.x, p.y);
  }
  return pts;
}

struct RoadAgent {
  AgentCategory category;
  double s0 = 0.0;
  double cruise = 0.0;
  double v0 = 0.0;
  int branch = 1;
  double lateral = 0.0;
};

Scenario generate_one(const WorldConfig& cfg, uint64_t scenario_seed) {
  std::mt19937_64 rng(scenario_seed);
  const double fork_angle = cfg.fork_angle_deg * M_PI / 180.0;

  Scenario s;
  s.polylines.push_back(sampled_polyline(
      [&] {
        std::vector<Eigen::Vector2d> pts;
        const int n = static_cast<int>(std::ceil(kApproachLen / kPointSpacing));
        for (int i = 0; i <= n; ++i) {
          const double x = std::min(kApproachLen, i * kPointSpacing);
          pts.emplace_back(x - kApproachLen, 0.0);
        }
        return pts;
      }(),
      kRoadHalfWidth));
  // Branch polylines start at the fork so the approach is not duplicated.
  for (int branch : {1, -1}) {
    std::vector<Eigen::Vector2d> pts = sample_road(branch, fork_angle);
    const int approach_pts = static_cast<int>(kApproachLen / kPointSpacing);
    pts.erase(pts.begin(), pts.begin() + approach_pts);
    s.polylines.push_back(sampled_polyline(pts, kRoadHalfWidth));
  }
  if (cfg.n_pedestrians > 0) {
    std::vector<Eigen::Vector2d> pts;
    const int n = static_cast<int>(std::ceil(2.0 * kSidewalkHalf / kPointSpacing));
    for (int i = 0; i <= n; ++i) {
      const double x = std::min(2.0 * kSidewalkHalf, i * kPointSpacing);
      pts.emplace_back(x - kSidewalkHalf, kSidewalkY);
    }
    s.polylines.push_back(sampled_polyline(pts, kSidewalkWidth));
  }

  // Vehicles: front-to-back spawn order, cruise speeds sorted so the leader
  // is never slower than a follower (keeps ground truth collision free).
  std::vector<RoadAgent> agents;
  std::vector<double> v_cruise(cfg.n_vehicles);
  for (double& c : v_cruise) c = uniform(rng, cfg.vehicle_cruise_min, cfg.vehicle_cruise_max);
  std::sort(v_cruise.begin(), v_cruise.end(), std::greater<double>());
  for (int i = 0; i < cfg.n_vehicles; ++i) {
    RoadAgent a;
    a.category = AgentCategory::kVehicle;
    a.cruise = v_cruise[i];
    a.v0 = 0.7 * a.cruise;
    a.branch = uniform01(rng) < 0.5 ? 1 : -1;
    a.s0 = 25.0 - i * kVehicleGap - uniform(rng, 0.0, 4.0);
    a.lateral = kVehicleLane;
    agents.push_back(a);
  }
  std::vector<double> c_cruise(cfg.n_cyclists);
  for (double& c : c_cruise) c = uniform(rng, 3.5, 6.0);
  std::sort(c_cruise.begin(), c_cruise.end(), std::greater<double>());
  for (int i = 0; i < cfg.n_cyclists; ++i) {
    RoadAgent a;
    a.category = AgentCategory::kCyclist;
    a.cruise = c_cruise[i];
    a.v0 = 0.7 * a.cruise;
    a.branch = uniform01(rng) < 0.5 ? 1 : -1;
    a.s0 = 12.0 - i * 15.0 + uniform(rng, 0.0, 6.0);
    a.lateral = kCyclistLane;
    agents.push_back(a);
  }

  const int steps = s.step_count();
  auto build_track = [&](const RoadAgent& a, int id) {
    Track t;
    t.agent_id = id;
    t.category = a.category;
    t.radius = category_radius(a.category);
    t.states.reserve(steps);
    for (int k = 0; k < steps; ++k) {
      const double since_spawn = k * s.dt;  // spawn coincides with step 0
      const double pos = a.s0 + trapezoid_dist(since_spawn, a.v0, a.cruise);
      t.states.push_back(road_state(pos, a.branch, fork_angle, a.lateral));
    }
    return t;
  };

  std::vector<Track> road_tracks;
  for (size_t i = 0; i < agents.size(); ++i) {
    road_tracks.push_back(build_track(agents[i], static_cast<int>(i)));
  }

  // Same-branch traffic is laterally separated and speed-sorted, so the only
  // conflicts are vehicle/cyclist pairs whose branches cross at the fork.
  // Repair deterministically: flip the cyclist onto the vehicle's branch; if
  // flips keep conflicting, slow the cyclist so it never reaches the fork.
  for (int attempt = 0; attempt < 4; ++attempt) {
    int bad_cyclist = -1;
    int bad_other = -1;
    for (size_t a = 0; a < road_tracks.size() && bad_cyclist < 0; ++a) {
      for (size_t b = a + 1; b < road_tracks.size() && bad_cyclist < 0; ++b) {
        const double min_gap =
            road_tracks[a].radius + road_tracks[b].radius + 0.2;
        for (int k = 0; k < steps; ++k) {
          const AgentState& sa = road_tracks[a].states[k];
          const AgentState& sb = road_tracks[b].states[k];
          if (std::hypot(sa.x - sb.x, sa.y - sb.y) < min_gap) {
            const bool a_cyc = agents[a].category == AgentCategory::kCyclist;
            bad_cyclist = static_cast<int>(a_cyc ? a : b);
            bad_other = static_cast<int>(a_cyc ? b : a);
            break;
          }
        }
      }
    }
    if (bad_cyclist < 0) break;
    RoadAgent& cyc = agents[bad_cyclist];
    if (attempt < 2 && cyc.branch != agents[bad_other].branch) {
      cyc.branch = agents[bad_other].branch;
    } else {
      cyc.cruise *= 0.5;
      cyc.v0 *= 0.5;
    }
    road_tracks[bad_cyclist] = build_track(cyc, bad_cyclist);
  }

  int next_id = 0;
  for (Track& t : road_tracks) {
    t.agent_id = next_id++;
    s.tracks.push_back(std::move(t));
  }

  for (int i = 0; i < cfg.n_pedestrians; ++i) {
    const bool forward = uniform01(rng) < 0.5;
    const double cruise = uniform(rng, 1.0, 1.8);
    const double v0 = 0.8 * cruise;
    const double x0 = forward ? uniform(rng, -14.0, -2.0) : uniform(rng, 2.0, 14.0);
    Track t;
    t.agent_id = next_id++;
    t.category = AgentCategory::kPedestrian;
    t.radius = category_radius(AgentCategory::kPedestrian);
    t.states.reserve(steps);
    for (int k = 0; k < steps; ++k) {
      const double d = trapezoid_dist(k * s.dt, v0, cruise);
      AgentState st;
      st.x = quant(forward ? x0 + d : x0 - d);
      st.y = quant(kSidewalkY + (i - (cfg.n_pedestrians - 1) * 0.5) * 1.0);
      st.heading = quant(wrap_angle(forward ? 0.0 : M_PI));
      st.valid = true;
      t.states.push_back(st);
    }
    s.tracks.push_back(std::move(t));
  }

  return s;
}

}  // namespace

std::vector<Scenario> generate_synthetic_dataset(const WorldConfig& config,
                                                 int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_synthetic_dataset: count must be >= 1");
  std::vector<Scenario> out(count);
  for (int i = 0; i < count; ++i) {
    out[i] = generate_one(config, derive_seed(seed, static_cast<uint64_t>(i)));
    validate_scenario(out[i]);
  }
  return out;
}

}  // namespace unimm
