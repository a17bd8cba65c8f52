#pragma once

#include <vector>

#include <Eigen/Dense>

#include "unimm/types.hpp"

namespace unimm {

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Eigen::Rotation2Dd rotation() const { return Eigen::Rotation2Dd(heading); }
  Eigen::Vector2d translation() const { return {x, y}; }
};

inline bool is_identity(const Pose2& p) {
  return p.x == 0.0 && p.y == 0.0 && p.heading == 0.0;
}

// A uniformly sampled run of agent states starting at start_time; spacing is
// the scenario grid (0.1 s).
struct TrajectorySegment {
  std::vector<AgentState> states;
  double start_time = 0.0;
};

AgentState to_local(const AgentState& s, const Pose2& frame);
AgentState to_global(const AgentState& s, const Pose2& frame);
Eigen::Vector2d point_to_local(const Eigen::Vector2d& p, const Pose2& frame);
Eigen::Vector2d point_to_global(const Eigen::Vector2d& p, const Pose2& frame);

TrajectorySegment to_local(const TrajectorySegment& t, const Pose2& frame);
TrajectorySegment to_global(const TrajectorySegment& t, const Pose2& frame);

// Mean Euclidean position distance over the steps within `horizon` seconds
// that are valid in both segments. Returns +inf when no step is shared.
// The segments must share the step grid; horizon must be a positive multiple
// of 0.1 s (throws std::invalid_argument otherwise).
double traj_distance(const TrajectorySegment& a, const TrajectorySegment& b,
                     double horizon);

// Distance from a point to a polyline (minimum over segments).
double point_to_polyline_distance(const Eigen::Vector2d& p,
                                  const MapPolyline& line);

}  // namespace unimm
