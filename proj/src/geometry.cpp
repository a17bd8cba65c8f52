#include "unimm/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace unimm {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

AgentState to_local(const AgentState& s, const Pose2& frame) {
  const double c = std::cos(frame.heading);
  const double sn = std::sin(frame.heading);
  const double dx = s.x - frame.x;
  const double dy = s.y - frame.y;
  AgentState out;
  out.x = c * dx + sn * dy;
  out.y = -sn * dx + c * dy;
  out.heading = wrap_angle(s.heading - frame.heading);
  out.valid = s.valid;
  return out;
}

AgentState to_global(const AgentState& s, const Pose2& frame) {
  const double c = std::cos(frame.heading);
  const double sn = std::sin(frame.heading);
  AgentState out;
  out.x = frame.x + c * s.x - sn * s.y;
  out.y = frame.y + sn * s.x + c * s.y;
  out.heading = wrap_angle(s.heading + frame.heading);
  out.valid = s.valid;
  return out;
}

Eigen::Vector2d point_to_local(const Eigen::Vector2d& p, const Pose2& frame) {
  const double c = std::cos(frame.heading);
  const double sn = std::sin(frame.heading);
  const Eigen::Vector2d d = p - frame.translation();
  return {c * d.x() + sn * d.y(), -sn * d.x() + c * d.y()};
}

Eigen::Vector2d point_to_global(const Eigen::Vector2d& p, const Pose2& frame) {
  const double c = std::cos(frame.heading);
  const double sn = std::sin(frame.heading);
  return {frame.x + c * p.x() - sn * p.y(), frame.y + sn * p.x() + c * p.y()};
}

TrajectorySegment to_local(const TrajectorySegment& t, const Pose2& frame) {
  TrajectorySegment out;
  out.start_time = t.start_time;
  out.states.reserve(t.states.size());
  for (const AgentState& s : t.states) out.states.push_back(to_local(s, frame));
  return out;
}

TrajectorySegment to_global(const TrajectorySegment& t, const Pose2& frame) {
  TrajectorySegment out;
  out.start_time = t.start_time;
  out.states.reserve(t.states.size());
  for (const AgentState& s : t.states) out.states.push_back(to_global(s, frame));
  return out;
}

double traj_distance(const TrajectorySegment& a, const TrajectorySegment& b,
                     double horizon) {
  constexpr double kDt = 0.1;
  if (horizon <= 0.0) throw std::invalid_argument("traj_distance: horizon must be positive");
  const double steps_f = horizon / kDt;
  const int horizon_steps = static_cast<int>(std::lround(steps_f));
  if (std::abs(steps_f - horizon_steps) > 1e-9) {
    throw std::invalid_argument("traj_distance: horizon must be a multiple of 0.1 s");
  }
  if (std::abs(a.start_time - b.start_time) > 1e-9) {
    throw std::invalid_argument("traj_distance: segments must share the step grid");
  }
  const int n = std::min({horizon_steps, static_cast<int>(a.states.size()),
                          static_cast<int>(b.states.size())});
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!a.states[i].valid || !b.states[i].valid) continue;
    const double dx = a.states[i].x - b.states[i].x;
    const double dy = a.states[i].y - b.states[i].y;
    sum += std::sqrt(dx * dx + dy * dy);
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return sum / count;
}

double point_to_polyline_distance(const Eigen::Vector2d& p,
                                  const MapPolyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < line.points.size(); ++i) {
    const Eigen::Vector2d& a = line.points[i];
    const Eigen::Vector2d& b = line.points[i + 1];
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, (p - (a + t * ab)).norm());
  }
  return best;
}

}  // namespace unimm
