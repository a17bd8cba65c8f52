#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace unimm {

enum class AgentCategory { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };

constexpr int kCategoryCount = 3;

const char* category_name(AgentCategory c);
AgentCategory category_from_name(const std::string& name);

// Disc radius per category (meters).
double category_radius(AgentCategory c);

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // wrapped to (-pi, pi]
  bool valid = false;
};

struct Track {
  int agent_id = 0;
  AgentCategory category = AgentCategory::kVehicle;
  double radius = 0.0;
  std::vector<AgentState> states;  // one per scenario step
};

struct MapPolyline {
  std::vector<Eigen::Vector2d> points;  // spacing <= 5.5 m
  double half_width = 0.0;
};

// A 9 s scene on a fixed 0.1 s grid: history_steps states before the
// current one, the current state, then future_steps states after it.
struct Scenario {
  double dt = 0.1;
  int history_steps = 10;
  int future_steps = 80;
  std::vector<MapPolyline> polylines;
  std::vector<Track> tracks;

  int step_count() const { return history_steps + future_steps + 1; }
  int current_index() const { return history_steps; }
  double time_of(int index) const { return (index - history_steps) * dt; }
};

// One (agent, start time) training pair cut from a scenario. Indices refer
// to the scenario step grid; the target window is (start_index, end_index].
struct OpenLoopSample {
  int scenario_index = 0;  // position within the owning dataset
  int track_index = 0;
  int agent_id = 0;
  double start_time = 0.0;       // multiple of tau
  int start_index = 0;           // step index of the prediction start state
  int target_end_index = 0;      // exclusive end of the target window
};

// Validates all Scenario invariants, throwing std::invalid_argument with a
// message naming the offending field.
void validate_scenario(const Scenario& scenario);

}  // namespace unimm
