#pragma once

#include <string>
#include <vector>

#include "unimm/geometry.hpp"
#include "unimm/types.hpp"

namespace unimm {

// Canonical UTF-8 JSON document: top-level keys dt, history_steps,
// future_steps, polylines, tracks in that order, floats printed with six
// decimal digits. save followed by load is the identity for scenarios whose
// values are already on the 1e-6 grid (everything this repo produces).
std::string save_scenario(const Scenario& scenario);
Scenario load_scenario(const std::string& bytes);

void write_scenario_file(const Scenario& scenario, const std::string& path);
Scenario read_scenario_file(const std::string& path);

// One sample per (agent, start time in {0, tau, ..., 8s - tau}) with at
// least one valid ground-truth state in the target window.
// t_pred must be a positive multiple of tau (0.5 s).
std::vector<OpenLoopSample> split_open_loop_samples(const Scenario& scenario,
                                                    double tau, double t_pred,
                                                    int scenario_index = 0);

// Ground-truth target segment for a sample: states in
// (start_index, target_end_index], starting 0.1 s after the sample start.
TrajectorySegment sample_target(const Scenario& scenario,
                                const OpenLoopSample& sample);

bool scenario_equal(const Scenario& a, const Scenario& b);

}  // namespace unimm
