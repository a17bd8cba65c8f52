#pragma once

#include <cstdint>
#include <vector>

#include "unimm/types.hpp"

namespace unimm {

// A desk-scale driving world: a straight approach corridor that forks into
// two arc-connected branches, plus a sidewalk. Vehicles and cyclists pick a
// branch and a cruise speed per agent; pedestrians pick a walking direction.
struct WorldConfig {
  int n_vehicles = 2;
  int n_pedestrians = 1;
  int n_cyclists = 1;
  double fork_angle_deg = 22.0;
  double vehicle_cruise_min = 5.0;   // m/s
  double vehicle_cruise_max = 10.0;  // m/s
};

// Deterministic for fixed (config, seed); all emitted floats are rounded to
// the 1e-6 grid so the canonical file format round-trips exactly.
std::vector<Scenario> generate_synthetic_dataset(const WorldConfig& config,
                                                 int count, uint64_t seed);

// Stable per-index stream derivation (splitmix64).
uint64_t derive_seed(uint64_t seed, uint64_t index);

}  // namespace unimm
