#include "unimm/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "unimm/geometry.hpp"

namespace unimm {

const char* category_name(AgentCategory c) {
  switch (c) {
    case AgentCategory::kVehicle: return "vehicle";
    case AgentCategory::kPedestrian: return "pedestrian";
    case AgentCategory::kCyclist: return "cyclist";
  }
  return "vehicle";
}

AgentCategory category_from_name(const std::string& name) {
  if (name == "vehicle") return AgentCategory::kVehicle;
  if (name == "pedestrian") return AgentCategory::kPedestrian;
  if (name == "cyclist") return AgentCategory::kCyclist;
  throw std::invalid_argument("unknown agent category: " + name);
}

double category_radius(AgentCategory c) {
  switch (c) {
    case AgentCategory::kVehicle: return 2.0;
    case AgentCategory::kPedestrian: return 0.4;
    case AgentCategory::kCyclist: return 0.8;
  }
  return 2.0;
}

void validate_scenario(const Scenario& s) {
  if (s.dt <= 0.0) throw std::invalid_argument("scenario.dt must be positive");
  if (s.history_steps < 0) throw std::invalid_argument("scenario.history_steps must be >= 0");
  if (s.future_steps < 0) throw std::invalid_argument("scenario.future_steps must be >= 0");
  const int steps = s.step_count();
  for (size_t i = 0; i < s.polylines.size(); ++i) {
    const MapPolyline& p = s.polylines[i];
    if (p.points.size() < 2) {
      throw std::invalid_argument("polylines[" + std::to_string(i) + "].points needs >= 2 points");
    }
    if (p.half_width <= 0.0) {
      throw std::invalid_argument("polylines[" + std::to_string(i) + "].half_width must be > 0");
    }
    for (size_t j = 0; j + 1 < p.points.size(); ++j) {
      if ((p.points[j + 1] - p.points[j]).norm() > 5.5) {
        throw std::invalid_argument("polylines[" + std::to_string(i) +
                                    "].points spacing exceeds 5.5 m at segment " + std::to_string(j));
      }
    }
  }
  for (size_t i = 0; i < s.tracks.size(); ++i) {
    const Track& t = s.tracks[i];
    if (t.radius <= 0.0) {
      throw std::invalid_argument("tracks[" + std::to_string(i) + "].radius must be > 0");
    }
    if (static_cast<int>(t.states.size()) != steps) {
      throw std::invalid_argument("tracks[" + std::to_string(i) + "].states has " +
                                  std::to_string(t.states.size()) + " states, scenario has " +
                                  std::to_string(steps) + " steps");
    }
    for (size_t j = 0; j < t.states.size(); ++j) {
      // 1e-6 slack: the canonical file format quantizes headings to 1e-6,
      // which can push a heading of exactly pi just past the wrap boundary.
      const double h = t.states[j].heading;
      if (!(h > -M_PI - 1e-6 && h <= M_PI + 1e-6)) {
        throw std::invalid_argument("tracks[" + std::to_string(i) + "].states[" +
                                    std::to_string(j) + "].heading not wrapped to (-pi, pi]");
      }
    }
  }
}

namespace {

void put_fixed(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Tiny negatives round to "-0.000000"; canonicalize to the positive form.
  out += (std::strcmp(buf, "-0.000000") == 0) ? "0.000000" : buf;
}

}  // namespace

std::string save_scenario(const Scenario& s) {
  std::string out;
  out.reserve(1024 + s.tracks.size() * s.step_count() * 40);
  out += "{\"dt\": ";
  put_fixed(out, s.dt);
  out += ", \"history_steps\": " + std::to_string(s.history_steps);
  out += ", \"future_steps\": " + std::to_string(s.future_steps);
  out += ", \"polylines\": [";
  for (size_t i = 0; i < s.polylines.size(); ++i) {
    if (i) out += ", ";
    const MapPolyline& p = s.polylines[i];
    out += "{\"points\": [";
    for (size_t j = 0; j < p.points.size(); ++j) {
      if (j) out += ", ";
      out += "[";
      put_fixed(out, p.points[j].x());
      out += ", ";
      put_fixed(out, p.points[j].y());
      out += "]";
    }
    out += "], \"half_width\": ";
    put_fixed(out, p.half_width);
    out += "}";
  }
  out += "], \"tracks\": [";
  for (size_t i = 0; i < s.tracks.size(); ++i) {
    if (i) out += ", ";
    const Track& t = s.tracks[i];
    out += "{\"id\": " + std::to_string(t.agent_id);
    out += ", \"category\": \"";
    out += category_name(t.category);
    out += "\", \"radius\": ";
    put_fixed(out, t.radius);
    out += ", \"states\": [";
    for (size_t j = 0; j < t.states.size(); ++j) {
      if (j) out += ", ";
      const AgentState& st = t.states[j];
      out += "[";
      put_fixed(out, st.x);
      out += ", ";
      put_fixed(out, st.y);
      out += ", ";
      put_fixed(out, st.heading);
      out += st.valid ? ", 1]" : ", 0]";
    }
    out += "]}";
  }
  out += "]}\n";
  return out;
}

Scenario load_scenario(const std::string& bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }
  auto require = [&](const nlohmann::json& j, const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw std::invalid_argument(std::string("scenario missing field: ") + key);
    return j.at(key);
  };
  Scenario s;
  try {
    s.dt = require(doc, "dt").get<double>();
    s.history_steps = require(doc, "history_steps").get<int>();
    s.future_steps = require(doc, "future_steps").get<int>();
    for (const auto& jp : require(doc, "polylines")) {
      MapPolyline p;
      for (const auto& pt : require(jp, "points")) {
        if (!pt.is_array() || pt.size() != 2) {
          throw std::invalid_argument("polyline point must be [x, y]");
        }
        p.points.emplace_back(pt[0].get<double>(), pt[1].get<double>());
      }
      p.half_width = require(jp, "half_width").get<double>();
      s.polylines.push_back(std::move(p));
    }
    for (const auto& jt : require(doc, "tracks")) {
      Track t;
      t.agent_id = require(jt, "id").get<int>();
      t.category = category_from_name(require(jt, "category").get<std::string>());
      t.radius = require(jt, "radius").get<double>();
      for (const auto& st : require(jt, "states")) {
        if (!st.is_array() || st.size() != 4) {
          throw std::invalid_argument("track state must be [x, y, heading, valid]");
        }
        AgentState a;
        a.x = st[0].get<double>();
        a.y = st[1].get<double>();
        a.heading = st[2].get<double>();
        a.valid = st[3].get<double>() != 0.0;
        t.states.push_back(a);
      }
      s.tracks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

void write_scenario_file(const Scenario& scenario, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << save_scenario(scenario);
}

Scenario read_scenario_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_scenario(ss.str());
}

std::vector<OpenLoopSample> split_open_loop_samples(const Scenario& scenario,
                                                    double tau, double t_pred,
                                                    int scenario_index) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  const double ratio = t_pred / tau;
  if (t_pred <= 0.0 || std::abs(ratio - std::lround(ratio)) > 1e-9) {
    throw std::invalid_argument("t_pred must be a positive multiple of tau");
  }
  const int tau_steps = static_cast<int>(std::lround(tau / scenario.dt));
  const int pred_steps = static_cast<int>(std::lround(t_pred / scenario.dt));
  const int starts = scenario.future_steps / tau_steps;  // {0, tau, ..., 8s - tau}
  const int last_index = scenario.step_count() - 1;

  std::vector<OpenLoopSample> samples;
  for (size_t ti = 0; ti < scenario.tracks.size(); ++ti) {
    const Track& track = scenario.tracks[ti];
    for (int j = 0; j < starts; ++j) {
      const int start_index = scenario.current_index() + j * tau_steps;
      const int end_index = std::min(start_index + pred_steps, last_index);
      bool any_valid = false;
      for (int k = start_index + 1; k <= end_index; ++k) {
        if (track.states[k].valid) { any_valid = true; break; }
      }
      if (!any_valid) continue;
      OpenLoopSample s;
      s.scenario_index = scenario_index;
      s.track_index = static_cast<int>(ti);
      s.agent_id = track.agent_id;
      s.start_time = j * tau;
      s.start_index = start_index;
      s.target_end_index = end_index;
      samples.push_back(s);
    }
  }
  return samples;
}

TrajectorySegment sample_target(const Scenario& scenario,
                                const OpenLoopSample& sample) {
  const Track& track = scenario.tracks[sample.track_index];
  TrajectorySegment seg;
  seg.start_time = sample.start_time + scenario.dt;
  for (int k = sample.start_index + 1; k <= sample.target_end_index; ++k) {
    seg.states.push_back(track.states[k]);
  }
  return seg;
}

bool scenario_equal(const Scenario& a, const Scenario& b) {
  if (a.dt != b.dt || a.history_steps != b.history_steps ||
      a.future_steps != b.future_steps)
    return false;
  if (a.polylines.size() != b.polylines.size() || a.tracks.size() != b.tracks.size())
    return false;
  for (size_t i = 0; i < a.polylines.size(); ++i) {
    if (a.polylines[i].half_width != b.polylines[i].half_width) return false;
    if (a.polylines[i].points.size() != b.polylines[i].points.size()) return false;
    for (size_t j = 0; j < a.polylines[i].points.size(); ++j) {
      if (a.polylines[i].points[j] != b.polylines[i].points[j]) return false;
    }
  }
  for (size_t i = 0; i < a.tracks.size(); ++i) {
    const Track& x = a.tracks[i];
    const Track& y = b.tracks[i];
    if (x.agent_id != y.agent_id || x.category != y.category || x.radius != y.radius)
      return false;
    if (x.states.size() != y.states.size()) return false;
    for (size_t j = 0; j < x.states.size(); ++j) {
      const AgentState& p = x.states[j];
      const AgentState& q = y.states[j];
      if (p.x != q.x || p.y != q.y || p.heading != q.heading || p.valid != q.valid)
        return false;
    }
  }
  return true;
}

}  // namespace unimm
