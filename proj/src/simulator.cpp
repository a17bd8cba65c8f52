#include "unimm/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "unimm/synthworld.hpp"

namespace unimm {

namespace {

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

int sample_component(const Eigen::VectorXd& log_scores, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const int k = static_cast<int>(log_scores.size());
  for (int i = 0; i < k; ++i) {
    acc += std::exp(log_scores(i));
    if (u < acc) return i;
  }
  return k - 1;
}

void check_incremental(const Encoder& encoder, const Scenario& working,
                       const EncoderCache& cache) {
  EncoderCache fresh = encoder.make_cache(working);
  encoder.extend_cache(fresh, working, cache.windows_done);
  for (int t = 0; t < cache.tracks; ++t) {
    for (int w = 0; w < cache.windows_done; ++w) {
      if (!cache.valid[t][w]) continue;
      const double num = (cache.final_embed[t][w] - fresh.final_embed[t][w]).norm();
      const double den = std::max(1.0, fresh.final_embed[t][w].norm());
      if (num / den > 1e-9) {
        throw std::runtime_error("incremental encoding diverged from full re-encode");
      }
    }
  }
}

}  // namespace

Rollout rollout_scenario(BehaviorModel& model, const Scenario& scenario,
                         const RolloutConfig& config) {
  const double ratio = config.duration / kTau;
  const int steps_j = static_cast<int>(std::lround(ratio));
  if (config.duration <= 0.0 || std::abs(ratio - steps_j) > 1e-9) {
    throw std::invalid_argument("rollout duration must be a positive multiple of tau");
  }
  if (steps_j * kTauSteps > scenario.future_steps) {
    throw std::invalid_argument("rollout duration exceeds the scenario future");
  }
  model.mixture_config.validate();

  Rollout out;
  out.config = config;
  out.rollouts.reserve(config.num_rollouts);
  out.choices.reserve(config.num_rollouts);
  Encoder encoder(model.store, model.model_config);
  encoder.ensure_params();

  const int n_tracks = static_cast<int>(scenario.tracks.size());
  const int cur0 = scenario.current_index();

  for (int r = 0; r < config.num_rollouts; ++r) {
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<uint64_t>(r)));
    Scenario working = scenario;
    std::vector<std::vector<int>> choice_log(n_tracks, std::vector<int>(steps_j, -1));
    std::vector<bool> simulated(n_tracks);
    for (int t = 0; t < n_tracks; ++t) {
      simulated[t] = scenario.tracks[t].states[cur0].valid;
    }
    EncoderCache cache = encoder.make_cache(working);

    for (int j = 0; j < steps_j; ++j) {
      const int cur = cur0 + j * kTauSteps;
      encoder.extend_cache(cache, working, j + 2);
      if (config.debug_check_incremental) check_incremental(encoder, working, cache);

      std::vector<TrajectorySegment> plans(n_tracks);
      for (int t = 0; t < n_tracks; ++t) {
        if (!simulated[t]) continue;
        const AgentCategory cat = working.tracks[t].category;
        const AgentState& st = working.tracks[t].states[cur];
        const Pose2 pose{st.x, st.y, st.heading};
        if (!cache.valid[t][j + 1]) continue;

        MixturePrediction scores_pred =
            predict_at(model, cache, t, j + 1, cat,
                       std::optional<int>{});  // scores (and all K for anchor-free)
        const int k = sample_component(scores_pred.log_scores, rng);
        choice_log[t][j] = k;

        if (model.mixture_config.paradigm == Paradigm::kAnchorFree) {
          plans[t] = scores_pred.trajectories[k];
        } else if (model.mixture_config.discrete()) {
          plans[t] = anchor_futures(model.anchors, cat, pose, kTauSteps,
                                    working.time_of(cur))[k];
        } else {
          MixturePrediction pred = predict_at(model, cache, t, j + 1, cat, k);
          plans[t] = pred.trajectories.at(0);
        }
      }
      for (int t = 0; t < n_tracks; ++t) {
        if (plans[t].states.empty()) continue;
        for (int i = 0; i < kTauSteps; ++i) {
          working.tracks[t].states[cur + 1 + i] = plans[t].states[i];
          working.tracks[t].states[cur + 1 + i].valid = true;
        }
      }
    }
    out.rollouts.push_back(std::move(working));
    out.choices.push_back(std::move(choice_log));
  }
  return out;
}

namespace {

void put_fixed(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Tiny negatives round to "-0.000000"; canonicalize to the positive form.
  out += (std::strcmp(buf, "-0.000000") == 0) ? "0.000000" : buf;
}

}  // namespace

std::string save_rollout(const Rollout& r, const std::string& scenario_ref) {
  std::string out = "{\"scenario\": \"" + scenario_ref + "\"";
  out += ", \"num_rollouts\": " + std::to_string(r.config.num_rollouts);
  out += ", \"duration\": ";
  put_fixed(out, r.config.duration);
  out += ", \"seed\": " + std::to_string(r.config.seed);
  out += ", \"rollouts\": [";
  for (size_t i = 0; i < r.rollouts.size(); ++i) {
    if (i) out += ", ";
    out += "{\"tracks\": [";
    const Scenario& s = r.rollouts[i];
    for (size_t t = 0; t < s.tracks.size(); ++t) {
      if (t) out += ", ";
      out += "{\"id\": " + std::to_string(s.tracks[t].agent_id) + ", \"states\": [";
      for (size_t j = 0; j < s.tracks[t].states.size(); ++j) {
        if (j) out += ", ";
        const AgentState& st = s.tracks[t].states[j];
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
    out += "], \"choices\": [";
    for (size_t t = 0; t < r.choices[i].size(); ++t) {
      if (t) out += ", ";
      out += "[";
      for (size_t j = 0; j < r.choices[i][t].size(); ++j) {
        if (j) out += ", ";
        out += std::to_string(r.choices[i][t][j]);
      }
      out += "]";
    }
    out += "]}";
  }
  out += "]}\n";
  return out;
}

Rollout load_rollout(const std::string& bytes, const Scenario& scenario,
                     std::string* scenario_ref) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("rollout parse error: ") + e.what());
  }
  Rollout r;
  if (scenario_ref != nullptr) *scenario_ref = doc.value("scenario", "");
  r.config.num_rollouts = doc.at("num_rollouts").get<int>();
  r.config.duration = doc.at("duration").get<double>();
  r.config.seed = doc.at("seed").get<uint64_t>();
  for (const auto& jr : doc.at("rollouts")) {
    Scenario s = scenario;
    const auto& jtracks = jr.at("tracks");
    if (jtracks.size() != s.tracks.size()) {
      throw std::invalid_argument("rollout track count mismatch with scenario");
    }
    for (size_t t = 0; t < s.tracks.size(); ++t) {
      const auto& jstates = jtracks[t].at("states");
      if (jstates.size() != s.tracks[t].states.size()) {
        throw std::invalid_argument("rollout state count mismatch with scenario");
      }
      for (size_t j = 0; j < s.tracks[t].states.size(); ++j) {
        AgentState st;
        st.x = jstates[j][0].get<double>();
        st.y = jstates[j][1].get<double>();
        st.heading = jstates[j][2].get<double>();
        st.valid = jstates[j][3].get<double>() != 0.0;
        s.tracks[t].states[j] = st;
      }
    }
    std::vector<std::vector<int>> choices;
    for (const auto& jt : jr.at("choices")) {
      choices.push_back(jt.get<std::vector<int>>());
    }
    r.rollouts.push_back(std::move(s));
    r.choices.push_back(std::move(choices));
  }
  return r;
}

void write_rollout_file(const Rollout& r, const std::string& scenario_ref,
                        const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << save_rollout(r, scenario_ref);
}

Rollout read_rollout_file(const std::string& path, const Scenario& scenario,
                          std::string* scenario_ref) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_rollout(ss.str(), scenario, scenario_ref);
}

Rollout replay_ground_truth(const Scenario& scenario, int num_rollouts) {
  Rollout r;
  r.config.num_rollouts = num_rollouts;
  r.config.duration = scenario.future_steps * scenario.dt;
  const int steps_j = scenario.future_steps / kTauSteps;
  for (int i = 0; i < num_rollouts; ++i) {
    r.rollouts.push_back(scenario);
    r.choices.emplace_back(scenario.tracks.size(), std::vector<int>(steps_j, -1));
  }
  return r;
}

}  // namespace unimm
