#include "unimm/runconfig.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "unimm/model.hpp"

namespace unimm {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("unknown config key \"" + key + "\" in " + where);
    }
  }
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
  RunConfig cfg;
  reject_unknown(doc, {"seed", "threads", "world", "mixture", "model", "posterior",
                       "train", "rollout"},
                 "top level");
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.threads = doc.value("threads", cfg.threads);
  if (doc.contains("world")) {
    const auto& w = doc.at("world");
    reject_unknown(w, {"n_vehicles", "n_pedestrians", "n_cyclists", "fork_angle_deg",
                       "vehicle_cruise_min", "vehicle_cruise_max"},
                   "world");
    cfg.world.n_vehicles = w.value("n_vehicles", cfg.world.n_vehicles);
    cfg.world.n_pedestrians = w.value("n_pedestrians", cfg.world.n_pedestrians);
    cfg.world.n_cyclists = w.value("n_cyclists", cfg.world.n_cyclists);
    cfg.world.fork_angle_deg = w.value("fork_angle_deg", cfg.world.fork_angle_deg);
    cfg.world.vehicle_cruise_min = w.value("vehicle_cruise_min", cfg.world.vehicle_cruise_min);
    cfg.world.vehicle_cruise_max = w.value("vehicle_cruise_max", cfg.world.vehicle_cruise_max);
  }
  if (doc.contains("mixture")) {
    const auto& m = doc.at("mixture");
    reject_unknown(m, {"k", "paradigm", "continuous_regression", "t_pred", "t_zstar"},
                   "mixture");
    nlohmann::json merged = mixture_config_to_json(cfg.mixture);
    merged.update(m);
    cfg.mixture = mixture_config_from_json(merged);
  }
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, {"embed_dim", "heads", "blocks", "rpe_hidden", "token_hidden",
                       "af_query_dim", "af_score_hidden", "af_reg_hidden",
                       "ab_score_hidden", "ab_anchor_hidden", "ab_reg_hidden"},
                   "model");
    nlohmann::json merged = model_config_to_json(cfg.model);
    merged.update(m);
    cfg.model = model_config_from_json(merged);
  }
  if (doc.contains("posterior")) {
    const auto& p = doc.at("posterior");
    reject_unknown(p, {"t_post", "execution_threshold", "approximate"}, "posterior");
    cfg.posterior.t_post = p.value("t_post", cfg.posterior.t_post);
    cfg.posterior.execution_threshold =
        p.value("execution_threshold", cfg.posterior.execution_threshold);
    cfg.posterior.approximate = p.value("approximate", cfg.posterior.approximate);
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    reject_unknown(t, {"epochs", "batch_scenes", "data_mode", "base_lr", "weight_decay"},
                   "train");
    cfg.epochs = t.value("epochs", cfg.epochs);
    cfg.batch_scenes = t.value("batch_scenes", cfg.batch_scenes);
    if (t.contains("data_mode")) {
      const std::string mode = t.at("data_mode").get<std::string>();
      if (mode == "open_loop") {
        cfg.data_mode = TrainConfig::DataMode::kOpenLoop;
      } else if (mode == "closed_loop") {
        cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
      } else {
        throw std::invalid_argument("unknown data_mode: " + mode);
      }
    }
    cfg.base_lr = t.value("base_lr", cfg.base_lr);
    cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
  }
  if (doc.contains("rollout")) {
    const auto& r = doc.at("rollout");
    reject_unknown(r, {"num_rollouts", "duration"}, "rollout");
    cfg.num_rollouts = r.value("num_rollouts", cfg.num_rollouts);
    cfg.rollout_duration = r.value("duration", cfg.rollout_duration);
  }
  return cfg;
}

nlohmann::ordered_json dump_run_config(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["world"] = {{"n_vehicles", cfg.world.n_vehicles},
                {"n_pedestrians", cfg.world.n_pedestrians},
                {"n_cyclists", cfg.world.n_cyclists},
                {"fork_angle_deg", cfg.world.fork_angle_deg},
                {"vehicle_cruise_min", cfg.world.vehicle_cruise_min},
                {"vehicle_cruise_max", cfg.world.vehicle_cruise_max}};
  j["mixture"] = mixture_config_to_json(cfg.mixture);
  j["model"] = model_config_to_json(cfg.model);
  j["posterior"] = {{"t_post", cfg.posterior.t_post},
                    {"execution_threshold", cfg.posterior.execution_threshold},
                    {"approximate", cfg.posterior.approximate}};
  j["train"] = {{"epochs", cfg.epochs},
                {"batch_scenes", cfg.batch_scenes},
                {"data_mode", cfg.data_mode == TrainConfig::DataMode::kOpenLoop
                                  ? "open_loop"
                                  : "closed_loop"},
                {"base_lr", cfg.base_lr},
                {"weight_decay", cfg.weight_decay}};
  j["rollout"] = {{"num_rollouts", cfg.num_rollouts},
                  {"duration", cfg.rollout_duration}};
  return j;
}

RunConfig read_run_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json doc = nlohmann::json::parse(f);
  return parse_run_config(doc);
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "discrete") {
    cfg.mixture.paradigm = Paradigm::kAnchorBased;
    cfg.mixture.continuous_regression = false;
    cfg.mixture.k = 2048;
    cfg.mixture.t_pred = 0.5;
    cfg.mixture.t_zstar = 0.5;
    cfg.posterior.t_post = 0.5;
    cfg.posterior.approximate = true;
    cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
  } else if (name == "anchor-free") {
    cfg.mixture.paradigm = Paradigm::kAnchorFree;
    cfg.mixture.continuous_regression = true;
    cfg.mixture.k = 6;
    cfg.mixture.t_pred = 4.0;
    cfg.mixture.t_zstar = 4.0;
    cfg.posterior.t_post = 0.5;
    cfg.posterior.approximate = false;
    cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
  } else if (name == "anchor-based-0.5s") {
    cfg.mixture.paradigm = Paradigm::kAnchorBased;
    cfg.mixture.continuous_regression = true;
    cfg.mixture.k = 2048;
    cfg.mixture.t_pred = 0.5;
    cfg.mixture.t_zstar = 0.5;
    cfg.posterior.t_post = 0.5;
    cfg.posterior.approximate = true;
    cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
  } else if (name == "anchor-based-4s") {
    cfg.mixture.paradigm = Paradigm::kAnchorBased;
    cfg.mixture.continuous_regression = true;
    cfg.mixture.k = 2048;
    cfg.mixture.t_pred = 4.0;
    cfg.mixture.t_zstar = 0.5;
    cfg.posterior.t_post = 0.5;
    cfg.posterior.approximate = true;
    cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.batch_scenes = cfg.batch_scenes;
  t.seed = cfg.seed;
  t.mode = cfg.data_mode;
  t.mixture = cfg.mixture;
  t.posterior = cfg.posterior;
  t.model = cfg.model;
  t.base_lr = cfg.base_lr;
  t.weight_decay = cfg.weight_decay;
  return t;
}

}  // namespace unimm
