// unimm: desk-scale mixture-model multi-agent simulation laboratory.
//
// Subcommands: gen-data, anchors, train, rollout, eval, equiv-check, plot,
// config. Exit codes: 0 success, 1 property-check failure, 2 usage/IO error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unimm/closedloop.hpp"
#include "unimm/metrics.hpp"
#include "unimm/model.hpp"
#include "unimm/runconfig.hpp"
#include "unimm/scenario.hpp"
#include "unimm/simulator.hpp"
#include "unimm/svgplot.hpp"
#include "unimm/synthworld.hpp"
#include "unimm/trainer.hpp"

namespace fs = std::filesystem;
using namespace unimm;

namespace {

// Deterministic chunked parallel map: results are committed by index, so any
// thread count yields identical artifacts.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string scenario_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scenario_%04d.json", index);
  return buf;
}

std::string rollout_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rollout_%04d.json", index);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<Scenario> load_dataset(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::vector<std::string> files;
  if (fs::exists(manifest)) {
    const nlohmann::json doc = nlohmann::json::parse(read_text(manifest.string()));
    for (const auto& f : doc.at("files")) files.push_back(f.get<std::string>());
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("scenario_", 0) == 0 && entry.path().extension() == ".json") {
        files.push_back(name);
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw std::runtime_error("no scenarios found in " + dir);
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const std::string& f : files) {
    out.push_back(read_scenario_file((fs::path(dir) / f).string()));
  }
  return out;
}

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  // mixture / posterior / train overrides
  std::optional<int> k;
  std::optional<std::string> paradigm;
  std::optional<bool> regression;
  std::optional<double> t_pred, t_zstar, t_post, threshold;
  std::optional<bool> approximate;
  std::optional<std::string> data_mode;
  std::optional<int> epochs, batch;
  std::optional<double> lr;

  void add_basic(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "random seed (default: $UNIMM_SEED or 0)");
    cmd->add_option("--threads", threads, "worker threads (1 = bit-deterministic)");
  }

  void add_to(CLI::App* cmd) {
    add_basic(cmd);
    cmd->add_option("--preset", preset,
                    "discrete | anchor-free | anchor-based-0.5s | anchor-based-4s");
    cmd->add_option("--k", k, "mixture components");
    cmd->add_option("--paradigm", paradigm, "anchor_free | anchor_based");
    cmd->add_option("--regression", regression, "continuous regression on/off");
    cmd->add_option("--t-pred", t_pred, "prediction horizon, seconds");
    cmd->add_option("--t-zstar", t_zstar, "positive matching horizon, seconds");
    cmd->add_option("--t-post", t_post, "posterior planning horizon, seconds");
    cmd->add_option("--threshold", threshold, "plan execution threshold, meters");
    cmd->add_option("--approximate", approximate, "approximate posterior policy");
    cmd->add_option("--data-mode", data_mode, "open_loop | closed_loop");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch", batch, "scenes per optimization step");
    cmd->add_option("--lr", lr, "base learning rate of the cosine schedule");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (const char* env = std::getenv("UNIMM_SEED")) {
      cfg.seed = std::strtoull(env, nullptr, 10);
    }
    if (!config_path.empty()) {
      const uint64_t env_seed = cfg.seed;
      cfg = read_run_config_file(config_path);
      (void)env_seed;  // config file wins over the env default
    }
    if (!preset.empty()) apply_preset(cfg, preset);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (k) cfg.mixture.k = *k;
    if (paradigm) {
      if (*paradigm == "anchor_free") cfg.mixture.paradigm = Paradigm::kAnchorFree;
      else if (*paradigm == "anchor_based") cfg.mixture.paradigm = Paradigm::kAnchorBased;
      else throw CLI::ValidationError("--paradigm", "unknown paradigm " + *paradigm);
    }
    if (regression) cfg.mixture.continuous_regression = *regression;
    if (t_pred) cfg.mixture.t_pred = *t_pred;
    if (t_zstar) cfg.mixture.t_zstar = *t_zstar;
    if (t_post) cfg.posterior.t_post = *t_post;
    if (threshold) cfg.posterior.execution_threshold = *threshold;
    if (approximate) cfg.posterior.approximate = *approximate;
    if (data_mode) {
      if (*data_mode == "open_loop") cfg.data_mode = TrainConfig::DataMode::kOpenLoop;
      else if (*data_mode == "closed_loop") cfg.data_mode = TrainConfig::DataMode::kClosedLoop;
      else throw CLI::ValidationError("--data-mode", "unknown mode " + *data_mode);
    }
    if (epochs) cfg.epochs = *epochs;
    if (batch) cfg.batch_scenes = *batch;
    if (lr) cfg.base_lr = *lr;
    return cfg;
  }
};

int cmd_gen_data(const CommonOpts& common, const std::string& out_dir, int count) {
  const RunConfig cfg = common.resolve();
  if (count < 1) throw std::runtime_error("--count must be >= 1");
  fs::create_directories(out_dir);
  const std::vector<Scenario> dataset =
      generate_synthetic_dataset(cfg.world, count, cfg.seed);
  parallel_for(count, cfg.threads, [&](int i) {
    write_scenario_file(dataset[i], (fs::path(out_dir) / scenario_filename(i)).string());
  });
  nlohmann::ordered_json manifest;
  manifest["seed"] = cfg.seed;
  manifest["count"] = count;
  manifest["world"] = dump_run_config(cfg)["world"];
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (int i = 0; i < count; ++i) files.push_back(scenario_filename(i));
  manifest["files"] = files;
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << count << " scenarios to " << out_dir << "\n";
  return 0;
}

int cmd_anchors(const CommonOpts& common, const std::string& data_dir,
                const std::string& out_file, int k, double horizon) {
  const RunConfig cfg = common.resolve();
  const std::vector<Scenario> dataset = load_dataset(data_dir);
  const AnchorSet set = build_anchor_set(dataset, k, cfg.seed, horizon);
  write_anchor_file(set, out_file);
  std::cout << "wrote " << set.anchors.size() << " categories x " << k
            << " anchors to " << out_file << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& anchors_file, const std::string& out_prefix,
              bool dump_config_only) {
  const RunConfig cfg = common.resolve();
  if (dump_config_only) {
    std::cout << dump_run_config(cfg).dump(2) << "\n";
    return 0;
  }
  const std::vector<Scenario> dataset = load_dataset(data_dir);
  AnchorSet anchors;
  const bool needs_anchors = cfg.mixture.paradigm == Paradigm::kAnchorBased;
  if (needs_anchors) {
    if (anchors_file.empty()) throw std::runtime_error("anchor-based training needs --anchors");
    anchors = read_anchor_file(anchors_file);
    if (anchors.k != cfg.mixture.k) {
      throw std::runtime_error("anchor file has k=" + std::to_string(anchors.k) +
                               " but config wants k=" + std::to_string(cfg.mixture.k));
    }
  }
  const TrainConfig tc = to_train_config(cfg);
  TrainResult result = train(dataset, needs_anchors ? &anchors : nullptr, tc);
  save_model(result.model, out_prefix);
  write_text(out_prefix + "_loss.csv", trace_to_csv(result.trace));
  std::cout << "trained " << result.trace.size() << " steps ("
            << result.model.store.param_count() << " parameters); checkpoint at "
            << out_prefix << ".json/.bin\n";
  return 0;
}

int cmd_rollout(const CommonOpts& common, const std::string& data_dir,
                const std::string& checkpoint, const std::string& anchors_file,
                const std::string& out_dir, int num_rollouts, double duration,
                bool debug_incremental, int max_scenes) {
  const RunConfig cfg = common.resolve();
  const std::vector<Scenario> dataset = load_dataset(data_dir);
  const int n = max_scenes > 0 ? std::min<int>(max_scenes, dataset.size())
                               : static_cast<int>(dataset.size());
  BehaviorModel model = load_model(checkpoint);
  if (model.mixture_config.paradigm == Paradigm::kAnchorBased) {
    if (anchors_file.empty()) throw std::runtime_error("anchor-based rollout needs --anchors");
    model.anchors = read_anchor_file(anchors_file);
  }
  fs::create_directories(out_dir);
  RolloutConfig rc;
  rc.num_rollouts = num_rollouts > 0 ? num_rollouts : cfg.num_rollouts;
  rc.duration = duration > 0 ? duration : cfg.rollout_duration;
  rc.seed = cfg.seed;
  rc.debug_check_incremental = debug_incremental;
  for (int i = 0; i < n; ++i) {
    const Rollout r = rollout_scenario(model, dataset[i], rc);
    write_rollout_file(r, scenario_filename(i),
                       (fs::path(out_dir) / rollout_filename(i)).string());
  }
  std::cout << "wrote " << n << " rollout files to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& data_dir,
             const std::string& rollout_dir, const std::string& out_file,
             const std::string& csv_file, bool replay_gt, int replay_count,
             int max_scenes) {
  (void)common;
  const std::vector<Scenario> dataset = load_dataset(data_dir);
  const int n = max_scenes > 0 ? std::min<int>(max_scenes, dataset.size())
                               : static_cast<int>(dataset.size());
  std::vector<Scenario> scenes(dataset.begin(), dataset.begin() + n);
  std::vector<Rollout> rollouts;
  for (int i = 0; i < n; ++i) {
    if (replay_gt) {
      rollouts.push_back(replay_ground_truth(scenes[i], replay_count));
    } else {
      rollouts.push_back(read_rollout_file(
          (fs::path(rollout_dir) / rollout_filename(i)).string(), scenes[i]));
    }
  }
  const RealismReport report = evaluate_realism(scenes, rollouts);
  write_text(out_file, report_to_json(report));
  if (!csv_file.empty()) write_text(csv_file, report_to_csv(report));
  std::printf("meta %.4f | kinematic %.4f | interactive %.4f | map %.4f | minADE %.4f\n",
              report.meta, report.kinematic.value_or(0.0),
              report.interactive.value_or(0.0), report.map_based.value_or(0.0),
              report.min_ade);
  return 0;
}

int cmd_equiv_check(const CommonOpts& common, const std::string& data_dir,
                    const std::string& anchors_file, const std::string& out_file) {
  (void)common;
  const std::vector<Scenario> dataset = load_dataset(data_dir);
  const AnchorSet anchors = read_anchor_file(anchors_file);
  nlohmann::ordered_json report;
  report["scenarios"] = nlohmann::ordered_json::array();
  bool all_equal = true;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const EquivalenceReport r = check_tokenization_equivalence(dataset[i], anchors);
    nlohmann::ordered_json entry;
    entry["scenario"] = scenario_filename(static_cast<int>(i));
    entry["equal"] = r.equal;
    if (!r.equal) {
      entry["divergence_track"] = r.divergence_track;
      entry["divergence_step_index"] = r.divergence_step_index;
      all_equal = false;
    }
    nlohmann::ordered_json tokens = nlohmann::ordered_json::object();
    for (size_t t = 0; t < r.tokens.tokens.size(); ++t) {
      tokens[std::to_string(dataset[i].tracks[t].agent_id)] = r.tokens.tokens[t];
    }
    entry["tokens"] = tokens;
    report["scenarios"].push_back(entry);
  }
  report["equal"] = all_equal;
  if (!out_file.empty()) write_text(out_file, report.dump(2) + "\n");
  std::cout << (all_equal ? "equivalence holds on all scenarios\n"
                          : "DIVERGENCE detected; see report\n");
  return all_equal ? 0 : 1;
}

int cmd_plot(const std::string& loss_csv, const std::string& report_json,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (!loss_csv.empty()) {
    std::ifstream f(loss_csv);
    if (!f) throw std::runtime_error("cannot open " + loss_csv);
    std::string line;
    std::getline(f, line);  // header
    PlotSeries loss{"loss", {}, {}}, reg{"regression", {}, {}}, cls{"classification", {}, {}};
    while (std::getline(f, line)) {
      double s, l, r, c;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &s, &l, &r, &c) == 4) {
        loss.x.push_back(s);
        loss.y.push_back(l);
        reg.x.push_back(s);
        reg.y.push_back(r);
        cls.x.push_back(s);
        cls.y.push_back(c);
      }
    }
    write_text((fs::path(out_dir) / "loss.svg").string(),
               line_chart_svg({loss, reg, cls}, "training loss", "step", "loss"));
  }
  if (!report_json.empty()) {
    const RealismReport r = report_from_json(read_text(report_json));
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [name, v] : r.feature_scores) bars.emplace_back(name, v);
    if (r.kinematic) bars.emplace_back("kinematic", *r.kinematic);
    if (r.interactive) bars.emplace_back("interactive", *r.interactive);
    if (r.map_based) bars.emplace_back("map_based", *r.map_based);
    bars.emplace_back("meta", r.meta);
    write_text((fs::path(out_dir) / "realism.svg").string(),
               bar_chart_svg(bars, "realism scores"));
    std::string csv = "metric,value\n";
    for (const auto& [name, v] : bars) csv += name + "," + std::to_string(v) + "\n";
    write_text((fs::path(out_dir) / "realism.csv").string(), csv);
  }
  std::cout << "plots written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unimm: mixture-model behavior simulation laboratory"};
  app.require_subcommand(1);
  int rc = 0;

  CommonOpts gen_common;
  std::string gen_out = "data";
  int gen_count = 8;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic scenario dataset");
  gen_common.add_basic(gen);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", gen_count, "number of scenarios")->required();
  gen->callback([&] { rc = cmd_gen_data(gen_common, gen_out, gen_count); });

  CommonOpts anc_common;
  std::string anc_data, anc_out = "anchors.json";
  int anc_k = 64;
  double anc_horizon = 8.0;
  auto* anc = app.add_subcommand("anchors", "k-means anchor trajectories per category");
  anc_common.add_basic(anc);
  anc->add_option("--data", anc_data, "dataset directory")->required();
  anc->add_option("--out", anc_out, "anchor file")->required();
  anc->add_option("--k", anc_k, "anchors per category")->required();
  anc->add_option("--horizon", anc_horizon, "anchor horizon, seconds");
  anc->callback([&] { rc = cmd_anchors(anc_common, anc_data, anc_out, anc_k, anc_horizon); });

  CommonOpts train_common;
  std::string train_data, train_anchors, train_out = "model";
  bool train_dump = false;
  auto* tr = app.add_subcommand("train", "train a behavior model");
  train_common.add_to(tr);
  tr->add_option("--data", train_data, "dataset directory");
  tr->add_option("--anchors", train_anchors, "anchor file (anchor-based models)");
  tr->add_option("--out", train_out, "checkpoint prefix");
  tr->add_flag("--dump-config", train_dump, "print the resolved config and exit");
  tr->callback([&] {
    if (!train_dump && train_data.empty()) {
      throw CLI::ValidationError("--data", "required unless --dump-config is given");
    }
    rc = cmd_train(train_common, train_data, train_anchors, train_out, train_dump);
  });

  CommonOpts roll_common;
  std::string roll_data, roll_ckpt, roll_anchors, roll_out = "rollouts";
  int roll_n = 0, roll_max = 0;
  double roll_duration = 0.0;
  bool roll_debug = false;
  auto* ro = app.add_subcommand("rollout", "autoregressive closed-loop simulation");
  roll_common.add_basic(ro);
  ro->add_option("--data", roll_data, "dataset directory")->required();
  ro->add_option("--checkpoint", roll_ckpt, "checkpoint prefix")->required();
  ro->add_option("--anchors", roll_anchors, "anchor file");
  ro->add_option("--out", roll_out, "output directory")->required();
  ro->add_option("--rollouts", roll_n, "rollouts per scenario (default from config)");
  ro->add_option("--duration", roll_duration, "rollout duration, seconds");
  ro->add_option("--max-scenes", roll_max, "limit the number of scenarios");
  ro->add_flag("--debug-incremental", roll_debug,
               "verify incremental encoding against full re-encode");
  ro->callback([&] {
    rc = cmd_rollout(roll_common, roll_data, roll_ckpt, roll_anchors, roll_out, roll_n,
                     roll_duration, roll_debug, roll_max);
  });

  CommonOpts eval_common;
  std::string eval_data, eval_rollouts, eval_out = "report.json", eval_csv;
  bool eval_replay = false;
  int eval_replay_count = 1, eval_max = 0;
  auto* ev = app.add_subcommand("eval", "WOSAC-style realism evaluation");
  eval_common.add_basic(ev);
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--rollouts", eval_rollouts, "rollout directory");
  ev->add_option("--out", eval_out, "report JSON path");
  ev->add_option("--csv", eval_csv, "optional CSV summary path");
  ev->add_flag("--replay-gt", eval_replay, "score ground truth replayed as rollouts");
  ev->add_option("--replay-count", eval_replay_count, "rollout copies in --replay-gt");
  ev->add_option("--max-scenes", eval_max, "limit the number of scenarios");
  ev->callback([&] {
    if (!eval_replay && eval_rollouts.empty()) {
      throw CLI::ValidationError("--rollouts", "required unless --replay-gt is given");
    }
    rc = cmd_eval(eval_common, eval_data, eval_rollouts, eval_out, eval_csv, eval_replay,
                  eval_replay_count, eval_max);
  });

  CommonOpts eq_common;
  std::string eq_data, eq_anchors, eq_out = "equiv_report.json";
  auto* eq = app.add_subcommand(
      "equiv-check", "rolling tokenization vs closed-loop generation identity");
  eq_common.add_basic(eq);
  eq->add_option("--data", eq_data, "dataset directory")->required();
  eq->add_option("--anchors", eq_anchors, "anchor file")->required();
  eq->add_option("--out", eq_out, "report JSON path");
  eq->callback([&] { rc = cmd_equiv_check(eq_common, eq_data, eq_anchors, eq_out); });

  std::string plot_loss, plot_report, plot_out = "plots";
  auto* pl = app.add_subcommand("plot", "SVG charts from loss traces and reports");
  pl->add_option("--loss", plot_loss, "loss CSV from train");
  pl->add_option("--report", plot_report, "realism report JSON");
  pl->add_option("--out", plot_out, "output directory");
  pl->callback([&] {
    if (plot_loss.empty() && plot_report.empty()) {
      throw CLI::ValidationError("--loss/--report", "nothing to plot");
    }
    rc = cmd_plot(plot_loss, plot_report, plot_out);
  });

  CommonOpts cfg_common;
  bool cfg_dump = false;
  auto* cf = app.add_subcommand("config", "inspect configuration");
  cfg_common.add_to(cf);
  cf->add_flag("--dump-defaults", cfg_dump, "print the resolved config document");
  cf->callback([&] {
    std::cout << dump_run_config(cfg_common.resolve()).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
