// Acceptance suite: one criterion per --criterion N (1..11), each printing a
// single PASS/FAIL line. Without arguments every criterion runs in order.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "unimm/closedloop.hpp"
#include "unimm/metrics.hpp"
#include "unimm/model.hpp"
#include "unimm/runconfig.hpp"
#include "unimm/scenario.hpp"
#include "unimm/simulator.hpp"
#include "unimm/synthworld.hpp"
#include "unimm/trainer.hpp"

namespace fs = std::filesystem;
using namespace unimm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return "<missing:" + path + ">";
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UNIMM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

TrajectorySegment random_segment(std::mt19937_64& rng, int steps, double spread) {
  TrajectorySegment seg;
  seg.start_time = 0.1;
  for (int i = 0; i < steps; ++i) {
    AgentState s;
    s.x = uniform(rng, -spread, spread);
    s.y = uniform(rng, -spread, spread);
    s.heading = uniform(rng, -3.1, 3.1);
    s.valid = true;
    seg.states.push_back(s);
  }
  return seg;
}

// ---------------------------------------------------------------------------
// C1: H1 equivalence through the CLI on 50 scenarios with K in {4, 64}.

bool criterion_1() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "unimm_c1";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = (dir / "data").string();

  // Two pedestrians and cyclists per scene keep every category above 64
  // distinct trajectories for the K=64 anchor build.
  WorldConfig world;
  world.n_pedestrians = 2;
  world.n_cyclists = 2;
  const auto dataset = generate_synthetic_dataset(world, 50, 4242);
  fs::create_directories(data);
  for (size_t i = 0; i < dataset.size(); ++i) {
    char name[40];
    std::snprintf(name, sizeof(name), "scenario_%04d.json", static_cast<int>(i));
    write_scenario_file(dataset[i], (fs::path(data) / name).string());
  }

  bool ok = true;
  for (int k : {4, 64}) {
    const std::string anchors =
        (dir / ("anchors" + std::to_string(k) + ".json")).string();
    const AnchorSet set = build_anchor_set(dataset, k, 7);
    write_anchor_file(set, anchors);
    const int rc = run_cli("equiv-check --data " + data + " --anchors " + anchors +
                           " --out " + (dir / "eq.json").string());
    if (rc != 0) ok = false;
    // Exact in-memory identity, zero tolerance.
    for (const Scenario& s : dataset) {
      const EquivalenceReport r = check_tokenization_equivalence(s, set);
      if (!r.equal) ok = false;
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 60.0) ok = false;
  std::printf(
      "C1 %s - H1 rolling tokenization == closed-loop generation, 50 scenarios, K in {4,64} (%.1f s)\n",
      ok ? "PASS" : "FAIL", dt);
  return ok;
}

// ---------------------------------------------------------------------------
// C2: analytic vs central finite-difference gradients, >= 100 instances.

struct GradCase {
  std::function<double(nn::ParamStore&, bool)> eval;  // loss; backward if true
  nn::ParamStore store{0};
};

double fd_check(GradCase& c, std::mt19937_64& rng, int probes_per_param = 6) {
  c.store.zero_grads();
  c.eval(c.store, true);
  double worst = 0.0;
  for (auto& [name, tensor] : c.store.entries()) {
    if (!tensor.requires_grad) continue;
    const Eigen::MatrixXd analytic =
        tensor.grad.size()
            ? tensor.grad
            : Eigen::MatrixXd::Zero(tensor.value.rows(), tensor.value.cols());
    for (int p = 0; p < probes_per_param; ++p) {
      const int r = static_cast<int>(rng() % tensor.value.rows());
      const int col = static_cast<int>(rng() % tensor.value.cols());
      const double saved = tensor.value(r, col);
      const double eps = 1e-5;
      tensor.value(r, col) = saved + eps;
      const double up = c.eval(c.store, false);
      tensor.value(r, col) = saved - eps;
      const double down = c.eval(c.store, false);
      tensor.value(r, col) = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(fd), std::abs(analytic(r, col)), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic(r, col)) / denom);
    }
  }
  return worst;
}

bool criterion_2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int instances = 0;
  double worst = 0.0;

  auto fill = [&](nn::Tensor& t, double lo, double hi) {
    for (int i = 0; i < t.value.rows(); ++i) {
      for (int j = 0; j < t.value.cols(); ++j) t.value(i, j) = uniform(rng, lo, hi);
    }
  };

  using Builder = std::function<nn::Var(nn::Graph&, nn::ParamStore&)>;
  auto elementwise_case = [&](const Builder& build, uint64_t seed) {
    GradCase c;
    c.store = nn::ParamStore(seed);
    fill(c.store.weight("x", 2, 5), 0.35, 1.9);
    fill(c.store.weight("y", 2, 5), 0.35, 1.9);
    c.eval = [build](nn::ParamStore& s, bool backward) {
      nn::Graph g(backward);
      nn::Var loss = build(g, s);
      const double v = g.value(loss)(0, 0);
      if (backward) g.backward(loss);
      return v;
    };
    return c;
  };

  const std::vector<std::pair<std::string, Builder>> unary_cases = {
      {"linear",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.matmul(g.matmul_nt(g.param(s, "x"), g.param(s, "y")),
                               g.param(s, "y")));
       }},
      {"relu",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.relu(g.sub(g.param(s, "x"), g.param(s, "y"))));
       }},
      {"softplus",
       [](nn::Graph& g, nn::ParamStore& s) { return g.sum(g.softplus(g.param(s, "x"))); }},
      {"abs",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.abs(g.sub(g.param(s, "x"), g.param(s, "y"))));
       }},
      {"cos",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.cos(g.mul(g.param(s, "x"), g.param(s, "y"))));
       }},
      {"div_log",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.log(g.div(g.param(s, "x"), g.param(s, "y"))));
       }},
      {"softmax",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.mul(g.softmax_rows(g.param(s, "x")), g.param(s, "y")));
       }},
      {"log_softmax",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.mul(g.log_softmax_rows(g.param(s, "x")), g.param(s, "y")));
       }},
      {"clamp_max",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(g.clamp_max(g.mul(g.param(s, "x"), g.param(s, "x")), 1.5));
       }},
      {"log_bessel_i0",
       [](nn::Graph& g, nn::ParamStore& s) {
         return g.sum(
             g.log_bessel_i0(g.add_scalar(g.mul(g.param(s, "x"), g.param(s, "y")), 0.2)));
       }},
      {"concat_slice",
       [](nn::Graph& g, nn::ParamStore& s) {
         nn::Var cat = g.concat_cols(g.param(s, "x"), g.param(s, "y"));
         return g.sum(g.mul(g.slice_cols(cat, 2, 5), g.slice_cols(cat, 4, 5)));
       }},
  };

  for (const auto& [name, build] : unary_cases) {
    for (int i = 0; i < 7; ++i) {
      GradCase c = elementwise_case(build, 100 + instances);
      worst = std::max(worst, fd_check(c, rng));
      ++instances;
    }
  }

  for (int i = 0; i < 6; ++i) {
    GradCase c;
    c.store = nn::ParamStore(300 + i);
    fill(c.store.weight("x", 3, 6), -1.5, 1.5);
    fill(c.store.weight("gain", 1, 6), 0.5, 1.5);
    fill(c.store.weight("bias", 1, 6), -0.5, 0.5);
    c.eval = [](nn::ParamStore& s, bool backward) {
      nn::Graph g(backward);
      nn::Var ln =
          g.layer_norm_rows(g.param(s, "x"), g.param(s, "gain"), g.param(s, "bias"));
      nn::Var loss = g.sum(g.mul(ln, ln));
      const double v = g.value(loss)(0, 0);
      if (backward) g.backward(loss);
      return v;
    };
    worst = std::max(worst, fd_check(c, rng));
    ++instances;
  }

  for (int i = 0; i < 6; ++i) {
    GradCase c;
    c.store = nn::ParamStore(400 + i);
    fill(c.store.weight("q", 2, 8), -1, 1);
    fill(c.store.weight("k", 4, 8), -1, 1);
    fill(c.store.weight("v", 4, 8), -1, 1);
    fill(c.store.weight("r0", 4, 8), -1, 1);
    fill(c.store.weight("r1", 4, 8), -1, 1);
    c.eval = [](nn::ParamStore& s, bool backward) {
      nn::Graph g(backward);
      nn::Var out =
          nn::attention_forward(g, g.param(s, "q"), g.param(s, "k"), g.param(s, "v"),
                                {g.param(s, "r0"), g.param(s, "r1")}, 4);
      nn::Var loss = g.sum(g.mul(out, out));
      const double v = g.value(loss)(0, 0);
      if (backward) g.backward(loss);
      return v;
    };
    worst = std::max(worst, fd_check(c, rng));
    ++instances;
  }

  // Both loss modes through the full decoders.
  AnchorSet toy_anchors;
  toy_anchors.k = 3;
  toy_anchors.horizon_steps = 80;
  {
    std::vector<std::vector<AgentState>> trajs;
    for (int k = 0; k < 3; ++k) {
      std::vector<AgentState> t;
      t.push_back({0, 0, 0, true});
      for (int i = 1; i <= 80; ++i) {
        t.push_back({0.4 * i * 0.1, 0.15 * (k - 1) * i * 0.1, 0.0, true});
      }
      trajs.push_back(std::move(t));
    }
    toy_anchors.anchors[AgentCategory::kVehicle] = trajs;
  }

  for (int mode = 0; mode < 3; ++mode) {  // 0: af reg, 1: ab reg, 2: discrete CE
    for (int i = 0; i < 6; ++i) {
      GradCase c;
      c.store = nn::ParamStore(500 + 10 * mode + i);
      ModelConfig mc;
      mc.ab_anchor_hidden = 32;  // keep finite differencing affordable
      mc.ab_reg_hidden = 32;
      Eigen::MatrixXd emb(1, mc.embed_dim);
      for (int j = 0; j < mc.embed_dim; ++j) emb(0, j) = uniform(rng, -1, 1);
      TrajectorySegment y;
      y.start_time = 0.1;
      for (int j = 0; j < 5; ++j) {
        y.states.push_back({0.045 * (j + 1), 0.007 * j, 0.04 * j, true});
      }
      MixtureConfig cfg;
      cfg.k = 3;
      cfg.t_pred = 0.5;
      cfg.t_zstar = 0.5;
      cfg.paradigm = mode == 0 ? Paradigm::kAnchorFree : Paradigm::kAnchorBased;
      cfg.continuous_regression = mode != 2;
      const AnchorSet& anchors = toy_anchors;
      c.eval = [emb, y, cfg, mc, &anchors](nn::ParamStore& s, bool backward) {
        nn::Graph g(backward);
        DecodeTape tape;
        if (cfg.paradigm == Paradigm::kAnchorFree) {
          tape = decode_anchor_free(g, s, mc, cfg, g.constant(emb));
        } else {
          tape = decode_anchor_based(g, s, mc, cfg, g.constant(emb), anchors,
                                     AgentCategory::kVehicle,
                                     cfg.continuous_regression ? std::optional<int>(1)
                                                               : std::nullopt);
        }
        const LossTerms lt = training_loss(g, tape, 1, y, cfg);
        const double v = g.value(lt.total)(0, 0);
        if (backward) g.backward(lt.total);
        return v;
      };
      c.eval(c.store, false);  // create parameters before probing
      worst = std::max(worst, fd_check(c, rng, 4));
      ++instances;
    }
  }

  const double dt = seconds_since(t0);
  const bool ok = instances >= 100 && worst <= 1e-4 && dt < 120.0;
  std::printf("C2 %s - gradient check, %d instances, max rel err %.2e (%.1f s)\n",
              ok ? "PASS" : "FAIL", instances, worst, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// C3: Laplace and von Mises densities integrate to 1 within 1e-6.

double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  if (n % 2 == 1) ++n;
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

bool criterion_3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(33);
  double worst = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    const double loc = uniform(rng, -5, 5);
    const double b = uniform(rng, 1.5e-3, 3.0);
    auto lap = [&](double y) { return std::exp(-laplace_nll(y, loc, b)); };
    const double lap_mass =
        simpson(lap, loc - 60 * b, loc, 40000) + simpson(lap, loc, loc + 60 * b, 40000);
    worst = std::max(worst, std::abs(lap_mass - 1.0));

    const double mu = uniform(rng, -3, 3);
    const double kappa = uniform(rng, 1e-2, 100.0);
    auto vm = [&](double th) { return std::exp(-von_mises_nll(th, mu, kappa)); };
    const double vm_mass = simpson(vm, -M_PI, M_PI, 40000);
    worst = std::max(worst, std::abs(vm_mass - 1.0));
  }
  const bool ok = worst < 1e-6;
  std::printf(
      "C3 %s - likelihood normalization, 50 draws, worst |mass-1| = %.2e (%.1f s)\n",
      ok ? "PASS" : "FAIL", worst, seconds_since(t0));
  return ok;
}

// ---------------------------------------------------------------------------
// C4: execution threshold 0 reproduces the input bit-exactly on 20 scenarios.

bool criterion_4() {
  const auto t0 = Clock::now();
  const auto dataset = generate_synthetic_dataset(WorldConfig{}, 20, 99);
  const AnchorSet anchors = build_anchor_set(dataset, 8, 3);
  BehaviorModel model;
  model.anchors = anchors;
  model.mixture_config.paradigm = Paradigm::kAnchorBased;
  model.mixture_config.continuous_regression = false;
  model.mixture_config.k = 8;
  model.mixture_config.t_pred = 0.5;
  model.mixture_config.t_zstar = 0.5;
  PosteriorConfig pc;
  pc.t_post = 0.5;
  pc.execution_threshold = 0.0;
  pc.approximate = true;
  bool ok = true;
  for (const Scenario& s : dataset) {
    const ClosedLoopResult r = generate_closed_loop_scenario(s, model, pc);
    if (!scenario_equal(r.scenario, s) || r.executed_count() != 0) ok = false;
  }
  std::printf(
      "C4 %s - zero-threshold closed-loop generation is the identity on 20 scenarios (%.1f s)\n",
      ok ? "PASS" : "FAIL", seconds_since(t0));
  return ok;
}

// ---------------------------------------------------------------------------
// Shared experiment harness for C5-C7.

constexpr int kExpTrainScenes = 64;
constexpr int kExpEvalScenes = 12;
constexpr int kExpEvalRollouts = 16;
constexpr int kExpEpochs = 10;

RealismReport run_experiment(const std::vector<Scenario>& train_set,
                             const std::vector<Scenario>& eval_set,
                             const AnchorSet* anchors, const TrainConfig& cfg,
                             uint64_t eval_seed) {
  TrainResult trained = train(train_set, anchors, cfg);
  std::vector<Rollout> rollouts;
  RolloutConfig rc;
  rc.num_rollouts = kExpEvalRollouts;
  rc.seed = eval_seed;
  for (const Scenario& s : eval_set) {
    rollouts.push_back(rollout_scenario(trained.model, s, rc));
  }
  return evaluate_realism(eval_set, rollouts);
}

// ---------------------------------------------------------------------------
// C5: shortcut ordering for anchor-free closed-loop training.

bool criterion_5() {
  const auto t0 = Clock::now();
  int wins = 0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto train_set =
        generate_synthetic_dataset(WorldConfig{}, kExpTrainScenes, seed);
    const auto eval_set =
        generate_synthetic_dataset(WorldConfig{}, kExpEvalScenes, 1000 + seed);

    TrainConfig cfg;
    cfg.epochs = kExpEpochs;
    cfg.batch_scenes = 8;
    cfg.seed = seed;
    cfg.mode = TrainConfig::DataMode::kClosedLoop;
    cfg.mixture.paradigm = Paradigm::kAnchorFree;
    cfg.mixture.continuous_regression = true;
    cfg.mixture.k = 6;
    cfg.mixture.t_pred = 2.0;   // 4 tau
    cfg.mixture.t_zstar = 2.0;  // kept at T_pred in both studied rows
    cfg.posterior.approximate = false;
    cfg.posterior.execution_threshold = 1.0;

    cfg.posterior.t_post = 2.0;  // T_post = T_pred (shortcut-prone)
    const RealismReport shortcut =
        run_experiment(train_set, eval_set, nullptr, cfg, 7000 + seed);
    cfg.posterior.t_post = 0.5;  // T_post = tau
    const RealismReport aligned =
        run_experiment(train_set, eval_set, nullptr, cfg, 7000 + seed);

    const double s_short = shortcut.interactive.value_or(0.0);
    const double s_align = aligned.interactive.value_or(0.0);
    std::printf("  seed %llu: interactive %.4f (T_post=T_pred) vs %.4f (T_post=tau)\n",
                (unsigned long long)seed, s_short, s_align);
    if (s_short < s_align) ++wins;
  }
  const double dt = seconds_since(t0);
  const bool ok = wins >= 2 && dt < 1800.0;
  std::printf("C5 %s - shortcut ordering holds in %d/3 seeds (%.1f s)\n",
              ok ? "PASS" : "FAIL", wins, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// C6: closed-loop benefit for the discrete model.

bool criterion_6() {
  const auto t0 = Clock::now();
  int wins = 0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto train_set =
        generate_synthetic_dataset(WorldConfig{}, kExpTrainScenes, seed);
    const auto eval_set =
        generate_synthetic_dataset(WorldConfig{}, kExpEvalScenes, 2000 + seed);
    const AnchorSet anchors = build_anchor_set(train_set, 64, seed);

    TrainConfig cfg;
    cfg.epochs = kExpEpochs;
    cfg.batch_scenes = 8;
    cfg.seed = seed;
    cfg.mixture.paradigm = Paradigm::kAnchorBased;
    cfg.mixture.continuous_regression = false;
    cfg.mixture.k = 64;
    cfg.mixture.t_pred = 0.5;
    cfg.mixture.t_zstar = 0.5;
    cfg.posterior.t_post = 0.5;
    cfg.posterior.execution_threshold = 1.0;
    cfg.posterior.approximate = true;

    cfg.mode = TrainConfig::DataMode::kOpenLoop;
    const RealismReport open_loop =
        run_experiment(train_set, eval_set, &anchors, cfg, 8000 + seed);
    cfg.mode = TrainConfig::DataMode::kClosedLoop;
    const RealismReport closed_loop =
        run_experiment(train_set, eval_set, &anchors, cfg, 8000 + seed);

    std::printf("  seed %llu: meta %.4f (open) vs %.4f (closed)\n",
                (unsigned long long)seed, open_loop.meta, closed_loop.meta);
    if (closed_loop.meta > open_loop.meta) ++wins;
  }
  const double dt = seconds_since(t0);
  const bool ok = wins >= 2 && dt < 1800.0;
  std::printf("C6 %s - closed-loop discrete beats open-loop in %d/3 seeds (%.1f s)\n",
              ok ? "PASS" : "FAIL", wins, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// C7: off-policy fix, T_zstar = T_post = tau vs T_zstar = T_pred.

bool criterion_7() {
  const auto t0 = Clock::now();
  int wins = 0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto train_set =
        generate_synthetic_dataset(WorldConfig{}, kExpTrainScenes, seed);
    const auto eval_set =
        generate_synthetic_dataset(WorldConfig{}, kExpEvalScenes, 3000 + seed);
    const AnchorSet anchors = build_anchor_set(train_set, 64, seed);

    TrainConfig cfg;
    cfg.epochs = kExpEpochs;
    cfg.batch_scenes = 8;
    cfg.seed = seed;
    cfg.mode = TrainConfig::DataMode::kClosedLoop;
    cfg.mixture.paradigm = Paradigm::kAnchorBased;
    cfg.mixture.continuous_regression = true;
    cfg.mixture.k = 64;
    cfg.mixture.t_pred = 2.0;  // 4 tau
    cfg.posterior.t_post = 0.5;
    cfg.posterior.execution_threshold = 1.0;
    cfg.posterior.approximate = true;

    cfg.mixture.t_zstar = 2.0;  // misaligned with T_post
    const RealismReport misaligned =
        run_experiment(train_set, eval_set, &anchors, cfg, 9000 + seed);
    cfg.mixture.t_zstar = 0.5;  // aligned with T_post
    const RealismReport aligned =
        run_experiment(train_set, eval_set, &anchors, cfg, 9000 + seed);

    std::printf("  seed %llu: meta %.4f (T_z*=T_pred) vs %.4f (T_z*=tau)\n",
                (unsigned long long)seed, misaligned.meta, aligned.meta);
    if (aligned.meta >= misaligned.meta) ++wins;
  }
  const double dt = seconds_since(t0);
  const bool ok = wins >= 2 && dt < 1800.0;
  std::printf("C7 %s - off-policy alignment wins in %d/3 seeds (%.1f s)\n",
              ok ? "PASS" : "FAIL", wins, dt);
  return ok;
}

// ---------------------------------------------------------------------------
// C8: decoder multiply-add scaling.

bool criterion_8() {
  ModelConfig mc;
  MixtureConfig ab;
  ab.paradigm = Paradigm::kAnchorBased;
  ab.continuous_regression = true;
  ab.t_pred = 8.0;
  ab.t_zstar = 0.5;
  ab.k = 64;
  const double ab64 = static_cast<double>(decoder_mac_count(mc, ab));
  ab.k = 2048;
  const double ab2048 = static_cast<double>(decoder_mac_count(mc, ab));

  MixtureConfig af;
  af.paradigm = Paradigm::kAnchorFree;
  af.continuous_regression = true;
  af.t_pred = 8.0;
  af.t_zstar = 0.5;
  af.k = 3;
  const double af3 = static_cast<double>(decoder_mac_count(mc, af));
  af.k = 16;
  const double af16 = static_cast<double>(decoder_mac_count(mc, af));

  const double ab_ratio = ab2048 / ab64;
  const double af_ratio = af16 / af3;
  const bool ok = ab_ratio <= 1.10 && af_ratio >= 2.0;
  std::printf(
      "C8 %s - decoder MACs: anchor-based 2048/64 = %.3f (<= 1.10), anchor-free 16/3 = %.3f (>= 2.0)\n",
      ok ? "PASS" : "FAIL", ab_ratio, af_ratio);
  return ok;
}

// ---------------------------------------------------------------------------
// C9: approximate posterior: parameter independence and wall-clock advantage.

bool criterion_9() {
  const auto t0 = Clock::now();
  const auto dataset = generate_synthetic_dataset(WorldConfig{}, 20, 77);
  const AnchorSet anchors = build_anchor_set(dataset, 16, 5);

  MixtureConfig mix;
  mix.paradigm = Paradigm::kAnchorBased;
  mix.continuous_regression = true;
  mix.k = 16;
  mix.t_pred = 0.5;
  mix.t_zstar = 0.5;

  BehaviorModel a(111), b(222);
  a.anchors = b.anchors = anchors;
  a.mixture_config = b.mixture_config = mix;

  PosteriorConfig approx;
  approx.t_post = 0.5;
  approx.execution_threshold = 1.0;
  approx.approximate = true;

  bool identical = true;
  const auto t_approx0 = Clock::now();
  for (const Scenario& s : dataset) {
    const ClosedLoopResult ra = generate_closed_loop_scenario(s, a, approx);
    const ClosedLoopResult rb = generate_closed_loop_scenario(s, b, approx);
    if (!scenario_equal(ra.scenario, rb.scenario)) identical = false;
  }
  const double approx_wall = seconds_since(t_approx0) / 2.0;

  PosteriorConfig exact = approx;
  exact.approximate = false;
  const auto t_exact0 = Clock::now();
  for (const Scenario& s : dataset) {
    generate_closed_loop_scenario(s, a, exact);
  }
  const double exact_wall = seconds_since(t_exact0);

  const bool ok = identical && approx_wall < 0.5 * exact_wall;
  std::printf(
      "C9 %s - approximate generation bit-identical across checkpoints; wall %.3f s vs exact %.3f s (%.1f s)\n",
      ok ? "PASS" : "FAIL", approx_wall, exact_wall, seconds_since(t0));
  return ok;
}

// ---------------------------------------------------------------------------
// C10: brute-force oracle equivalences, 1000 randomized instances each.

bool criterion_10() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1010);
  bool ok = true;

  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const int steps = 4 + static_cast<int>(rng() % 6);
    std::vector<TrajectorySegment> comps;
    for (int i = 0; i < k; ++i) comps.push_back(random_segment(rng, steps, 6.0));
    TrajectorySegment y = random_segment(rng, steps, 6.0);
    for (auto& st : y.states) st.valid = rng() % 4 != 0;
    bool y_any = false;
    for (auto& st : y.states) y_any = y_any || st.valid;
    if (!y_any) y.states[0].valid = true;
    const double horizon = 0.1 * steps;

    int want = -1;
    double best = std::numeric_limits<double>::infinity();
    double min_mean = best;
    for (int i = 0; i < k; ++i) {
      double acc = 0.0;
      int n = 0;
      for (int j = 0; j < steps; ++j) {
        if (!y.states[j].valid) continue;
        const double dx = comps[i].states[j].x - y.states[j].x;
        const double dy = comps[i].states[j].y - y.states[j].y;
        acc += std::sqrt(dx * dx + dy * dy);
        ++n;
      }
      if (n == 0) continue;
      const double mean = acc / n;
      min_mean = std::min(min_mean, mean);
      if (mean < best) {
        best = mean;
        want = i;
      }
    }
    if (match_positive(comps, y, horizon) != want) ok = false;
    if (min_ade(comps, y, horizon) != min_mean) ok = false;
  }

  const auto dataset = generate_synthetic_dataset(WorldConfig{}, 8, 55);
  const AnchorSet anchors = build_anchor_set(dataset, 8, 9);
  BehaviorModel model;
  model.anchors = anchors;
  model.mixture_config.paradigm = Paradigm::kAnchorBased;
  model.mixture_config.continuous_regression = false;
  model.mixture_config.k = 8;
  model.mixture_config.t_pred = 0.5;
  model.mixture_config.t_zstar = 0.5;
  PosteriorConfig pc;
  pc.t_post = 1.0;
  pc.execution_threshold = 1.0;
  pc.approximate = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const Scenario& s = dataset[trial % dataset.size()];
    const int track = static_cast<int>(rng() % s.tracks.size());
    const int j = static_cast<int>(rng() % 16);
    const int got = posterior_component(model, nullptr, s, s, track, j, pc);
    const int cur = s.current_index() + 5 * j;
    const AgentState& st = s.tracks[track].states[cur];
    const auto futures = anchor_futures(anchors, s.tracks[track].category,
                                        Pose2{st.x, st.y, st.heading}, 10, s.time_of(cur));
    int want = -1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t kk = 0; kk < futures.size(); ++kk) {
      double acc = 0.0;
      int n = 0;
      for (int i = 0; i < 10 && cur + 1 + i < s.step_count(); ++i) {
        const AgentState& gt = s.tracks[track].states[cur + 1 + i];
        if (!gt.valid) continue;
        const double dx = futures[kk].states[i].x - gt.x;
        const double dy = futures[kk].states[i].y - gt.y;
        acc += std::sqrt(dx * dx + dy * dy);
        ++n;
      }
      if (n == 0) continue;
      if (acc / n < best) {
        best = acc / n;
        want = static_cast<int>(kk);
      }
    }
    if (got != want) ok = false;
  }

  // k-means centroid updates: at convergence every centroid equals the mean
  // of its assigned members, rebuilt here with direct loops.
  int kmeans_checks = 0;
  for (int trial = 0; trial < 400 && ok; ++trial) {
    std::vector<Scenario> ds;
    Scenario s;
    for (int a = 0; a < 8; ++a) {
      Track t;
      t.agent_id = a;
      t.category = AgentCategory::kVehicle;
      t.radius = 2.0;
      const double v = uniform(rng, 1.0, 9.0);
      const double w = uniform(rng, -0.2, 0.2);
      for (int i = 0; i < s.step_count(); ++i) {
        const double th = w * 0.1 * i;
        t.states.push_back({v * 0.1 * i * std::cos(th), v * 0.1 * i * std::sin(th),
                            wrap_angle(th), true});
      }
      s.tracks.push_back(std::move(t));
    }
    ds.push_back(std::move(s));
    const int k = 2 + static_cast<int>(rng() % 3);
    const KmeansTrace trace = kmeans_anchors(ds, k, AgentCategory::kVehicle, 8.0, trial);

    std::vector<Eigen::VectorXd> data;
    for (const Track& t : ds[0].tracks) {
      const Pose2 frame{t.states[10].x, t.states[10].y, t.states[10].heading};
      Eigen::VectorXd flat(160);
      for (int i = 1; i <= 80; ++i) {
        const AgentState local = to_local(t.states[10 + i], frame);
        flat(2 * (i - 1)) = local.x;
        flat(2 * (i - 1) + 1) = local.y;
      }
      data.push_back(flat);
    }
    std::vector<Eigen::VectorXd> cent(k);
    for (int c = 0; c < k; ++c) {
      cent[c].resize(160);
      for (int i = 1; i <= 80; ++i) {
        cent[c](2 * (i - 1)) = trace.centroids[c][i].x;
        cent[c](2 * (i - 1) + 1) = trace.centroids[c][i].y;
      }
    }
    std::vector<int> assign(data.size());
    for (size_t p = 0; p < data.size(); ++p) {
      int bestc = 0;
      double bestd = (data[p] - cent[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (data[p] - cent[c]).squaredNorm();
        if (d < bestd) {
          bestd = d;
          bestc = c;
        }
      }
      assign[p] = bestc;
    }
    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(160);
      int n = 0;
      for (size_t p = 0; p < data.size(); ++p) {
        if (assign[p] != c) continue;
        sum += data[p];
        ++n;
      }
      if (n == 0) continue;
      const Eigen::VectorXd mean = sum / n;
      ++kmeans_checks;
      if ((mean - cent[c]).cwiseAbs().maxCoeff() != 0.0) ok = false;
    }
  }

  const double dt = seconds_since(t0);
  const bool pass = ok && kmeans_checks >= 1000;
  std::printf(
      "C10 %s - brute-force oracles agree (match/posterior/minADE: 1000 each; k-means centroid checks: %d) (%.1f s)\n",
      pass ? "PASS" : "FAIL", kmeans_checks, dt);
  return pass;
}

// ---------------------------------------------------------------------------
// C11: CLI determinism, byte-identical artifacts on rerun.

bool files_equal(const fs::path& a, const fs::path& b) {
  return slurp(a.string()) == slurp(b.string());
}

bool dirs_equal(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) {
    names.push_back(e.path().filename().string());
  }
  for (const std::string& n : names) {
    if (!fs::exists(b / n) || !files_equal(a / n, b / n)) return false;
  }
  return true;
}

bool criterion_11() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "unimm_c11";
  fs::remove_all(root);
  fs::create_directories(root);

  auto pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string d = dir.string();
    bool ok = true;
    ok &= run_cli("gen-data --out " + d + "/data --count 6 --seed 7 --threads 1") == 0;
    ok &= run_cli("anchors --data " + d + "/data --out " + d +
                  "/anchors.json --k 4 --seed 3 --threads 1") == 0;
    ok &= run_cli("train --data " + d + "/data --anchors " + d +
                  "/anchors.json --preset discrete --k 4 --epochs 2 --batch 3 --seed 1 "
                  "--threads 1 --out " +
                  d + "/model") == 0;
    ok &= run_cli("rollout --data " + d + "/data --checkpoint " + d + "/model --anchors " +
                  d + "/anchors.json --out " + d +
                  "/rolls --rollouts 3 --seed 5 --max-scenes 3 --threads 1") == 0;
    ok &= run_cli("eval --data " + d + "/data --rollouts " + d + "/rolls --out " + d +
                  "/report.json --csv " + d + "/report.csv --max-scenes 3") == 0;
    ok &= run_cli("equiv-check --data " + d + "/data --anchors " + d +
                  "/anchors.json --out " + d + "/eq.json") == 0;
    ok &= run_cli("plot --loss " + d + "/model_loss.csv --report " + d +
                  "/report.json --out " + d + "/plots") == 0;
    return ok;
  };

  bool ok = pipeline(root / "run1");
  ok = pipeline(root / "run2") && ok;

  const char* artifacts[] = {"anchors.json",   "model.json",  "model.bin",
                             "model_loss.csv", "report.json", "report.csv",
                             "eq.json"};
  for (const char* f : artifacts) {
    if (!files_equal(root / "run1" / f, root / "run2" / f)) {
      std::printf("  mismatch: %s\n", f);
      ok = false;
    }
  }
  for (const char* d : {"data", "rolls", "plots"}) {
    if (!dirs_equal(root / "run1" / d, root / "run2" / d)) {
      std::printf("  mismatch: %s/\n", d);
      ok = false;
    }
  }
  std::printf("C11 %s - every CLI command reruns byte-identically (%.1f s)\n",
              ok ? "PASS" : "FAIL", seconds_since(t0));
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--criterion" && i + 1 < argc) {
      which = std::atoi(argv[i + 1]);
    }
  }
  const std::vector<std::function<bool()>> criteria = {
      criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5, criterion_6,
      criterion_7, criterion_8, criterion_9, criterion_10, criterion_11};
  bool ok = true;
  if (which >= 1 && which <= static_cast<int>(criteria.size())) {
    ok = criteria[which - 1]();
  } else {
    for (const auto& c : criteria) ok = c() && ok;
  }
  return ok ? 0 : 1;
}
