#include "unimm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "unimm/encoder.hpp"
#include "unimm/synthworld.hpp"

namespace unimm {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (batch_scenes < 1) throw std::invalid_argument("train.batch_scenes must be >= 1");
  mixture.validate();
  if (mode == DataMode::kClosedLoop) posterior.validate(mixture);
}

namespace {

struct SampleRef {
  int scenario_index;
  OpenLoopSample sample;
};

struct StepOutcome {
  double loss = 0.0;
  double regression = 0.0;
  double classification = 0.0;
  int samples = 0;
  int skipped = 0;
};

// Builds the batch loss on `g` for the given scenarios. `inputs` may be the
// closed-loop variants; targets always come from `originals`.
StepOutcome build_step_loss(nn::Graph& g, BehaviorModel& model,
                            const std::vector<const Scenario*>& inputs,
                            const std::vector<const Scenario*>& originals,
                            double t_zstar, bool classification_only,
                            nn::Var* total_out) {
  Encoder encoder(model.store, model.model_config);
  const MixtureConfig& mix = model.mixture_config;
  StepOutcome outcome;

  std::vector<nn::Var> sample_losses;
  double cls_sum = 0.0;
  double reg_sum = 0.0;

  for (size_t si = 0; si < inputs.size(); ++si) {
    const Scenario& input = *inputs[si];
    const Scenario& original = *originals[si];
    const SceneTokens tokens = build_tokens(input);
    const SceneEmbeddings emb = encoder.encode(g, tokens);
    const std::vector<OpenLoopSample> samples =
        split_open_loop_samples(original, kTau, mix.t_pred);

    for (const OpenLoopSample& s : samples) {
      const int w = static_cast<int>(std::lround(s.start_time / kTau)) + 1;
      if (!emb.valid[s.track_index][w]) {
        ++outcome.skipped;
        continue;
      }
      const Pose2& frame = emb.frames[s.track_index][w];
      const AgentCategory cat = input.tracks[s.track_index].category;
      const TrajectorySegment y_global = sample_target(original, s);
      const TrajectorySegment y_local = to_local(y_global, frame);

      int z = -1;
      DecodeTape tape;
      try {
        if (mix.paradigm == Paradigm::kAnchorBased) {
          const std::vector<TrajectorySegment> futures = anchor_futures(
              model.anchors, cat, frame, mix.pred_steps(), s.start_time);
          z = match_positive(futures, y_global, t_zstar);
          const bool realize = mix.continuous_regression && !classification_only;
          tape = decode_anchor_based(g, model.store, model.model_config, mix,
                                     emb.vars[s.track_index][w], model.anchors, cat,
                                     realize ? std::optional<int>(z) : std::nullopt);
        } else {
          tape = decode_anchor_free(g, model.store, model.model_config, mix,
                                    emb.vars[s.track_index][w]);
          const MixturePrediction pred = realize_prediction(
              g, tape, mix, nullptr, cat, frame, s.start_time);
          z = match_positive(pred.trajectories, y_global, t_zstar);
        }
      } catch (const std::domain_error&) {
        ++outcome.skipped;  // no valid target state inside the matching prefix
        continue;
      }

      nn::Var sample_loss;
      double cls_v = 0.0;
      double reg_v = 0.0;
      if (classification_only) {
        sample_loss = g.scale(g.pick(tape.log_scores, 0, z), -1.0);
        cls_v = g.value(sample_loss)(0, 0);
      } else {
        const LossTerms lt = training_loss(g, tape, z, y_local, mix);
        cls_v = g.value(lt.classification)(0, 0);
        if (mix.continuous_regression) {
          const double inv = 1.0 / std::max(1, lt.valid_steps);
          nn::Var reg_avg = g.scale(lt.regression, inv);
          reg_v = g.value(reg_avg)(0, 0);
          sample_loss = g.add(lt.classification, reg_avg);
        } else {
          sample_loss = lt.total;
        }
      }
      const double v = g.value(sample_loss)(0, 0);
      if (!std::isfinite(v)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "non-finite loss for sample scenario=%d agent=%d t=%.1f",
                      s.scenario_index, s.agent_id, s.start_time);
        throw std::runtime_error(buf);
      }
      sample_losses.push_back(sample_loss);
      cls_sum += cls_v;
      reg_sum += reg_v;
      ++outcome.samples;
    }
  }

  if (sample_losses.empty()) {
    throw std::runtime_error("training step produced no usable samples");
  }
  nn::Var total = sample_losses[0];
  for (size_t i = 1; i < sample_losses.size(); ++i) total = g.add(total, sample_losses[i]);
  total = g.scale(total, 1.0 / sample_losses.size());
  *total_out = total;
  outcome.loss = g.value(total)(0, 0);
  outcome.classification = cls_sum / outcome.samples;
  outcome.regression = reg_sum / outcome.samples;
  return outcome;
}

std::vector<std::vector<int>> epoch_batches(size_t n, int batch_scenes,
                                            std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  for (size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<std::vector<int>> batches;
  for (size_t i = 0; i < n; i += batch_scenes) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + batch_scenes));
  }
  return batches;
}

}  // namespace

TrainResult train(const std::vector<Scenario>& dataset, const AnchorSet* anchors,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (cfg.mixture.paradigm == Paradigm::kAnchorBased && anchors == nullptr) {
    throw std::invalid_argument("train: anchor-based config needs an AnchorSet");
  }

  TrainResult result;
  result.model = BehaviorModel(cfg.seed);
  result.model.model_config = cfg.model;
  result.model.mixture_config = cfg.mixture;
  if (anchors != nullptr) result.model.anchors = *anchors;
  BehaviorModel& model = result.model;

  nn::OptimizerState opt;
  opt.weight_decay = cfg.weight_decay;
  opt.base_lr = cfg.base_lr;

  const size_t n = dataset.size();
  const long steps_per_epoch =
      static_cast<long>((n + cfg.batch_scenes - 1) / cfg.batch_scenes);
  const long total_steps = cfg.epochs * steps_per_epoch;
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0x736875666665ull));

  // Approximate-mode generation never reads parameters, so per-scenario
  // results are reusable across steps.
  std::vector<std::optional<ClosedLoopResult>> approx_cache(n);

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const std::vector<int>& batch : epoch_batches(n, cfg.batch_scenes, shuffle_rng)) {
      const double lr = nn::cosine_lr(step, total_steps, cfg.base_lr);

      std::vector<ClosedLoopResult> generated;
      std::vector<const Scenario*> inputs, originals;
      for (int idx : batch) {
        originals.push_back(&dataset[idx]);
        if (cfg.mode == TrainConfig::DataMode::kClosedLoop) {
          if (cfg.posterior.approximate) {
            if (!approx_cache[idx]) {
              approx_cache[idx] =
                  generate_closed_loop_scenario(dataset[idx], model, cfg.posterior);
            }
            inputs.push_back(&approx_cache[idx]->scenario);
          } else {
            generated.push_back(
                generate_closed_loop_scenario(dataset[idx], model, cfg.posterior));
          }
        } else {
          inputs.push_back(&dataset[idx]);
        }
      }
      // Pointers into `generated` are only stable after the loop above.
      size_t gi = 0;
      if (cfg.mode == TrainConfig::DataMode::kClosedLoop && !cfg.posterior.approximate) {
        inputs.clear();
        for (size_t i = 0; i < batch.size(); ++i) {
          inputs.push_back(&generated[gi++].scenario);
        }
      }

      nn::Graph g(true);
      nn::Var total;
      StepOutcome outcome;
      try {
        outcome = build_step_loss(g, model, inputs, originals, cfg.mixture.t_zstar,
                                  false, &total);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training aborted at step " + std::to_string(step) +
                                 ": " + e.what());
      }
      model.store.zero_grads();
      g.backward(total);
      nn::adamw_step(model.store, opt, lr);
      result.skipped_samples += outcome.skipped;
      result.trace.push_back({step, outcome.loss, outcome.regression,
                              outcome.classification});
      ++step;
    }
  }
  return result;
}

BehaviorModel refit_scorer(BehaviorModel model, const std::vector<Scenario>& dataset,
                           int epochs, int batch_scenes, uint64_t seed,
                           double t_zstar, std::vector<TraceRow>* trace) {
  if (dataset.empty()) throw std::invalid_argument("refit_scorer: dataset is empty");
  const std::string prefix = model.mixture_config.paradigm == Paradigm::kAnchorBased
                                 ? "decoder.ab.score"
                                 : "decoder.af.score";
  auto filter = [&prefix](const std::string& name) {
    return name.rfind(prefix, 0) == 0;
  };

  nn::OptimizerState opt;
  const size_t n = dataset.size();
  const long steps_per_epoch = static_cast<long>((n + batch_scenes - 1) / batch_scenes);
  const long total_steps = std::max<long>(1, epochs * steps_per_epoch);
  std::mt19937_64 shuffle_rng(derive_seed(seed, 0x7265666974ull));

  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (const std::vector<int>& batch : epoch_batches(n, batch_scenes, shuffle_rng)) {
      const double lr = nn::cosine_lr(step, total_steps, opt.base_lr);
      std::vector<const Scenario*> inputs;
      for (int idx : batch) inputs.push_back(&dataset[idx]);

      nn::Graph g(true);
      nn::Var total;
      const StepOutcome outcome =
          build_step_loss(g, model, inputs, inputs, t_zstar, true, &total);
      model.store.zero_grads();
      g.backward(total);
      nn::adamw_step(model.store, opt, lr, filter);
      if (trace != nullptr) {
        trace->push_back({step, outcome.loss, 0.0, outcome.classification});
      }
      ++step;
    }
  }
  return model;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string out = "step,loss,regression,classification\n";
  char buf[128];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%ld,%.12g,%.12g,%.12g\n", r.step, r.loss,
                  r.regression, r.classification);
    out += buf;
  }
  return out;
}

}  // namespace unimm
