#include "unimm/closedloop.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace unimm {

void PosteriorConfig::validate(const MixtureConfig& mixture) const {
  const double r = t_post / kTau;
  if (t_post < kTau - 1e-9 || std::abs(r - std::lround(r)) > 1e-9) {
    throw std::invalid_argument("posterior.t_post must be a multiple of tau and >= tau");
  }
  if (execution_threshold < 0.0) {
    throw std::invalid_argument("posterior.execution_threshold must be >= 0");
  }
  if (approximate && mixture.paradigm != Paradigm::kAnchorBased) {
    throw std::invalid_argument("approximate posterior policy requires an anchor-based model");
  }
}

int ClosedLoopResult::executed_count() const {
  int n = 0;
  for (const auto& per_track : provenance) {
    for (bool b : per_track) n += b ? 1 : 0;
  }
  return n;
}

namespace {

struct AnchorPlan {
  int index = -1;
  TrajectorySegment plan;  // transformed anchor future
  double distance = std::numeric_limits<double>::infinity();
};

TrajectorySegment gt_window_segment(const Scenario& gt, int track, int cur,
                                    int horizon_steps) {
  const Track& t = gt.tracks[track];
  TrajectorySegment seg;
  seg.start_time = gt.time_of(cur) + gt.dt;
  const int last = gt.step_count() - 1;
  const int end = std::min(cur + horizon_steps, last);
  for (int i = cur + 1; i <= end; ++i) seg.states.push_back(t.states[i]);
  return seg;
}

bool any_valid(const TrajectorySegment& seg) {
  for (const AgentState& s : seg.states) {
    if (s.valid) return true;
  }
  return false;
}

// Shared by the rolling tokenizer and the approximate posterior policy; the
// H1 equality depends on both running this exact code.
AnchorPlan nearest_anchor_plan(const AnchorSet& anchors, AgentCategory category,
                               const Pose2& pose, const Scenario& gt, int track,
                               int cur, int match_steps, int plan_steps) {
  const TrajectorySegment gt_seg = gt_window_segment(gt, track, cur, match_steps);
  AnchorPlan out;
  if (!any_valid(gt_seg)) return out;
  const int build_steps = std::max(match_steps, plan_steps);
  const std::vector<TrajectorySegment> futures =
      anchor_futures(anchors, category, pose, build_steps, gt.time_of(cur));
  const double horizon = match_steps * gt.dt;
  for (size_t k = 0; k < futures.size(); ++k) {
    const double d = traj_distance(futures[k], gt_seg, horizon);
    if (d < out.distance) {
      out.distance = d;
      out.index = static_cast<int>(k);
    }
  }
  if (out.index >= 0) out.plan = futures[out.index];
  return out;
}

Pose2 pose_at(const Scenario& s, int track, int index) {
  const AgentState& st = s.tracks[track].states[index];
  return {st.x, st.y, st.heading};
}

int tau_step_count(const Scenario& s, double tau) {
  const double steps_f = tau / s.dt;
  const int steps = static_cast<int>(std::lround(steps_f));
  if (steps < 1 || std::abs(steps_f - steps) > 1e-9) {
    throw std::invalid_argument("tau must be a positive multiple of the scenario dt");
  }
  return steps;
}

}  // namespace

int posterior_component(BehaviorModel& model, const EncoderCache* cache,
                        const Scenario& working, const Scenario& ground_truth,
                        int track, int step_j, const PosteriorConfig& pc) {
  pc.validate(model.mixture_config);
  const int tau_steps = tau_step_count(working, kTau);
  const int cur = working.current_index() + step_j * tau_steps;
  const int post_steps = static_cast<int>(std::lround(pc.t_post / working.dt));
  const AgentCategory cat = working.tracks[track].category;

  if (pc.approximate || model.mixture_config.discrete() ||
      model.mixture_config.paradigm == Paradigm::kAnchorBased) {
    const AnchorPlan plan =
        nearest_anchor_plan(model.anchors, cat, pose_at(working, track, cur),
                            ground_truth, track, cur, post_steps, tau_steps);
    if (plan.index < 0) {
      throw std::domain_error("posterior_component: no valid ground truth in window");
    }
    return plan.index;
  }

  const TrajectorySegment gt_seg = gt_window_segment(ground_truth, track, cur, post_steps);
  if (!any_valid(gt_seg)) {
    throw std::domain_error("posterior_component: no valid ground truth in window");
  }
  if (cache == nullptr) {
    throw std::invalid_argument("posterior_component: anchor-free exact mode needs an encoder cache");
  }
  MixturePrediction pred = predict_at(model, *cache, track, step_j + 1, cat, std::nullopt);
  return match_positive(pred.trajectories, gt_seg, pc.t_post);
}

ClosedLoopResult generate_closed_loop_scenario(const Scenario& ground_truth,
                                               BehaviorModel& model,
                                               const PosteriorConfig& pc,
                                               double tau) {
  pc.validate(model.mixture_config);
  const int tau_steps = tau_step_count(ground_truth, tau);
  const int future_steps = ground_truth.future_steps;
  if (future_steps % tau_steps != 0) {
    throw std::invalid_argument("future duration must be a multiple of tau");
  }
  const int replans = future_steps / tau_steps;
  const int post_steps = static_cast<int>(std::lround(pc.t_post / ground_truth.dt));
  const bool anchor_path = pc.approximate || model.mixture_config.discrete();
  if (!anchor_path && tau_steps != kTauSteps) {
    throw std::invalid_argument("exact posterior policy requires tau = 0.5 s");
  }

  ClosedLoopResult out;
  out.scenario = ground_truth;
  out.provenance.assign(ground_truth.tracks.size(), std::vector<bool>(replans, false));
  Scenario& working = out.scenario;

  Encoder encoder(model.store, model.model_config);
  EncoderCache cache;
  if (!anchor_path) cache = encoder.make_cache(working);

  const int n_tracks = static_cast<int>(working.tracks.size());
  for (int j = 0; j < replans; ++j) {
    const int cur = working.current_index() + j * tau_steps;
    if (!anchor_path) encoder.extend_cache(cache, working, j + 2);

    // Every agent plans from the same committed prefix; commits land jointly
    // after all plans are made.
    std::vector<TrajectorySegment> plans(n_tracks);
    std::vector<bool> execute(n_tracks, false);
    for (int t = 0; t < n_tracks; ++t) {
      if (!working.tracks[t].states[cur].valid) continue;
      const AgentCategory cat = working.tracks[t].category;
      if (anchor_path) {
        const AnchorPlan plan =
            nearest_anchor_plan(model.anchors, cat, pose_at(working, t, cur),
                                ground_truth, t, cur, post_steps, tau_steps);
        if (plan.index < 0) continue;
        plans[t] = plan.plan;
        execute[t] = plan.distance < pc.execution_threshold;
      } else {
        const TrajectorySegment gt_seg =
            gt_window_segment(ground_truth, t, cur, post_steps);
        if (!any_valid(gt_seg)) continue;
        if (j + 1 >= cache.windows_done || !cache.valid[t][j + 1]) continue;
        TrajectorySegment plan;
        if (model.mixture_config.paradigm == Paradigm::kAnchorBased) {
          const AnchorPlan sel =
              nearest_anchor_plan(model.anchors, cat, pose_at(working, t, cur),
                                  ground_truth, t, cur, post_steps, tau_steps);
          MixturePrediction pred = predict_at(model, cache, t, j + 1, cat, sel.index);
          plan = pred.trajectories.at(0);
        } else {
          MixturePrediction pred = predict_at(model, cache, t, j + 1, cat, std::nullopt);
          const int z = match_positive(pred.trajectories, gt_seg, pc.t_post);
          plan = pred.trajectories[z];
        }
        const double d = traj_distance(plan, gt_seg, pc.t_post);
        plans[t] = std::move(plan);
        execute[t] = d < pc.execution_threshold;
      }
    }
    for (int t = 0; t < n_tracks; ++t) {
      if (!execute[t]) continue;
      if (static_cast<int>(plans[t].states.size()) < tau_steps) continue;
      for (int i = 0; i < tau_steps; ++i) {
        working.tracks[t].states[cur + 1 + i] = plans[t].states[i];
        working.tracks[t].states[cur + 1 + i].valid = true;
      }
      out.provenance[t][j] = true;
    }
  }
  return out;
}

ClosedLoopBatch make_training_batch(const Scenario& ground_truth,
                                    ClosedLoopResult generated, double t_pred,
                                    double tau) {
  ClosedLoopBatch batch;
  batch.samples = split_open_loop_samples(ground_truth, tau, t_pred);
  batch.generated = std::move(generated);
  return batch;
}

TokenSequence tokenize_rolling(const Scenario& scenario, const AnchorSet& anchors,
                               double tau) {
  const int tau_steps = tau_step_count(scenario, tau);
  if (anchors.horizon_steps < tau_steps) {
    throw std::invalid_argument("tokenize_rolling: anchors shorter than tau");
  }
  if (scenario.future_steps % tau_steps != 0) {
    throw std::invalid_argument("future duration must be a multiple of tau");
  }
  const int replans = scenario.future_steps / tau_steps;

  TokenSequence out;
  out.reconstruction = scenario;
  out.tokens.assign(scenario.tracks.size(), std::vector<int>(replans, -1));
  Scenario& recon = out.reconstruction;

  for (size_t t = 0; t < scenario.tracks.size(); ++t) {
    const AgentCategory cat = scenario.tracks[t].category;
    for (int j = 0; j < replans; ++j) {
      const int cur = scenario.current_index() + j * tau_steps;
      if (!recon.tracks[t].states[cur].valid) continue;
      const AnchorPlan plan = nearest_anchor_plan(
          anchors, cat, pose_at(recon, static_cast<int>(t), cur), scenario,
          static_cast<int>(t), cur, tau_steps, tau_steps);
      if (plan.index < 0) continue;
      out.tokens[t][j] = plan.index;
      for (int i = 0; i < tau_steps; ++i) {
        recon.tracks[t].states[cur + 1 + i] = plan.plan.states[i];
        recon.tracks[t].states[cur + 1 + i].valid = true;
      }
    }
  }
  return out;
}

EquivalenceReport check_tokenization_equivalence(const Scenario& scenario,
                                                 const AnchorSet& anchors,
                                                 double tau_tokenizer,
                                                 double tau_generator) {
  if (std::abs(tau_tokenizer - tau_generator) > 1e-12) {
    throw std::invalid_argument(
        "check_tokenization_equivalence: tokenizer and generator tau differ");
  }
  const double tau = tau_tokenizer;

  BehaviorModel model;
  model.anchors = anchors;
  model.mixture_config.paradigm = Paradigm::kAnchorBased;
  model.mixture_config.continuous_regression = false;
  model.mixture_config.k = anchors.k;
  model.mixture_config.t_pred = tau;
  model.mixture_config.t_zstar = tau;
  PosteriorConfig pc;
  pc.t_post = tau;
  pc.execution_threshold = std::numeric_limits<double>::infinity();
  pc.approximate = true;

  EquivalenceReport report;
  report.tokens = tokenize_rolling(scenario, anchors, tau);
  const ClosedLoopResult gen = generate_closed_loop_scenario(scenario, model, pc, tau);

  report.equal = true;
  report.agent_equal.assign(scenario.tracks.size(), true);
  for (size_t t = 0; t < scenario.tracks.size(); ++t) {
    const auto& a = report.tokens.reconstruction.tracks[t].states;
    const auto& b = gen.scenario.tracks[t].states;
    for (size_t i = 0; i < a.size(); ++i) {
      const bool same = a[i].x == b[i].x && a[i].y == b[i].y &&
                        a[i].heading == b[i].heading && a[i].valid == b[i].valid;
      if (!same) {
        report.agent_equal[t] = false;
        if (report.equal) {
          report.divergence_track = static_cast<int>(t);
          report.divergence_step_index = static_cast<int>(i);
        }
        report.equal = false;
        break;
      }
    }
  }
  return report;
}

}  // namespace unimm
