#include "unimm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "unimm/synthworld.hpp"

namespace unimm {

int MixtureConfig::pred_steps() const {
  return static_cast<int>(std::lround(t_pred / kDt));
}

void MixtureConfig::validate() const {
  if (k < 1) throw std::invalid_argument("mixture.k must be >= 1");
  auto multiple_of_tau = [](double v) {
    const double r = v / kTau;
    return v > 0.0 && std::abs(r - std::lround(r)) < 1e-9;
  };
  if (!multiple_of_tau(t_pred)) throw std::invalid_argument("mixture.t_pred must be a positive multiple of tau");
  if (!multiple_of_tau(t_zstar)) throw std::invalid_argument("mixture.t_zstar must be a positive multiple of tau");
  if (t_zstar > t_pred + 1e-9) throw std::invalid_argument("mixture.t_zstar must not exceed t_pred");
  if (paradigm == Paradigm::kAnchorFree && !continuous_regression) {
    throw std::invalid_argument("anchor_free requires continuous_regression");
  }
}

const std::vector<std::vector<AgentState>>& AnchorSet::of(AgentCategory c) const {
  auto it = anchors.find(c);
  if (it == anchors.end()) {
    throw std::invalid_argument(std::string("AnchorSet: unknown category ") + category_name(c));
  }
  return it->second;
}

namespace {

void put_fixed(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Tiny negatives round to "-0.000000"; canonicalize to the positive form.
  out += (std::strcmp(buf, "-0.000000") == 0) ? "0.000000" : buf;
}

constexpr AgentCategory kAllCategories[] = {
    AgentCategory::kVehicle, AgentCategory::kPedestrian, AgentCategory::kCyclist};

}  // namespace

std::string save_anchors(const AnchorSet& a) {
  std::string out = "{\"dt\": 0.100000, \"horizon_steps\": " +
                    std::to_string(a.horizon_steps) + ", \"k\": " + std::to_string(a.k) +
                    ", \"categories\": {";
  bool first_cat = true;
  for (AgentCategory cat : kAllCategories) {
    auto it = a.anchors.find(cat);
    if (it == a.anchors.end()) continue;
    if (!first_cat) out += ", ";
    first_cat = false;
    out += "\"";
    out += category_name(cat);
    out += "\": [";
    for (size_t k = 0; k < it->second.size(); ++k) {
      if (k) out += ", ";
      out += "[";
      const auto& traj = it->second[k];
      for (size_t j = 0; j < traj.size(); ++j) {
        if (j) out += ", ";
        out += "[";
        put_fixed(out, traj[j].x);
        out += ", ";
        put_fixed(out, traj[j].y);
        out += ", ";
        put_fixed(out, traj[j].heading);
        out += "]";
      }
      out += "]";
    }
    out += "]";
  }
  out += "}}\n";
  return out;
}

AnchorSet load_anchors(const std::string& bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("anchor file parse error: ") + e.what());
  }
  AnchorSet a;
  a.horizon_steps = doc.at("horizon_steps").get<int>();
  a.k = doc.at("k").get<int>();
  for (const auto& [name, arr] : doc.at("categories").items()) {
    const AgentCategory cat = category_from_name(name);
    std::vector<std::vector<AgentState>> trajs;
    for (const auto& jt : arr) {
      std::vector<AgentState> traj;
      for (const auto& js : jt) {
        AgentState s;
        s.x = js[0].get<double>();
        s.y = js[1].get<double>();
        s.heading = js[2].get<double>();
        s.valid = true;
        traj.push_back(s);
      }
      if (static_cast<int>(traj.size()) != a.horizon_steps + 1) {
        throw std::invalid_argument("anchor trajectory length mismatch in category " + name);
      }
      trajs.push_back(std::move(traj));
    }
    if (static_cast<int>(trajs.size()) != a.k) {
      throw std::invalid_argument("anchor count mismatch in category " + name);
    }
    a.anchors.emplace(cat, std::move(trajs));
  }
  return a;
}

void write_anchor_file(const AnchorSet& a, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << save_anchors(a);
}

AnchorSet read_anchor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_anchors(ss.str());
}

// --- decoding ---------------------------------------------------------------

namespace {

// Raw regression row layout: [loc_x | loc_y | braw_x | braw_y | mu | kraw],
// each block `steps` wide. Bases, when given, shift the prediction so the
// regression refines an anchor.
ComponentTape split_regression_row(nn::Graph& g, nn::Var raw, int steps,
                                   nn::Var base_x, nn::Var base_y, nn::Var base_h) {
  ComponentTape c;
  nn::Var dx = g.slice_cols(raw, 0, steps);
  nn::Var dy = g.slice_cols(raw, steps, steps);
  c.loc_x = base_x.ok() ? g.add(dx, base_x) : dx;
  c.loc_y = base_y.ok() ? g.add(dy, base_y) : dy;
  c.scale_x = g.add_scalar(g.softplus(g.slice_cols(raw, 2 * steps, steps)), 1e-3);
  c.scale_y = g.add_scalar(g.softplus(g.slice_cols(raw, 3 * steps, steps)), 1e-3);
  nn::Var mu = g.slice_cols(raw, 4 * steps, steps);
  c.mu_heading = base_h.ok() ? g.add(mu, base_h) : mu;
  c.kappa = g.clamp_max(g.add_scalar(g.softplus(g.slice_cols(raw, 5 * steps, steps)), 1e-3), 500.0);
  return c;
}

Eigen::MatrixXd anchor_future_row(const std::vector<AgentState>& anchor, int steps,
                                  int coord) {
  Eigen::MatrixXd row(1, steps);
  for (int i = 0; i < steps; ++i) {
    const AgentState& s = anchor[i + 1];
    row(0, i) = coord == 0 ? s.x : (coord == 1 ? s.y : s.heading);
  }
  return row;
}

}  // namespace

DecodeTape decode_anchor_free(nn::Graph& g, nn::ParamStore& store,
                              const ModelConfig& mc, const MixtureConfig& cfg,
                              nn::Var embedding) {
  cfg.validate();
  if (cfg.paradigm != Paradigm::kAnchorFree) {
    throw std::invalid_argument("decode_anchor_free: config paradigm mismatch");
  }
  const int steps = cfg.pred_steps();
  store.embedding("decoder.af.queries", cfg.k, mc.af_query_dim);
  nn::Var queries = g.param(store, "decoder.af.queries");

  const int fused = mc.af_query_dim + mc.embed_dim;
  nn::MlpSpec score_spec{{fused, mc.af_score_hidden, 1}};
  nn::MlpSpec reg_spec{{fused, mc.af_reg_hidden, 6 * steps}};

  DecodeTape out;
  std::vector<nn::Var> logits;
  logits.reserve(cfg.k);
  for (int k = 0; k < cfg.k; ++k) {
    nn::Var fused_in = g.concat_cols(g.row(queries, k), embedding);
    logits.push_back(nn::mlp_forward(g, store, "decoder.af.score", fused_in, score_spec));
    nn::Var raw = nn::mlp_forward(g, store, "decoder.af.reg", fused_in, reg_spec);
    ComponentTape c = split_regression_row(g, raw, steps, {}, {}, {});
    c.component_id = k;
    out.comps.push_back(c);
  }
  nn::Var row = logits[0];
  for (int k = 1; k < cfg.k; ++k) row = g.concat_cols(row, logits[k]);
  out.log_scores = g.log_softmax_rows(row);
  return out;
}

DecodeTape decode_anchor_based(nn::Graph& g, nn::ParamStore& store,
                               const ModelConfig& mc, const MixtureConfig& cfg,
                               nn::Var embedding, const AnchorSet& anchors,
                               AgentCategory category,
                               std::optional<int> selected) {
  cfg.validate();
  if (cfg.paradigm != Paradigm::kAnchorBased) {
    throw std::invalid_argument("decode_anchor_based: config paradigm mismatch");
  }
  const int steps = cfg.pred_steps();
  nn::MlpSpec score_spec{{mc.embed_dim, mc.ab_score_hidden, cfg.k}};
  DecodeTape out;
  out.log_scores = g.log_softmax_rows(
      nn::mlp_forward(g, store, "decoder.ab.score", embedding, score_spec));

  if (cfg.continuous_regression && selected.has_value()) {
    const int k = *selected;
    if (k < 0 || k >= cfg.k) {
      throw std::invalid_argument("decode_anchor_based: selected component out of range");
    }
    const auto& cat_anchors = anchors.of(category);
    if (static_cast<int>(cat_anchors.size()) != cfg.k) {
      throw std::invalid_argument("decode_anchor_based: anchor count != config K");
    }
    const std::vector<AgentState>& anchor = cat_anchors[k];
    if (static_cast<int>(anchor.size()) < steps + 1) {
      throw std::invalid_argument("decode_anchor_based: anchors shorter than T_pred");
    }
    Eigen::MatrixXd flat(1, 3 * (steps + 1));
    for (int i = 0; i <= steps; ++i) {
      flat(0, 3 * i) = anchor[i].x;
      flat(0, 3 * i + 1) = anchor[i].y;
      flat(0, 3 * i + 2) = anchor[i].heading;
    }
    nn::Var anchor_emb = nn::mlp_forward(
        g, store, "decoder.ab.anchor", g.constant(flat),
        nn::MlpSpec{{3 * (steps + 1), mc.ab_anchor_hidden, mc.embed_dim}});
    nn::Var fused_in = g.concat_cols(anchor_emb, embedding);
    nn::Var raw = nn::mlp_forward(
        g, store, "decoder.ab.reg", fused_in,
        nn::MlpSpec{{2 * mc.embed_dim, mc.ab_reg_hidden, 6 * steps}});
    ComponentTape c = split_regression_row(
        g, raw, steps, g.constant(anchor_future_row(anchor, steps, 0)),
        g.constant(anchor_future_row(anchor, steps, 1)),
        g.constant(anchor_future_row(anchor, steps, 2)));
    c.component_id = k;
    out.comps.push_back(c);
  }
  return out;
}

MixturePrediction realize_prediction(const nn::Graph& g, const DecodeTape& tape,
                                     const MixtureConfig& cfg,
                                     const AnchorSet* anchors,
                                     AgentCategory category, const Pose2& frame,
                                     double start_time) {
  MixturePrediction pred;
  pred.frame = frame;
  pred.start_time = start_time;
  const Eigen::MatrixXd& ls = g.value(tape.log_scores);
  pred.log_scores = ls.row(0).transpose();

  if (cfg.discrete()) {
    if (anchors == nullptr) {
      throw std::invalid_argument("realize_prediction: discrete mode needs anchors");
    }
    pred.trajectories =
        anchor_futures(*anchors, category, frame, cfg.pred_steps(), start_time);
    pred.component_ids.resize(pred.trajectories.size());
    for (size_t i = 0; i < pred.component_ids.size(); ++i) {
      pred.component_ids[i] = static_cast<int>(i);
    }
    return pred;
  }

  for (const ComponentTape& c : tape.comps) {
    ComponentParams p;
    const int steps = static_cast<int>(g.value(c.loc_x).cols());
    p.loc_x.resize(steps);
    p.loc_y.resize(steps);
    p.scale_x.resize(steps);
    p.scale_y.resize(steps);
    p.mu_heading.resize(steps);
    p.kappa.resize(steps);
    TrajectorySegment traj;
    traj.start_time = start_time + kDt;
    for (int i = 0; i < steps; ++i) {
      p.loc_x[i] = g.value(c.loc_x)(0, i);
      p.loc_y[i] = g.value(c.loc_y)(0, i);
      p.scale_x[i] = g.value(c.scale_x)(0, i);
      p.scale_y[i] = g.value(c.scale_y)(0, i);
      p.mu_heading[i] = g.value(c.mu_heading)(0, i);
      p.kappa[i] = g.value(c.kappa)(0, i);
      AgentState local;
      local.x = p.loc_x[i];
      local.y = p.loc_y[i];
      local.heading = wrap_angle(p.mu_heading[i]);
      local.valid = true;
      traj.states.push_back(to_global(local, frame));
    }
    pred.component_ids.push_back(c.component_id);
    pred.params.push_back(std::move(p));
    pred.trajectories.push_back(std::move(traj));
  }
  return pred;
}

// --- matching and losses ------------------------------------------------------

int match_positive(const std::vector<TrajectorySegment>& components,
                   const TrajectorySegment& y, double t_zstar) {
  if (components.empty()) throw std::invalid_argument("match_positive: no components");
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < components.size(); ++k) {
    const double d = traj_distance(components[k], y, t_zstar);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  if (best < 0) {
    throw std::domain_error("match_positive: no valid shared steps within the horizon");
  }
  return best;
}

double laplace_nll(double y, double loc, double b) {
  if (b <= 0.0) throw std::domain_error("laplace_nll: scale must be positive");
  return std::abs(y - loc) / b + std::log(2.0 * b);
}

double von_mises_nll(double theta, double mu, double kappa) {
  if (kappa <= 0.0) throw std::domain_error("von_mises_nll: kappa must be positive");
  return -kappa * std::cos(theta - mu) + std::log(2.0 * M_PI) +
         nn::log_bessel_i0_value(kappa);
}

double component_nll(const TrajectorySegment& y_local, const ComponentParams& p) {
  const int n = std::min<int>(p.steps(), static_cast<int>(y_local.states.size()));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const AgentState& s = y_local.states[i];
    if (!s.valid) continue;
    total += laplace_nll(s.x, p.loc_x[i], p.scale_x[i]);
    total += laplace_nll(s.y, p.loc_y[i], p.scale_y[i]);
    total += von_mises_nll(s.heading, p.mu_heading[i], p.kappa[i]);
  }
  return total;
}

std::pair<nn::Var, int> component_nll(nn::Graph& g, const TrajectorySegment& y_local,
                                      const ComponentTape& comp) {
  const int steps = static_cast<int>(g.value(comp.loc_x).cols());
  const int n = std::min<int>(steps, static_cast<int>(y_local.states.size()));
  Eigen::MatrixXd yx = Eigen::MatrixXd::Zero(1, steps);
  Eigen::MatrixXd yy = Eigen::MatrixXd::Zero(1, steps);
  Eigen::MatrixXd yh = Eigen::MatrixXd::Zero(1, steps);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(1, steps);
  int valid = 0;
  for (int i = 0; i < n; ++i) {
    const AgentState& s = y_local.states[i];
    if (!s.valid) continue;
    yx(0, i) = s.x;
    yy(0, i) = s.y;
    yh(0, i) = s.heading;
    mask(0, i) = 1.0;
    ++valid;
  }
  nn::Var mask_v = g.constant(mask);
  auto masked_sum = [&](nn::Var v) { return g.sum(g.mul(v, mask_v)); };

  nn::Var ex = g.div(g.abs(g.sub(g.constant(yx), comp.loc_x)), comp.scale_x);
  nn::Var lx = g.add(ex, g.log(g.scale(comp.scale_x, 2.0)));
  nn::Var ey = g.div(g.abs(g.sub(g.constant(yy), comp.loc_y)), comp.scale_y);
  nn::Var ly = g.add(ey, g.log(g.scale(comp.scale_y, 2.0)));

  nn::Var ch = g.cos(g.sub(g.constant(yh), comp.mu_heading));
  nn::Var vm = g.add(g.scale(g.mul(comp.kappa, ch), -1.0),
                     g.add_scalar(g.log_bessel_i0(comp.kappa), std::log(2.0 * M_PI)));

  nn::Var total = g.add(g.add(masked_sum(lx), masked_sum(ly)), masked_sum(vm));
  return {total, valid};
}

LossTerms training_loss(nn::Graph& g, const DecodeTape& tape, int z_star,
                        const TrajectorySegment& y_local, const MixtureConfig& cfg) {
  const int k_count = static_cast<int>(g.value(tape.log_scores).cols());
  if (z_star < 0 || z_star >= k_count) {
    throw std::invalid_argument("training_loss: z_star out of range");
  }
  LossTerms out;
  out.classification = g.scale(g.pick(tape.log_scores, 0, z_star), -1.0);
  if (cfg.continuous_regression) {
    const ComponentTape* comp = nullptr;
    for (const ComponentTape& c : tape.comps) {
      if (c.component_id == z_star) {
        comp = &c;
        break;
      }
    }
    if (comp == nullptr) {
      throw std::invalid_argument("training_loss: component z* was not decoded");
    }
    auto [nll, valid] = component_nll(g, y_local, *comp);
    out.regression = nll;
    out.valid_steps = valid;
    out.total = g.add(out.classification, out.regression);
  } else {
    out.regression = g.constant(Eigen::MatrixXd::Zero(1, 1));
    out.total = out.classification;
  }
  return out;
}

// --- anchors -------------------------------------------------------------------

namespace {

struct FlatTraj {
  Eigen::VectorXd pos;             // 2 * steps
  std::vector<AgentState> states;  // local-frame future, steps entries
};

std::vector<FlatTraj> collect_futures(const std::vector<Scenario>& dataset,
                                      AgentCategory category, int horizon_steps) {
  std::vector<FlatTraj> out;
  for (const Scenario& s : dataset) {
    const int cur = s.current_index();
    if (s.future_steps < horizon_steps) continue;
    for (const Track& t : s.tracks) {
      if (t.category != category) continue;
      if (!t.states[cur].valid) continue;
      bool all_valid = true;
      for (int i = 1; i <= horizon_steps; ++i) {
        if (!t.states[cur + i].valid) { all_valid = false; break; }
      }
      if (!all_valid) continue;
      const Pose2 frame{t.states[cur].x, t.states[cur].y, t.states[cur].heading};
      FlatTraj ft;
      ft.pos.resize(2 * horizon_steps);
      for (int i = 1; i <= horizon_steps; ++i) {
        const AgentState local = to_local(t.states[cur + i], frame);
        ft.pos(2 * (i - 1)) = local.x;
        ft.pos(2 * (i - 1) + 1) = local.y;
        ft.states.push_back(local);
      }
      out.push_back(std::move(ft));
    }
  }
  return out;
}

}  // namespace

KmeansTrace kmeans_anchors(const std::vector<Scenario>& dataset, int k,
                           AgentCategory category, double horizon, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("kmeans_anchors: k must be >= 1");
  const int steps = static_cast<int>(std::lround(horizon / kDt));
  std::vector<FlatTraj> data = collect_futures(dataset, category, steps);

  std::vector<const FlatTraj*> distinct;
  for (const FlatTraj& f : data) {
    bool dup = false;
    for (const FlatTraj* d : distinct) {
      if (d->pos == f.pos) { dup = true; break; }
    }
    if (!dup) distinct.push_back(&f);
  }
  if (static_cast<int>(distinct.size()) < k) {
    throw std::invalid_argument("kmeans_anchors: fewer than k distinct trajectories (" +
                                std::to_string(distinct.size()) + " < " + std::to_string(k) +
                                ") for category " + category_name(category));
  }

  const int n = static_cast<int>(data.size());
  std::vector<int> order(distinct.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::mt19937_64 rng(derive_seed(seed, 0x6b6d65616e73ull));
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Eigen::VectorXd> centroids(k);
  for (int c = 0; c < k; ++c) centroids[c] = distinct[order[c]]->pos;

  // Mean squared per-step displacement keeps the Lloyd mean update optimal,
  // so the recorded objective never increases.
  auto msd = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); i += 2) {
      const double dx = a(i) - b(i);
      const double dy = a(i + 1) - b(i + 1);
      s += dx * dx + dy * dy;
    }
    return s / (a.size() / 2);
  };

  std::vector<int> assign(n, -1);
  KmeansTrace trace;
  constexpr int kMaxIters = 100;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    bool changed = false;
    double objective = 0.0;
    std::vector<double> point_d(n, 0.0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = msd(data[i].pos, centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = msd(data[i].pos, centroids[c]);
        if (d < best_d) { best_d = d; best = c; }
      }
      if (assign[i] != best) { assign[i] = best; changed = true; }
      point_d[i] = best_d;
      objective += best_d;
    }
    trace.objective.push_back(objective);
    if (!changed && iter > 0) break;

    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(2 * steps));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums[assign[i]] += data[i].pos;
      counts[assign[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids[c] = sums[c] / counts[c];
      } else {
        int far = 0;
        for (int i = 1; i < n; ++i) {
          if (point_d[i] > point_d[far]) far = i;
        }
        centroids[c] = data[far].pos;
        point_d[far] = 0.0;
      }
    }
  }

  // Positions from the centroid vectors; headings as the per-step circular
  // mean of assigned members.
  trace.centroids.resize(k);
  for (int c = 0; c < k; ++c) {
    std::vector<AgentState> traj(steps + 1);
    traj[0] = AgentState{0.0, 0.0, 0.0, true};
    for (int i = 0; i < steps; ++i) {
      double sin_sum = 0.0, cos_sum = 0.0;
      for (int p = 0; p < n; ++p) {
        if (assign[p] != c) continue;
        sin_sum += std::sin(data[p].states[i].heading);
        cos_sum += std::cos(data[p].states[i].heading);
      }
      AgentState s;
      s.x = centroids[c](2 * i);
      s.y = centroids[c](2 * i + 1);
      s.heading = (sin_sum == 0.0 && cos_sum == 0.0) ? 0.0 : std::atan2(sin_sum, cos_sum);
      s.valid = true;
      traj[i + 1] = s;
    }
    trace.centroids[c] = std::move(traj);
  }
  return trace;
}

AnchorSet build_anchor_set(const std::vector<Scenario>& dataset, int k,
                           uint64_t seed, double horizon) {
  AnchorSet set;
  set.k = k;
  set.horizon_steps = static_cast<int>(std::lround(horizon / kDt));
  for (AgentCategory cat : kAllCategories) {
    bool present = false;
    for (const Scenario& s : dataset) {
      for (const Track& t : s.tracks) {
        if (t.category == cat) { present = true; break; }
      }
      if (present) break;
    }
    if (!present) continue;
    KmeansTrace trace = kmeans_anchors(dataset, k, cat, horizon, seed);
    set.anchors.emplace(cat, std::move(trace.centroids));
  }
  if (set.anchors.empty()) {
    throw std::invalid_argument("build_anchor_set: dataset has no tracks");
  }
  return set;
}

TrajectorySegment anchor_in_frame(const AnchorSet& a, AgentCategory category,
                                  int k, const Pose2& pose, double start_time) {
  const auto& trajs = a.of(category);
  if (k < 0 || k >= static_cast<int>(trajs.size())) {
    throw std::invalid_argument("anchor_in_frame: component out of range");
  }
  TrajectorySegment seg;
  seg.start_time = start_time;
  for (const AgentState& s : trajs[k]) seg.states.push_back(to_global(s, pose));
  return seg;
}

std::vector<TrajectorySegment> anchor_futures(const AnchorSet& a,
                                              AgentCategory category,
                                              const Pose2& pose, int steps,
                                              double start_time) {
  const auto& trajs = a.of(category);
  if (steps > a.horizon_steps) {
    throw std::invalid_argument("anchor_futures: requested horizon exceeds anchors");
  }
  std::vector<TrajectorySegment> out;
  out.reserve(trajs.size());
  for (const auto& anchor : trajs) {
    TrajectorySegment seg;
    seg.start_time = start_time + kDt;
    for (int i = 1; i <= steps; ++i) seg.states.push_back(to_global(anchor[i], pose));
    out.push_back(std::move(seg));
  }
  return out;
}

unsigned long long decoder_mac_count(const ModelConfig& mc, const MixtureConfig& cfg) {
  cfg.validate();
  const unsigned long long steps = cfg.pred_steps();
  const unsigned long long out6 = 6ull * steps;
  if (cfg.paradigm == Paradigm::kAnchorFree) {
    const unsigned long long fused = mc.af_query_dim + mc.embed_dim;
    const unsigned long long score = fused * mc.af_score_hidden + mc.af_score_hidden * 1ull;
    const unsigned long long reg = fused * mc.af_reg_hidden + mc.af_reg_hidden * out6;
    return static_cast<unsigned long long>(cfg.k) * (score + reg);
  }
  unsigned long long total =
      static_cast<unsigned long long>(mc.embed_dim) * mc.ab_score_hidden +
      static_cast<unsigned long long>(mc.ab_score_hidden) * cfg.k;
  if (cfg.continuous_regression) {
    const unsigned long long anchor_in = 3ull * (steps + 1);
    total += anchor_in * mc.ab_anchor_hidden +
             static_cast<unsigned long long>(mc.ab_anchor_hidden) * mc.embed_dim;
    total += 2ull * mc.embed_dim * mc.ab_reg_hidden +
             static_cast<unsigned long long>(mc.ab_reg_hidden) * out6;
  }
  return total;
}

}  // namespace unimm
