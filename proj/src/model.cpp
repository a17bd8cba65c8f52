#include "unimm/model.hpp"

#include <stdexcept>

namespace unimm {

DecodeTape decode_model(nn::Graph& g, BehaviorModel& m, nn::Var embedding,
                        AgentCategory category, std::optional<int> selected) {
  if (m.mixture_config.paradigm == Paradigm::kAnchorFree) {
    return decode_anchor_free(g, m.store, m.model_config, m.mixture_config, embedding);
  }
  return decode_anchor_based(g, m.store, m.model_config, m.mixture_config,
                             embedding, m.anchors, category, selected);
}

MixturePrediction predict_at(BehaviorModel& m, const EncoderCache& cache,
                             int track, int window, AgentCategory category,
                             std::optional<int> selected) {
  if (window >= cache.windows_done || !cache.valid[track][window]) {
    throw std::logic_error("predict_at: no cached embedding for this (track, window)");
  }
  nn::Graph g(false);
  nn::Var emb = g.constant(cache.final_embed[track][window]);
  DecodeTape tape = decode_model(g, m, emb, category, selected);
  const Pose2& frame = cache.frames[track][window];
  const double start_time = (window - 1) * kTau;
  return realize_prediction(g, tape, m.mixture_config,
                            m.anchors.anchors.empty() ? nullptr : &m.anchors,
                            category, frame, start_time);
}

nlohmann::json mixture_config_to_json(const MixtureConfig& c) {
  nlohmann::json j;
  j["k"] = c.k;
  j["paradigm"] = c.paradigm == Paradigm::kAnchorFree ? "anchor_free" : "anchor_based";
  j["continuous_regression"] = c.continuous_regression;
  j["t_pred"] = c.t_pred;
  j["t_zstar"] = c.t_zstar;
  return j;
}

MixtureConfig mixture_config_from_json(const nlohmann::json& j) {
  MixtureConfig c;
  c.k = j.at("k").get<int>();
  const std::string p = j.at("paradigm").get<std::string>();
  if (p == "anchor_free") {
    c.paradigm = Paradigm::kAnchorFree;
  } else if (p == "anchor_based") {
    c.paradigm = Paradigm::kAnchorBased;
  } else {
    throw std::invalid_argument("unknown paradigm: " + p);
  }
  c.continuous_regression = j.at("continuous_regression").get<bool>();
  c.t_pred = j.at("t_pred").get<double>();
  c.t_zstar = j.at("t_zstar").get<double>();
  return c;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["embed_dim"] = c.embed_dim;
  j["heads"] = c.heads;
  j["blocks"] = c.blocks;
  j["rpe_hidden"] = c.rpe_hidden;
  j["token_hidden"] = c.token_hidden;
  j["af_query_dim"] = c.af_query_dim;
  j["af_score_hidden"] = c.af_score_hidden;
  j["af_reg_hidden"] = c.af_reg_hidden;
  j["ab_score_hidden"] = c.ab_score_hidden;
  j["ab_anchor_hidden"] = c.ab_anchor_hidden;
  j["ab_reg_hidden"] = c.ab_reg_hidden;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.rpe_hidden = j.at("rpe_hidden").get<int>();
  c.token_hidden = j.at("token_hidden").get<int>();
  c.af_query_dim = j.at("af_query_dim").get<int>();
  c.af_score_hidden = j.at("af_score_hidden").get<int>();
  c.af_reg_hidden = j.at("af_reg_hidden").get<int>();
  c.ab_score_hidden = j.at("ab_score_hidden").get<int>();
  c.ab_anchor_hidden = j.at("ab_anchor_hidden").get<int>();
  c.ab_reg_hidden = j.at("ab_reg_hidden").get<int>();
  return c;
}

void save_model(const BehaviorModel& m, const std::string& prefix) {
  nlohmann::json hyper;
  hyper["mixture"] = mixture_config_to_json(m.mixture_config);
  hyper["model"] = model_config_to_json(m.model_config);
  nn::save_checkpoint(m.store, prefix, hyper);
}

BehaviorModel load_model(const std::string& prefix) {
  nlohmann::json hyper;
  BehaviorModel m;
  m.store = nn::load_checkpoint(prefix, &hyper);
  m.mixture_config = mixture_config_from_json(hyper.at("mixture"));
  m.model_config = model_config_from_json(hyper.at("model"));
  return m;
}

}  // namespace unimm
