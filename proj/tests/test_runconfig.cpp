#include <doctest.h>

#include "unimm/runconfig.hpp"

using namespace unimm;

TEST_CASE("dump-defaults re-parses to an identical document (fixed point)") {
  const RunConfig defaults;
  const nlohmann::ordered_json dumped = dump_run_config(defaults);
  const RunConfig reparsed = parse_run_config(dumped);
  CHECK(dump_run_config(reparsed) == dumped);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(parse_run_config(nlohmann::json::parse(R"({"sead": 1})")),
                       doctest::Contains("sead"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_run_config(nlohmann::json::parse(R"({"mixture": {"paradgim": "x"}})")),
      doctest::Contains("paradgim"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_run_config(nlohmann::json::parse(R"({"train": {"momentum": 0.9}})")),
      doctest::Contains("momentum"), std::invalid_argument);
}

TEST_CASE("partial documents override only their keys") {
  const RunConfig cfg = parse_run_config(
      nlohmann::json::parse(R"({"mixture": {"k": 12}, "train": {"epochs": 3}})"));
  CHECK(cfg.mixture.k == 12);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.batch_scenes == RunConfig{}.batch_scenes);
}

TEST_CASE("presets pin the four benchmark configurations") {
  SUBCASE("discrete") {
    RunConfig cfg;
    apply_preset(cfg, "discrete");
    CHECK(cfg.mixture.paradigm == Paradigm::kAnchorBased);
    CHECK_FALSE(cfg.mixture.continuous_regression);
    CHECK(cfg.mixture.k == 2048);
    CHECK(cfg.mixture.t_pred == 0.5);
    CHECK(cfg.data_mode == TrainConfig::DataMode::kClosedLoop);
  }
  SUBCASE("anchor-free shows K=6 and T_pred=4s") {
    RunConfig cfg;
    apply_preset(cfg, "anchor-free");
    CHECK(cfg.mixture.paradigm == Paradigm::kAnchorFree);
    CHECK(cfg.mixture.k == 6);
    CHECK(cfg.mixture.t_pred == 4.0);
    CHECK(cfg.mixture.t_zstar == 4.0);
    CHECK(cfg.posterior.t_post == 0.5);
    CHECK_FALSE(cfg.posterior.approximate);
  }
  SUBCASE("anchor-based-0.5s") {
    RunConfig cfg;
    apply_preset(cfg, "anchor-based-0.5s");
    CHECK(cfg.mixture.continuous_regression);
    CHECK(cfg.mixture.t_pred == 0.5);
    CHECK(cfg.posterior.approximate);
  }
  SUBCASE("anchor-based-4s aligns t_zstar with t_post") {
    RunConfig cfg;
    apply_preset(cfg, "anchor-based-4s");
    CHECK(cfg.mixture.t_pred == 4.0);
    CHECK(cfg.mixture.t_zstar == 0.5);
    CHECK(cfg.posterior.t_post == 0.5);
  }
  SUBCASE("unknown preset throws") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_preset(cfg, "anchored"), std::invalid_argument);
  }
}
