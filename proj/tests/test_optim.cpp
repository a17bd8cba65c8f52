#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "unimm/params.hpp"
#include "test_helpers.hpp"

using namespace unimm;
using nn::OptimizerState;
using nn::ParamStore;

TEST_CASE("adamw: zero gradient and zero weight decay leave parameters unchanged") {
  ParamStore store(1);
  auto& t = store.weight("w", 2, 2);
  const Eigen::MatrixXd before = t.value;
  store.zero_grads();
  store.mark_grads_populated();
  OptimizerState opt;
  opt.weight_decay = 0.0;
  nn::adamw_step(store, opt, 1e-3);
  CHECK((t.value - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adamw single step matches hand-applied arithmetic") {
  ParamStore store(1);
  auto& t = store.weight("w", 1, 1);
  t.value(0, 0) = 0.7;
  store.zero_grads();
  t.grad = Eigen::MatrixXd::Constant(1, 1, 0.3);
  store.mark_grads_populated();
  OptimizerState opt;
  const double lr = 2e-3;
  nn::adamw_step(store, opt, lr);

  // Hand arithmetic for step 1.
  const double g = 0.3;
  const double m = (1.0 - opt.beta1) * g;
  const double v = (1.0 - opt.beta2) * g * g;
  const double m_hat = m / (1.0 - opt.beta1);
  const double v_hat = v / (1.0 - opt.beta2);
  double w = 0.7 - lr * (m_hat / (std::sqrt(v_hat) + opt.eps));
  w -= lr * opt.weight_decay * w;
  CHECK(std::abs(t.value(0, 0) - w) < 1e-12);
}

TEST_CASE("adamw decoupled decay shrinks parameters by lr*wd*theta") {
  ParamStore store(1);
  auto& t = store.weight("w", 1, 1);
  t.value(0, 0) = 2.0;
  store.zero_grads();
  store.mark_grads_populated();
  OptimizerState opt;
  opt.weight_decay = 0.01;
  nn::adamw_step(store, opt, 0.5);
  CHECK(t.value(0, 0) == doctest::Approx(2.0 - 0.5 * 0.01 * 2.0).epsilon(1e-12));
}

TEST_CASE("adamw without populated gradients is a state error") {
  ParamStore store(1);
  store.weight("w", 1, 1);
  store.zero_grads();
  OptimizerState opt;
  CHECK_THROWS_AS(nn::adamw_step(store, opt, 1e-3), std::logic_error);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(nn::cosine_lr(0, 100) == doctest::Approx(5e-4).epsilon(1e-15));
  CHECK(nn::cosine_lr(100, 100) == 0.0);
  CHECK(nn::cosine_lr(50, 100) == doctest::Approx(2.5e-4).epsilon(1e-12));
  CHECK_THROWS_AS(nn::cosine_lr(101, 100), std::invalid_argument);
  CHECK_THROWS_AS(nn::cosine_lr(-1, 100), std::invalid_argument);
}

TEST_CASE("parameter initialization is deterministic per (seed, name)") {
  ParamStore a(42), b(42), c(43);
  const Eigen::MatrixXd wa = a.weight("net.w0", 4, 6).value;
  const Eigen::MatrixXd wb = b.weight("net.w0", 4, 6).value;
  const Eigen::MatrixXd wc = c.weight("net.w0", 4, 6).value;
  CHECK((wa - wb).cwiseAbs().maxCoeff() == 0.0);
  CHECK((wa - wc).cwiseAbs().maxCoeff() > 0.0);
  const double limit = std::sqrt(6.0 / (4 + 6));
  CHECK(wa.cwiseAbs().maxCoeff() <= limit);
  CHECK(a.bias("net.b0", 6).value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints round-trip values and hyperparameters") {
  ParamStore store(7);
  store.weight("enc.w", 3, 5);
  store.bias("enc.b", 5);
  store.get("enc.w").value(1, 2) = 0.123456789012345;
  nlohmann::json hyper;
  hyper["note"] = "round trip";
  const std::string prefix = "/tmp/unimm_ckpt_test";
  nn::save_checkpoint(store, prefix, hyper);

  nlohmann::json back_hyper;
  ParamStore back = nn::load_checkpoint(prefix, &back_hyper);
  CHECK(back_hyper.at("note") == "round trip");
  CHECK(back.seed() == 7);
  for (const auto& [name, t] : store.entries()) {
    const Eigen::MatrixXd& restored = back.get(name).value;
    CHECK((restored - t.value).cwiseAbs().maxCoeff() == 0.0);
  }

  // Saving again is byte-identical (no timestamps or map-order effects).
  nn::save_checkpoint(back, prefix + "_again", back_hyper);
  auto slurp = [](const std::string& p) {
    FILE* f = std::fopen(p.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string s;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) s.append(buf, n);
    std::fclose(f);
    return s;
  };
  CHECK(slurp(prefix + ".bin") == slurp(prefix + "_again.bin"));
  CHECK(slurp(prefix + ".json") == slurp(prefix + "_again.json"));
}
