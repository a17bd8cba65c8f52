#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace unimm::nn {

struct Tensor {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  bool requires_grad = true;
};

// Named parameter bag. Initialization is derived from (seed, name), so a
// store reaches the same values no matter the order in which modules touch
// their parameters first.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  // Creates on first use: weights uniform in +-sqrt(6 / (rows + cols)),
  // biases (single-row tensors flagged as such) zero.
  Tensor& weight(const std::string& name, int rows, int cols);
  Tensor& bias(const std::string& name, int cols);
  // Zero-mean uniform with the weight limit; used for learnable queries.
  Tensor& embedding(const std::string& name, int rows, int cols);
  // All-ones row tensor (layer-norm gains).
  Tensor& ones(const std::string& name, int cols);

  void zero_grads();
  bool grads_populated() const { return grads_populated_; }
  void mark_grads_populated() { grads_populated_ = true; }

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::map<std::string, Tensor>& entries() { return params_; }

  double param_count() const;

 private:
  Tensor& create(const std::string& name, int rows, int cols, bool zero_init);

  std::map<std::string, Tensor> params_;
  uint64_t seed_ = 0;
  bool grads_populated_ = false;
};

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double base_lr = 5e-4;
  long step = 0;
  std::map<std::string, Eigen::MatrixXd> first_moment;
  std::map<std::string, Eigen::MatrixXd> second_moment;
};

// Decoupled-weight-decay Adam update over every requires_grad parameter whose
// name passes `filter` (empty filter = all). Throws std::logic_error when no
// backward pass has populated gradients since the last zero_grads().
void adamw_step(ParamStore& store, OptimizerState& state, double lr,
                const std::function<bool(const std::string&)>& filter = {});

// Cosine annealing from `base` at step 0 to exactly 0 at total_steps.
double cosine_lr(long step, long total_steps, double base = 5e-4);

// Checkpoint: <prefix>.json manifest + <prefix>.bin little-endian f64 blobs,
// one blob per parameter in manifest order.
void save_checkpoint(const ParamStore& store, const std::string& prefix,
                     const nlohmann::json& hyper = nlohmann::json::object());
ParamStore load_checkpoint(const std::string& prefix, nlohmann::json* hyper = nullptr);

}  // namespace unimm::nn
