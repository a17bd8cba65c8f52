#include "unimm/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "unimm/synthworld.hpp"

namespace unimm::nn {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double unit_interval(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

Tensor& ParamStore::create(const std::string& name, int rows, int cols, bool zero_init) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    Tensor& t = it->second;
    if (t.value.rows() != rows || t.value.cols() != cols) {
      throw std::invalid_argument("ParamStore: shape conflict for " + name);
    }
    return t;
  }
  Tensor t;
  if (zero_init) {
    t.value = Eigen::MatrixXd::Zero(rows, cols);
  } else {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::mt19937_64 rng(derive_seed(seed_, fnv1a(name)));
    t.value.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        t.value(r, c) = (2.0 * unit_interval(rng) - 1.0) * limit;
      }
    }
  }
  return params_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::weight(const std::string& name, int rows, int cols) {
  return create(name, rows, cols, false);
}

Tensor& ParamStore::bias(const std::string& name, int cols) {
  return create(name, 1, cols, true);
}

Tensor& ParamStore::embedding(const std::string& name, int rows, int cols) {
  return create(name, rows, cols, false);
}

Tensor& ParamStore::ones(const std::string& name, int cols) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  Tensor& t = create(name, 1, cols, true);
  t.value.setOnes();
  return t;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.grad.setZero(t.value.rows(), t.value.cols());
  grads_populated_ = false;
}

double ParamStore::param_count() const {
  double n = 0;
  for (const auto& [name, t] : params_) n += static_cast<double>(t.value.size());
  return n;
}

void adamw_step(ParamStore& store, OptimizerState& state, double lr,
                const std::function<bool(const std::string&)>& filter) {
  if (!store.grads_populated()) {
    throw std::logic_error("adamw_step: gradients have not been populated");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : store.entries()) {
    if (!t.requires_grad) continue;
    if (filter && !filter(name)) continue;
    if (t.grad.size() == 0) t.grad.setZero(t.value.rows(), t.value.cols());
    Eigen::MatrixXd& m = state.first_moment
                             .try_emplace(name, Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()))
                             .first->second;
    Eigen::MatrixXd& v = state.second_moment
                             .try_emplace(name, Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()))
                             .first->second;
    m = state.beta1 * m + (1.0 - state.beta1) * t.grad;
    v = state.beta2 * v + (1.0 - state.beta2) * t.grad.cwiseProduct(t.grad);
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    t.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
    t.value -= lr * state.weight_decay * t.value;
  }
}

double cosine_lr(long step, long total_steps, double base) {
  if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw std::invalid_argument("cosine_lr: step out of [0, total_steps]");
  }
  if (step == total_steps) return 0.0;
  return 0.5 * base * (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
}

void save_checkpoint(const ParamStore& store, const std::string& prefix,
                     const nlohmann::json& hyper) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "unimm-checkpoint-v1";
  manifest["seed"] = store.seed();
  manifest["hyper"] = hyper;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : store.entries()) {
    nlohmann::ordered_json p;
    p["name"] = name;
    p["rows"] = t.value.rows();
    p["cols"] = t.value.cols();
    p["offset"] = offset;
    params.push_back(p);
    offset += static_cast<uint64_t>(t.value.size()) * sizeof(double);
  }
  manifest["params"] = params;

  std::ofstream jf(prefix + ".json", std::ios::binary);
  if (!jf) throw std::runtime_error("cannot write " + prefix + ".json");
  jf << manifest.dump(2) << "\n";

  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot write " + prefix + ".bin");
  for (const auto& [name, t] : store.entries()) {
    // Row-major element order, little-endian doubles.
    for (int r = 0; r < t.value.rows(); ++r) {
      for (int c = 0; c < t.value.cols(); ++c) {
        const double v = t.value(r, c);
        bf.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    }
  }
}

ParamStore load_checkpoint(const std::string& prefix, nlohmann::json* hyper) {
  std::ifstream jf(prefix + ".json", std::ios::binary);
  if (!jf) throw std::runtime_error("cannot read " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(jf);
  if (manifest.value("format", "") != "unimm-checkpoint-v1") {
    throw std::runtime_error("unexpected checkpoint format in " + prefix + ".json");
  }
  if (hyper != nullptr) *hyper = manifest.value("hyper", nlohmann::json::object());

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot read " + prefix + ".bin");

  ParamStore store(manifest.value("seed", 0ull));
  for (const auto& p : manifest.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    const int rows = p.at("rows").get<int>();
    const int cols = p.at("cols").get<int>();
    Tensor t;
    t.value.resize(rows, cols);
    bf.seekg(static_cast<std::streamoff>(p.at("offset").get<uint64_t>()));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double v = 0.0;
        bf.read(reinterpret_cast<char*>(&v), sizeof(double));
        t.value(r, c) = v;
      }
    }
    if (!bf) throw std::runtime_error("truncated checkpoint blob in " + prefix + ".bin");
    store.entries().emplace(name, std::move(t));
  }
  return store;
}

}  // namespace unimm::nn
