#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unimm/params.hpp"

namespace unimm::nn {

class Graph;

// Handle to a node on a Graph tape.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  bool ok() const { return g != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape over dense double matrices. A Graph built
// with recording=false evaluates the same ops without storing backward
// closures; inference paths use that mode.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  size_t node_count() const { return nodes_.size(); }

  Var constant(Eigen::MatrixXd value);
  Var param(ParamStore& store, const std::string& name);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[v.id].grad; }

  Var matmul(Var a, Var b);      // a * b
  Var matmul_nt(Var a, Var b);   // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);         // elementwise
  Var div(Var a, Var b);         // elementwise
  Var add_rowvec(Var a, Var row);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var relu(Var a);
  Var softplus(Var a);
  Var abs(Var a);
  Var cos(Var a);
  Var log(Var a);
  Var log_bessel_i0(Var a);
  Var clamp_max(Var a, double hi);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gain, Var bias);
  Var concat_cols(Var a, Var b);
  Var concat_rows(const std::vector<Var>& parts);
  // Fused single-query multi-head scaled-dot-product attention; `rel` (same
  // shape as keys, may be invalid) is added to the keys before scoring.
  Var fused_attention(Var query, Var keys, Var values, Var rel, int heads);

  Var slice_cols(Var a, int c0, int n);
  Var slice_rows(Var a, int r0, int n);
  Var row(Var a, int r);
  Var pick(Var a, int r, int c);  // 1x1
  Var sum(Var a);                 // 1x1
  Var mean(Var a);                // 1x1

  // Accumulates gradients of a 1x1 loss into every reachable param leaf.
  void backward(Var loss);

  // Multiply-add count of every matmul executed on this tape.
  unsigned long long mac_count() const { return macs_; }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Graph&)> back;
    Tensor* bound = nullptr;       // param leaf
    ParamStore* owner = nullptr;   // store to flag when gradients land
  };

  Var push(Eigen::MatrixXd value, std::function<void(Graph&)> back = {});
  void accum(int id, const Eigen::MatrixXd& g);
  void ensure_grad(int id);

  std::vector<Node> nodes_;
  std::map<std::string, int> param_nodes_;  // one leaf per parameter per tape
  bool recording_ = true;
  unsigned long long macs_ = 0;
};

// log I0 and I1/I0, accurate to ~1e-10 over (0, 500]: 30-term power series
// below 15, asymptotic expansion beyond.
double log_bessel_i0_value(double kappa);
double bessel_i1_over_i0(double kappa);

}  // namespace unimm::nn
