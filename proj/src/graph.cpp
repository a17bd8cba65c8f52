#include "unimm/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace unimm::nn {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Graph::push(Eigen::MatrixXd value, std::function<void(Graph&)> back) {
  Node n;
  n.value = std::move(value);
  if (recording_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::ensure_grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
}

void Graph::accum(int id, const Eigen::MatrixXd& g) {
  ensure_grad(id);
  nodes_[id].grad += g;
}

Var Graph::constant(Eigen::MatrixXd value) { return push(std::move(value)); }

Var Graph::param(ParamStore& store, const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Tensor& t = store.get(name);
  Var v = push(t.value);
  if (recording_ && t.requires_grad) {
    nodes_[v.id].bound = &t;
    nodes_[v.id].owner = &store;
  }
  param_nodes_.emplace(name, v.id);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Eigen::MatrixXd& A = value(a);
  const Eigen::MatrixXd& B = value(b);
  if (A.cols() != B.rows()) {
    throw std::invalid_argument("matmul: inner dims " + std::to_string(A.cols()) +
                                " vs " + std::to_string(B.rows()));
  }
  macs_ += static_cast<unsigned long long>(A.rows()) * A.cols() * B.cols();
  int ai = a.id, bi = b.id;
  Var self = push(A * B);
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy * g.nodes_[bi].value.transpose());
      g.accum(bi, g.nodes_[ai].value.transpose() * gy);
    };
  }
  return self;
}

Var Graph::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  int ai = a.id, bi = b.id;
  Eigen::MatrixXd out = value(a) + value(b);
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy);
      g.accum(bi, gy);
    };
  }
  return self;
}

Var Graph::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  int ai = a.id, bi = b.id;
  Var self = push(value(a) - value(b));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy);
      g.accum(bi, -gy);
    };
  }
  return self;
}

Var Graph::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  int ai = a.id, bi = b.id;
  Var self = push(value(a).cwiseProduct(value(b)));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy.cwiseProduct(g.nodes_[bi].value));
      g.accum(bi, gy.cwiseProduct(g.nodes_[ai].value));
    };
  }
  return self;
}

Var Graph::div(Var a, Var b) {
  check_same_shape(value(a), value(b), "div");
  int ai = a.id, bi = b.id;
  Var self = push(value(a).cwiseQuotient(value(b)));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd& B = g.nodes_[bi].value;
      g.accum(ai, gy.cwiseQuotient(B));
      g.accum(bi, -gy.cwiseProduct(g.nodes_[self_id].value).cwiseQuotient(B));
    };
  }
  return self;
}

Var Graph::add_rowvec(Var a, Var rowv) {
  const Eigen::MatrixXd& A = value(a);
  const Eigen::MatrixXd& R = value(rowv);
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw std::invalid_argument("add_rowvec: bias shape mismatch");
  }
  int ai = a.id, bi = rowv.id;
  Var self = push(A.rowwise() + R.row(0));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy);
      g.accum(bi, gy.colwise().sum());
    };
  }
  return self;
}

Var Graph::scale(Var a, double s) {
  int ai = a.id;
  Var self = push(value(a) * s);
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, s](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy * s);
    };
  }
  return self;
}

Var Graph::add_scalar(Var a, double s) {
  int ai = a.id;
  Var self = push(value(a).array() + s);
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy);
    };
  }
  return self;
}

Var Graph::relu(Var a) {
  int ai = a.id;
  Var self = push(value(a).cwiseMax(0.0));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd mask =
          (g.nodes_[ai].value.array() > 0.0).cast<double>();
      g.accum(ai, gy.cwiseProduct(mask));
    };
  }
  return self;
}

Var Graph::softplus(Var a) {
  int ai = a.id;
  Var self = push(value(a).unaryExpr([](double x) { return stable_softplus(x); }));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd d =
          g.nodes_[ai].value.unaryExpr([](double x) { return sigmoid(x); });
      g.accum(ai, gy.cwiseProduct(d));
    };
  }
  return self;
}

Var Graph::abs(Var a) {
  int ai = a.id;
  Var self = push(value(a).cwiseAbs());
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd sgn = g.nodes_[ai].value.unaryExpr(
          [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
      g.accum(ai, gy.cwiseProduct(sgn));
    };
  }
  return self;
}

Var Graph::cos(Var a) {
  int ai = a.id;
  Var self = push(value(a).array().cos().matrix());
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd d = -g.nodes_[ai].value.array().sin().matrix();
      g.accum(ai, gy.cwiseProduct(d));
    };
  }
  return self;
}

Var Graph::log(Var a) {
  int ai = a.id;
  Var self = push(value(a).array().log().matrix());
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy.cwiseQuotient(g.nodes_[ai].value));
    };
  }
  return self;
}

Var Graph::log_bessel_i0(Var a) {
  int ai = a.id;
  Var self = push(value(a).unaryExpr([](double x) { return log_bessel_i0_value(x); }));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd d = g.nodes_[ai].value.unaryExpr(
          [](double x) { return bessel_i1_over_i0(x); });
      g.accum(ai, gy.cwiseProduct(d));
    };
  }
  return self;
}

Var Graph::clamp_max(Var a, double hi) {
  int ai = a.id;
  Var self = push(value(a).cwiseMin(hi));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, hi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd mask =
          (g.nodes_[ai].value.array() < hi).cast<double>();
      g.accum(ai, gy.cwiseProduct(mask));
    };
  }
  return self;
}

Var Graph::softmax_rows(Var a) {
  const Eigen::MatrixXd& A = value(a);
  Eigen::MatrixXd out(A.rows(), A.cols());
  for (int r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    Eigen::ArrayXd e = (A.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  int ai = a.id;
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd& p = g.nodes_[self_id].value;
      Eigen::MatrixXd gx(p.rows(), p.cols());
      for (int r = 0; r < p.rows(); ++r) {
        const double dotp = gy.row(r).dot(p.row(r));
        gx.row(r) = p.row(r).cwiseProduct(gy.row(r).array().matrix() -
                                          Eigen::RowVectorXd::Constant(p.cols(), dotp));
      }
      g.accum(ai, gx);
    };
  }
  return self;
}

Var Graph::log_softmax_rows(Var a) {
  const Eigen::MatrixXd& A = value(a);
  Eigen::MatrixXd out(A.rows(), A.cols());
  for (int r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    const double lse = m + std::log((A.row(r).array() - m).exp().sum());
    out.row(r) = A.row(r).array() - lse;
  }
  int ai = a.id;
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd p = g.nodes_[self_id].value.array().exp().matrix();
      Eigen::MatrixXd gx(p.rows(), p.cols());
      for (int r = 0; r < p.rows(); ++r) {
        gx.row(r) = gy.row(r) - gy.row(r).sum() * p.row(r);
      }
      g.accum(ai, gx);
    };
  }
  return self;
}

Var Graph::layer_norm_rows(Var x, Var gain, Var bias) {
  constexpr double kEps = 1e-6;
  const Eigen::MatrixXd& X = value(x);
  const Eigen::MatrixXd& G = value(gain);
  const Eigen::MatrixXd& B = value(bias);
  if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() || B.cols() != X.cols()) {
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1 x cols");
  }
  const int C = static_cast<int>(X.cols());
  Eigen::MatrixXd norm(X.rows(), C);
  Eigen::VectorXd inv_std(X.rows());
  for (int r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().sum() / C;
    inv_std(r) = 1.0 / std::sqrt(var + kEps);
    norm.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  Eigen::MatrixXd out = (norm.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
  int xi = x.id, gi = gain.id, bi = bias.id;
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, xi, gi, bi, norm, inv_std](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd& G = g.nodes_[gi].value;
      const int C = static_cast<int>(norm.cols());
      Eigen::MatrixXd gx(norm.rows(), C);
      Eigen::RowVectorXd ggain = Eigen::RowVectorXd::Zero(C);
      Eigen::RowVectorXd gbias = Eigen::RowVectorXd::Zero(C);
      for (int r = 0; r < norm.rows(); ++r) {
        const Eigen::RowVectorXd dn = gy.row(r).cwiseProduct(G.row(0));
        const double mean_dn = dn.mean();
        const double mean_dn_n = dn.dot(norm.row(r)) / C;
        gx.row(r) = inv_std(r) *
            (dn.array() - mean_dn - norm.row(r).array() * mean_dn_n).matrix();
        ggain += gy.row(r).cwiseProduct(norm.row(r));
        gbias += gy.row(r);
      }
      g.accum(xi, gx);
      g.accum(gi, ggain);
      g.accum(bi, gbias);
    };
  }
  return self;
}

Var Graph::concat_cols(Var a, Var b) {
  const Eigen::MatrixXd& A = value(a);
  const Eigen::MatrixXd& B = value(b);
  if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Eigen::MatrixXd out(A.rows(), A.cols() + B.cols());
  out << A, B;
  int ai = a.id, bi = b.id;
  const int ac = static_cast<int>(A.cols());
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi, ac](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy.leftCols(ac));
      g.accum(bi, gy.rightCols(gy.cols() - ac));
    };
  }
  return self;
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int rows = 0;
  const int cols = static_cast<int>(value(parts[0]).cols());
  for (const Var& p : parts) {
    if (value(p).cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += static_cast<int>(value(p).rows());
  }
  Eigen::MatrixXd out(rows, cols);
  int r = 0;
  std::vector<int> ids;
  std::vector<int> offsets;
  std::vector<int> sizes;
  for (const Var& p : parts) {
    const Eigen::MatrixXd& V = value(p);
    out.middleRows(r, V.rows()) = V;
    ids.push_back(p.id);
    offsets.push_back(r);
    sizes.push_back(static_cast<int>(V.rows()));
    r += static_cast<int>(V.rows());
  }
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ids, offsets, sizes](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      for (size_t i = 0; i < ids.size(); ++i) {
        g.accum(ids[i], gy.middleRows(offsets[i], sizes[i]));
      }
    };
  }
  return self;
}

Var Graph::fused_attention(Var query, Var keys, Var values, Var rel, int heads) {
  const Eigen::MatrixXd& Q = value(query);
  const Eigen::MatrixXd& K = value(keys);
  const Eigen::MatrixXd& V = value(values);
  const int d = static_cast<int>(Q.cols());
  const int nk = static_cast<int>(K.rows());
  if (Q.rows() != 1) throw std::invalid_argument("fused_attention: query must be one row");
  if (K.cols() != d || V.cols() != d || V.rows() != nk) {
    throw std::invalid_argument("fused_attention: key/value shape mismatch");
  }
  if (heads < 1 || d % heads != 0) {
    throw std::invalid_argument("fused_attention: width not divisible by heads");
  }
  const bool has_rel = rel.ok();
  if (has_rel && (value(rel).rows() != nk || value(rel).cols() != d)) {
    throw std::invalid_argument("fused_attention: relative encoding shape mismatch");
  }
  const int hd = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Eigen::MatrixXd k_eff = K;
  if (has_rel) k_eff += value(rel);
  macs_ += 2ull * nk * d;  // q.K^T and alpha.V

  Eigen::MatrixXd alpha(heads, nk);
  Eigen::MatrixXd out(1, d);
  for (int h = 0; h < heads; ++h) {
    Eigen::RowVectorXd scores =
        inv_scale * (Q.middleCols(h * hd, hd) * k_eff.middleCols(h * hd, hd).transpose());
    const double m = scores.maxCoeff();
    Eigen::RowVectorXd e = (scores.array() - m).exp();
    alpha.row(h) = e / e.sum();
    out.middleCols(h * hd, hd) = alpha.row(h) * V.middleCols(h * hd, hd);
  }

  int qi = query.id, ki = keys.id, vi = values.id, ri = has_rel ? rel.id : -1;
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, qi, ki, vi, ri, heads, hd, inv_scale, alpha,
                            k_eff](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      const Eigen::MatrixXd& Q = g.nodes_[qi].value;
      const Eigen::MatrixXd& V = g.nodes_[vi].value;
      const int nk = static_cast<int>(alpha.cols());
      const int d = heads * hd;
      Eigen::MatrixXd gq = Eigen::MatrixXd::Zero(1, d);
      Eigen::MatrixXd gk = Eigen::MatrixXd::Zero(nk, d);
      Eigen::MatrixXd gv = Eigen::MatrixXd::Zero(nk, d);
      for (int h = 0; h < heads; ++h) {
        const auto Vh = V.middleCols(h * hd, hd);
        const auto Kh = k_eff.middleCols(h * hd, hd);
        const Eigen::RowVectorXd go_h = gy.middleCols(h * hd, hd);
        const Eigen::RowVectorXd a = alpha.row(h);
        gv.middleCols(h * hd, hd) += a.transpose() * go_h;
        Eigen::RowVectorXd galpha = (Vh * go_h.transpose()).transpose();
        const double dot = galpha.dot(a);
        const Eigen::RowVectorXd gscore =
            a.cwiseProduct(galpha.array().matrix() -
                           Eigen::RowVectorXd::Constant(nk, dot));
        gq.middleCols(h * hd, hd) += inv_scale * (gscore * Kh);
        gk.middleCols(h * hd, hd) +=
            inv_scale * (gscore.transpose() * Q.middleCols(h * hd, hd));
      }
      g.accum(qi, gq);
      g.accum(ki, gk);
      g.accum(vi, gv);
      if (ri >= 0) g.accum(ri, gk);
    };
  }
  return self;
}

Var Graph::slice_cols(Var a, int c0, int n) {
  const Eigen::MatrixXd& A = value(a);
  if (c0 < 0 || n < 0 || c0 + n > A.cols()) throw std::invalid_argument("slice_cols: out of range");
  int ai = a.id;
  Var self = push(A.middleCols(c0, n));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, c0, n](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.ensure_grad(ai);
      g.nodes_[ai].grad.middleCols(c0, n) += gy;
    };
  }
  return self;
}

Var Graph::slice_rows(Var a, int r0, int n) {
  const Eigen::MatrixXd& A = value(a);
  if (r0 < 0 || n < 0 || r0 + n > A.rows()) throw std::invalid_argument("slice_rows: out of range");
  int ai = a.id;
  Var self = push(A.middleRows(r0, n));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, r0, n](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.ensure_grad(ai);
      g.nodes_[ai].grad.middleRows(r0, n) += gy;
    };
  }
  return self;
}

Var Graph::row(Var a, int r) {
  const Eigen::MatrixXd& A = value(a);
  if (r < 0 || r >= A.rows()) throw std::invalid_argument("row: out of range");
  int ai = a.id;
  Var self = push(A.row(r));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, r](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.ensure_grad(ai);
      g.nodes_[ai].grad.row(r) += gy.row(0);
    };
  }
  return self;
}

Var Graph::pick(Var a, int r, int c) {
  const Eigen::MatrixXd& A = value(a);
  if (r < 0 || r >= A.rows() || c < 0 || c >= A.cols()) {
    throw std::invalid_argument("pick: out of range");
  }
  int ai = a.id;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = A(r, c);
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, r, c](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.ensure_grad(ai);
      g.nodes_[ai].grad(r, c) += gy(0, 0);
    };
  }
  return self;
}

Var Graph::sum(Var a) {
  int ai = a.id;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = value(a).sum();
  Var self = push(std::move(out));
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, Eigen::MatrixXd::Constant(g.nodes_[ai].value.rows(),
                                            g.nodes_[ai].value.cols(), gy(0, 0)));
    };
  }
  return self;
}

Var Graph::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  return scale(sum(a), 1.0 / n);
}

Var Graph::matmul_nt(Var a, Var b) {
  const Eigen::MatrixXd& A = value(a);
  const Eigen::MatrixXd& B = value(b);
  if (A.cols() != B.cols()) {
    throw std::invalid_argument("matmul_nt: inner dims " + std::to_string(A.cols()) +
                                " vs " + std::to_string(B.cols()));
  }
  macs_ += static_cast<unsigned long long>(A.rows()) * A.cols() * B.rows();
  int ai = a.id, bi = b.id;
  Var self = push(A * B.transpose());
  if (recording_) {
    int self_id = self.id;
    nodes_[self_id].back = [self_id, ai, bi](Graph& g) {
      const Eigen::MatrixXd& gy = g.nodes_[self_id].grad;
      if (gy.size() == 0) return;
      g.accum(ai, gy * g.nodes_[bi].value);
      g.accum(bi, gy.transpose() * g.nodes_[ai].value);
    };
  }
  return self;
}

void Graph::backward(Var loss) {
  if (!recording_) throw std::logic_error("backward: graph is not recording");
  const Eigen::MatrixXd& L = value(loss);
  if (L.rows() != 1 || L.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar (1x1)");
  }
  ensure_grad(loss.id);
  nodes_[loss.id].grad(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this);
    if (n.bound != nullptr) {
      if (n.bound->grad.size() == 0) {
        n.bound->grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
      }
      n.bound->grad += n.grad;
      if (n.owner != nullptr) n.owner->mark_grads_populated();
    }
  }
}

double log_bessel_i0_value(double x) {
  x = std::abs(x);
  if (x < 15.0) {
    // 30-term power series of I0 summed directly.
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m <= 30; ++m) {
      term *= q / (static_cast<double>(m) * m);
      sum += term;
    }
    return std::log(sum);
  }
  // I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  const double ix = 1.0 / (8.0 * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 12; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= odd * odd * ix / k;
    sum += term;
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

double bessel_i1_over_i0(double x) {
  if (x == 0.0) return 0.0;
  const double ax = std::abs(x);
  double r;
  if (ax < 15.0) {
    const double q = 0.25 * ax * ax;
    double t0 = 1.0, s0 = 1.0;  // I0 series
    double t1 = 1.0, s1 = 1.0;  // I1 series without the leading x/2
    for (int m = 1; m <= 30; ++m) {
      t0 *= q / (static_cast<double>(m) * m);
      s0 += t0;
      t1 *= q / (static_cast<double>(m) * (m + 1.0));
      s1 += t1;
    }
    r = 0.5 * ax * s1 / s0;
  } else {
    // Asymptotic numerator/denominator share the e^x / sqrt(2 pi x) factor.
    const double ix = 1.0 / (8.0 * ax);
    double term0 = 1.0, sum0 = 1.0;
    double term1 = 1.0, sum1 = 1.0;
    for (int k = 1; k <= 12; ++k) {
      const double odd = 2.0 * k - 1.0;
      term0 *= odd * odd * ix / k;
      sum0 += term0;
      term1 *= (odd * odd - 4.0) * ix / k;  // mu = 4 for I1
      sum1 += term1;
    }
    r = sum1 / sum0;
  }
  return x >= 0.0 ? r : -r;
}

}  // namespace unimm::nn
