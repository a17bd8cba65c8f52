#include "unimm/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace unimm::nn {

Var mlp_forward(Graph& g, ParamStore& store, const std::string& prefix,
                Var input, const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw std::invalid_argument("mlp_forward: need >= 2 widths");
  Var h = input;
  for (size_t i = 0; i + 1 < spec.widths.size(); ++i) {
    const int in = spec.widths[i];
    const int out = spec.widths[i + 1];
    if (g.value(h).cols() != in) {
      throw std::invalid_argument("mlp_forward: input width " +
                                  std::to_string(g.value(h).cols()) + " != " +
                                  std::to_string(in) + " at layer " + prefix + ".w" +
                                  std::to_string(i));
    }
    Var w = g.param(store, [&] {
      store.weight(prefix + ".w" + std::to_string(i), in, out);
      return prefix + ".w" + std::to_string(i);
    }());
    Var b = g.param(store, [&] {
      store.bias(prefix + ".b" + std::to_string(i), out);
      return prefix + ".b" + std::to_string(i);
    }());
    h = g.add_rowvec(g.matmul(h, w), b);
    if (i + 2 < spec.widths.size()) h = g.relu(h);
  }
  return h;
}

Var attention_forward(Graph& g, Var queries, Var keys, Var values,
                      const std::vector<Var>& relative, int heads) {
  const Eigen::MatrixXd& Q = g.value(queries);
  const Eigen::MatrixXd& K = g.value(keys);
  const Eigen::MatrixXd& V = g.value(values);
  const int nq = static_cast<int>(Q.rows());
  const int d = static_cast<int>(Q.cols());
  if (K.cols() != d || V.cols() != d) {
    throw std::invalid_argument("attention_forward: query/key/value width mismatch");
  }
  if (K.rows() != V.rows()) {
    throw std::invalid_argument("attention_forward: key/value sequence length mismatch");
  }
  if (heads < 1 || d % heads != 0) {
    throw std::invalid_argument("attention_forward: width not divisible by heads");
  }
  if (!relative.empty() && static_cast<int>(relative.size()) != nq) {
    throw std::invalid_argument("attention_forward: one relative encoding per query required");
  }
  std::vector<Var> out_rows;
  out_rows.reserve(nq);
  for (int qi = 0; qi < nq; ++qi) {
    Var q_row = nq == 1 ? queries : g.row(queries, qi);
    Var rel = relative.empty() ? Var{} : relative[qi];
    out_rows.push_back(g.fused_attention(q_row, keys, values, rel, heads));
  }
  return nq == 1 ? out_rows[0] : g.concat_rows(out_rows);
}

Var layer_norm(Graph& g, ParamStore& store, const std::string& prefix, Var x) {
  const int c = static_cast<int>(g.value(x).cols());
  store.ones(prefix + ".gain", c);
  store.bias(prefix + ".bias", c);
  Var gain = g.param(store, prefix + ".gain");
  Var bias = g.param(store, prefix + ".bias");
  return g.layer_norm_rows(x, gain, bias);
}

}  // namespace unimm::nn
