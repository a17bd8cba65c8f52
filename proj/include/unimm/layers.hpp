#pragma once

#include <string>
#include <vector>

#include "unimm/graph.hpp"
#include "unimm/params.hpp"

namespace unimm::nn {

// widths = [input, hidden..., output]; ReLU between layers, linear output.
struct MlpSpec {
  std::vector<int> widths;
};

// Parameters live under `prefix` (".w0", ".b0", ...), created on first use.
Var mlp_forward(Graph& g, ParamStore& store, const std::string& prefix,
                Var input, const MlpSpec& spec);

// Scaled dot-product attention. `relative` holds one nk x D encoding matrix
// per query row (added to the keys of that query before scoring); pass an
// empty vector for plain attention. Softmax rows sum to 1 by construction.
Var attention_forward(Graph& g, Var queries, Var keys, Var values,
                      const std::vector<Var>& relative, int heads);

// Pre-norm residual helper: layer_norm with learned gain/bias under prefix.
Var layer_norm(Graph& g, ParamStore& store, const std::string& prefix, Var x);

}  // namespace unimm::nn
