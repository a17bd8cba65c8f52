#pragma once

namespace unimm {

// Network widths shared by the encoder and the decoders. The anchor-based
// decoder keeps its per-component cost (one score logit) small relative to
// the fixed anchor-encoding and regression cost, so component count scales
// almost for free; the anchor-free decoder pays per component.
struct ModelConfig {
  int embed_dim = 64;
  int heads = 4;
  int blocks = 2;
  int rpe_hidden = 32;
  int token_hidden = 64;
  int af_query_dim = 64;
  int af_score_hidden = 64;
  int af_reg_hidden = 64;
  int ab_score_hidden = 16;
  int ab_anchor_hidden = 512;
  int ab_reg_hidden = 512;
};

}  // namespace unimm
