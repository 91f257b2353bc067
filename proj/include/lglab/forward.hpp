#pragma once

#include "lglab/types.hpp"

namespace lglab {

/// Attention logit between query position i and key position j (1-based,
/// j <= i) in layer l, head h, given the layer inputs y^{(l-1)}.
/// Finite mode:   y_j^T KQ y_i + phi(i-j)
/// Infinite mode: y_j^T KQ y_i + log(i) * phi(i-j)
double attention_logit(const LTParams& params, const PrecisionMode& mode,
                       const std::vector<VectorXd>& layer_inputs, int l, int h,
                       int i, int j);

/// Post-softmax attention weights over key positions j = 1..i.
/// Finite mode scales logits by log(seq_len), shifts the max to 0,
/// exponentiates, rounds terms <= 2^-p to exactly 0, then normalizes.
/// Infinite mode is a plain max-shifted softmax of the scaled-suffix logits.
VectorXd attention_distribution(const LTParams& params,
                                const PrecisionMode& mode,
                                const std::vector<VectorXd>& layer_inputs,
                                int l, int h, int i, int seq_len);

struct ForwardResult {
  std::vector<VectorXd> outputs;  // T(x)_i, one o-vector per position
  // states[l][i] = y^{(l)} at position i+1, l = 0..L (l = 0 is the embedding)
  std::vector<std::vector<VectorXd>> states;
};

ForwardResult forward(const LTParams& params, const PrecisionMode& mode,
                      const TokenSeq& x, bool keep_states = false);

/// Output logits at the final position only.
VectorXd forward_last(const LTParams& params, const PrecisionMode& mode,
                      const TokenSeq& x);

}  // namespace lglab
