#include "lglab/forward.hpp"

#include <cmath>
#include <limits>

namespace lglab {

void validate_tokens(const TokenSeq& x, int s_vocab) {
  if (x.empty()) throw PreconditionError("token sequence must be nonempty");
  for (int t : x)
    if (t < 1 || t > s_vocab)
      throw PreconditionError("token id " + std::to_string(t) +
                              " outside {1.." + std::to_string(s_vocab) + "}");
}

void LTParams::validate() const {
  if (s_vocab < 1 || d < 1 || delta < 1 || tau < 0)
    throw ShapeError("nonpositive model dimensions");
  if (embed.rows() != s_vocab || embed.cols() != d)
    throw ShapeError("embed must be S x d");
  if (pos.rows() != delta || pos.cols() != d)
    throw ShapeError("pos must be Delta x d");
  if (unembed.cols() != d) throw ShapeError("unembed must be o x d");
  for (const auto& layer : layers) {
    for (const auto& head : layer.heads) {
      if (head.kq.rows() != d || head.kq.cols() != d)
        throw ShapeError("head kq must be d x d");
      if (head.v.rows() != d || head.v.cols() != d)
        throw ShapeError("head v must be d x d");
      if (head.phi.size() != tau + 1)
        throw ShapeError("head phi must have tau+1 entries");
    }
    const auto& mlp = layer.mlp;
    if (mlp.a.cols() != d || mlp.b.rows() != d ||
        mlp.a.rows() != mlp.b.cols() || mlp.bias.size() != mlp.a.rows())
      throw ShapeError("mlp dimensions inconsistent");
  }
  auto finite = [](const MatrixXd& m) { return m.allFinite(); };
  bool ok = finite(embed) && finite(pos) && finite(unembed);
  for (const auto& layer : layers) {
    for (const auto& head : layer.heads)
      ok = ok && finite(head.kq) && finite(head.v) && head.phi.allFinite();
    ok = ok && finite(layer.mlp.a) && finite(layer.mlp.b) &&
         layer.mlp.bias.allFinite();
  }
  if (!ok) throw ShapeError("model contains NaN or Inf entries");
}

namespace {

// Strict finite-precision semantics: flush magnitudes <= 2^-p after a
// primitive matrix/vector operation.
void round_small(VectorXd& v, const PrecisionMode& mode) {
  if (!mode.is_finite() || !mode.strict_rounding) return;
  const double c = mode.cutoff();
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::abs(v(k)) <= c) v(k) = 0.0;
}

double round_small(double v, const PrecisionMode& mode) {
  if (mode.is_finite() && mode.strict_rounding && std::abs(v) <= mode.cutoff())
    return 0.0;
  return v;
}

void check_head_indices(const LTParams& params, int l, int h, int i, int j,
                        int n) {
  if (l < 0 || l >= params.num_layers())
    throw PreconditionError("layer index out of range");
  if (h < 0 || h >= static_cast<int>(params.layers[l].heads.size()))
    throw PreconditionError("head index out of range");
  if (j < 1 || i < j || i > n)
    throw PreconditionError("positions must satisfy 1 <= j <= i <= |x|");
}

// Softmax of raw logits with the finite/infinite semantics; logits are the
// per-key attention logits for one (l, h, i) triple.
VectorXd softmax_with_mode(VectorXd logits, const PrecisionMode& mode,
                           int seq_len, int l, int i) {
  if (mode.is_finite()) logits *= std::log(static_cast<double>(seq_len));
  const double shift = logits.maxCoeff();
  VectorXd terms = (logits.array() - shift).exp();
  if (mode.is_finite()) {
    // ulp-scale slack so a term mathematically equal to the cutoff is
    // flushed even when exp(log|x| * delta) rounds a hair above it
    const double c = mode.cutoff() * (1.0 + 1e-12);
    for (Eigen::Index j = 0; j < terms.size(); ++j)
      if (terms(j) <= c) terms(j) = 0.0;
  }
  const double total = terms.sum();
  // the max-shifted term is exactly 1 and survives any rounding
  if (!(total >= 1.0))
    throw NumericFault("attention normalizer underflow at layer " +
                       std::to_string(l) + ", position " + std::to_string(i));
  return terms / total;
}

// One attention+MLP layer over the full sequence, O(n^2 d) per head.
std::vector<VectorXd> run_layer(const LTParams& params,
                                const PrecisionMode& mode,
                                const std::vector<VectorXd>& y, int l) {
  const int n = static_cast<int>(y.size());
  const LayerParams& layer = params.layers[l];
  std::vector<VectorXd> next(n);
  for (int i = 1; i <= n; ++i) {
    VectorXd acc = y[i - 1];
    for (const HeadParams& head : layer.heads) {
      const VectorXd query = head.kq * y[i - 1];
      VectorXd logits(i);
      for (int j = 1; j <= i; ++j) {
        double offset = head.phi_at(i - j, params.tau);
        if (!mode.is_finite()) offset *= std::log(static_cast<double>(i));
        logits(j - 1) = round_small(y[j - 1].dot(query), mode) + offset;
      }
      const VectorXd weights = softmax_with_mode(logits, mode, n, l, i);
      VectorXd mix = VectorXd::Zero(params.d);
      for (int j = 1; j <= i; ++j)
        if (weights(j - 1) != 0.0) mix += weights(j - 1) * y[j - 1];
      round_small(mix, mode);
      VectorXd head_out = head.v * mix;
      round_small(head_out, mode);
      acc += head_out;
    }
    round_small(acc, mode);
    VectorXd hidden = layer.mlp.a * acc + layer.mlp.bias;
    round_small(hidden, mode);
    for (Eigen::Index k = 0; k < hidden.size(); ++k)
      hidden(k) = apply_activation(layer.mlp.activation, hidden(k));
    round_small(hidden, mode);
    VectorXd out = acc + layer.mlp.b * hidden;
    round_small(out, mode);
    if (!out.allFinite())
      throw NumericFault("NaN in layer " + std::to_string(l + 1) +
                         " at position " + std::to_string(i));
    next[i - 1] = std::move(out);
  }
  return next;
}

VectorXd apply_mlp(const MlpParams& mlp, const VectorXd& acc) {
  VectorXd hidden = mlp.a * acc + mlp.bias;
  for (Eigen::Index k = 0; k < hidden.size(); ++k)
    hidden(k) = apply_activation(mlp.activation, hidden(k));
  return acc + mlp.b * hidden;
}

// Attention + MLP of layer l at a single query position (1-based), given
// all layer inputs. Non-strict modes only.
VectorXd layer_at_position(const LTParams& params, const PrecisionMode& mode,
                           const std::vector<VectorXd>& y, int l, int i) {
  const int n = static_cast<int>(y.size());
  const LayerParams& layer = params.layers[l];
  VectorXd acc = y[i - 1];
  for (const HeadParams& head : layer.heads) {
    const VectorXd query = head.kq * y[i - 1];
    VectorXd logits(i);
    for (int j = 1; j <= i; ++j) {
      double offset = head.phi_at(i - j, params.tau);
      if (!mode.is_finite()) offset *= std::log(static_cast<double>(i));
      logits(j - 1) = y[j - 1].dot(query) + offset;
    }
    const VectorXd weights = softmax_with_mode(logits, mode, n, l, i);
    VectorXd mix = VectorXd::Zero(params.d);
    for (int j = 1; j <= i; ++j)
      if (weights(j - 1) != 0.0) mix += weights(j - 1) * y[j - 1];
    acc += head.v * mix;
  }
  return apply_mlp(layer.mlp, acc);
}

// First-layer states for every position in Infinite mode, aggregating the
// tau-prefix by (token, residue) class: all keys in a class share both the
// value vector and the attention logit, so the softmax reduces to class
// counts. O(n * S * Delta * d) per head instead of O(n^2 d).
std::vector<VectorXd> first_layer_states_infinite(const LTParams& params,
                                                  const TokenSeq& x) {
  const int n = static_cast<int>(x.size());
  const int s = params.s_vocab, delta = params.delta, tau = params.tau;
  const int num_classes = s * delta;
  const LayerParams& layer = params.layers[0];

  std::vector<VectorXd> class_vec(num_classes);
  for (int t = 1; t <= s; ++t)
    for (int r = 0; r < delta; ++r)
      class_vec[(t - 1) * delta + r] =
          params.embed.row(t - 1).transpose() + params.pos.row(r).transpose();
  auto class_of = [&](int pos1b) {
    return (x[pos1b - 1] - 1) * delta + (pos1b - 1) % delta;
  };

  std::vector<VectorXd> y0(n);
  for (int i = 1; i <= n; ++i) y0[i - 1] = class_vec[class_of(i)];

  std::vector<VectorXd> out(n);
  std::vector<long long> counts(num_classes, 0);  // classes among j <= i-tau-1
  int counted_up_to = 0;                          // prefix positions counted
  for (int i = 1; i <= n; ++i) {
    while (counted_up_to < i - tau - 1) {
      ++counted_up_to;
      ++counts[class_of(counted_up_to)];
    }
    VectorXd acc = y0[i - 1];
    for (const HeadParams& head : layer.heads) {
      const VectorXd query = head.kq * y0[i - 1];
      VectorXd class_logit(num_classes);
      for (int c = 0; c < num_classes; ++c)
        class_logit(c) = class_vec[c].dot(query);

      const int suffix_lo = std::max(1, i - tau);
      double max_logit = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < num_classes; ++c)
        if (counts[c] > 0) max_logit = std::max(max_logit, class_logit(c));
      std::vector<double> suffix_logit(i - suffix_lo + 1);
      for (int j = suffix_lo; j <= i; ++j) {
        const double lg = class_logit(class_of(j)) +
                          std::log(static_cast<double>(i)) *
                              head.phi_at(i - j, params.tau);
        suffix_logit[j - suffix_lo] = lg;
        max_logit = std::max(max_logit, lg);
      }

      VectorXd mix = VectorXd::Zero(params.d);
      double z = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        const double w = counts[c] * std::exp(class_logit(c) - max_logit);
        mix += w * class_vec[c];
        z += w;
      }
      for (int j = suffix_lo; j <= i; ++j) {
        const double w = std::exp(suffix_logit[j - suffix_lo] - max_logit);
        mix += w * y0[j - 1];
        z += w;
      }
      acc += head.v * (mix / z);
    }
    out[i - 1] = apply_mlp(layer.mlp, acc);
    if (!out[i - 1].allFinite())
      throw NumericFault("NaN in layer 1 at position " + std::to_string(i));
  }
  return out;
}

}  // namespace

double attention_logit(const LTParams& params, const PrecisionMode& mode,
                       const std::vector<VectorXd>& layer_inputs, int l, int h,
                       int i, int j) {
  check_head_indices(params, l, h, i, j,
                     static_cast<int>(layer_inputs.size()));
  const HeadParams& head = params.layers[l].heads[h];
  double bilinear =
      round_small(layer_inputs[j - 1].dot(head.kq * layer_inputs[i - 1]), mode);
  double offset = head.phi_at(i - j, params.tau);
  if (!mode.is_finite()) offset *= std::log(static_cast<double>(i));
  return bilinear + offset;
}

VectorXd attention_distribution(const LTParams& params,
                                const PrecisionMode& mode,
                                const std::vector<VectorXd>& layer_inputs,
                                int l, int h, int i, int seq_len) {
  if (seq_len < i) throw PreconditionError("seq_len must be >= i");
  VectorXd logits(i);
  for (int j = 1; j <= i; ++j)
    logits(j - 1) = attention_logit(params, mode, layer_inputs, l, h, i, j);
  return softmax_with_mode(std::move(logits), mode, seq_len, l, i);
}

ForwardResult forward(const LTParams& params, const PrecisionMode& mode,
                      const TokenSeq& x, bool keep_states) {
  params.validate();
  validate_tokens(x, params.s_vocab);
  const int n = static_cast<int>(x.size());

  std::vector<VectorXd> y(n);
  for (int i = 1; i <= n; ++i) {
    y[i - 1] = params.embed_of(x[i - 1]) + params.pos_of(i);
    round_small(y[i - 1], mode);
  }

  ForwardResult result;
  if (keep_states) result.states.push_back(y);

  for (int l = 0; l < params.num_layers(); ++l) {
    y = run_layer(params, mode, y, l);
    if (keep_states) result.states.push_back(y);
  }

  result.outputs.resize(n);
  for (int i = 0; i < n; ++i) {
    result.outputs[i] = params.unembed * y[i];
    round_small(result.outputs[i], mode);
    if (!result.outputs[i].allFinite())
      throw NumericFault("NaN in output at position " + std::to_string(i + 1));
  }
  return result;
}

VectorXd forward_last(const LTParams& params, const PrecisionMode& mode,
                      const TokenSeq& x) {
  params.validate();
  validate_tokens(x, params.s_vocab);
  const int n = static_cast<int>(x.size());
  const int depth = params.num_layers();
  const bool strict = mode.is_finite() && mode.strict_rounding;

  if (!strict && depth == 1) {
    std::vector<VectorXd> y0(n);
    for (int i = 1; i <= n; ++i)
      y0[i - 1] = params.embed_of(x[i - 1]) + params.pos_of(i);
    return params.unembed * layer_at_position(params, mode, y0, 0, n);
  }
  if (!strict && depth == 2 && !mode.is_finite()) {
    std::vector<VectorXd> y1 = first_layer_states_infinite(params, x);
    return params.unembed * layer_at_position(params, mode, y1, 1, n);
  }
  return forward(params, mode, x).outputs.back();
}

}  // namespace lglab
