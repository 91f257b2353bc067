#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lglab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Token sequence over Sigma = {1..S}. Positions are 1-based throughout.
using TokenSeq = std::vector<int>;

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a model does not conform to a required shape (depth,
/// positional table, phi sign constraints).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Activation { Relu, Tanh, Identity };

inline double apply_activation(Activation a, double v) {
  switch (a) {
    case Activation::Relu: return v > 0.0 ? v : 0.0;
    case Activation::Tanh: return std::tanh(v);
    case Activation::Identity: return v;
  }
  return v;
}

/// One attention head: the combined key-query product, the value map, and
/// the local positional logit offsets. phi[t] is the offset added to the
/// logit between query position i and key position i-t; offsets beyond tau
/// contribute zero.
struct HeadParams {
  MatrixXd kq;          // d x d, K^T Q
  MatrixXd v;           // d x d
  VectorXd phi;         // tau+1 entries, phi[t] for offset t

  double phi_at(int offset, int tau) const {
    return (offset >= 0 && offset <= tau) ? phi(offset) : 0.0;
  }
};

struct MlpParams {
  MatrixXd a;           // m x d
  VectorXd bias;        // m
  MatrixXd b;           // d x m
  Activation activation = Activation::Relu;
};

struct LayerParams {
  std::vector<HeadParams> heads;
  MlpParams mlp;
};

/// Full weight set of a limit transformer with Delta-periodic positional
/// embeddings and tau-local translation-invariant logit offsets.
struct LTParams {
  int s_vocab = 0;      // S
  int d = 0;            // embedding dim
  int delta = 1;        // positional period, >= 1
  int tau = 0;          // locality window, >= 0
  MatrixXd embed;       // S x d, row s-1 is E_s
  MatrixXd pos;         // Delta x d; position i uses row (i-1) mod Delta
  std::vector<LayerParams> layers;
  MatrixXd unembed;     // o x d

  int num_layers() const { return static_cast<int>(layers.size()); }
  int out_dim() const { return static_cast<int>(unembed.rows()); }

  Eigen::VectorXd embed_of(int token) const { return embed.row(token - 1); }
  Eigen::VectorXd pos_of(int position) const {
    return pos.row((position - 1) % delta);
  }

  void validate() const;
};

/// Precision semantics for the forward pass.
struct PrecisionMode {
  enum class Kind { Finite, Infinite } kind = Kind::Infinite;
  int p_bits = 16;              // Finite only
  bool strict_rounding = false; // Finite only: round every primitive op

  static PrecisionMode finite(int p_bits, bool strict = false) {
    return {Kind::Finite, p_bits, strict};
  }
  static PrecisionMode infinite() { return {Kind::Infinite, 0, false}; }

  bool is_finite() const { return kind == Kind::Finite; }
  double cutoff() const { return std::ldexp(1.0, -p_bits); } // 2^-p
};

void validate_tokens(const TokenSeq& x, int s_vocab);

}  // namespace lglab
