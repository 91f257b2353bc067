#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lglab/types.hpp"

namespace lglab {

/// Margin, threshold, complexity and Lipschitz quantities for one model.
/// Fields that do not apply to the model's depth are NaN in the combined
/// report. All constants are evaluated up to universal constants (hidden
/// polynomial factors fixed to 1).
struct MarginReport {
  double logit_margin = 0.0;        // gamma, or +inf
  std::int64_t hardmax_threshold = 1;
  double positional_margin = 0.0;   // Def.-5.1 gamma, or +inf
  double complexity = 0.0;          // C(f)
  double l_mlp = 0.0;               // L^MLP_f
  double m_v = 0.0;                 // M^V_f
  double m_e = 0.0;                 // M^E_f
  double m_f = 0.0;                 // M_f
  double g_f = 0.0, lip_f = 0.0, h_f = 0.0;  // G_f, L_f, H_f
  std::vector<std::string> warnings;
};

/// Spectral norm by power iteration on M^T M with a fixed deterministic
/// start vector; relative tolerance 1e-9, capped at 10^4 iterations.
double spectral_norm(const MatrixXd& m);

/// Attention matrix over token-residue classes. Row index is the query
/// class (y, i), column index the key class (z, j), both laid out as
/// (token-1)*Delta + residue with residues 0..Delta-1:
///   A_{(y,i),(z,j)} = (E_z + p_j)^T K^T Q (E_y + p_i).
/// Requires exactly one layer with exactly one head.
MatrixXd attention_matrix(const LTParams& params);

/// gamma(f): minimum positive gap within any logit set
/// A_{(y,i)} = {A_{(y,i),(z,i-k)} + phi(k) : z in Sigma, k = 0..tau},
/// with values grouped as equal under a 1e-12 tie tolerance; +inf when
/// every set is a single value.
double logit_margin(const LTParams& params);

/// ceil(2^{p_bits/gamma}); 1 when gamma = +inf. Throws NumericFault when
/// the threshold would exceed 2^53.
std::int64_t hardmax_threshold(const LTParams& params, int p_bits);

/// Def.-5.1 margin for models in the F_tau shape: per first-layer head,
/// P_h = {phi[t]} ∪ {1}; margin is max P_h minus the largest strictly
/// smaller element; minimum over heads; +inf when every P_h is a singleton.
double positional_margin(const LTParams& params);

struct LipschitzConstants {
  double g_f = 0.0, lip_f = 0.0, h_f = 0.0;
};
LipschitzConstants lipschitz_constants(const LTParams& params);

double complexity(const LTParams& params);

struct MlpBounds {
  double l_mlp = 0.0, m_v = 0.0, m_e = 0.0, m_f = 0.0;
};
MlpBounds mlp_bounds(const LTParams& params);

/// Throws ShapeError naming the offending field unless params is in the
/// F_tau shape: exactly 2 layers, a single second-layer head, an all-zero
/// positional table, nonnegative first-layer phi, and zero second-layer phi.
void require_fclass(const LTParams& params);

/// Combined report; inapplicable fields (wrong depth/shape) are NaN.
MarginReport margin_report(const LTParams& params, int p_bits);

}  // namespace lglab
