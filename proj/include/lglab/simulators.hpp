#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "lglab/rng.hpp"
#include "lglab/types.hpp"

namespace lglab {

using CountTable = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// Hardmax attention pattern of a 1-layer, 1-head model at the final query
/// position, split at |x| - tau. Residues are 0-based ((j-1) mod Delta).
struct AttentionSets {
  std::vector<int> prefix_positions;              // P_f: j <= |x| - tau
  std::vector<std::pair<int, int>> prefix_pairs;  // A_f: (token, residue)
  std::vector<int> suffix_positions;              // P^tau_f: j > |x| - tau
  std::vector<std::pair<int, int>> suffix_pairs;  // A^tau_f: (token, position)
};

enum class SimMethod { JointHard, Suffix, Markov };

struct SimReport {
  TokenSeq z;
  double err_f = 0.0;
  std::optional<double> err_g;
  int len_z = 0;
  SimMethod method = SimMethod::JointHard;
  double epsilon = 0.0;
  std::optional<std::uint64_t> seed;
};

/// n(s, i, x): occurrences of token s at positions j <= |x| - tau with
/// residue i, as an S x Delta table (vocabulary size inferred from x).
CountTable token_counts(const TokenSeq& x, int delta, int tau);

/// Positions tying the maximal final-position attention logit (1e-12 tie
/// tolerance). Requires the hardmax regime |x| >= hardmax_threshold unless
/// force is set.
AttentionSets attention_sets(const LTParams& params, int p_bits,
                             const TokenSeq& x, bool force = false);

/// Exact proportional rounding: m_i = floor(p_i N) plus one extra unit for the
/// lowest-index entries until sum m = N. Guarantees |m_i/N - p_i| <= 1/N.
std::vector<long long> ratio_rounding(const VectorXd& p, long long n);

/// Joint short simulation string for two 1-layer models on x.
SimReport build_joint_sim(const LTParams& f, const LTParams& g, int p_bits,
                          const TokenSeq& x, double eps, int filler);

/// Last N' tokens of x with N <= N' < N + delta and N' == |x| (mod delta).
TokenSeq suffix_sim(const TokenSeq& x, int n, int delta);

/// True iff |n(s,i,x) / (|x|/Delta) - p_s| <= d_tol for all (s, i).
bool bulk_check(const TokenSeq& x, const VectorXd& p, int delta, int tau,
                double d_tol);

/// p ~ Dirichlet(alpha), then T iid tokens from p.
std::pair<TokenSeq, VectorXd> dirichlet_seq(const VectorXd& alpha, int t_len,
                                            Rng& rng);

/// Two-state-chain index subsample: two-state chain with p = n/|x|, q = n^{-1/3},
/// r = pq/(1-p) over positions 1..|x|-tau-1 (stationary start), plus the
/// tail [|x|-tau, |x|]. Returns all indices when n = |x|.
std::vector<int> markov_subsample(const TokenSeq& x, int n, int tau, Rng& rng);

/// Best-of-k_tries Markov subsample simulation of f on x (Infinite mode).
SimReport best_markov_sim(const LTParams& f, const TokenSeq& x, int n, int tau,
                          int k_tries, Rng& rng);

/// Euclidean distance between final-position outputs on x and z.
double measure_discrepancy(const LTParams& f, const PrecisionMode& mode,
                           const TokenSeq& x, const TokenSeq& z);

TokenSeq subsequence(const TokenSeq& x, const std::vector<int>& indices);

}  // namespace lglab
