#pragma once

#include <variant>

#include "lglab/rng.hpp"
#include "lglab/types.hpp"

namespace lglab {

/// Synthetic tasks. Symbols are 0-based in the task definitions and mapped
/// to 1-based engine token ids (symbol s <-> id s+1).
struct SimpleTask { double omega = 1.0; };
struct ModPTask { int period = 2; int k = 0; };
struct KGramTask { int k = 1; int s_vocab = 2; };
using TaskSpec = std::variant<SimpleTask, ModPTask, KGramTask>;

/// SimpleTask: p uniform on the 3-simplex, T iid tokens over {0,1,2};
/// resamples whole sequences with c0 + c1 = 0.
TokenSeq gen_simple(int t_len, Rng& rng);

/// sin(omega * (c0 - c1) / (c0 + c1)).
double target_simple(const TokenSeq& x, double omega);

/// ModPTask: q_j ~ U[0,1] per residue, x_t ~ Bernoulli(q_{t mod p}) over
/// {0,1} (positions t are 1-based).
TokenSeq gen_modp(int t_len, int period, Rng& rng);

/// Mean of x_t over positions t == k (mod period).
double target_modp(const TokenSeq& x, int period, int k);

/// KGram: order-k Markov rollout with uniform-simplex transition rows,
/// then the final k-suffix spliced at a uniform index in [k, T-1];
/// resampled until the suffix occurs in the interior.
TokenSeq gen_kgram(int t_len, int s_vocab, int k, Rng& rng);

/// Empirical distribution of the token following interior occurrences of
/// x_{T-k+1:T}. s_vocab = 0 infers the vocabulary from max(x).
VectorXd target_kgram(const TokenSeq& x, int k, int s_vocab = 0);

/// One-layer limit transformer computing the ModP target in Infinite mode
/// with error at most |x| e^{-beta}.
LTParams construct_modp_lt(int period, int k, double beta);

/// One-layer limit transformer computing the SimpleTask target: uniform
/// attention over symbols {0,1} (beta-saturated), relu MLP interpolating
/// sin(omega z) on [-1,1] to sup-error <= eps_mlp.
LTParams construct_simple_lt(double omega, double eps_mlp);

/// Two-layer induction-style construction for the k-gram task: layer-1
/// heads copy the k preceding tokens into blocks, layer 2 matches the
/// pattern blocks with logit beta per matching offset.
LTParams construct_kgram_lt(int s_vocab, int k, double beta);

// Dispatch helpers used by the trainer and CLI.
int task_vocab(const TaskSpec& spec);
int task_out_dim(const TaskSpec& spec);
TokenSeq task_generate(const TaskSpec& spec, int t_len, Rng& rng);
VectorXd task_target(const TaskSpec& spec, const TokenSeq& x);

}  // namespace lglab
