#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lglab/types.hpp"

namespace lglab {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Softmax-as-hardmax at |x| = hardmax_threshold on random coarse-grid
/// models (attention uniform over argmax to 1e-9, output matches the
/// explicit hard-attention formula to 1e-8).
std::vector<CheckResult> verify_hardmax(int num_models, std::uint64_t seed);

/// ratio_rounding exactness: sum m = N and |m_i/N - p_i| <= 1/N, zero
/// tolerance.
std::vector<CheckResult> verify_rounding(int instances, std::uint64_t seed);

/// Joint-simulation quality on random hardmax-regime model pairs:
/// |z| <= 20/eps^2 + tau + delta, err_f / (M_f (S+tau) eps) <= c_freeze,
/// and nonincreasing error medians as eps shrinks.
std::vector<CheckResult> verify_simulation(int pairs, std::uint64_t seed,
                                           const std::vector<double>& eps_list,
                                           double c_freeze, int x_len);

/// Markov-subsample decay: median best error over seeds has log-log slope
/// in [-0.55, -0.18] across sizes, for the histogram-readout model.
std::vector<CheckResult> verify_markov(int num_seeds, std::uint64_t seed,
                                       int x_len, std::vector<int> sizes,
                                       int k_tries);

/// Out-of-bulk rate at T = Delta delta^-2 log(2 S Delta / rho) stays
/// below rho.
std::vector<CheckResult> verify_bulk(int trials, std::uint64_t seed);

/// Analytic vs central finite-difference gradients on small depth-1 and
/// depth-2 models, all parameter groups.
std::vector<CheckResult> verify_gradients(std::uint64_t seed);

/// Construction fidelity for the modp / simple / kgram limit transformers.
std::vector<CheckResult> verify_constructions(std::uint64_t seed,
                                              int num_inputs);

struct TrainingVerifyConfig {
  std::vector<int> train_lens = {16, 32, 64};
  int num_seeds = 4;
  int max_steps = 8000;
  int batch = 256;
  std::vector<int> test_lens = {64, 128, 256, 512, 1024};
  int eval_batches = 16;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: use LGLAB_THREADS or hardware_concurrency
};

/// Frozen calibration constant for the joint-simulation error bound
/// (measured once on the reference pair set, then fixed).
inline constexpr double kJointSimCalibration = 0.15;

/// Qualitative LG reproduction on ModPTask p=3 (plateau flatness, plateau
/// monotone in train length) plus the attention-concentration analogue.
std::vector<CheckResult> verify_training(const TrainingVerifyConfig& cfg);

/// Named suite with desk-scale default parameters. Suites: hardmax,
/// rounding, simulation, markov, bulk, gradients, constructions, all.
std::vector<CheckResult> verify_suite(const std::string& name,
                                      std::uint64_t seed);

/// Worker-thread cap: LGLAB_THREADS if set, else hardware concurrency.
int worker_threads();

// Shared with tests: random coarse-grid 1-layer model in the hardmax
// regime (integer class logits, gamma >= grid_step).
LTParams random_grid_model(std::uint64_t seed, int s_vocab, int delta, int tau,
                           int grid_step, bool low_logit_last_token);

///  Histogram-readout F_tau model used by the markov checks.
LTParams histogram_model(int s_vocab);

}  // namespace lglab
