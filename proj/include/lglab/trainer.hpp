#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lglab/rng.hpp"
#include "lglab/tasks.hpp"
#include "lglab/types.hpp"

namespace lglab {

enum class PEKind { None, Periodic, RelativeLocal };

std::string pe_kind_name(PEKind pe);
PEKind pe_kind_from_name(const std::string& name);

struct TrainConfig {
  int depth = 1;          // 1 or 2
  int heads_l1 = 1;       // layer-1 heads; layer 2 always has one head
  int d = 16;
  int mlp_width = 32;
  PEKind pe = PEKind::None;
  int delta = 1;          // Periodic period
  int tau = 0;            // RelativeLocal window
  int train_len = 64;
  int batch = 256;
  int max_steps = 20000;
  double stop_loss = 1e-5;
  double lr_hidden = 1e-2 / 16.0;
  double lr_embed = 1e-2;
  std::uint64_t seed = 0;
  // filled in from the task by train()/init_model()
  int s_vocab = 2;
  int out_dim = 1;

  void validate() const;
};

/// Standard-softmax transformer (combined K^T Q weight, causal attention,
/// no logit-length scaling), residual MLP blocks, linear readout at the
/// final position.
struct TrainModel {
  struct Head {
    MatrixXd w_kq;  // d x d
    MatrixXd v;     // d x d
    MatrixXd phi;   // (tau+1) x 1 additive logit biases (RelativeLocal)
  };
  struct Layer {
    std::vector<Head> heads;
    MatrixXd a;     // width x d
    MatrixXd bias;  // width x 1
    MatrixXd b;     // d x width
  };
  TrainConfig cfg;
  MatrixXd embed;    // S x d
  MatrixXd pos;      // delta x d (Periodic) or 0 x 0
  std::vector<Layer> layers;
  MatrixXd readout;  // out_dim x d
};

struct LGRow {
  std::string task;
  double param = 0.0;
  int train_len = 0;
  int test_len = 0;
  std::uint64_t seed = 0;
  double test_loss = 0.0;
};

struct TrainResult {
  TrainModel model;
  std::vector<double> losses;  // per-step training loss
};

/// Fan-in (1/d variance) Gaussian init on hidden matrices, unit variance on
/// embeddings; phi and biases start at zero.
TrainModel init_model(const TrainConfig& cfg, Rng& rng);

/// All trainable matrices, paired with whether they belong to the
/// embedding/readout learning-rate group.
std::vector<std::pair<MatrixXd*, bool>> parameter_list(TrainModel& model);

TrainModel zeros_like(const TrainModel& model);

/// Final-position output.
VectorXd train_forward(const TrainModel& model, const TokenSeq& x);

/// Final-query attention weights of one head (softmax over j = 1..|x|).
VectorXd train_attention(const TrainModel& model, const TokenSeq& x,
                         int layer, int head);

/// Mean over the batch of the squared readout error, with hand-derived
/// reverse-mode gradients. All inputs must share one length.
double loss_and_grad(const TrainModel& model,
                     const std::vector<TokenSeq>& inputs,
                     const std::vector<VectorXd>& targets, TrainModel& grad);

double eval_loss(const TrainModel& model, const std::vector<TokenSeq>& inputs,
                 const std::vector<VectorXd>& targets);

/// Online Adam training: a fresh batch per step with one length drawn
/// uniformly from [max(tau+1, 4, task minimum), train_len]; stops when the
/// batch loss falls below stop_loss or after max_steps.
TrainResult train(const TrainConfig& cfg, const TaskSpec& task, Rng& rng);

std::vector<LGRow> eval_curve(const TrainModel& model, const TaskSpec& task,
                              const std::vector<int>& test_lens,
                              int eval_batches, Rng& rng);

std::string task_name(const TaskSpec& spec);
double task_param(const TaskSpec& spec);
int task_min_len(const TaskSpec& spec);

/// Checkpoints use the limit-transformer JSON schema plus {"pe_kind": ...}.
void save_train_model(const TrainModel& model, const std::string& path);
TrainModel load_train_model(const std::string& path);

}  // namespace lglab
