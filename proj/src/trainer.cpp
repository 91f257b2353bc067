#include "lglab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lglab/serialize.hpp"

namespace lglab {

std::string pe_kind_name(PEKind pe) {
  switch (pe) {
    case PEKind::None: return "none";
    case PEKind::Periodic: return "periodic";
    case PEKind::RelativeLocal: return "relative_local";
  }
  return "none";
}

PEKind pe_kind_from_name(const std::string& name) {
  if (name == "none") return PEKind::None;
  if (name == "periodic") return PEKind::Periodic;
  if (name == "relative_local") return PEKind::RelativeLocal;
  throw PreconditionError("unknown pe_kind '" + name + "'");
}

void TrainConfig::validate() const {
  if (depth != 1 && depth != 2)
    throw PreconditionError("TrainConfig: depth must be 1 or 2");
  if (heads_l1 < 1 || d < 1 || mlp_width < 1 || train_len < 1 || batch < 1 ||
      max_steps < 1 || delta < 1 || tau < 0 || s_vocab < 1 || out_dim < 1)
    throw PreconditionError("TrainConfig: all sizes must be positive");
  if (!(stop_loss > 0.0) || !(lr_hidden >= 0.0) || !(lr_embed >= 0.0))
    throw PreconditionError("TrainConfig: invalid stop_loss or learning rate");
}

namespace {

struct HeadCache {
  VectorXd w;    // attention weights over j = 1..i
  VectorXd mix;  // sum_j w_j y_j
};

struct BlockCache {
  std::vector<HeadCache> heads;
  VectorXd acc, pre, hidden, out;
};

// Attention + MLP block of layer l at query position i (1-based), given the
// layer inputs ys.
BlockCache forward_block(const TrainModel& m, int l,
                         const std::vector<VectorXd>& ys, int i) {
  const TrainModel::Layer& layer = m.layers[l];
  const bool local = m.cfg.pe == PEKind::RelativeLocal;
  BlockCache c;
  c.acc = ys[i - 1];
  for (const TrainModel::Head& head : layer.heads) {
    const VectorXd q = head.w_kq * ys[i - 1];
    VectorXd logits(i);
    for (int j = 1; j <= i; ++j) {
      logits(j - 1) = ys[j - 1].dot(q);
      if (local && i - j <= m.cfg.tau) logits(j - 1) += head.phi(i - j, 0);
    }
    const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    HeadCache hc;
    hc.w = e / e.sum();
    hc.mix = VectorXd::Zero(m.cfg.d);
    for (int j = 1; j <= i; ++j) hc.mix += hc.w(j - 1) * ys[j - 1];
    c.acc += head.v * hc.mix;
    c.heads.push_back(std::move(hc));
  }
  c.pre = layer.a * c.acc + layer.bias.col(0);
  c.hidden = c.pre.array().max(0.0);
  c.out = c.acc + layer.b * c.hidden;
  return c;
}

// Reverse-mode through one block: dout is d(loss)/d(block output); gradients
// accumulate into g and d(loss)/d(layer inputs) into dys.
void backward_block(const TrainModel& m, int l,
                    const std::vector<VectorXd>& ys, const BlockCache& c,
                    int i, const VectorXd& dout, std::vector<VectorXd>& dys,
                    TrainModel& g) {
  const TrainModel::Layer& layer = m.layers[l];
  TrainModel::Layer& gl = g.layers[l];
  const bool local = m.cfg.pe == PEKind::RelativeLocal;

  gl.b += dout * c.hidden.transpose();
  VectorXd dhidden = layer.b.transpose() * dout;
  for (Eigen::Index k = 0; k < dhidden.size(); ++k)
    if (c.pre(k) <= 0.0) dhidden(k) = 0.0;
  gl.a += dhidden * c.acc.transpose();
  gl.bias.col(0) += dhidden;
  VectorXd dacc = dout + layer.a.transpose() * dhidden;
  dys[i - 1] += dacc;

  for (std::size_t h = 0; h < layer.heads.size(); ++h) {
    const TrainModel::Head& head = layer.heads[h];
    TrainModel::Head& gh = gl.heads[h];
    const HeadCache& hc = c.heads[h];
    gh.v += dacc * hc.mix.transpose();
    const VectorXd dmix = head.v.transpose() * dacc;
    VectorXd dw(i);
    for (int j = 1; j <= i; ++j) dw(j - 1) = ys[j - 1].dot(dmix);
    const double wdw = hc.w.dot(dw);
    const VectorXd da = hc.w.array() * (dw.array() - wdw);
    const VectorXd q = head.w_kq * ys[i - 1];
    VectorXd dq = VectorXd::Zero(m.cfg.d);
    for (int j = 1; j <= i; ++j) {
      dys[j - 1] += hc.w(j - 1) * dmix + da(j - 1) * q;
      dq += da(j - 1) * ys[j - 1];
      if (local && i - j <= m.cfg.tau) gh.phi(i - j, 0) += da(j - 1);
    }
    gh.w_kq += dq * ys[i - 1].transpose();
    dys[i - 1] += head.w_kq.transpose() * dq;
  }
}

std::vector<VectorXd> embed_sequence(const TrainModel& m, const TokenSeq& x) {
  validate_tokens(x, m.cfg.s_vocab);
  std::vector<VectorXd> y(x.size());
  for (int i = 1; i <= static_cast<int>(x.size()); ++i) {
    y[i - 1] = m.embed.row(x[i - 1] - 1).transpose();
    if (m.cfg.pe == PEKind::Periodic)
      y[i - 1] += m.pos.row((i - 1) % m.cfg.delta).transpose();
  }
  return y;
}

// Squared readout error of one sequence; when g is non-null, accumulates
// the gradient of scale * squared error.
double seq_loss_grad(const TrainModel& m, const TokenSeq& x,
                     const VectorXd& target, double scale, TrainModel* g) {
  const int n = static_cast<int>(x.size());
  const int depth = m.cfg.depth;
  std::vector<std::vector<VectorXd>> y(depth);
  y[0] = embed_sequence(m, x);
  // full states (with caches) for every layer except the last, which only
  // feeds the final-position readout
  std::vector<std::vector<BlockCache>> caches(depth - 1);
  for (int l = 0; l + 1 < depth; ++l) {
    caches[l].reserve(n);
    std::vector<VectorXd> next(n);
    for (int i = 1; i <= n; ++i) {
      caches[l].push_back(forward_block(m, l, y[l], i));
      next[i - 1] = caches[l].back().out;
    }
    y[l + 1] = std::move(next);
  }
  const BlockCache last = forward_block(m, depth - 1, y[depth - 1], n);
  const VectorXd err = m.readout * last.out - target;
  const double sq = err.squaredNorm();
  if (!g) return sq;

  const VectorXd derr = 2.0 * scale * err;
  g->readout += derr * last.out.transpose();
  std::vector<VectorXd> dys(n, VectorXd::Zero(m.cfg.d));
  backward_block(m, depth - 1, y[depth - 1], last, n,
                 m.readout.transpose() * derr, dys, *g);
  for (int l = depth - 2; l >= 0; --l) {
    std::vector<VectorXd> dnext = std::move(dys);
    dys.assign(n, VectorXd::Zero(m.cfg.d));
    for (int i = n; i >= 1; --i)
      backward_block(m, l, y[l], caches[l][i - 1], i, dnext[i - 1], dys, *g);
  }
  for (int j = 1; j <= n; ++j) {
    g->embed.row(x[j - 1] - 1) += dys[j - 1].transpose();
    if (m.cfg.pe == PEKind::Periodic)
      g->pos.row((j - 1) % m.cfg.delta) += dys[j - 1].transpose();
  }
  return sq;
}

}  // namespace

TrainModel init_model(const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  TrainModel m;
  m.cfg = cfg;
  const double fan_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const double fan_w = 1.0 / std::sqrt(static_cast<double>(cfg.mlp_width));
  m.embed = rng.gaussian_matrix(cfg.s_vocab, cfg.d);
  m.pos = cfg.pe == PEKind::Periodic ? rng.gaussian_matrix(cfg.delta, cfg.d)
                                     : MatrixXd(0, 0);
  for (int l = 0; l < cfg.depth; ++l) {
    TrainModel::Layer layer;
    const int heads = l == 0 ? cfg.heads_l1 : 1;
    for (int h = 0; h < heads; ++h) {
      TrainModel::Head head;
      head.w_kq = rng.gaussian_matrix(cfg.d, cfg.d, fan_d);
      head.v = rng.gaussian_matrix(cfg.d, cfg.d, fan_d);
      head.phi = MatrixXd::Zero(cfg.tau + 1, 1);
      layer.heads.push_back(std::move(head));
    }
    layer.a = rng.gaussian_matrix(cfg.mlp_width, cfg.d, fan_d);
    layer.bias = MatrixXd::Zero(cfg.mlp_width, 1);
    layer.b = rng.gaussian_matrix(cfg.d, cfg.mlp_width, fan_w);
    m.layers.push_back(std::move(layer));
  }
  m.readout = rng.gaussian_matrix(cfg.out_dim, cfg.d, fan_d);
  return m;
}

std::vector<std::pair<MatrixXd*, bool>> parameter_list(TrainModel& model) {
  std::vector<std::pair<MatrixXd*, bool>> params;
  params.emplace_back(&model.embed, true);
  if (model.pos.size() > 0) params.emplace_back(&model.pos, true);
  for (TrainModel::Layer& layer : model.layers) {
    for (TrainModel::Head& head : layer.heads) {
      params.emplace_back(&head.w_kq, false);
      params.emplace_back(&head.v, false);
      if (model.cfg.pe == PEKind::RelativeLocal)
        params.emplace_back(&head.phi, false);
    }
    params.emplace_back(&layer.a, false);
    params.emplace_back(&layer.bias, false);
    params.emplace_back(&layer.b, false);
  }
  params.emplace_back(&model.readout, true);
  return params;
}

TrainModel zeros_like(const TrainModel& model) {
  TrainModel z = model;
  for (auto& [p, is_embed] : parameter_list(z)) p->setZero();
  return z;
}

VectorXd train_forward(const TrainModel& model, const TokenSeq& x) {
  const std::vector<VectorXd> y0 = embed_sequence(model, x);
  const int n = static_cast<int>(x.size());
  if (model.cfg.depth == 1)
    return model.readout * forward_block(model, 0, y0, n).out;
  std::vector<VectorXd> y1(n);
  for (int i = 1; i <= n; ++i) y1[i - 1] = forward_block(model, 0, y0, i).out;
  return model.readout * forward_block(model, 1, y1, n).out;
}

VectorXd train_attention(const TrainModel& model, const TokenSeq& x,
                         int layer, int head) {
  if (layer < 0 || layer >= model.cfg.depth ||
      head >= static_cast<int>(model.layers[layer].heads.size()) || head < 0)
    throw PreconditionError("train_attention: layer or head out of range");
  std::vector<VectorXd> y = embed_sequence(model, x);
  const int n = static_cast<int>(x.size());
  for (int l = 0; l < layer; ++l) {
    std::vector<VectorXd> next(n);
    for (int i = 1; i <= n; ++i) next[i - 1] = forward_block(model, l, y, i).out;
    y = std::move(next);
  }
  return forward_block(model, layer, y, n).heads[head].w;
}

double loss_and_grad(const TrainModel& model,
                     const std::vector<TokenSeq>& inputs,
                     const std::vector<VectorXd>& targets, TrainModel& grad) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw PreconditionError("loss_and_grad: empty or mismatched batch");
  for (const TokenSeq& x : inputs)
    if (x.size() != inputs.front().size())
      throw PreconditionError("loss_and_grad: batch lengths must be uniform");
  for (auto& [p, is_embed] : parameter_list(grad)) p->setZero();
  const double scale = 1.0 / static_cast<double>(inputs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    total += seq_loss_grad(model, inputs[i], targets[i], scale, &grad);
  const double loss = total * scale;
  if (!std::isfinite(loss)) throw NumericFault("NaN loss in batch");
  return loss;
}

double eval_loss(const TrainModel& model, const std::vector<TokenSeq>& inputs,
                 const std::vector<VectorXd>& targets) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw PreconditionError("eval_loss: empty or mismatched batch");
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    total += seq_loss_grad(model, inputs[i], targets[i], 1.0, nullptr);
  return total / static_cast<double>(inputs.size());
}

std::string task_name(const TaskSpec& spec) {
  if (std::holds_alternative<SimpleTask>(spec)) return "simple";
  if (std::holds_alternative<ModPTask>(spec)) return "modp";
  return "kgram";
}

double task_param(const TaskSpec& spec) {
  if (std::holds_alternative<SimpleTask>(spec))
    return std::get<SimpleTask>(spec).omega;
  if (std::holds_alternative<ModPTask>(spec))
    return std::get<ModPTask>(spec).period;
  return std::get<KGramTask>(spec).k;
}

int task_min_len(const TaskSpec& spec) {
  if (std::holds_alternative<ModPTask>(spec))
    return std::get<ModPTask>(spec).period;
  if (std::holds_alternative<KGramTask>(spec))
    return std::get<KGramTask>(spec).k + 2;
  return 1;
}

TrainResult train(const TrainConfig& cfg, const TaskSpec& task, Rng& rng) {
  TrainConfig c = cfg;
  c.s_vocab = task_vocab(task);
  c.out_dim = task_out_dim(task);
  c.validate();
  const int min_len = std::max({c.tau + 1, 4, task_min_len(task)});
  if (c.train_len < min_len)
    throw PreconditionError("train: train_len below the task's minimum "
                            "length " + std::to_string(min_len));
  TrainResult result;
  result.model = init_model(c, rng);
  TrainModel grad = zeros_like(result.model);
  TrainModel m1 = zeros_like(result.model);
  TrainModel m2 = zeros_like(result.model);
  auto params = parameter_list(result.model);
  auto gparams = parameter_list(grad);
  auto m1params = parameter_list(m1);
  auto m2params = parameter_list(m2);

  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  for (int step = 1; step <= c.max_steps; ++step) {
    const int len =
        min_len + static_cast<int>(rng.uniform_int(c.train_len - min_len + 1));
    std::vector<TokenSeq> inputs(c.batch);
    std::vector<VectorXd> targets(c.batch);
    for (int i = 0; i < c.batch; ++i) {
      inputs[i] = task_generate(task, len, rng);
      targets[i] = task_target(task, inputs[i]);
    }
    double loss;
    try {
      loss = loss_and_grad(result.model, inputs, targets, grad);
    } catch (const NumericFault&) {
      throw NumericFault("training diverged at step " + std::to_string(step));
    }
    result.losses.push_back(loss);
    if (loss < c.stop_loss) break;
    const double corr1 = 1.0 - std::pow(b1, step);
    const double corr2 = 1.0 - std::pow(b2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double lr = params[i].second ? c.lr_embed : c.lr_hidden;
      auto& p = *params[i].first;
      const auto& gmat = *gparams[i].first;
      auto& mm = *m1params[i].first;
      auto& vv = *m2params[i].first;
      mm = b1 * mm + (1.0 - b1) * gmat;
      vv = b2 * vv.array().matrix() + (1.0 - b2) * gmat.cwiseProduct(gmat);
      p.array() -= lr * (mm.array() / corr1) /
                   ((vv.array() / corr2).sqrt() + adam_eps);
    }
  }
  return result;
}

std::vector<LGRow> eval_curve(const TrainModel& model, const TaskSpec& task,
                              const std::vector<int>& test_lens,
                              int eval_batches, Rng& rng) {
  if (eval_batches < 1)
    throw PreconditionError("eval_curve: eval_batches must be >= 1");
  const int min_len = std::max({model.cfg.tau + 1, task_min_len(task)});
  std::vector<LGRow> rows;
  for (int len : test_lens) {
    if (len < min_len)
      throw PreconditionError("eval_curve: test length below task minimum");
    double total = 0.0;
    for (int b = 0; b < eval_batches; ++b) {
      std::vector<TokenSeq> inputs(model.cfg.batch);
      std::vector<VectorXd> targets(model.cfg.batch);
      for (int i = 0; i < model.cfg.batch; ++i) {
        inputs[i] = task_generate(task, len, rng);
        targets[i] = task_target(task, inputs[i]);
      }
      total += eval_loss(model, inputs, targets);
    }
    LGRow row;
    row.task = task_name(task);
    row.param = task_param(task);
    row.train_len = model.cfg.train_len;
    row.test_len = len;
    row.seed = model.cfg.seed;
    row.test_loss = total / eval_batches;
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_train_model(const TrainModel& model, const std::string& path) {
  LTParams lt;
  lt.s_vocab = model.cfg.s_vocab;
  lt.d = model.cfg.d;
  lt.delta = model.cfg.pe == PEKind::Periodic ? model.cfg.delta : 1;
  lt.tau = model.cfg.pe == PEKind::RelativeLocal ? model.cfg.tau : 0;
  lt.embed = model.embed;
  lt.pos = model.cfg.pe == PEKind::Periodic ? model.pos
                                            : MatrixXd::Zero(1, model.cfg.d);
  for (const TrainModel::Layer& layer : model.layers) {
    LayerParams lp;
    for (const TrainModel::Head& head : layer.heads) {
      HeadParams hp;
      hp.kq = head.w_kq;
      hp.v = head.v;
      hp.phi = model.cfg.pe == PEKind::RelativeLocal
                   ? VectorXd(head.phi.col(0))
                   : VectorXd::Zero(1);
      lp.heads.push_back(std::move(hp));
    }
    lp.mlp = {layer.a, layer.bias.col(0), layer.b, Activation::Relu};
    lt.layers.push_back(std::move(lp));
  }
  lt.unembed = model.readout;
  nlohmann::json doc = model_to_json(lt);
  doc["pe_kind"] = pe_kind_name(model.cfg.pe);
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
}

TrainModel load_train_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open model file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError("invalid JSON in '" + path + "': " + e.what());
  }
  if (!doc.contains("pe_kind"))
    throw PreconditionError("checkpoint missing 'pe_kind'");
  const PEKind pe = pe_kind_from_name(doc["pe_kind"].get<std::string>());
  const LTParams lt = model_from_json(doc);
  TrainModel m;
  m.cfg.pe = pe;
  m.cfg.depth = lt.num_layers();
  m.cfg.heads_l1 = static_cast<int>(lt.layers.front().heads.size());
  m.cfg.d = lt.d;
  m.cfg.mlp_width = static_cast<int>(lt.layers.front().mlp.a.rows());
  m.cfg.delta = lt.delta;
  m.cfg.tau = lt.tau;
  m.cfg.s_vocab = lt.s_vocab;
  m.cfg.out_dim = lt.out_dim();
  m.embed = lt.embed;
  m.pos = pe == PEKind::Periodic ? lt.pos : MatrixXd(0, 0);
  for (const LayerParams& lp : lt.layers) {
    TrainModel::Layer layer;
    for (const HeadParams& hp : lp.heads) {
      TrainModel::Head head;
      head.w_kq = hp.kq;
      head.v = hp.v;
      head.phi = hp.phi;
      layer.heads.push_back(std::move(head));
    }
    layer.a = lp.mlp.a;
    layer.bias = lp.mlp.bias;
    layer.b = lp.mlp.b;
    m.layers.push_back(std::move(layer));
  }
  m.readout = lt.unembed;
  m.cfg.validate();
  return m;
}

}  // namespace lglab
