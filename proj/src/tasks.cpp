#include "lglab/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace lglab {

namespace {

LayerParams zero_mlp_layer(std::vector<HeadParams> heads, int d) {
  LayerParams layer;
  layer.heads = std::move(heads);
  layer.mlp.a = MatrixXd::Zero(1, d);
  layer.mlp.bias = VectorXd::Zero(1);
  layer.mlp.b = MatrixXd::Zero(d, 1);
  layer.mlp.activation = Activation::Relu;
  return layer;
}

}  // namespace

TokenSeq gen_simple(int t_len, Rng& rng) {
  if (t_len < 1) throw PreconditionError("gen_simple: T must be >= 1");
  for (;;) {
    const VectorXd p = rng.dirichlet(VectorXd::Ones(3));
    TokenSeq x(t_len);
    bool has01 = false;
    for (int i = 0; i < t_len; ++i) {
      const double u = rng.uniform();
      x[i] = u < p(0) ? 1 : (u < p(0) + p(1) ? 2 : 3);
      has01 = has01 || x[i] != 3;
    }
    if (has01) return x;
  }
}

double target_simple(const TokenSeq& x, double omega) {
  validate_tokens(x, 3);
  long long c0 = 0, c1 = 0;
  for (int t : x) {
    c0 += t == 1;
    c1 += t == 2;
  }
  if (c0 + c1 == 0)
    throw PreconditionError("target_simple: undefined when c0 + c1 = 0");
  return std::sin(omega * static_cast<double>(c0 - c1) / (c0 + c1));
}

TokenSeq gen_modp(int t_len, int period, Rng& rng) {
  if (t_len < 1 || period < 2)
    throw PreconditionError("gen_modp: need T >= 1 and period >= 2");
  std::vector<double> q(period);
  for (double& v : q) v = rng.uniform();
  TokenSeq x(t_len);
  for (int t = 1; t <= t_len; ++t)
    x[t - 1] = rng.uniform() < q[t % period] ? 2 : 1;
  return x;
}

double target_modp(const TokenSeq& x, int period, int k) {
  validate_tokens(x, 2);
  if (period < 2 || k < 0 || k >= period)
    throw PreconditionError("target_modp: need 0 <= k < period");
  long long count = 0, ones = 0;
  for (int t = 1; t <= static_cast<int>(x.size()); ++t) {
    if (t % period != k) continue;
    ++count;
    ones += x[t - 1] - 1;
  }
  if (count == 0)
    throw PreconditionError("target_modp: no position == k (mod period)");
  return static_cast<double>(ones) / count;
}

TokenSeq gen_kgram(int t_len, int s_vocab, int k, Rng& rng) {
  if (k < 1 || s_vocab < 2 || t_len < k + 2)
    throw PreconditionError("gen_kgram: need k >= 1, S >= 2, T >= k+2");
  long long rows = 1;
  for (int i = 0; i < k; ++i) rows *= s_vocab;
  MatrixXd trans(rows, s_vocab);
  for (long long r = 0; r < rows; ++r)
    trans.row(r) = rng.dirichlet(VectorXd::Ones(s_vocab)).transpose();
  auto draw = [&](const Eigen::RowVectorXd& p) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int s = 0; s < s_vocab; ++s) {
      acc += p(s);
      if (u < acc) return s + 1;
    }
    return s_vocab;
  };
  for (;;) {
    TokenSeq x(t_len);
    for (int i = 0; i < k; ++i)
      x[i] = static_cast<int>(rng.uniform_int(s_vocab)) + 1;
    for (int i = k; i < t_len; ++i) {
      long long row = 0;
      for (int j = i - k; j < i; ++j) row = row * s_vocab + (x[j] - 1);
      x[i] = draw(trans.row(row));
    }
    // splice the final k-suffix at a uniform interior index
    const int idx =
        k + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                t_len - k)));  // 1-based splice end in [k, T-1]
    const TokenSeq suffix(x.end() - k, x.end());
    std::copy(suffix.begin(), suffix.end(), x.begin() + (idx - k));
    // overlapping splices can destroy the occurrence; resample if so
    const TokenSeq pat(x.end() - k, x.end());
    bool found = false;
    for (int t = k; t < t_len && !found; ++t)
      found = std::equal(pat.begin(), pat.end(), x.begin() + (t - k));
    if (found) return x;
  }
}

VectorXd target_kgram(const TokenSeq& x, int k, int s_vocab) {
  const int t_len = static_cast<int>(x.size());
  if (k < 1 || t_len < k + 1)
    throw PreconditionError("target_kgram: need 1 <= k <= |x| - 1");
  if (s_vocab == 0) s_vocab = *std::max_element(x.begin(), x.end());
  validate_tokens(x, s_vocab);
  VectorXd counts = VectorXd::Zero(s_vocab);
  const auto pat = x.end() - k;
  for (int t = k; t < t_len; ++t)  // window ends at t, next token at t+1
    if (std::equal(pat, x.end(), x.begin() + (t - k)))
      counts(x[t] - 1) += 1.0;
  const double total = counts.sum();
  if (total == 0.0)
    throw PreconditionError(
        "target_kgram: the final k-suffix never occurs in the interior");
  return counts / total;
}

LTParams construct_modp_lt(int period, int k, double beta) {
  if (period < 2 || k < 0 || k >= period)
    throw PreconditionError("construct_modp_lt: need 0 <= k < period");
  if (!(beta > 0.0))
    throw PreconditionError("construct_modp_lt: beta must be positive");
  // basis: e0 = E_0, e1 = E_1, e_{2+r} = q_r, last = output direction
  const int d = period + 3;
  const int out = d - 1;
  LTParams params;
  params.s_vocab = 2;
  params.d = d;
  params.delta = period;
  params.tau = 0;
  params.embed = MatrixXd::Zero(2, d);
  params.embed(0, 0) = 1.0;
  params.embed(1, 1) = 1.0;
  params.pos = MatrixXd::Zero(period, d);
  for (int r = 0; r < period; ++r) params.pos(r, 2 + r) = 1.0;

  HeadParams head;
  // positions t == k (mod period), 1-based, live at pos row (k-1) mod period
  const int r_k = ((k - 1) % period + period) % period;
  VectorXd key_dir = VectorXd::Zero(d);
  key_dir(2 + r_k) = 1.0;
  VectorXd query_probe = VectorXd::Zero(d);
  query_probe(0) = query_probe(1) = 1.0;  // <probe, E_s + q_r> = 1 always
  head.kq = beta * key_dir * query_probe.transpose();
  head.v = MatrixXd::Zero(d, d);
  head.v(out, 1) = 1.0;  // E_1 -> e_out
  head.phi = VectorXd::Zero(1);
  params.layers.push_back(zero_mlp_layer({std::move(head)}, d));

  params.unembed = MatrixXd::Zero(1, d);
  params.unembed(0, out) = 1.0;
  params.validate();
  return params;
}

LTParams construct_simple_lt(double omega, double eps_mlp) {
  if (!std::isfinite(omega) || !(eps_mlp > 0.0))
    throw PreconditionError(
        "construct_simple_lt: omega finite, eps_mlp > 0 required");
  const double beta = 50.0;  // attention saturation for the {0,1} selector
  // basis: e0..e2 token embeds, e3 = z accumulator, e4 = output
  const int d = 5, ez = 3, out = 4;
  LTParams params;
  params.s_vocab = 3;
  params.d = d;
  params.delta = 1;
  params.tau = 0;
  params.embed = MatrixXd::Identity(3, d);
  params.pos = MatrixXd::Zero(1, d);

  HeadParams head;
  VectorXd key_dir = VectorXd::Zero(d);
  key_dir(0) = key_dir(1) = 1.0;  // logit beta on symbols {0,1}
  VectorXd query_probe = VectorXd::Zero(d);
  query_probe(0) = query_probe(1) = query_probe(2) = 1.0;
  head.kq = beta * key_dir * query_probe.transpose();
  head.v = MatrixXd::Zero(d, d);
  head.v(ez, 0) = 1.0;   // E_0 -> +e_z
  head.v(ez, 1) = -1.0;  // E_1 -> -e_z
  head.phi = VectorXd::Zero(1);

  // relu piecewise-linear interpolant of sin(omega z) on [-1, 1]
  const int knots = std::max(
      1, static_cast<int>(std::ceil(omega * omega / (2.0 * eps_mlp))));
  const double h = 2.0 / knots;
  auto knot = [&](int j) { return -1.0 + h * j; };
  auto val = [&](int j) { return std::sin(omega * knot(j)); };
  const int width = knots + 1;  // one ramp per interval plus a constant unit
  MatrixXd a = MatrixXd::Zero(width, d);
  VectorXd bias = VectorXd::Zero(width);
  MatrixXd b = MatrixXd::Zero(d, width);
  double prev_slope = 0.0;
  for (int j = 0; j < knots; ++j) {
    a(j, ez) = 1.0;
    bias(j) = -knot(j);
    const double slope = (val(j + 1) - val(j)) / h;
    b(out, j) = slope - prev_slope;
    prev_slope = slope;
  }
  a.row(knots).setZero();  // constant unit: relu(0*acc + 1) = 1
  bias(knots) = 1.0;
  b(out, knots) = val(0);

  LayerParams layer;
  layer.heads.push_back(std::move(head));
  layer.mlp = {std::move(a), std::move(bias), std::move(b), Activation::Relu};
  params.layers.push_back(std::move(layer));

  params.unembed = MatrixXd::Zero(1, d);
  params.unembed(0, out) = 1.0;
  params.validate();
  return params;
}

LTParams construct_kgram_lt(int s_vocab, int k, double beta) {
  if (s_vocab < 2 || k < 1)
    throw PreconditionError("construct_kgram_lt: need S >= 2, k >= 1");
  if (!(beta > 0.0))
    throw PreconditionError("construct_kgram_lt: beta must be positive");
  const double lambda = 40.0;  // layer-1 positional selection strength
  // blocks: 0 = current token, 1..k = token at offset h, k+1 = output
  const int d = (k + 2) * s_vocab;
  auto block = [&](int b, int s) { return b * s_vocab + s; };
  LTParams params;
  params.s_vocab = s_vocab;
  params.d = d;
  params.delta = 1;
  params.tau = k;
  params.embed = MatrixXd::Zero(s_vocab, d);
  for (int s = 0; s < s_vocab; ++s) params.embed(s, block(0, s)) = 1.0;
  params.pos = MatrixXd::Zero(1, d);

  std::vector<HeadParams> heads;
  for (int h = 1; h <= k; ++h) {
    HeadParams head;
    head.kq = MatrixXd::Zero(d, d);
    head.v = MatrixXd::Zero(d, d);
    for (int s = 0; s < s_vocab; ++s) head.v(block(h, s), block(0, s)) = 1.0;
    head.phi = VectorXd::Zero(k + 1);
    head.phi(h) = lambda;
    heads.push_back(std::move(head));
  }
  params.layers.push_back(zero_mlp_layer(std::move(heads), d));

  HeadParams match;
  match.kq = MatrixXd::Zero(d, d);
  for (int h = 1; h <= k; ++h)
    for (int s = 0; s < s_vocab; ++s)
      match.kq(block(h, s), block(h - 1, s)) = beta;
  match.v = MatrixXd::Zero(d, d);
  for (int s = 0; s < s_vocab; ++s) match.v(block(k + 1, s), block(0, s)) = 1.0;
  match.phi = VectorXd::Zero(k + 1);
  params.layers.push_back(zero_mlp_layer({std::move(match)}, d));

  params.unembed = MatrixXd::Zero(s_vocab, d);
  for (int s = 0; s < s_vocab; ++s) params.unembed(s, block(k + 1, s)) = 1.0;
  params.validate();
  return params;
}

int task_vocab(const TaskSpec& spec) {
  return std::visit(
      [](const auto& t) -> int {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SimpleTask>) return 3;
        else if constexpr (std::is_same_v<T, ModPTask>) return 2;
        else return t.s_vocab;
      },
      spec);
}

int task_out_dim(const TaskSpec& spec) {
  if (std::holds_alternative<KGramTask>(spec))
    return std::get<KGramTask>(spec).s_vocab;
  return 1;
}

TokenSeq task_generate(const TaskSpec& spec, int t_len, Rng& rng) {
  return std::visit(
      [&](const auto& t) -> TokenSeq {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SimpleTask>)
          return gen_simple(t_len, rng);
        else if constexpr (std::is_same_v<T, ModPTask>)
          return gen_modp(t_len, t.period, rng);
        else
          return gen_kgram(t_len, t.s_vocab, t.k, rng);
      },
      spec);
}

VectorXd task_target(const TaskSpec& spec, const TokenSeq& x) {
  return std::visit(
      [&](const auto& t) -> VectorXd {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SimpleTask>) {
          VectorXd v(1);
          v(0) = target_simple(x, t.omega);
          return v;
        } else if constexpr (std::is_same_v<T, ModPTask>) {
          VectorXd v(1);
          v(0) = target_modp(x, t.period, t.k);
          return v;
        } else {
          return target_kgram(x, t.k, t.s_vocab);
        }
      },
      spec);
}

}  // namespace lglab
