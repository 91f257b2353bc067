#include "lglab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "lglab/analyzers.hpp"
#include "lglab/forward.hpp"
#include "lglab/rng.hpp"
#include "lglab/simulators.hpp"
#include "lglab/tasks.hpp"
#include "lglab/trainer.hpp"

namespace lglab {

namespace {

constexpr double kTieTol = 1e-12;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

CheckResult check(const std::string& name, bool passed,
                  const std::string& detail) {
  return {name, passed, detail};
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TokenSeq uniform_tokens(int t_len, int s_vocab, Rng& rng) {
  TokenSeq x(t_len);
  for (int i = 0; i < t_len; ++i)
    x[i] = static_cast<int>(rng.uniform_int(s_vocab)) + 1;
  return x;
}

}  // namespace

int worker_threads() {
  if (const char* env = std::getenv("LGLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

LTParams random_grid_model(std::uint64_t seed, int s_vocab, int delta, int tau,
                           int grid_step, bool low_logit_last_token) {
  Rng rng(seed);
  // basis layout: token directions then residue directions, so every class
  // logit is a sum of four integer-grid kq entries
  const int d = s_vocab + delta;
  LTParams params;
  params.s_vocab = s_vocab;
  params.d = d;
  params.delta = delta;
  params.tau = tau;
  params.embed = MatrixXd::Zero(s_vocab, d);
  for (int s = 0; s < s_vocab; ++s) params.embed(s, s) = 1.0;
  params.pos = MatrixXd::Zero(delta, d);
  for (int r = 0; r < delta; ++r) params.pos(r, s_vocab + r) = 1.0;

  HeadParams head;
  head.kq = MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      head.kq(i, j) = grid_step * static_cast<double>(rng.uniform_int(3));
  if (low_logit_last_token)
    for (int j = 0; j < d; ++j)
      head.kq(s_vocab - 1, j) = -10.0 * grid_step;
  head.v = rng.gaussian_matrix(d, d, 0.5);
  head.phi = VectorXd(tau + 1);
  for (int t = 0; t <= tau; ++t)
    head.phi(t) = grid_step * static_cast<double>(rng.uniform_int(3));

  LayerParams layer;
  layer.heads.push_back(std::move(head));
  layer.mlp.a = rng.gaussian_matrix(3, d, 0.3);
  layer.mlp.bias = rng.gaussian_matrix(3, 1, 0.3).col(0);
  layer.mlp.b = rng.gaussian_matrix(d, 3, 0.3);
  layer.mlp.activation = Activation::Relu;
  params.layers.push_back(std::move(layer));
  params.unembed = rng.gaussian_matrix(2, d, 0.5);
  params.validate();
  return params;
}

LTParams histogram_model(int s_vocab) {
  const int d = 2 * s_vocab;
  LTParams params;
  params.s_vocab = s_vocab;
  params.d = d;
  params.delta = 1;
  params.tau = 0;
  params.embed = MatrixXd::Zero(s_vocab, d);
  for (int s = 0; s < s_vocab; ++s) params.embed(s, s) = 1.0;
  params.pos = MatrixXd::Zero(1, d);
  HeadParams avg;  // kq = 0, phi = 0: uniform attention -> running histogram
  avg.kq = MatrixXd::Zero(d, d);
  avg.v = MatrixXd::Zero(d, d);
  for (int s = 0; s < s_vocab; ++s) avg.v(s_vocab + s, s) = 1.0;
  avg.phi = VectorXd::Zero(1);
  LayerParams l1;
  l1.heads.push_back(std::move(avg));
  l1.mlp.a = MatrixXd::Zero(1, d);
  l1.mlp.bias = VectorXd::Zero(1);
  l1.mlp.b = MatrixXd::Zero(d, 1);
  LayerParams l2 = l1;  // trivial second layer keeps the F_tau shape
  HeadParams noop;
  noop.kq = MatrixXd::Zero(d, d);
  noop.v = MatrixXd::Zero(d, d);
  noop.phi = VectorXd::Zero(1);
  l2.heads = {std::move(noop)};
  params.layers = {std::move(l1), std::move(l2)};
  params.unembed = MatrixXd::Zero(s_vocab, d);
  for (int s = 0; s < s_vocab; ++s) params.unembed(s, s_vocab + s) = 1.0;
  params.validate();
  return params;
}

std::vector<CheckResult> verify_hardmax(int num_models, std::uint64_t seed) {
  double worst_attn = 0.0, worst_out = 0.0;
  for (int k = 0; k < num_models; ++k) {
    Rng rng(child_seed(seed, 1000 + k));
    const int s = 2 + static_cast<int>(rng.uniform_int(2));
    const int tau = static_cast<int>(rng.uniform_int(2));
    const LTParams f =
        random_grid_model(child_seed(seed, k), s, 1, tau, 1, false);
    const int n = static_cast<int>(hardmax_threshold(f, 16));
    const TokenSeq x = uniform_tokens(n, s, rng);

    std::vector<VectorXd> y0(n);
    for (int i = 1; i <= n; ++i) y0[i - 1] = f.embed_of(x[i - 1]) + f.pos_of(i);
    const HeadParams& head = f.layers[0].heads[0];
    VectorXd logits(n);
    const VectorXd q = head.kq * y0[n - 1];
    for (int j = 1; j <= n; ++j)
      logits(j - 1) = y0[j - 1].dot(q) + head.phi_at(n - j, tau);
    const double top = logits.maxCoeff();
    std::vector<int> argmax;
    for (int j = 1; j <= n; ++j)
      if (logits(j - 1) >= top - kTieTol) argmax.push_back(j);

    const PrecisionMode mode = PrecisionMode::finite(16);
    const VectorXd attn = attention_distribution(f, mode, y0, 0, 0, n, n);
    VectorXd oracle = VectorXd::Zero(n);
    for (int j : argmax) oracle(j - 1) = 1.0 / argmax.size();
    worst_attn = std::max(worst_attn, (attn - oracle).cwiseAbs().maxCoeff());

    VectorXd mix = VectorXd::Zero(f.d);
    for (int j : argmax) mix += y0[j - 1] / argmax.size();
    VectorXd acc = y0[n - 1] + head.v * mix;
    VectorXd hidden = f.layers[0].mlp.a * acc + f.layers[0].mlp.bias;
    for (Eigen::Index i = 0; i < hidden.size(); ++i)
      hidden(i) = std::max(hidden(i), 0.0);
    const VectorXd hard_out = f.unembed * (acc + f.layers[0].mlp.b * hidden);
    worst_out =
        std::max(worst_out, (forward_last(f, mode, x) - hard_out).norm());
  }
  return {check("hardmax attention uniform over argmax", worst_attn <= 1e-9,
                "max deviation " + fmt(worst_attn) + " over " +
                    std::to_string(num_models) + " models (tol 1e-9)"),
          check("hardmax forward matches hard-attention formula",
                worst_out <= 1e-8, "max deviation " + fmt(worst_out) +
                    " (tol 1e-8)")};
}

std::vector<CheckResult> verify_rounding(int instances, std::uint64_t seed) {
  Rng rng(seed);
  int bad = 0;
  for (int t = 0; t < instances; ++t) {
    const int k = 1 + static_cast<int>(rng.uniform_int(50));
    const long long n = 1 + static_cast<long long>(rng.uniform_int(10000));
    const VectorXd p = rng.dirichlet(VectorXd::Ones(k));
    const std::vector<long long> m = ratio_rounding(p, n);
    long long total = 0;
    for (long long v : m) total += v;
    if (total != n) ++bad;
    for (int i = 0; i < k; ++i)
      if (std::abs(static_cast<double>(m[i]) / n - p(i)) > 1.0 / n) ++bad;
  }
  return {check("ratio_rounding exact guarantees", bad == 0,
                std::to_string(bad) + " violations over " +
                    std::to_string(instances) + " instances (zero tolerance)")};
}

std::vector<CheckResult> verify_simulation(int pairs, std::uint64_t seed,
                                           const std::vector<double>& eps_list,
                                           double c_freeze, int x_len) {
  const int s = 4, delta = 2, tau = 1, filler = s;
  double worst_ratio = 0.0;
  bool len_ok = true;
  std::vector<std::vector<double>> errs(eps_list.size());
  // key rows of all non-filler tokens are tied so several classes reach
  // the argmax together and the output genuinely depends on their mixing
  // ratios (otherwise hard attention reproduces outputs exactly and the
  // eps dependence is invisible)
  // negative phi keeps the argmax in the bulk (an exactly-copied suffix
  // position at the argmax would also hide the eps dependence)
  auto tie_tokens = [s](LTParams m) {
    for (LayerParams& layer : m.layers)
      for (HeadParams& head : layer.heads) {
        for (int t = 1; t + 1 < s; ++t) head.kq.row(t) = head.kq.row(0);
        head.phi.setConstant(-2.0);
      }
    return m;
  };
  for (int k = 0; k < pairs; ++k) {
    const LTParams f = tie_tokens(
        random_grid_model(child_seed(seed, 2 * k), s, delta, tau, 2, true));
    const LTParams g = tie_tokens(random_grid_model(child_seed(seed, 2 * k + 1),
                                                    s, delta, tau, 2, true));
    Rng rng(child_seed(seed, 5000 + k));
    const TokenSeq x =
        dirichlet_seq(VectorXd::Ones(s), x_len, rng).first;
    const double mf = mlp_bounds(f).m_f, mg = mlp_bounds(g).m_f;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
      const double eps = eps_list[e];
      const SimReport rep = build_joint_sim(f, g, 16, x, eps, filler);
      if (rep.len_z > 20.0 / (eps * eps) + tau + delta) len_ok = false;
      const double denom_f = mf * (s + tau) * eps;
      const double denom_g = mg * (s + tau) * eps;
      worst_ratio = std::max({worst_ratio, rep.err_f / denom_f,
                              rep.err_g.value() / denom_g});
      errs[e].push_back(rep.err_f);
      errs[e].push_back(rep.err_g.value());
    }
  }
  bool monotone = true;
  std::string med_detail;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const double med = median(errs[e]);
    med_detail += (e ? ", " : "") + fmt(eps_list[e]) + ": " + fmt(med);
    if (med > prev + 1e-15) monotone = false;
    prev = med;
  }
  return {check("joint sim length bound |z| <= 20/eps^2 + tau + delta", len_ok,
                len_ok ? "all within bound" : "length bound exceeded"),
          check("joint sim error within calibrated bound",
                worst_ratio <= c_freeze,
                "max err / (M_f (S+tau) eps) = " + fmt(worst_ratio) +
                    " (frozen constant " + fmt(c_freeze) + ")"),
          check("joint sim error medians nonincreasing in eps", monotone,
                "medians by eps { " + med_detail + " }")};
}

std::vector<CheckResult> verify_markov(int num_seeds, std::uint64_t seed,
                                       int x_len, std::vector<int> sizes,
                                       int k_tries) {
  const LTParams f = histogram_model(3);
  std::vector<std::vector<double>> errs(sizes.size());
  for (int sd = 0; sd < num_seeds; ++sd) {
    Rng rng(child_seed(seed, sd));
    const TokenSeq x = uniform_tokens(x_len, 3, rng);
    for (std::size_t i = 0; i < sizes.size(); ++i)
      errs[i].push_back(
          best_markov_sim(f, x, sizes[i], f.tau, k_tries, rng).err_f);
  }
  std::vector<double> lx, ly;
  std::string detail;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double med = median(errs[i]);
    lx.push_back(std::log(static_cast<double>(sizes[i])));
    ly.push_back(std::log(std::max(med, 1e-300)));
    detail += (i ? ", " : "") + std::to_string(sizes[i]) + ": " + fmt(med);
  }
  const double slope = fit_slope(lx, ly);
  return {check("markov subsample error decay slope in [-0.55, -0.18]",
                slope >= -0.55 && slope <= -0.18,
                "log-log slope " + fmt(slope) + "; medians { " + detail +
                    " }")};
}

std::vector<CheckResult> verify_bulk(int trials, std::uint64_t seed) {
  const int s = 3, delta = 2;
  const double d_tol = 0.05, rho = 0.05;
  const int t_len = static_cast<int>(
      std::ceil(delta / (d_tol * d_tol) * std::log(2.0 * s * delta / rho)));
  const VectorXd p = VectorXd::Constant(s, 1.0 / s);
  Rng rng(seed);
  int out = 0;
  for (int t = 0; t < trials; ++t)
    if (!bulk_check(uniform_tokens(t_len, s, rng), p, delta, 0, d_tol)) ++out;
  const double rate = static_cast<double>(out) / trials;
  return {check("bulk deviation rate <= rho", rate <= rho,
                "out-of-bulk rate " + fmt(rate) + " at T = " +
                    std::to_string(t_len) + " (rho " + fmt(rho) + ")")};
}

std::vector<CheckResult> verify_gradients(std::uint64_t seed) {
  std::vector<CheckResult> results;
  for (int depth = 1; depth <= 2; ++depth) {
    TrainConfig cfg;
    cfg.depth = depth;
    cfg.heads_l1 = 2;
    cfg.d = 4;
    cfg.mlp_width = 3;
    cfg.pe = depth == 1 ? PEKind::Periodic : PEKind::RelativeLocal;
    cfg.delta = 2;
    cfg.tau = 2;
    cfg.s_vocab = 3;
    cfg.out_dim = 2;
    Rng rng(child_seed(seed, depth));
    TrainModel model = init_model(cfg, rng);
    std::vector<TokenSeq> inputs;
    std::vector<VectorXd> targets;
    for (int b = 0; b < 3; ++b) {
      inputs.push_back(uniform_tokens(6, cfg.s_vocab, rng));
      targets.push_back(rng.gaussian_matrix(2, 1).col(0));
    }
    TrainModel grad = zeros_like(model);
    loss_and_grad(model, inputs, targets, grad);
    const auto params = parameter_list(model);
    const auto gparams = parameter_list(grad);
    double worst = 0.0;
    const double h = 1e-5;
    TrainModel dummy = zeros_like(model);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      MatrixXd& p = *params[pi].first;
      const MatrixXd& g = *gparams[pi].first;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (std::abs(g(i)) < 1e-8) continue;
        const double save = p(i);
        p(i) = save + h;
        const double up = loss_and_grad(model, inputs, targets, dummy);
        p(i) = save - h;
        const double dn = loss_and_grad(model, inputs, targets, dummy);
        p(i) = save;
        const double fd = (up - dn) / (2.0 * h);
        worst = std::max(worst, std::abs(g(i) - fd) /
                                    std::max(std::abs(fd), std::abs(g(i))));
      }
    }
    results.push_back(check(
        "gradients match finite differences (depth " + std::to_string(depth) +
            ")",
        worst <= 1e-4, "max relative deviation " + fmt(worst) + " (tol 1e-4)"));
  }
  return results;
}

namespace {

// Spurious full-pattern matches at the first k (boundary-aliased) keys of
// the k-gram construction make the input unusable for the fidelity check.
bool kgram_boundary_aliased(const TokenSeq& x, int k) {
  const int t_len = static_cast<int>(x.size());
  for (int j = 1; j <= k; ++j) {
    double m = 0.0;
    for (int h = 1; h <= k; ++h) {
      const int want = x[t_len - h];  // token matched by block h of the query
      if (j > h) {
        m += x[j - h - 1] == want ? 1.0 : 0.0;
      } else {
        int hits = 0;
        for (int jp = 1; jp <= j; ++jp) hits += x[jp - 1] == want;
        m += static_cast<double>(hits) / j;
      }
    }
    if (m > k - 0.3) return true;
  }
  return false;
}

int kgram_matches(const TokenSeq& x, int k) {
  const int t_len = static_cast<int>(x.size());
  int count = 0;
  for (int t = k; t < t_len; ++t)
    count += std::equal(x.end() - k, x.end(), x.begin() + (t - k));
  return count;
}

}  // namespace

std::vector<CheckResult> verify_constructions(std::uint64_t seed,
                                              int num_inputs) {
  const PrecisionMode mode = PrecisionMode::infinite();
  std::vector<CheckResult> results;

  {
    Rng rng(child_seed(seed, 1));
    const LTParams f = construct_modp_lt(3, 1, 50.0);
    double worst = 0.0;
    for (int t = 0; t < num_inputs; ++t) {
      const TokenSeq x = gen_modp(1000, 3, rng);
      worst = std::max(worst, std::abs(forward_last(f, mode, x)(0) -
                                       target_modp(x, 3, 1)));
    }
    results.push_back(check("modp construction fidelity", worst <= 1e-6,
                            "max |T(x) - f*(x)| = " + fmt(worst) +
                                " (tol 1e-6)"));
  }
  {
    Rng rng(child_seed(seed, 2));
    const LTParams f = construct_simple_lt(3.0, 1e-3);
    double worst = 0.0;
    for (int t = 0; t < num_inputs; ++t) {
      const TokenSeq x = gen_simple(1000, rng);
      worst = std::max(worst, std::abs(forward_last(f, mode, x)(0) -
                                       target_simple(x, 3.0)));
    }
    results.push_back(check("simple construction fidelity", worst <= 2e-3,
                            "max |T(x) - f*(x)| = " + fmt(worst) +
                                " (tol 2e-3)"));
  }
  {
    Rng rng(child_seed(seed, 3));
    const int k = 2, s = 2, t_len = 512;
    const LTParams f = construct_kgram_lt(s, k, 30.0);
    double worst = 0.0;
    int accepted = 0;
    while (accepted < num_inputs) {
      const TokenSeq x = uniform_tokens(t_len, s, rng);
      if (kgram_matches(x, k) < t_len / 8 || kgram_boundary_aliased(x, k))
        continue;
      ++accepted;
      worst = std::max(worst, (forward_last(f, mode, x) -
                               target_kgram(x, k, s)).norm());
    }
    results.push_back(check("kgram construction fidelity", worst <= 1e-4,
                            "max ||T(x) - f*(x)|| = " + fmt(worst) +
                                " (tol 1e-4) on match-rich inputs"));
  }
  return results;
}

std::vector<CheckResult> verify_training(const TrainingVerifyConfig& vcfg) {
  const TaskSpec task = ModPTask{3, 1};
  struct RunOut {
    std::vector<LGRow> curve;
    double off_mass = 0.0;
    double uniform_ratio = 0.0;
  };
  struct Run {
    int train_len;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (int len : vcfg.train_lens)
    for (int sd = 0; sd < vcfg.num_seeds; ++sd)
      runs.push_back({len, child_seed(vcfg.seed, runs.size())});
  std::vector<RunOut> outs(runs.size());

  auto run_one = [&](std::size_t idx) {
    TrainConfig cfg;
    cfg.depth = 1;
    cfg.heads_l1 = 1;
    cfg.d = 16;
    cfg.mlp_width = 32;
    cfg.pe = PEKind::Periodic;
    cfg.delta = 3;
    cfg.train_len = runs[idx].train_len;
    cfg.batch = vcfg.batch;
    cfg.max_steps = vcfg.max_steps;
    cfg.stop_loss = 1e-4;
    cfg.seed = runs[idx].seed;
    Rng rng(runs[idx].seed);
    TrainResult tr = train(cfg, task, rng);
    outs[idx].curve =
        eval_curve(tr.model, task, vcfg.test_lens, vcfg.eval_batches, rng);
    // attention concentration on positions t == 1 (mod 3)
    std::vector<double> offs, ratios;
    for (int rep = 0; rep < 8; ++rep) {
      const TokenSeq x = task_generate(task, 128, rng);
      const VectorXd w = train_attention(tr.model, x, 0, 0);
      double off = 0.0, wmin = 1.0, wmax = 0.0;
      int on_count = 0;
      for (int t = 1; t <= 128; ++t) {
        if (t % 3 == 1) {
          ++on_count;
          wmin = std::min(wmin, w(t - 1));
          wmax = std::max(wmax, w(t - 1));
        } else {
          off += w(t - 1);
        }
      }
      const double u = (1.0 - off) / on_count;
      offs.push_back(off);
      ratios.push_back(std::max(wmax / u, u / std::max(wmin, 1e-300)));
    }
    outs[idx].off_mass = median(offs);
    outs[idx].uniform_ratio = median(ratios);
  };

  const int threads =
      vcfg.threads > 0 ? vcfg.threads : worker_threads();
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(threads, runs.size()); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < runs.size(); i = next++) run_one(i);
    });
  for (auto& th : pool) th.join();

  // plateau flatness and monotonicity
  bool flat_ok = true;
  std::vector<double> med_plateau;
  std::string detail;
  // The modular task makes the test loss eventually periodic in the test
  // length with period p: the set of relevant positions, and whether the
  // final query position is itself relevant, depend on T' mod p.  "Eventually
  // flat" therefore means flat along a fixed residue class, so the last two
  // lengths are the two largest test lengths congruent mod p.
  const int period = std::get<ModPTask>(task).period;
  const std::size_t last_idx = vcfg.test_lens.size() - 1;
  std::size_t prev_idx = last_idx;
  for (std::size_t j = last_idx; j-- > 0;)
    if (vcfg.test_lens[j] % period == vcfg.test_lens[last_idx] % period) {
      prev_idx = j;
      break;
    }
  if (prev_idx == last_idx)
    throw PreconditionError(
        "verify_training: test_lens need two lengths sharing a residue mod " +
        std::to_string(period));
  for (int len : vcfg.train_lens) {
    std::vector<double> plateaus, flat_ratios;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].train_len != len) continue;
      const auto& rows = outs[i].curve;
      const double last = rows[last_idx].test_loss;
      const double prev = rows[prev_idx].test_loss;
      plateaus.push_back(last);
      flat_ratios.push_back(std::abs(last - prev) / std::max(last, 1e-300));
    }
    if (median(flat_ratios) > 0.25) flat_ok = false;
    med_plateau.push_back(median(plateaus));
    detail += "N=" + std::to_string(len) + ": " + fmt(med_plateau.back()) +
              " (flat ratio " + fmt(median(flat_ratios)) + "); ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < med_plateau.size(); ++i)
    if (med_plateau[i] > med_plateau[i - 1]) monotone = false;

  std::vector<double> offs, ratios;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].train_len != vcfg.train_lens.back()) continue;
    offs.push_back(outs[i].off_mass);
    ratios.push_back(outs[i].uniform_ratio);
  }
  const double med_off = median(offs), med_ratio = median(ratios);

  return {check("test loss plateaus in test length", flat_ok, detail),
          check("plateau loss nonincreasing in train length", monotone,
                detail),
          check("attention mass off residue <= 0.1", med_off <= 0.1,
                "median off-residue mass " + fmt(med_off)),
          check("on-residue attention within x2 of uniform", med_ratio <= 2.0,
                "median worst uniform ratio " + fmt(med_ratio))};
}

std::vector<CheckResult> verify_suite(const std::string& name,
                                      std::uint64_t seed) {
  auto append = [](std::vector<CheckResult>& into,
                   std::vector<CheckResult> from) {
    for (auto& r : from) into.push_back(std::move(r));
  };
  std::vector<CheckResult> results;
  const bool all = name == "all";
  bool known = all;
  if (all || name == "hardmax") {
    append(results, verify_hardmax(50, seed));
    known = true;
  }
  if (all || name == "rounding") {
    append(results, verify_rounding(2000, seed));
    known = true;
  }
  if (all || name == "simulation") {
    append(results,
           verify_simulation(6, seed, {0.1, 0.05}, kJointSimCalibration,
                             4000));
    known = true;
  }
  if (all || name == "markov") {
    append(results, verify_markov(8, seed, 100000, {100, 1000, 10000}, 16));
    known = true;
  }
  if (all || name == "bulk") {
    append(results, verify_bulk(3000, seed));
    known = true;
  }
  if (all || name == "gradients") {
    append(results, verify_gradients(seed));
    known = true;
  }
  if (all || name == "constructions") {
    append(results, verify_constructions(seed, 30));
    known = true;
  }
  if (!known)
    throw PreconditionError("unknown verify suite '" + name + "'");
  return results;
}

}  // namespace lglab
