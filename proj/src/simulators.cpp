#include "lglab/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "lglab/analyzers.hpp"
#include "lglab/forward.hpp"

namespace lglab {

namespace {

constexpr double kTieTol = 1e-12;

CountTable count_classes(const TokenSeq& x, int s_vocab, int delta, int tau) {
  const int t_len = static_cast<int>(x.size());
  if (t_len <= tau)
    throw PreconditionError("token_counts: |x| <= tau leaves an empty prefix");
  CountTable n = CountTable::Zero(s_vocab, delta);
  for (int j = 1; j <= t_len - tau; ++j)
    ++n(x[j - 1] - 1, (j - 1) % delta);
  return n;
}

void require_one_head(const LTParams& params, const char* op) {
  if (params.num_layers() != 1 || params.layers[0].heads.size() != 1)
    throw ShapeError(std::string(op) +
                     ": requires a 1-layer, 1-head model");
}

// Final-query attention logits of every (token, residue) class, without
// phi offsets; class index (token-1)*delta + residue.
VectorXd final_query_class_logits(const LTParams& params, const TokenSeq& x) {
  const int s = params.s_vocab, delta = params.delta;
  const int t_len = static_cast<int>(x.size());
  const VectorXd query =
      params.layers[0].heads[0].kq *
      (params.embed_of(x[t_len - 1]) + params.pos_of(t_len));
  VectorXd logits(s * delta);
  for (int t = 1; t <= s; ++t)
    for (int r = 0; r < delta; ++r)
      logits((t - 1) * delta + r) =
          (params.embed.row(t - 1).transpose() +
           params.pos.row(r).transpose()).dot(query);
  return logits;
}

struct Pattern {
  std::set<int> a_f;        // attended prefix classes
  CountTable counts;        // n(s, i, x)
  long long p_size = 0;     // sum of counts over a_f
  double max_logit = 0.0;   // global maximal final-query logit
  VectorXd class_logits;
};

Pattern analyze_pattern(const LTParams& params, int p_bits, const TokenSeq& x) {
  Pattern pat;
  pat.class_logits = final_query_class_logits(params, x);
  pat.counts = count_classes(x, params.s_vocab, params.delta, params.tau);
  const AttentionSets sets = attention_sets(params, p_bits, x);
  for (const auto& [token, residue] : sets.prefix_pairs)
    pat.a_f.insert((token - 1) * params.delta + residue);
  for (int c : pat.a_f)
    pat.p_size += pat.counts(c / params.delta, c % params.delta);
  const int t_len = static_cast<int>(x.size());
  double best = -std::numeric_limits<double>::infinity();
  const HeadParams& head = params.layers[0].heads[0];
  for (int j = 1; j <= t_len; ++j)
    best = std::max(best,
                    pat.class_logits((x[j - 1] - 1) * params.delta +
                                     (j - 1) % params.delta) +
                        head.phi_at(t_len - j, params.tau));
  pat.max_logit = best;
  return pat;
}

}  // namespace

CountTable token_counts(const TokenSeq& x, int delta, int tau) {
  if (x.empty()) throw PreconditionError("token_counts: empty sequence");
  const int s = *std::max_element(x.begin(), x.end());
  validate_tokens(x, s);
  return count_classes(x, s, delta, tau);
}

AttentionSets attention_sets(const LTParams& params, int p_bits,
                             const TokenSeq& x, bool force) {
  params.validate();
  require_one_head(params, "attention_sets");
  validate_tokens(x, params.s_vocab);
  const int t_len = static_cast<int>(x.size());
  if (!force && t_len < hardmax_threshold(params, p_bits))
    throw PreconditionError(
        "attention_sets: |x| below the hardmax threshold; pass force to "
        "override");
  const VectorXd cls = final_query_class_logits(params, x);
  const HeadParams& head = params.layers[0].heads[0];
  VectorXd logits(t_len);
  for (int j = 1; j <= t_len; ++j)
    logits(j - 1) = cls((x[j - 1] - 1) * params.delta + (j - 1) % params.delta) +
                    head.phi_at(t_len - j, params.tau);
  const double top = logits.maxCoeff();
  AttentionSets sets;
  std::set<std::pair<int, int>> pairs;
  for (int j = 1; j <= t_len; ++j) {
    if (logits(j - 1) < top - kTieTol) continue;
    if (j <= t_len - params.tau) {
      sets.prefix_positions.push_back(j);
      pairs.emplace(x[j - 1], (j - 1) % params.delta);
    } else {
      sets.suffix_positions.push_back(j);
      sets.suffix_pairs.emplace_back(x[j - 1], j);
    }
  }
  sets.prefix_pairs.assign(pairs.begin(), pairs.end());
  return sets;
}

std::vector<long long> ratio_rounding(const VectorXd& p, long long n) {
  if (n < 1) throw PreconditionError("ratio_rounding: N must be >= 1");
  if ((p.array() < 0.0).any())
    throw PreconditionError("ratio_rounding: distribution has negative entries");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw PreconditionError("ratio_rounding: entries must sum to 1");
  const Eigen::Index k = p.size();
  std::vector<long long> m(k);
  long long total = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    m[i] = static_cast<long long>(std::floor(p(i) * static_cast<double>(n)));
    total += m[i];
  }
  for (Eigen::Index i = 0; i < k && total < n; ++i, ++total) ++m[i];
  return m;
}

TokenSeq suffix_sim(const TokenSeq& x, int n, int delta) {
  const int t_len = static_cast<int>(x.size());
  if (n < 1 || n > t_len)
    throw PreconditionError("suffix_sim: need 1 <= N <= |x|");
  int np = n;
  while (np % delta != t_len % delta) ++np;
  if (np > t_len)
    throw PreconditionError("suffix_sim: input too short for a residue-"
                            "aligned suffix of length >= N");
  return TokenSeq(x.end() - np, x.end());
}

bool bulk_check(const TokenSeq& x, const VectorXd& p, int delta, int tau,
                double d_tol) {
  const int s = static_cast<int>(p.size());
  validate_tokens(x, s);
  const CountTable n = count_classes(x, s, delta, tau);
  const double denom = static_cast<double>(x.size()) / delta;
  for (int t = 0; t < s; ++t)
    for (int r = 0; r < delta; ++r)
      if (std::abs(n(t, r) / denom - p(t)) > d_tol) return false;
  return true;
}

std::pair<TokenSeq, VectorXd> dirichlet_seq(const VectorXd& alpha, int t_len,
                                            Rng& rng) {
  if ((alpha.array() <= 0.0).any())
    throw PreconditionError("dirichlet_seq: alpha entries must be positive");
  if (t_len < 1) throw PreconditionError("dirichlet_seq: T must be >= 1");
  VectorXd p = rng.dirichlet(alpha);
  TokenSeq x(t_len);
  for (int i = 0; i < t_len; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int tok = static_cast<int>(p.size());
    for (int t = 0; t < p.size(); ++t) {
      acc += p(t);
      if (u < acc) { tok = t + 1; break; }
    }
    x[i] = tok;
  }
  return {std::move(x), std::move(p)};
}

std::vector<int> markov_subsample(const TokenSeq& x, int n, int tau,
                                  Rng& rng) {
  const int t_len = static_cast<int>(x.size());
  if (n < tau + 1 || n > t_len)
    throw PreconditionError("markov_subsample: need tau+1 <= n <= |x|");
  std::vector<int> idx;
  if (n == t_len) {
    idx.resize(t_len);
    std::iota(idx.begin(), idx.end(), 1);
    return idx;
  }
  const double p = static_cast<double>(n) / t_len;
  const double q = std::pow(static_cast<double>(n), -1.0 / 3.0);
  const double r = std::min(1.0, p * q / (1.0 - p));
  int state = rng.uniform() < p ? 1 : 0;  // stationary law: P(state=1) = p
  for (int j = 1; j <= t_len - tau - 1; ++j) {
    if (state == 1) idx.push_back(j);
    state = state == 1 ? (rng.uniform() < q ? 0 : 1)
                       : (rng.uniform() < r ? 1 : 0);
  }
  for (int j = std::max(1, t_len - tau); j <= t_len; ++j) idx.push_back(j);
  return idx;
}

TokenSeq subsequence(const TokenSeq& x, const std::vector<int>& indices) {
  TokenSeq z;
  z.reserve(indices.size());
  for (int j : indices) {
    if (j < 1 || j > static_cast<int>(x.size()))
      throw PreconditionError("subsequence: index out of range");
    z.push_back(x[j - 1]);
  }
  return z;
}

double measure_discrepancy(const LTParams& f, const PrecisionMode& mode,
                           const TokenSeq& x, const TokenSeq& z) {
  return (forward_last(f, mode, x) - forward_last(f, mode, z)).norm();
}

SimReport best_markov_sim(const LTParams& f, const TokenSeq& x, int n, int tau,
                          int k_tries, Rng& rng) {
  require_fclass(f);
  if (k_tries < 1) throw PreconditionError("best_markov_sim: k_tries >= 1");
  const PrecisionMode mode = PrecisionMode::infinite();
  const VectorXd fx = forward_last(f, mode, x);
  SimReport best;
  best.method = SimMethod::Markov;
  best.epsilon = std::pow(static_cast<double>(n), -1.0 / 3.0);
  best.err_f = std::numeric_limits<double>::infinity();
  for (int t = 0; t < k_tries; ++t) {
    const TokenSeq z = subsequence(x, markov_subsample(x, n, tau, rng));
    const double err = (fx - forward_last(f, mode, z)).norm();
    if (err < best.err_f) {
      best.err_f = err;
      best.z = z;
      best.len_z = static_cast<int>(z.size());
    }
  }
  return best;
}

SimReport build_joint_sim(const LTParams& f_in, const LTParams& g_in,
                          int p_bits, const TokenSeq& x, double eps,
                          int filler) {
  require_one_head(f_in, "build_joint_sim");
  require_one_head(g_in, "build_joint_sim");
  if (f_in.s_vocab != g_in.s_vocab || f_in.delta != g_in.delta ||
      f_in.tau != g_in.tau)
    throw PreconditionError(
        "build_joint_sim: models must share s_vocab, delta, tau");
  if (!(eps > 0.0) || eps >= 1.0)
    throw PreconditionError("build_joint_sim: eps must lie in (0, 1)");
  if (filler < 1 || filler > f_in.s_vocab)
    throw PreconditionError("build_joint_sim: filler token out of vocabulary");
  const int delta = f_in.delta, tau = f_in.tau;
  const int t_len = static_cast<int>(x.size());
  validate_tokens(x, f_in.s_vocab);
  if (t_len <= tau)
    throw PreconditionError("build_joint_sim: |x| must exceed tau");
  const std::int64_t thr_f = hardmax_threshold(f_in, p_bits);
  const std::int64_t thr_g = hardmax_threshold(g_in, p_bits);
  if (t_len < thr_f || t_len < thr_g)
    throw PreconditionError(
        "build_joint_sim: |x| below a model's hardmax threshold");

  Pattern pat_f = analyze_pattern(f_in, p_bits, x);
  Pattern pat_g = analyze_pattern(g_in, p_bits, x);

  // Filler must sit strictly below both models' attended levels at every
  // residue it may be padded into.
  for (int r = 0; r < delta; ++r) {
    const int c = (filler - 1) * delta + r;
    const bool bad_f = pat_f.class_logits(c) >= pat_f.max_logit - kTieTol;
    const bool bad_g = pat_g.class_logits(c) >= pat_g.max_logit - kTieTol;
    if (bad_f || bad_g)
      throw PreconditionError(
          "build_joint_sim: filler (token " + std::to_string(filler) +
          ", residue " + std::to_string(r) + ") reaches the maximal logit "
          "for model " + (bad_f ? "f" : "g") + "; construction infeasible "
          "with this filler");
  }

  // WLOG |P_f| <= |P_g|
  const bool swapped = pat_f.p_size > pat_g.p_size;
  const Pattern& pf = swapped ? pat_g : pat_f;
  const Pattern& pg = swapped ? pat_f : pat_g;

  auto n_of = [&](int c) { return pf.counts(c / delta, c % delta); };
  std::vector<int> inter, f_only, g_only;  // class-index blocks, sorted
  for (int c : pf.a_f)
    (pg.a_f.count(c) ? inter : f_only).push_back(c);
  for (int c : pg.a_f)
    if (!pf.a_f.count(c)) g_only.push_back(c);

  const long long ceil1 = static_cast<long long>(std::ceil(1.0 / eps));
  const long long ceil2 =
      static_cast<long long>(std::ceil(1.0 / (eps * eps)));
  const long long nf = pf.p_size, ng = pg.p_size;
  std::vector<long long> m(f_in.s_vocab * delta, 0);

  // --- f part ---
  if (nf <= ceil1) {
    for (int c : pf.a_f) m[c] = n_of(c);
  } else {
    const double scale = static_cast<double>(ceil1) / nf;
    double target = 0.0;
    long long placed = 0;
    for (int c : inter) {
      m[c] = static_cast<long long>(std::floor(scale * n_of(c)));
      target += scale * n_of(c);
      placed += m[c];
    }
    long long extra = static_cast<long long>(std::floor(target - placed));
    for (std::size_t i = 0; i < inter.size() && extra > 0; ++i, --extra)
      ++m[inter[i]];
    double target_all = 0.0;
    for (int c : pf.a_f) target_all += scale * n_of(c);
    long long placed_f = 0;
    for (int c : f_only) {
      m[c] = static_cast<long long>(std::floor(scale * n_of(c)));
      placed_f += m[c];
    }
    for (int c : inter) placed_f += m[c];
    extra = static_cast<long long>(std::floor(target_all - placed_f));
    for (std::size_t i = 0; i < f_only.size() && extra > 0; ++i, --extra)
      ++m[f_only[i]];
  }

  // --- g extension on A_g \ A_f ---
  if (!g_only.empty()) {
    long long inter_count = 0;
    for (int c : inter) inter_count += n_of(c);
    if (static_cast<double>(inter_count) <= eps * ng) {
      VectorXd q(static_cast<Eigen::Index>(pg.a_f.size()));
      std::vector<int> a_g(pg.a_f.begin(), pg.a_f.end());
      for (std::size_t i = 0; i < a_g.size(); ++i)
        q(static_cast<Eigen::Index>(i)) =
            static_cast<double>(n_of(a_g[i])) / ng;
      const std::vector<long long> mt = ratio_rounding(q, ceil2);
      for (std::size_t i = 0; i < a_g.size(); ++i)
        if (!pf.a_f.count(a_g[i])) m[a_g[i]] = mt[i];
    } else if (nf <= ceil1) {
      for (int c : g_only) m[c] = n_of(c);
    } else {
      int s_star = *std::max_element(
          pf.a_f.begin(), pf.a_f.end(),
          [&](int a, int b) { return n_of(a) < n_of(b); });
      const double scale2 =
          static_cast<double>(m[s_star]) / static_cast<double>(n_of(s_star));
      double target = 0.0;
      long long placed = 0;
      for (int c : g_only) {
        m[c] = static_cast<long long>(std::floor(scale2 * n_of(c)));
        target += scale2 * n_of(c);
        placed += m[c];
      }
      long long extra = static_cast<long long>(std::floor(target - placed));
      for (std::size_t i = 0; i < g_only.size() && extra > 0; ++i, --extra)
        ++m[g_only[i]];
    }
  }

  // Never let an attended set vanish from z entirely.
  auto ensure_present = [&](const std::set<int>& cls) {
    if (cls.empty()) return;
    long long total = 0;
    int biggest = *cls.begin();
    for (int c : cls) {
      total += m[c];
      if (n_of(c) > n_of(biggest)) biggest = c;
    }
    if (total == 0) m[biggest] = 1;
  };
  ensure_present(pf.a_f);
  ensure_present(pg.a_f);

  // --- assemble z: A_f block, A_g \ A_f block, pads, (tau+1)-suffix ---
  TokenSeq z;
  auto emit_class = [&](int c, long long count) {
    const int token = c / delta + 1, residue = c % delta;
    for (long long k = 0; k < count; ++k) {
      while (static_cast<int>(z.size()) % delta != residue)
        z.push_back(filler);
      z.push_back(token);
    }
  };
  for (int c : inter) emit_class(c, m[c]);
  for (int c : f_only) emit_class(c, m[c]);
  for (int c : g_only) emit_class(c, m[c]);

  const int tail = std::min(tau + 1, t_len);
  const long long min_len = std::max(thr_f, thr_g);
  while (static_cast<long long>(z.size()) + tail < min_len)
    z.push_back(filler);
  while ((static_cast<int>(z.size()) + tail) % delta != t_len % delta)
    z.push_back(filler);
  z.insert(z.end(), x.end() - tail, x.end());

  SimReport report;
  report.method = SimMethod::JointHard;
  report.epsilon = eps;
  report.len_z = static_cast<int>(z.size());
  const PrecisionMode mode = PrecisionMode::finite(p_bits);
  report.err_f = measure_discrepancy(f_in, mode, x, z);
  report.err_g = measure_discrepancy(g_in, mode, x, z);
  report.z = std::move(z);
  return report;
}

}  // namespace lglab
