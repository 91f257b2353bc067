#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "lglab/analyzers.hpp"
#include "lglab/forward.hpp"
#include "lglab/rng.hpp"
#include "lglab/simulators.hpp"
#include "lglab/verify.hpp"

using namespace lglab;

namespace {

TokenSeq random_tokens(Rng& rng, int t_len, int s_vocab) {
  TokenSeq x(t_len);
  for (int i = 0; i < t_len; ++i)
    x[i] = static_cast<int>(rng.uniform_int(s_vocab)) + 1;
  return x;
}

// Embedding-layer inputs y^0 for a 1-layer model, used by the brute-force
// attention-set oracle.
std::vector<VectorXd> layer0(const LTParams& p, const TokenSeq& x) {
  std::vector<VectorXd> y;
  for (std::size_t i = 0; i < x.size(); ++i)
    y.push_back(p.embed_of(x[i]) + p.pos_of(static_cast<int>(i) + 1));
  return y;
}

}  // namespace

TEST_CASE("token_counts matches a direct recount") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int s = 2 + static_cast<int>(rng.uniform_int(4));
    const int delta = 1 + static_cast<int>(rng.uniform_int(3));
    const int tau = static_cast<int>(rng.uniform_int(3));
    const int t_len = tau + 5 + static_cast<int>(rng.uniform_int(200));
    const TokenSeq x = random_tokens(rng, t_len, s);
    const CountTable counts = token_counts(x, delta, tau);
    REQUIRE(counts.rows() == s);
    REQUIRE(counts.cols() == delta);
    long long total = 0;
    for (int tok = 1; tok <= s; ++tok)
      for (int r = 0; r < delta; ++r) {
        long long n = 0;
        for (int j = 1; j <= t_len - tau; ++j)
          if (x[j - 1] == tok && (j - 1) % delta == r) ++n;
        CHECK(counts(tok - 1, r) == n);
        total += n;
      }
    CHECK(total == t_len - tau);
  }
}

TEST_CASE("attention_sets with all logits equal keeps every position") {
  LTParams p = random_grid_model(3, 3, 1, 1, 2, false);
  p.layers[0].heads[0].kq.setZero();
  p.layers[0].heads[0].phi.setZero();
  Rng rng(5);
  const TokenSeq x = random_tokens(rng, 40, 3);
  const AttentionSets sets = attention_sets(p, 16, x, /*force=*/true);
  REQUIRE(static_cast<int>(sets.prefix_positions.size()) ==
          static_cast<int>(x.size()) - p.tau);
  for (std::size_t i = 0; i < sets.prefix_positions.size(); ++i)
    CHECK(sets.prefix_positions[i] == static_cast<int>(i) + 1);
  CHECK(sets.suffix_positions.size() == static_cast<std::size_t>(p.tau));
}

TEST_CASE("attention_sets with a dominant token keeps only its positions") {
  LTParams p = random_grid_model(3, 3, 1, 0, 2, false);
  // logit depends only on the key token; token 2 strictly dominates
  p.embed.setIdentity();
  p.pos.setZero();
  p.layers[0].heads[0].kq.setZero();
  p.layers[0].heads[0].kq.row(1).setConstant(5.0);  // key token 2
  p.layers[0].heads[0].phi.setZero();
  const TokenSeq x = {1, 2, 3, 2, 1, 2, 3};
  const AttentionSets sets = attention_sets(p, 16, x, true);
  REQUIRE(sets.prefix_positions == std::vector<int>{2, 4, 6});
  for (const auto& [tok, res] : sets.prefix_pairs) {
    CHECK(tok == 2);
    CHECK(res == 0);
  }
}

TEST_CASE("attention_sets equals a brute-force argmax over logits") {
  const PrecisionMode mode = PrecisionMode::finite(16);
  for (int rep = 0; rep < 15; ++rep) {
    const LTParams p = random_grid_model(900 + rep, 3, 2, 1, 2, false);
    Rng rng(40 + rep);
    const int t_len =
        std::max<int>(30, static_cast<int>(hardmax_threshold(p, 16)));
    const TokenSeq x = random_tokens(rng, t_len, p.s_vocab);
    const auto y = layer0(p, x);
    std::vector<double> logits(t_len);
    double best = -1e300;
    for (int j = 1; j <= t_len; ++j) {
      logits[j - 1] = attention_logit(p, mode, y, 0, 0, t_len, j);
      best = std::max(best, logits[j - 1]);
    }
    std::vector<int> argmax_prefix, argmax_suffix;
    for (int j = 1; j <= t_len; ++j) {
      if (logits[j - 1] < best - 1e-12) continue;
      (j <= t_len - p.tau ? argmax_prefix : argmax_suffix).push_back(j);
    }
    const AttentionSets sets = attention_sets(p, 16, x, true);
    CHECK(sets.prefix_positions == argmax_prefix);
    CHECK(sets.suffix_positions == argmax_suffix);
  }
}

TEST_CASE("attention_sets rejects strings below the hardmax threshold") {
  const LTParams p = random_grid_model(7, 3, 1, 0, 2, false);
  REQUIRE(hardmax_threshold(p, 16) > 4);
  const TokenSeq x = {1, 2, 3, 1};
  CHECK_THROWS_AS(attention_sets(p, 16, x), PreconditionError);
  CHECK_NOTHROW(attention_sets(p, 16, x, /*force=*/true));
}

TEST_CASE("ratio_rounding worked examples") {
  VectorXd p(2);
  p << 0.5, 0.5;
  CHECK(ratio_rounding(p, 3) == std::vector<long long>{2, 1});

  VectorXd onehot = VectorXd::Zero(5);
  onehot(3) = 1.0;
  const auto m = ratio_rounding(onehot, 17);
  CHECK(m == std::vector<long long>{0, 0, 0, 17, 0});
}

TEST_CASE("ratio_rounding guarantees hold exactly on random instances") {
  Rng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_int(50));
    const long long big_n = 1 + static_cast<long long>(rng.uniform_int(10000));
    const VectorXd p = rng.dirichlet(VectorXd::Constant(n, 0.7));
    const auto m = ratio_rounding(p, big_n);
    long long total = 0;
    for (int i = 0; i < n; ++i) {
      total += m[i];
      CHECK(m[i] >= 0);
      CHECK(std::abs(static_cast<double>(m[i]) / big_n - p(i)) <=
            1.0 / big_n);
    }
    CHECK(total == big_n);
  }
}

TEST_CASE("ratio_rounding rejects invalid distributions") {
  VectorXd p(2);
  p << 1.2, -0.2;
  CHECK_THROWS_AS(ratio_rounding(p, 5), PreconditionError);
}

TEST_CASE("build_joint_sim structural invariants on random pairs") {
  Rng rng(77);
  for (int rep = 0; rep < 6; ++rep) {
    const int delta = 1 + rep % 2;
    const LTParams f = random_grid_model(100 + rep, 4, delta, 1, 2, true);
    const LTParams g = random_grid_model(200 + rep, 4, delta, 1, 2, true);
    const TokenSeq x = random_tokens(rng, 3000, 3);  // spare token 4 = filler
    const double eps = 0.1;
    const SimReport rep_out = build_joint_sim(f, g, 16, x, eps, 4);
    const TokenSeq& z = rep_out.z;
    REQUIRE(rep_out.len_z == static_cast<int>(z.size()));
    CHECK(static_cast<int>(z.size()) <=
          20.0 / (eps * eps) + f.tau + f.delta);
    CHECK(static_cast<int>(z.size()) % delta ==
          static_cast<int>(x.size()) % delta);
    // identical tau-suffix
    for (int t = 0; t <= f.tau; ++t)
      CHECK(z[z.size() - 1 - t] == x[x.size() - 1 - t]);
  }
}

TEST_CASE("build_joint_sim with f = g reports symmetric errors") {
  Rng rng(78);
  const LTParams f = random_grid_model(303, 4, 1, 1, 2, true);
  const TokenSeq x = random_tokens(rng, 2500, 3);
  const SimReport rep = build_joint_sim(f, f, 16, x, 0.05, 4);
  REQUIRE(rep.err_g.has_value());
  CHECK(rep.err_f == doctest::Approx(*rep.err_g).epsilon(1e-12));
}

TEST_CASE("build_joint_sim copies small patterns exactly") {
  // Engineer a dominant token so |P_f| is tiny: with few attended tokens
  // (<= 1/eps) the construction recreates both patterns directly and the
  // final outputs agree to rounding error.
  LTParams f = random_grid_model(404, 4, 1, 1, 2, false);
  LTParams g = random_grid_model(405, 4, 1, 1, 2, false);
  for (LTParams* m : {&f, &g}) {
    m->embed.setIdentity();
    m->pos.setZero();
    MatrixXd kq = MatrixXd::Zero(m->d, m->d);
    kq.row(0).setConstant(6.0);  // token 1 dominates for every query
    m->layers[0].heads[0].kq = kq;
    m->layers[0].heads[0].phi.setConstant(-2.0);
  }
  Rng rng(9);
  TokenSeq x = random_tokens(rng, 2000, 3);
  x[100] = 1;  // guarantee at least one attended token
  const SimReport rep = build_joint_sim(f, g, 16, x, 0.1, 4);
  const PrecisionMode mode = PrecisionMode::finite(16);
  CHECK(measure_discrepancy(f, mode, x, rep.z) <= 1e-9);
  CHECK(measure_discrepancy(g, mode, x, rep.z) <= 1e-9);
}

TEST_CASE("build_joint_sim rejects a filler that attains maximal logits") {
  // With phi <= 0 the maximal logit is realized in the bulk by the dominant
  // token, so that token is inadmissible as filler while others are fine.
  LTParams f = random_grid_model(506, 4, 1, 1, 2, false);
  f.embed.setIdentity();
  f.pos.setZero();
  f.layers[0].heads[0].kq.setZero();
  f.layers[0].heads[0].kq.row(0).setConstant(6.0);  // token 1 dominates
  f.layers[0].heads[0].phi.setConstant(-2.0);
  Rng rng(10);
  TokenSeq x = random_tokens(rng, 2000, 3);
  x[50] = 1;
  CHECK_THROWS_WITH_AS(build_joint_sim(f, f, 16, x, 0.1, 1),
                       doctest::Contains("token 1"), PreconditionError);
  CHECK_NOTHROW(build_joint_sim(f, f, 16, x, 0.1, 4));
}

TEST_CASE("suffix_sim worked examples and brute-force minimality") {
  const TokenSeq x = {5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  SUBCASE("|x|=10, N=4, Delta=3 keeps the last four tokens") {
    const TokenSeq z = suffix_sim(x, 4, 3);
    CHECK(z == TokenSeq{11, 12, 13, 14});
  }
  SUBCASE("Delta=1 always returns exactly N tokens") {
    for (int n = 1; n <= 10; ++n)
      CHECK(static_cast<int>(suffix_sim(x, n, 1).size()) == n);
  }
  SUBCASE("random instances: minimal N' with matching residue") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
      const int t_len = 8 + static_cast<int>(rng.uniform_int(60));
      const int delta = 1 + static_cast<int>(rng.uniform_int(5));
      const int n = 1 + static_cast<int>(rng.uniform_int(t_len - delta));
      const TokenSeq xx = random_tokens(rng, t_len, 3);
      const TokenSeq z = suffix_sim(xx, n, delta);
      const int len = static_cast<int>(z.size());
      CHECK(len >= n);
      CHECK(len < n + delta);
      CHECK(len % delta == t_len % delta);
      // minimality: no shorter candidate shares the residue
      for (int cand = n; cand < len; ++cand)
        CHECK(cand % delta != t_len % delta);
      for (int t = 0; t < len; ++t)
        CHECK(z[t] == xx[t_len - len + t]);
    }
  }
  SUBCASE("a target size beyond the string is an error") {
    const TokenSeq tiny = {1, 2};
    CHECK_THROWS_AS(suffix_sim(tiny, 3, 5), PreconditionError);
  }
}

TEST_CASE("suffix_sim preserves the hardmax attention sets") {
  Rng rng(32);
  for (int rep = 0; rep < 5; ++rep) {
    const LTParams f = random_grid_model(600 + rep, 3, 2, 1, 2, false);
    const int threshold =
        static_cast<int>(hardmax_threshold(f, 16));
    const int t_len = std::max(4 * threshold, 400);
    const TokenSeq x = random_tokens(rng, t_len, 3);
    const TokenSeq z = suffix_sim(x, std::max(threshold, t_len / 2), f.delta);
    const AttentionSets sx = attention_sets(f, 16, x, true);
    const AttentionSets sz = attention_sets(f, 16, z, true);
    const std::set<std::pair<int, int>> ax(sx.prefix_pairs.begin(),
                                           sx.prefix_pairs.end());
    const std::set<std::pair<int, int>> az(sz.prefix_pairs.begin(),
                                           sz.prefix_pairs.end());
    CHECK(ax == az);
    // tau-suffix pairs coincide up to the position shift
    REQUIRE(sx.suffix_pairs.size() == sz.suffix_pairs.size());
    for (std::size_t i = 0; i < sx.suffix_pairs.size(); ++i)
      CHECK(sx.suffix_pairs[i].first == sz.suffix_pairs[i].first);
  }
}

TEST_CASE("bulk_check worked examples") {
  const TokenSeq x = {1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
  VectorXd p(2);
  p << 0.5, 0.5;
  CHECK(bulk_check(x, p, 1, 0, 0.1));
  p << 0.9, 0.1;
  CHECK_FALSE(bulk_check(x, p, 1, 0, 0.1));
}

TEST_CASE("bulk_check Monte Carlo rate at the concentration length") {
  const int s = 3, delta = 2;
  const double d_tol = 0.05, rho = 0.05;
  const int t_len = static_cast<int>(
      std::ceil(delta / (d_tol * d_tol) * std::log(2.0 * s * delta / rho)));
  Rng rng(99);
  const VectorXd p = VectorXd::Constant(s, 1.0 / s);
  int out = 0;
  const int trials = 2000;
  for (int rep = 0; rep < trials; ++rep) {
    TokenSeq x(t_len);
    for (int i = 0; i < t_len; ++i)
      x[i] = static_cast<int>(rng.uniform_int(s)) + 1;
    if (!bulk_check(x, p, delta, 0, d_tol)) ++out;
  }
  CHECK(static_cast<double>(out) / trials <= rho);
}

TEST_CASE("dirichlet_seq symmetry and concentration") {
  Rng rng(123);
  const int s = 4;
  const VectorXd alpha = VectorXd::Constant(s, 1.0);
  SUBCASE("marginal mean of p is 1/S within 3 standard errors") {
    VectorXd mean = VectorXd::Zero(s);
    const int draws = 4000;
    for (int rep = 0; rep < draws; ++rep)
      mean += dirichlet_seq(alpha, 1, rng).second;
    mean /= draws;
    // Var(p_s) = (1/S)(1 - 1/S)/(S+1)
    const double se =
        std::sqrt((1.0 / s) * (1.0 - 1.0 / s) / (s + 1) / draws);
    for (int i = 0; i < s; ++i)
      CHECK(std::abs(mean(i) - 1.0 / s) <= 3.0 * se);
  }
  SUBCASE("extreme alpha concentrates p on one symbol") {
    VectorXd a2 = VectorXd::Constant(s, 1.0);
    a2(2) = 1e6;
    const auto [x, p] = dirichlet_seq(a2, 100, rng);
    CHECK(p(2) > 0.99);
  }
  SUBCASE("empirical token frequencies stay in Hoeffding bands") {
    const int t_len = 10000;
    const auto [x, p] = dirichlet_seq(alpha, t_len, rng);
    VectorXd freq = VectorXd::Zero(s);
    for (int tok : x) freq(tok - 1) += 1.0;
    freq /= t_len;
    const double band = std::sqrt(std::log(2.0 * s / 0.001) / (2.0 * t_len));
    for (int i = 0; i < s; ++i)
      CHECK(std::abs(freq(i) - p(i)) <= band);
  }
}

TEST_CASE("markov_subsample edge cases and moments") {
  Rng rng(55);
  const TokenSeq x = random_tokens(rng, 2000, 3);
  const int tau = 2;
  SUBCASE("n = |x| keeps every index") {
    const auto idx = markov_subsample(x, 2000, tau, rng);
    REQUIRE(idx.size() == 2000);
    for (int i = 0; i < 2000; ++i) CHECK(idx[i] == i + 1);
  }
  SUBCASE("the tau+1 tail indices are always kept") {
    for (int rep = 0; rep < 50; ++rep) {
      const auto idx = markov_subsample(x, 100, tau, rng);
      for (int t = 2000 - tau; t <= 2000; ++t)
        CHECK(std::binary_search(idx.begin(), idx.end(), t));
      CHECK(std::is_sorted(idx.begin(), idx.end()));
    }
  }
  SUBCASE("expected size matches n + (tau+1)(1-p) within 3 SE") {
    const int n = 200;
    const double p = static_cast<double>(n) / 2000;
    double sum = 0.0, sumsq = 0.0;
    const int draws = 3000;
    for (int rep = 0; rep < draws; ++rep) {
      const double sz =
          static_cast<double>(markov_subsample(x, n, tau, rng).size());
      sum += sz;
      sumsq += sz * sz;
    }
    const double mean = sum / draws;
    const double var = sumsq / draws - mean * mean;
    const double target = n + (tau + 1) * (1.0 - p);
    CHECK(std::abs(mean - target) <= 3.0 * std::sqrt(var / draws));
  }
  SUBCASE("size deviations obey the Chebyshev slack") {
    // variance bound 2n/q = 2n^{4/3}, so the 15%-probability Chebyshev
    // radius is sqrt(2/0.15) n^{2/3} < 4 n^{2/3}
    const int n = 200;
    const double slack = tau + 1 + 4.0 * std::pow(n, 2.0 / 3.0);
    int bad = 0;
    const int draws = 2000;
    for (int rep = 0; rep < draws; ++rep)
      if (std::abs(static_cast<double>(
              markov_subsample(x, n, tau, rng).size()) -
                   n) > slack)
        ++bad;
    CHECK(static_cast<double>(bad) / draws <= 0.15);
  }
  SUBCASE("out-of-range n is a precondition error") {
    CHECK_THROWS_AS(markov_subsample(x, 2, tau, rng), PreconditionError);
    CHECK_THROWS_AS(markov_subsample(x, 2001, tau, rng), PreconditionError);
  }
}

TEST_CASE("best_markov_sim on a constant model has zero error") {
  LTParams f = histogram_model(3);
  f.unembed.setZero();
  Rng rng(66);
  const TokenSeq x = random_tokens(rng, 3000, 3);
  const SimReport rep = best_markov_sim(f, x, 100, f.tau, 4, rng);
  CHECK(rep.err_f == 0.0);
}

TEST_CASE("best_markov_sim error tracks the histogram-difference oracle") {
  const LTParams f = histogram_model(3);
  Rng rng(67);
  const TokenSeq x = random_tokens(rng, 20000, 3);
  const int n = 1000;
  const SimReport rep = best_markov_sim(f, x, n, f.tau, 8, rng);
  // the model reads a prefix-averaged histogram; subsampled frequency error
  // concentrates at the n^{-1/3} scale, so allow a generous constant
  CHECK(rep.err_f <= 10.0 * (f.tau + 1) / std::pow(n, 1.0 / 3.0));
  // oracle: the reported z is a subsequence achieving exactly this error
  const double direct =
      measure_discrepancy(f, PrecisionMode::infinite(), x, rep.z);
  CHECK(rep.err_f == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("best_markov_sim error is nonincreasing in k_tries in median") {
  const LTParams f = histogram_model(3);
  std::vector<double> err1, err32;
  for (int sd = 0; sd < 20; ++sd) {
    Rng gen(1000 + sd);
    const TokenSeq x = random_tokens(gen, 5000, 3);
    Rng r1(2000 + sd), r32(2000 + sd);
    err1.push_back(best_markov_sim(f, x, 150, f.tau, 1, r1).err_f);
    err32.push_back(best_markov_sim(f, x, 150, f.tau, 32, r32).err_f);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(err32) <= median(err1));
}

TEST_CASE("measure_discrepancy basics") {
  const LTParams f = random_grid_model(700, 3, 2, 1, 2, false);
  Rng rng(71);
  const TokenSeq x = random_tokens(rng, 300, 3);
  const TokenSeq z = random_tokens(rng, 200, 3);
  const PrecisionMode mode = PrecisionMode::infinite();
  SUBCASE("identical strings give zero") {
    CHECK(measure_discrepancy(f, mode, x, x) == 0.0);
  }
  SUBCASE("zero readout gives zero for any pair") {
    LTParams g = f;
    g.unembed.setZero();
    CHECK(measure_discrepancy(g, mode, x, z) == 0.0);
  }
  SUBCASE("random pair matches an independent recomputation") {
    const double d = measure_discrepancy(f, mode, x, z);
    const double ref =
        (forward_last(f, mode, x) - forward_last(f, mode, z)).norm();
    CHECK(d == doctest::Approx(ref).epsilon(1e-15));
  }
}
