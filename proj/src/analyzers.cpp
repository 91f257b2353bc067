#include "lglab/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lglab/rng.hpp"

namespace lglab {

namespace {

constexpr double kTieTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_one_layer(const LTParams& params, const char* op) {
  if (params.num_layers() != 1)
    throw ShapeError(std::string(op) + ": requires exactly 1 layer, model has " +
                     std::to_string(params.num_layers()));
}

// Minimum positive pairwise gap among the given values; +inf when all
// values coincide under the tie tolerance.
double min_positive_gap(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double best = kInf;
  for (std::size_t a = 1; a < values.size(); ++a) {
    const double gap = values[a] - values[a - 1];
    if (gap > kTieTol) best = std::min(best, gap);
  }
  return best;
}

}  // namespace

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  const MatrixXd gram = m.transpose() * m;
  const Eigen::Index n = gram.rows();
  Rng rng(0x5eedULL);  // fixed start vector for determinism
  VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = rng.gaussian();
  double vnorm = v.norm();
  if (vnorm == 0.0) v(0) = 1.0, vnorm = 1.0;
  v /= vnorm;
  double est = 0.0;
  for (int it = 0; it < 10000; ++it) {
    VectorXd w = gram * v;
    const double wnorm = w.norm();
    if (wnorm == 0.0) return 0.0;
    const double next = v.dot(w);  // Rayleigh quotient for sigma^2
    v = w / wnorm;
    if (it > 0 && std::abs(next - est) <= 1e-9 * std::max(std::abs(next), 1.0))
      return std::sqrt(std::max(next, 0.0));
    est = next;
  }
  throw NumericFault("spectral norm power iteration did not converge");
}

MatrixXd attention_matrix(const LTParams& params) {
  require_one_layer(params, "attention_matrix");
  if (params.layers[0].heads.size() != 1)
    throw ShapeError("attention_matrix: requires exactly 1 head");
  const int s = params.s_vocab, delta = params.delta;
  const MatrixXd& kq = params.layers[0].heads[0].kq;
  std::vector<VectorXd> cls(s * delta);
  for (int t = 1; t <= s; ++t)
    for (int r = 0; r < delta; ++r)
      cls[(t - 1) * delta + r] =
          params.embed.row(t - 1).transpose() + params.pos.row(r).transpose();
  MatrixXd a(s * delta, s * delta);
  for (int q = 0; q < s * delta; ++q)     // query class (y, i)
    for (int k = 0; k < s * delta; ++k)   // key class (z, j)
      a(q, k) = cls[k].dot(kq * cls[q]);
  return a;
}

double logit_margin(const LTParams& params) {
  require_one_layer(params, "logit_margin");
  const int s = params.s_vocab, delta = params.delta, tau = params.tau;
  std::vector<VectorXd> cls(s * delta);
  for (int t = 1; t <= s; ++t)
    for (int r = 0; r < delta; ++r)
      cls[(t - 1) * delta + r] =
          params.embed.row(t - 1).transpose() + params.pos.row(r).transpose();
  double best = kInf;
  for (const HeadParams& head : params.layers[0].heads) {
    for (int y = 1; y <= s; ++y) {
      for (int r = 0; r < delta; ++r) {
        const VectorXd query = head.kq * cls[(y - 1) * delta + r];
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(s) * (tau + 1 + delta));
        for (int z = 1; z <= s; ++z) {
          for (int k = 0; k <= tau; ++k) {
            // key residue of position i - k when the query residue is r
            const int kr = ((r - k) % delta + delta) % delta;
            values.push_back(cls[(z - 1) * delta + kr].dot(query) +
                             head.phi(k));
          }
          // keys beyond the phi window (distance > tau) carry no offset;
          // long inputs realize every residue there
          for (int kr = 0; kr < delta; ++kr)
            values.push_back(cls[(z - 1) * delta + kr].dot(query));
        }
        best = std::min(best, min_positive_gap(std::move(values)));
      }
    }
  }
  return best;
}

std::int64_t hardmax_threshold(const LTParams& params, int p_bits) {
  const double gamma = logit_margin(params);
  if (std::isinf(gamma)) return 1;
  const double t = std::exp2(static_cast<double>(p_bits) / gamma);
  if (t > 9007199254740992.0)  // 2^53
    throw NumericFault(
        "hardmax threshold exceeds 2^53; use a model with a larger margin");
  return static_cast<std::int64_t>(std::ceil(t));
}

void require_fclass(const LTParams& params) {
  if (params.num_layers() != 2)
    throw ShapeError("model outside F_tau: expected 2 layers, got " +
                     std::to_string(params.num_layers()));
  if (params.layers[1].heads.size() != 1)
    throw ShapeError("model outside F_tau: second layer must have exactly "
                     "1 head");
  if (!params.pos.isZero(0.0))
    throw ShapeError("model outside F_tau: positional table must be zero");
  for (const HeadParams& head : params.layers[0].heads)
    if ((head.phi.array() < 0.0).any())
      throw ShapeError(
          "model outside F_tau: first-layer phi must be nonnegative");
  for (const HeadParams& head : params.layers[1].heads)
    if (!head.phi.isZero(0.0))
      throw ShapeError("model outside F_tau: second-layer phi must be zero");
}

double positional_margin(const LTParams& params) {
  require_fclass(params);
  double best = kInf;
  for (const HeadParams& head : params.layers[0].heads) {
    std::vector<double> values(head.phi.data(),
                               head.phi.data() + head.phi.size());
    values.push_back(1.0);
    std::sort(values.begin(), values.end());
    // gap between the max and the largest strictly smaller element
    double margin = kInf;
    for (auto it = values.rbegin() + 1; it != values.rend(); ++it) {
      const double gap = values.back() - *it;
      if (gap > kTieTol) { margin = gap; break; }
    }
    best = std::min(best, margin);
  }
  return best;
}

LipschitzConstants lipschitz_constants(const LTParams& params) {
  require_fclass(params);
  const LayerParams& l1 = params.layers[0];
  double sum_v = 0.0, sum_ve = 0.0, sum_e = 0.0;
  for (const HeadParams& head : l1.heads) {
    const double nv = spectral_norm(head.v);
    const double ekq = std::exp(4.0 * spectral_norm(head.kq));
    sum_v += nv;
    sum_ve += nv * ekq;
    sum_e += ekq;
  }
  const double mlp1 = 1.0 + spectral_norm(l1.mlp.b) * spectral_norm(l1.mlp.a);
  const double s = params.s_vocab;
  const double tau2 = static_cast<double>(params.tau) * params.tau + 1.0;
  LipschitzConstants c;
  c.g_f = (1.0 + sum_v) * mlp1;
  c.lip_f = 2.0 * s * sum_ve * mlp1;
  c.h_f = mlp1 * tau2 * sum_e;
  return c;
}

double complexity(const LTParams& params) {
  require_fclass(params);
  const LayerParams& l1 = params.layers[0];
  const HeadParams& h2 = params.layers[1].heads[0];
  double sum_v = 0.0, sum_ve = 0.0;
  for (const HeadParams& head : l1.heads) {
    const double nv = spectral_norm(head.v);
    sum_v += nv;
    sum_ve += nv * std::exp(4.0 * spectral_norm(head.kq));
  }
  const double mlp1 = 1.0 + spectral_norm(l1.mlp.b) * spectral_norm(l1.mlp.a);
  const double mlp2 = 1.0 + spectral_norm(params.layers[1].mlp.b) *
                                spectral_norm(params.layers[1].mlp.a);
  const double expo = (1.0 + sum_v) * (1.0 + sum_v) * mlp1 * mlp1 *
                      spectral_norm(h2.kq);
  const double tau2 = static_cast<double>(params.tau) * params.tau + 1.0;
  const double c = std::exp(expo) * (1.0 + spectral_norm(h2.v)) * sum_ve *
                   mlp2 * spectral_norm(params.unembed) * tau2 *
                   params.s_vocab;
  return std::isfinite(c) ? c : kInf;
}

MlpBounds mlp_bounds(const LTParams& params) {
  require_one_layer(params, "mlp_bounds");
  const LayerParams& layer = params.layers[0];
  MlpBounds b;
  b.l_mlp = spectral_norm(params.unembed) *
            (1.0 + spectral_norm(layer.mlp.a) * spectral_norm(layer.mlp.b));
  for (int t = 1; t <= params.s_vocab; ++t) {
    for (int r = 0; r < params.delta; ++r) {
      const VectorXd y = params.embed.row(t - 1).transpose() +
                         params.pos.row(r).transpose();
      b.m_e = std::max(b.m_e, y.norm());
      double v_norm = 0.0;
      for (const HeadParams& head : layer.heads) v_norm += (head.v * y).norm();
      b.m_v = std::max(b.m_v, v_norm);
    }
  }
  b.m_f = b.l_mlp * (b.m_e + b.m_v + layer.mlp.bias.norm());
  return b;
}

MarginReport margin_report(const LTParams& params, int p_bits) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MarginReport r;
  r.logit_margin = nan;
  r.positional_margin = nan;
  r.complexity = nan;
  r.l_mlp = r.m_v = r.m_e = r.m_f = nan;
  r.g_f = r.lip_f = r.h_f = nan;
  if (params.num_layers() == 1) {
    r.logit_margin = logit_margin(params);
    try {
      r.hardmax_threshold = hardmax_threshold(params, p_bits);
    } catch (const NumericFault& e) {
      r.hardmax_threshold = std::numeric_limits<std::int64_t>::max();
      r.warnings.push_back(e.what());
    }
    const MlpBounds b = mlp_bounds(params);
    r.l_mlp = b.l_mlp;
    r.m_v = b.m_v;
    r.m_e = b.m_e;
    r.m_f = b.m_f;
  }
  try {
    require_fclass(params);
    r.positional_margin = positional_margin(params);
    r.complexity = complexity(params);
    const LipschitzConstants c = lipschitz_constants(params);
    r.g_f = c.g_f;
    r.lip_f = c.lip_f;
    r.h_f = c.h_f;
    if (std::isinf(r.positional_margin))
      r.warnings.push_back("positional margin undefined (singleton phi set); "
                           "reported as +inf");
  } catch (const ShapeError&) {
    // not in F_tau; the F_tau-only fields stay NaN
  }
  for (int t = 0; t < params.s_vocab; ++t)
    if (params.embed.row(t).norm() > 1.0 + kTieTol) {
      r.warnings.push_back("embedding norms exceed 1; Def.-5.1 quantities "
                           "assume unit-bounded embeddings");
      break;
    }
  return r;
}

}  // namespace lglab
