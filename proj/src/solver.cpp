#include "mmb/solver.hpp"

#include "exact_sum.hpp"
#include "mmb/error.hpp"
#include "parallel.hpp"

#include <cmath>

namespace mmb {

namespace {

// Sum over columns of weights[t] * x.col(t), correctly rounded per row so the
// result is independent of column order.
Vec weighted_column_sum(const Mat& x, const std::vector<double>* weights) {
  Vec out(x.rows());
  detail::ExactSum acc;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    acc.clear();
    for (Eigen::Index t = 0; t < x.cols(); ++t)
      acc.add(weights ? (*weights)[static_cast<std::size_t>(t)] * x(r, t) : x(r, t));
    out[r] = acc.value();
  }
  return out;
}

}  // namespace

double psi_word(double p_w, const TemperatureConfig& cfg) {
  const double beta = cfg.beta();
  return cfg.alpha_w * beta / (p_w + beta);
}

FactorPsi psi_factor(const FactorParams& fp, double alpha_f) {
  FactorPsi out;
  out.psi1 = alpha_f * (-2.0 * fp.b_sigma.array()).exp().matrix();
  out.psi2 = (out.psi1.array() - alpha_f).matrix();
  return out;
}

ShiftedFeatures shift_features(const Mat& x, const FactorParams& fp) {
  require(x.rows() == fp.feature_dim(), ErrorKind::dimension,
          std::string("factor ") + to_string(fp.id) + ": feature dimension mismatch");
  ShiftedFeatures out;
  out.x1 = x.colwise() - fp.b_mu;
  out.x2 = out.x1.cwiseProduct(out.x1);
  return out;
}

PsiWeights psi_weights(const SegmentFeatures& seg, const ModelParams& params,
                       const WordTable& table, const TemperatureConfig& cfg) {
  PsiWeights out;
  out.psi_w.reserve(seg.tokens.size());
  for (TokenId w : seg.tokens) out.psi_w.push_back(psi_word(table.unigram(w), cfg));
  for (Factor f : factors_for(cfg.mode)) out.factors.emplace(f, psi_factor(params.at(f), cfg.temperature(f)));
  return out;
}

Vec taylor_linear_coefficient(const SegmentFeatures& seg, const ModelParams& params,
                              const WordTable& table, const TemperatureConfig& cfg) {
  const int dm = params.embedding_dim;
  Vec g = Vec::Zero(dm);

  if (cfg.alpha_w != 0.0 && !seg.tokens.empty()) {
    require(seg.words.rows() == dm, ErrorKind::dimension,
            "word vectors have dimension " + std::to_string(seg.words.rows()) +
                ", embedding has " + std::to_string(dm));
    std::vector<double> psi;
    psi.reserve(seg.tokens.size());
    for (TokenId w : seg.tokens) psi.push_back(psi_word(table.unigram(w), cfg));
    g += weighted_column_sum(seg.words, &psi);
  }

  for (Factor f : factors_for(cfg.mode)) {
    const FactorParams& fp = params.at(f);
    const double temp = cfg.temperature(f);
    const Mat& x = seg.factor(f);
    if (temp == 0.0 || x.cols() == 0) continue;
    require(fp.embedding_dim() == dm, ErrorKind::dimension,
            std::string("factor ") + to_string(f) + ": embedding dimension mismatch");
    const ShiftedFeatures shifted = shift_features(x, fp);
    const FactorPsi psi = psi_factor(fp, temp);
    const Vec s1 = weighted_column_sum(shifted.x1, nullptr);
    const Vec s2 = weighted_column_sum(shifted.x2, nullptr);
    g += fp.w_mu.transpose() * psi.psi1.cwiseProduct(s1);
    g += fp.w_sigma.transpose() * psi.psi2.cwiseProduct(s2);
  }
  return g;
}

UtteranceEmbedding normalize_coefficient(const Vec& g) {
  UtteranceEmbedding out;
  const double norm = g.norm();
  if (norm == 0.0) {
    out.m = Vec::Zero(g.size());
    out.degenerate = true;
    return out;
  }
  require(std::isfinite(norm), ErrorKind::numeric, "closed-form coefficient is not finite");
  out.m = g / norm;
  return out;
}

UtteranceEmbedding closed_form_embedding(const SegmentFeatures& seg, const ModelParams& params,
                                         const WordTable& table, const TemperatureConfig& cfg) {
  return normalize_coefficient(taylor_linear_coefficient(seg, params, table, cfg));
}

std::vector<UtteranceEmbedding> embed_all(std::span<const SegmentFeatures> segments,
                                          const ModelParams& params, const WordTable& table,
                                          const TemperatureConfig& cfg) {
  std::vector<UtteranceEmbedding> out(segments.size());
  detail::parallel_for(segments.size(), [&](std::size_t i) {
    out[i] = closed_form_embedding(segments[i], params, table, cfg);
  });
  return out;
}

}  // namespace mmb
