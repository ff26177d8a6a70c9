#pragma once

// Closed-form embedding step.
//
// Linearizing every factor's log-likelihood around m = 0 gives
// L(m) ~ c + <g, m>, and the maximizer over the unit sphere is g / |g|.
// g is a weighted sum of word vectors and shifted, W-transformed continuous
// features:
//
//   g = sum_w psi_w v_w
//     + sum_f sum_{x in f} W_mu(f)^T (psi1(f) .* (x - b_mu))
//                        + W_sigma(f)^T (psi2(f) .* (x - b_mu)^2)
//
// with psi_w = alpha_w beta / (p(w) + beta), psi1 = alpha_f exp(-2 b_sigma)
// and psi2 = psi1 - alpha_f.

#include "mmb/model.hpp"

namespace mmb {

struct FactorPsi {
  Vec psi1;
  Vec psi2;
};

struct PsiWeights {
  std::vector<double> psi_w;  // one per token position of the segment
  std::map<Factor, FactorPsi> factors;
};

struct ShiftedFeatures {
  Mat x1;  // x - b_mu
  Mat x2;  // (x - b_mu) .* (x - b_mu)
};

double psi_word(double p_w, const TemperatureConfig& cfg);
FactorPsi psi_factor(const FactorParams& fp, double alpha_f);
ShiftedFeatures shift_features(const Mat& x, const FactorParams& fp);

PsiWeights psi_weights(const SegmentFeatures& seg, const ModelParams& params,
                       const WordTable& table, const TemperatureConfig& cfg);

// Un-normalized linear coefficient g of the linearized objective.
Vec taylor_linear_coefficient(const SegmentFeatures& seg, const ModelParams& params,
                              const WordTable& table, const TemperatureConfig& cfg);

// g / |g|, or the zero vector flagged degenerate when g == 0.
UtteranceEmbedding closed_form_embedding(const SegmentFeatures& seg, const ModelParams& params,
                                         const WordTable& table, const TemperatureConfig& cfg);

UtteranceEmbedding normalize_coefficient(const Vec& g);

// Embeds every segment; work is split across threads, output order follows input.
std::vector<UtteranceEmbedding> embed_all(std::span<const SegmentFeatures> segments,
                                          const ModelParams& params, const WordTable& table,
                                          const TemperatureConfig& cfg);

}  // namespace mmb
