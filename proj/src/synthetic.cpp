#include "mmb/synthetic.hpp"

#include "mmb/error.hpp"

#include <cmath>
#include <random>

namespace mmb {

namespace {

Vec unit_gaussian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

FactorParams generating_factor(Factor f, int df, int dm, const SyntheticSpec& spec,
                               std::mt19937_64& rng) {
  FactorParams fp(f, df, dm);
  for (int c = 0; c < dm; ++c) fp.w_mu.col(c) = spec.mean_scale * unit_gaussian(df, rng);
  if (spec.orthogonal_means) {
    require(df >= dm, ErrorKind::config, "orthogonal means need feature dims >= embedding dim");
    const Mat q = Eigen::HouseholderQR<Mat>(fp.w_mu).householderQ() * Mat::Identity(df, dm);
    fp.w_mu = spec.mean_scale * q;
  }
  std::normal_distribution<double> normal;
  for (int i = 0; i < df; ++i) fp.b_mu[i] = normal(rng);
  std::uniform_real_distribution<double> uniform(-spec.sigma_weight_scale, spec.sigma_weight_scale);
  if (spec.sigma_weight_scale > 0.0)
    for (Eigen::Index i = 0; i < fp.w_sigma.size(); ++i) fp.w_sigma.data()[i] = uniform(rng);
  fp.b_sigma.setConstant(std::log(spec.sigma));
  return fp;
}

Mat sample_frames(const FactorParams& fp, const Vec& m, int length, std::mt19937_64& rng) {
  const GaussianParams g = gaussian_factor_distribution(m, fp);
  std::normal_distribution<double> normal;
  Mat x(fp.feature_dim(), length);
  for (int t = 0; t < length; ++t)
    for (int i = 0; i < x.rows(); ++i) x(i, t) = g.mu[i] + g.sigma[i] * normal(rng);
  return x;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  require(spec.segments >= 0 && spec.length >= 1 && spec.embedding_dim >= 1 &&
              spec.visual_dim >= 1 && spec.acoustic_dim >= 1 && spec.vocabulary >= 1,
          ErrorKind::config, "synthetic sizes must be positive");
  require(spec.sigma > 0.0 && spec.smoothing >= 0.0 && spec.smoothing <= 1.0, ErrorKind::config,
          "synthetic sigma must be positive and smoothing in [0, 1]");
  std::mt19937_64 rng(spec.seed);
  const int dm = spec.embedding_dim;

  SyntheticData data;
  data.table = WordTable(dm);
  std::vector<double> zipf(static_cast<std::size_t>(spec.vocabulary));
  double total = 0.0;
  for (int k = 0; k < spec.vocabulary; ++k) {
    data.table.add("w" + std::to_string(k), spec.word_scale * unit_gaussian(dm, rng));
    zipf[static_cast<std::size_t>(k)] = 1.0 / (k + 1.0);
    total += zipf[static_cast<std::size_t>(k)];
  }
  for (double& p : zipf) p /= total;
  data.table.set_unigram(zipf);

  data.truth.embedding_dim = dm;
  data.truth.factors.emplace(Factor::v, generating_factor(Factor::v, spec.visual_dim, dm, spec, rng));
  data.truth.factors.emplace(Factor::a, generating_factor(Factor::a, spec.acoustic_dim, dm, spec, rng));
  data.label_direction = unit_gaussian(dm, rng);

  Mat vocab(dm, spec.vocabulary);
  for (int k = 0; k < spec.vocabulary; ++k) vocab.col(k) = data.table.vector(static_cast<TokenId>(k));
  std::discrete_distribution<int> unigram_draw(zipf.begin(), zipf.end());
  std::bernoulli_distribution smooth(spec.smoothing);

  for (int s = 0; s < spec.segments; ++s) {
    const Vec m = unit_gaussian(dm, rng);
    const Vec logits = vocab.transpose() * m;
    const Vec weights = (logits.array() - logits.maxCoeff()).exp().matrix();
    std::discrete_distribution<int> topic_draw(weights.data(), weights.data() + weights.size());

    MultimodalSegment seg;
    seg.id = "syn" + std::to_string(s);
    seg.words.resize(dm, spec.length);
    for (int t = 0; t < spec.length; ++t) {
      const int k = smooth(rng) ? unigram_draw(rng) : topic_draw(rng);
      seg.tokens.push_back(static_cast<TokenId>(k));
      seg.words.col(t) = vocab.col(k);
    }
    seg.visual = sample_frames(data.truth.at(Factor::v), m, spec.length, rng);
    seg.acoustic = sample_frames(data.truth.at(Factor::a), m, spec.length, rng);
    seg.label = data.label_direction.dot(m) >= 0.0 ? 1.0 : -1.0;
    data.segments.push_back(std::move(seg));
    data.truth_embeddings.push_back(m);
  }
  return data;
}

std::vector<SegmentRecord> to_records(const SyntheticData& data) {
  std::vector<SegmentRecord> out;
  out.reserve(data.segments.size());
  for (const auto& seg : data.segments) {
    SegmentRecord r;
    r.id = seg.id;
    for (std::size_t t = 0; t < seg.tokens.size(); ++t) {
      r.tokens.push_back(data.table.token(seg.tokens[t]));
      r.intervals.emplace_back(static_cast<double>(t), static_cast<double>(t + 1));
    }
    r.visual_aligned = seg.visual;
    r.acoustic_aligned = seg.acoustic;
    r.label = seg.label;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mmb
