#include "mmb/error.hpp"
#include "mmb/pipeline.hpp"
#include "mmb/solver.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mmb;
using testutil::to_vector;

namespace {

SegmentFeatures features(const MultimodalSegment& seg, Mode mode, bool pe = false) {
  return prepare_features(seg, PipelineOptions{mode, pe});
}

// g from the oracle formulas, with concatenations built by hand.
oracle::Vector oracle_coefficient(const MultimodalSegment& seg, const ModelParams& params,
                                  const WordTable& table, const TemperatureConfig& cfg) {
  const auto dm = static_cast<std::size_t>(params.embedding_dim);
  oracle::Vector g(dm, 0.0);
  for (std::size_t t = 0; t < seg.tokens.size(); ++t) {
    const double psi = oracle::psi_word(table.unigram(seg.tokens[t]), cfg.alpha, cfg.Z, cfg.alpha_w);
    for (std::size_t k = 0; k < dm; ++k) g[k] += psi * seg.words(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
  }
  for (Factor f : factors_for(cfg.mode)) {
    const auto c = constituents(f);
    std::vector<oracle::Vector> frames;
    for (int t = 0; t < seg.length(); ++t) {
      oracle::Vector step;
      if (c.words) for (Eigen::Index i = 0; i < seg.words.rows(); ++i) step.push_back(seg.words(i, t));
      if (c.visual) for (Eigen::Index i = 0; i < seg.visual.rows(); ++i) step.push_back(seg.visual(i, t));
      if (c.acoustic) for (Eigen::Index i = 0; i < seg.acoustic.rows(); ++i) step.push_back(seg.acoustic(i, t));
      frames.push_back(step);
    }
    const auto add = oracle::factor_coefficient(frames, testutil::to_gaussian(params.at(f)), cfg.temperature(f));
    for (std::size_t k = 0; k < dm; ++k) g[k] += add[k];
  }
  return g;
}

TemperatureConfig varied(Mode mode) {
  TemperatureConfig cfg;
  cfg.mode = mode;
  cfg.set_beta(0.05);
  cfg.alpha_w = 0.8;
  cfg.alpha_v = 1.2;
  cfg.alpha_a = 0.6;
  cfg.alpha_wv = 0.3;
  cfg.alpha_wa = 0.7;
  cfg.alpha_va = 1.1;
  cfg.alpha_wva = 0.4;
  return cfg;
}

}  // namespace

TEST_CASE("psi_word") {
  TemperatureConfig cfg;
  cfg.alpha_w = 0.7;
  CHECK(psi_word(0.0, cfg) == doctest::Approx(0.7).epsilon(1e-15));
  cfg.alpha_w = 0.0;
  CHECK(psi_word(0.3, cfg) == 0.0);
  cfg.alpha_w = 1.0;
  cfg.set_beta(1.0);
  CHECK(psi_word(1.0, cfg) == doctest::Approx(0.5).epsilon(1e-15));
  // bounded by alpha_w and decreasing in p
  cfg.set_beta(0.01);
  double prev = INFINITY;
  for (double p = 0.0; p <= 1.0; p += 0.1) {
    const double psi = psi_word(p, cfg);
    CHECK(psi >= 0.0);
    CHECK(psi <= cfg.alpha_w);
    CHECK(psi < prev);
    prev = psi;
  }
}

TEST_CASE("psi_factor") {
  FactorParams fp(Factor::v, 3, 2);
  auto psi = psi_factor(fp, 1.5);
  CHECK(psi.psi1.isApprox(Vec::Constant(3, 1.5)));
  CHECK(psi.psi2.isZero());
  psi = psi_factor(fp, 0.0);
  CHECK(psi.psi1.isZero());
  CHECK(psi.psi2.isZero());
  fp.b_sigma.setConstant(0.5);
  psi = psi_factor(fp, 2.0);
  CHECK(psi.psi1[0] == doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-14));
  CHECK(psi.psi1[0] == doctest::Approx(0.7358).epsilon(1e-4));
  CHECK(psi.psi2[0] == doctest::Approx(-1.2642).epsilon(1e-4));
  fp.b_sigma << -0.3, 0.0, 2.0;
  psi = psi_factor(fp, 0.4);
  CHECK((psi.psi1.array() > 0).all());
}

TEST_CASE("shift_features") {
  std::mt19937_64 rng(1);
  const FactorParams fp = testutil::random_factor(Factor::a, 3, 2, rng);
  const Mat x = testutil::random_mat(3, 5, rng);
  const auto s = shift_features(x, fp);
  CHECK((s.x2.array() >= 0).all());
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 3; ++i) {
      CHECK(s.x1(i, t) == x(i, t) - fp.b_mu[i]);
      CHECK(s.x2(i, t) == s.x1(i, t) * s.x1(i, t));
    }
  CHECK_THROWS_AS(shift_features(Mat::Zero(2, 5), fp), Error);
}

TEST_CASE("closed form: single word and word-only weighted average") {
  std::mt19937_64 rng(4);
  const WordTable table = testutil::random_table(20, 5, rng);
  const auto params = testutil::random_params(Mode::b1, 5, 3, 2, rng);
  TemperatureConfig cfg;
  cfg.alpha_v = cfg.alpha_a = 0.0;

  auto seg = testutil::random_segment(table, 1, 3, 2, rng);
  auto m = closed_form_embedding(features(seg, Mode::b1), params, table, cfg);
  CHECK_FALSE(m.degenerate);
  CHECK((m.m - seg.words.col(0).normalized()).norm() < 1e-14);

  seg = testutil::random_segment(table, 12, 3, 2, rng);
  m = closed_form_embedding(features(seg, Mode::b1), params, table, cfg);
  Vec avg = Vec::Zero(5);
  for (int t = 0; t < 12; ++t) avg += psi_word(table.unigram(seg.tokens[t]), cfg) * seg.words.col(t);
  CHECK((m.m - avg.normalized()).norm() < 1e-12);
}

TEST_CASE("closed form: taylor coefficient examples") {
  SUBCASE("empty segment") {
    ModelParams params;
    params.embedding_dim = 3;
    params.factors.emplace(Factor::v, FactorParams(Factor::v, 2, 3));
    params.factors.emplace(Factor::a, FactorParams(Factor::a, 2, 3));
    SegmentFeatures empty;
    empty.words = Mat(3, 0);
    empty.factor(Factor::v) = Mat(2, 0);
    empty.factor(Factor::a) = Mat(2, 0);
    WordTable table(3);
    const Vec g = taylor_linear_coefficient(empty, params, table, TemperatureConfig{});
    CHECK(g.size() == 3);
    CHECK(g.isZero(0.0));
    const auto m = closed_form_embedding(empty, params, table, TemperatureConfig{});
    CHECK(m.degenerate);
    CHECK(m.m.isZero(0.0));
  }
  SUBCASE("identity transform returns the frame") {
    ModelParams params;
    params.embedding_dim = 3;
    FactorParams v(Factor::v, 3, 3);
    v.w_mu = Mat::Identity(3, 3);
    params.factors.emplace(Factor::v, v);
    params.factors.emplace(Factor::a, FactorParams(Factor::a, 2, 3));
    SegmentFeatures seg;
    seg.words = Mat(3, 0);
    seg.factor(Factor::v) = Mat(Eigen::Vector3d(0.3, -1.2, 2.5));
    seg.factor(Factor::a) = Mat(2, 0);
    WordTable table(3);
    const Vec g = taylor_linear_coefficient(seg, params, table, TemperatureConfig{});
    CHECK((g - Eigen::Vector3d(0.3, -1.2, 2.5)).norm() == 0.0);
  }
}

TEST_CASE("closed form: oracle agreement, norm, consistency") {
  std::mt19937_64 rng(9);
  const WordTable table = testutil::random_table(30, 8, rng);
  for (Mode mode : {Mode::b1, Mode::b2}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto seg = testutil::random_segment(table, 4, 3, 3, rng);
      const auto params = testutil::random_params(mode, 8, 3, 3, rng);
      const TemperatureConfig cfg = varied(mode);
      const auto feats = features(seg, mode);
      const Vec g = taylor_linear_coefficient(feats, params, table, cfg);
      const auto want = oracle_coefficient(seg, params, table, cfg);
      for (int k = 0; k < 8; ++k) CHECK(g[k] == doctest::Approx(want[static_cast<std::size_t>(k)]).epsilon(1e-10));
      const auto m = closed_form_embedding(feats, params, table, cfg);
      CHECK(std::abs(m.m.norm() - 1.0) < 1e-9);
      CHECK((m.m * g.norm() - g).norm() <= 1e-12 * g.norm());
    }
  }
}

TEST_CASE("closed form: linearity over time and temperature homogeneity") {
  std::mt19937_64 rng(12);
  const WordTable table = testutil::random_table(30, 6, rng);
  const auto params = testutil::random_params(Mode::b2, 6, 3, 2, rng);
  const TemperatureConfig cfg = varied(Mode::b2);
  const auto s1 = testutil::random_segment(table, 4, 3, 2, rng);
  const auto s2 = testutil::random_segment(table, 5, 3, 2, rng);
  MultimodalSegment both;
  both.tokens = s1.tokens;
  both.tokens.insert(both.tokens.end(), s2.tokens.begin(), s2.tokens.end());
  auto cat = [](const Mat& a, const Mat& b) {
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
  };
  both.words = cat(s1.words, s2.words);
  both.visual = cat(s1.visual, s2.visual);
  both.acoustic = cat(s1.acoustic, s2.acoustic);

  const Vec g1 = taylor_linear_coefficient(features(s1, Mode::b2), params, table, cfg);
  const Vec g2 = taylor_linear_coefficient(features(s2, Mode::b2), params, table, cfg);
  const Vec g12 = taylor_linear_coefficient(features(both, Mode::b2), params, table, cfg);
  CHECK((g12 - (g1 + g2)).norm() <= 1e-12 * g12.norm());

  for (double c : {0.25, 3.0, 10.0}) {
    TemperatureConfig scaled = cfg;
    scaled.scale_all(c);
    const auto feats = features(both, Mode::b2);
    const Vec gc = taylor_linear_coefficient(feats, params, table, scaled);
    CHECK((gc - c * g12).norm() <= 1e-12 * gc.norm());
    const auto m = closed_form_embedding(feats, params, table, cfg);
    const auto mc = closed_form_embedding(feats, params, table, scaled);
    CHECK((m.m - mc.m).norm() < 1e-12);
  }
}

TEST_CASE("closed form: B2 with zero multimodal temperatures equals B1 exactly") {
  std::mt19937_64 rng(13);
  const WordTable table = testutil::random_table(30, 6, rng);
  const auto params = testutil::random_params(Mode::b2, 6, 3, 2, rng);
  TemperatureConfig b2 = varied(Mode::b2);
  b2.alpha_wv = b2.alpha_wa = b2.alpha_va = b2.alpha_wva = 0.0;
  TemperatureConfig b1 = b2;
  b1.mode = Mode::b1;
  for (int trial = 0; trial < 10; ++trial) {
    const auto seg = testutil::random_segment(table, 7, 3, 2, rng);
    const auto e2 = closed_form_embedding(features(seg, Mode::b2, true), params, table, b2);
    const auto e1 = closed_form_embedding(features(seg, Mode::b1, true), params, table, b1);
    CHECK(e1.m == e2.m);
  }
}

TEST_CASE("closed form: permutation invariance without positional encodings") {
  std::mt19937_64 rng(14);
  const WordTable table = testutil::random_table(30, 6, rng);
  const auto params = testutil::random_params(Mode::b2, 6, 3, 2, rng);
  const TemperatureConfig cfg = varied(Mode::b2);
  const auto seg = testutil::random_segment(table, 9, 3, 2, rng);
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MultimodalSegment p = seg;
  for (int t = 0; t < 9; ++t) {
    p.tokens[t] = seg.tokens[perm[t]];
    p.words.col(t) = seg.words.col(perm[t]);
    p.visual.col(t) = seg.visual.col(perm[t]);
    p.acoustic.col(t) = seg.acoustic.col(perm[t]);
  }
  const Vec g = taylor_linear_coefficient(features(seg, Mode::b2), params, table, cfg);
  const Vec gp = taylor_linear_coefficient(features(p, Mode::b2), params, table, cfg);
  CHECK(g == gp);
  const auto m = closed_form_embedding(features(seg, Mode::b2, true), params, table, cfg);
  const auto mp = closed_form_embedding(features(p, Mode::b2, true), params, table, cfg);
  CHECK((m.m - mp.m).norm() >= 1e-3);
}

TEST_CASE("closed form: maximizes <g, m> on the sphere") {
  std::mt19937_64 rng(15);
  const WordTable table = testutil::random_table(30, 8, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const auto seg = testutil::random_segment(table, 4, 3, 3, rng);
    const auto params = testutil::random_params(Mode::b1, 8, 3, 3, rng);
    const TemperatureConfig cfg = varied(Mode::b1);
    const auto g = oracle_coefficient(seg, params, table, cfg);
    const auto best = oracle::sphere_maximize([&](const oracle::Vector& m) { return oracle::dot(g, m); },
                                              [&](const oracle::Vector&) { return g; }, 8, 100,
                                              static_cast<std::uint64_t>(trial));
    const auto m = closed_form_embedding(features(seg, Mode::b1), params, table, cfg);
    const double got = oracle::dot(g, to_vector(m.m));
    const double ref = oracle::dot(g, best);
    CHECK(got >= ref - 1e-6 * std::abs(ref));
    CHECK(oracle::dot(to_vector(m.m), best) >= 0.999);
  }
}

TEST_CASE("embed_all matches per-segment embedding") {
  std::mt19937_64 rng(16);
  const WordTable table = testutil::random_table(30, 4, rng);
  const auto params = testutil::random_params(Mode::b1, 4, 2, 2, rng);
  std::vector<SegmentFeatures> feats;
  for (int i = 0; i < 100; ++i) feats.push_back(features(testutil::random_segment(table, 3, 2, 2, rng), Mode::b1, true));
  const auto all = embed_all(feats, params, table, TemperatureConfig{});
  REQUIRE(all.size() == 100);
  for (int i = 0; i < 100; ++i) CHECK(all[i].m == closed_form_embedding(feats[i], params, table, TemperatureConfig{}).m);
}
