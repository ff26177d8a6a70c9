#include "mmb/model.hpp"

#include "mmb/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace mmb {

namespace {

constexpr std::array<Factor, 2> kB1Factors = {Factor::v, Factor::a};

const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

const char* to_string(Factor f) {
  switch (f) {
    case Factor::v: return "v";
    case Factor::a: return "a";
    case Factor::wv: return "wv";
    case Factor::wa: return "wa";
    case Factor::va: return "va";
    case Factor::wva: return "wva";
  }
  return "?";
}

const char* to_string(Mode m) { return m == Mode::b1 ? "B1" : "B2"; }

Factor factor_from_string(std::string_view name) {
  for (Factor f : kAllFactors) {
    if (name == to_string(f)) return f;
  }
  fail(ErrorKind::lookup, "unknown factor '" + std::string(name) + "'");
}

Mode mode_from_string(std::string_view name) {
  if (name == "B1" || name == "b1") return Mode::b1;
  if (name == "B2" || name == "b2") return Mode::b2;
  fail(ErrorKind::config, "unknown mode '" + std::string(name) + "' (expected B1 or B2)");
}

std::span<const Factor> factors_for(Mode mode) {
  if (mode == Mode::b1) return kB1Factors;
  return kAllFactors;
}

Constituents constituents(Factor f) {
  switch (f) {
    case Factor::v: return {false, true, false};
    case Factor::a: return {false, false, true};
    case Factor::wv: return {true, true, false};
    case Factor::wa: return {true, false, true};
    case Factor::va: return {false, true, true};
    case Factor::wva: return {true, true, true};
  }
  return {};
}

// ---- WordTable -------------------------------------------------------------

TokenId WordTable::add(const std::string& token, const Vec& vector) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  require(vector.size() == dim_, ErrorKind::dimension,
          "word vector for '" + token + "' has dimension " + std::to_string(vector.size()) +
              ", table expects " + std::to_string(dim_));
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  vectors_.insert(vectors_.end(), vector.data(), vector.data() + vector.size());
  unigram_.push_back(0.0);
  return id;
}

std::optional<TokenId> WordTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId WordTable::id(std::string_view token) const {
  auto found = find(token);
  if (!found) fail(ErrorKind::lookup, "token '" + std::string(token) + "' is not in the word table");
  return *found;
}

void WordTable::check(TokenId id) const {
  if (id >= tokens_.size())
    fail(ErrorKind::lookup, "token id " + std::to_string(id) + " is not in the word table");
}

const std::string& WordTable::token(TokenId id) const {
  check(id);
  return tokens_[id];
}

Eigen::Map<const Vec> WordTable::vector(TokenId id) const {
  check(id);
  return Eigen::Map<const Vec>(vectors_.data() + static_cast<std::size_t>(id) * dim_, dim_);
}

double WordTable::unigram(TokenId id) const {
  check(id);
  return unigram_[id];
}

void WordTable::set_unigram(std::vector<double> probabilities) {
  require(probabilities.size() == tokens_.size(), ErrorKind::dimension,
          "unigram table has " + std::to_string(probabilities.size()) + " entries for " +
              std::to_string(tokens_.size()) + " tokens");
  double total = 0.0;
  for (double p : probabilities) {
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::data,
            "unigram probability outside [0, 1]");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::data,
          "unigram probabilities sum to " + std::to_string(total) + ", expected 1");
  unigram_ = std::move(probabilities);
}

void WordTable::set_unigram(const std::unordered_map<std::string, double>& by_token) {
  std::vector<double> p(tokens_.size(), 0.0);
  for (const auto& [tok, prob] : by_token) p[id(tok)] = prob;
  set_unigram(std::move(p));
}

// ---- TemperatureConfig -----------------------------------------------------

void TemperatureConfig::set_beta(double b) {
  require(b > 0.0 && std::isfinite(b), ErrorKind::config, "beta must be positive");
  alpha = 1.0 / (1.0 + b * Z);
}

double TemperatureConfig::temperature(Factor f) const {
  switch (f) {
    case Factor::v: return alpha_v;
    case Factor::a: return alpha_a;
    default: break;
  }
  if (mode == Mode::b1) return 0.0;
  switch (f) {
    case Factor::wv: return alpha_wv;
    case Factor::wa: return alpha_wa;
    case Factor::va: return alpha_va;
    case Factor::wva: return alpha_wva;
    default: return 0.0;
  }
}

void TemperatureConfig::scale_all(double c) {
  for (double* t : {&alpha_w, &alpha_v, &alpha_a, &alpha_wv, &alpha_wa, &alpha_va, &alpha_wva})
    *t *= c;
}

void TemperatureConfig::validate() const {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::config, "alpha must lie in (0, 1)");
  require(Z > 0.0 && std::isfinite(Z), ErrorKind::config, "Z must be positive");
  for (double t : {alpha_w, alpha_v, alpha_a, alpha_wv, alpha_wa, alpha_va, alpha_wva})
    require(t >= 0.0 && std::isfinite(t), ErrorKind::config, "temperatures must be nonnegative");
}

// ---- FactorParams / ModelParams --------------------------------------------

FactorParams::FactorParams(Factor f, int feature_dim, int embedding_dim)
    : id(f),
      w_mu(Mat::Zero(feature_dim, embedding_dim)),
      w_sigma(Mat::Zero(feature_dim, embedding_dim)),
      b_mu(Vec::Zero(feature_dim)),
      b_sigma(Vec::Zero(feature_dim)) {}

std::size_t FactorParams::parameter_count() const {
  return static_cast<std::size_t>(w_mu.size() + w_sigma.size() + b_mu.size() + b_sigma.size());
}

void FactorParams::validate() const {
  const auto df = b_mu.size();
  const std::string name = to_string(id);
  require(w_mu.rows() == df && w_sigma.rows() == df && b_sigma.size() == df &&
              w_sigma.cols() == w_mu.cols(),
          ErrorKind::dimension, "inconsistent parameter shapes for factor " + name);
  require(w_mu.allFinite() && w_sigma.allFinite() && b_mu.allFinite() && b_sigma.allFinite(),
          ErrorKind::numeric, "non-finite parameter in factor " + name);
}

const FactorParams& ModelParams::at(Factor f) const {
  auto it = factors.find(f);
  if (it == factors.end())
    fail(ErrorKind::config, std::string("missing parameters for factor ") + to_string(f));
  return it->second;
}

FactorParams& ModelParams::at(Factor f) {
  auto it = factors.find(f);
  if (it == factors.end())
    fail(ErrorKind::config, std::string("missing parameters for factor ") + to_string(f));
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [f, fp] : factors) n += fp.parameter_count();
  return n;
}

void ModelParams::validate(Mode mode) const {
  for (Factor f : factors_for(mode)) {
    const auto& fp = at(f);
    fp.validate();
    require(fp.embedding_dim() == embedding_dim, ErrorKind::dimension,
            std::string("factor ") + to_string(f) + " has embedding dimension " +
                std::to_string(fp.embedding_dim()) + ", model uses " +
                std::to_string(embedding_dim));
  }
}

// ---- MultimodalSegment ------------------------------------------------------

bool MultimodalSegment::aligned() const {
  const auto t = static_cast<Eigen::Index>(tokens.size());
  return t >= 1 && words.cols() == t && visual.cols() == t && acoustic.cols() == t;
}

void MultimodalSegment::validate() const {
  require(words.cols() == static_cast<Eigen::Index>(tokens.size()), ErrorKind::dimension,
          "segment " + id + ": token count does not match word vector count");
  require(words.allFinite() && visual.allFinite() && acoustic.allFinite(), ErrorKind::data,
          "segment " + id + ": non-finite feature value");
}

// ---- likelihoods ------------------------------------------------------------

double word_log_prob(const Eigen::Ref<const Vec>& word_vector, double p_w, const Vec& m,
                     const TemperatureConfig& cfg) {
  require(word_vector.size() == m.size(), ErrorKind::dimension,
          "word vector and embedding dimensions differ");
  require(m.allFinite(), ErrorKind::numeric, "non-finite embedding");
  const double smooth = cfg.alpha * p_w;
  const double scale = (1.0 - cfg.alpha) / cfg.Z;
  const double dot = word_vector.dot(m);
  const double log_smooth = smooth > 0.0 ? std::log(smooth) : -INFINITY;
  const double log_ctx = scale > 0.0 ? std::log(scale) + dot : -INFINITY;
  const double out = log_add_exp(log_smooth, log_ctx);
  require(std::isfinite(out), ErrorKind::numeric, "word probability is not positive");
  return out;
}

double word_log_prob(TokenId w, const Vec& m, const WordTable& table,
                     const TemperatureConfig& cfg) {
  return word_log_prob(table.vector(w), table.unigram(w), m, cfg);
}

GaussianParams gaussian_factor_distribution(const Vec& m, const FactorParams& fp) {
  require(fp.w_mu.cols() == m.size() && fp.w_sigma.cols() == m.size() &&
              fp.w_mu.rows() == fp.b_mu.size() && fp.w_sigma.rows() == fp.b_sigma.size(),
          ErrorKind::dimension,
          std::string("shape mismatch evaluating factor ") + to_string(fp.id));
  GaussianParams out;
  out.mu = fp.w_mu * m + fp.b_mu;
  out.sigma = (fp.w_sigma * m + fp.b_sigma).array().exp().max(kSigmaFloor).matrix();
  return out;
}

double gaussian_log_prob(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& mu,
                         const Eigen::Ref<const Vec>& sigma) {
  require(x.size() == mu.size() && x.size() == sigma.size(), ErrorKind::dimension,
          "gaussian_log_prob: dimension mismatch");
  require((sigma.array() > 0.0).all(), ErrorKind::numeric, "gaussian_log_prob: sigma must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mu[i]) / sigma[i];
    total += -kLogSqrtTwoPi - std::log(sigma[i]) - 0.5 * z * z;
  }
  return total;
}

double factor_log_likelihood(const Mat& x, const Vec& m, const FactorParams& fp) {
  if (x.cols() == 0) return 0.0;
  require(x.rows() == fp.feature_dim(), ErrorKind::dimension,
          std::string("factor ") + to_string(fp.id) + " features have dimension " +
              std::to_string(x.rows()) + ", parameters expect " +
              std::to_string(fp.feature_dim()));
  const GaussianParams g = gaussian_factor_distribution(m, fp);
  const double log_norm =
      -static_cast<double>(x.rows()) * kLogSqrtTwoPi - g.sigma.array().log().sum();
  const Vec inv_sigma = g.sigma.cwiseInverse();
  double quad = 0.0;
  for (Eigen::Index t = 0; t < x.cols(); ++t)
    quad += ((x.col(t) - g.mu).cwiseProduct(inv_sigma)).squaredNorm();
  return static_cast<double>(x.cols()) * log_norm - 0.5 * quad;
}

double segment_log_likelihood(const SegmentFeatures& seg, const Vec& m,
                              const ModelParams& params, const WordTable& table,
                              const TemperatureConfig& cfg) {
  double total = 0.0;
  if (cfg.alpha_w != 0.0 && !seg.tokens.empty()) {
    double words = 0.0;
    for (std::size_t t = 0; t < seg.tokens.size(); ++t)
      words += word_log_prob(seg.words.col(static_cast<Eigen::Index>(t)),
                             table.unigram(seg.tokens[t]), m, cfg);
    total += cfg.alpha_w * words;
  }
  for (Factor f : factors_for(cfg.mode)) {
    const FactorParams& fp = params.at(f);
    const double temp = cfg.temperature(f);
    if (temp == 0.0) continue;
    total += temp * factor_log_likelihood(seg.factor(f), m, fp);
  }
  return total;
}

}  // namespace mmb
