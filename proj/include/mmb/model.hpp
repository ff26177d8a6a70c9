#pragma once

// Domain types and likelihood evaluation for the factorized multimodal
// utterance model.
//
// A segment s is explained by an embedding m through independent factors:
// a smoothed log-linear word model and diagonal Gaussians over continuous
// features (visual, acoustic and, in the extended mode, per-step
// concatenations of the modalities). Each factor's log-likelihood is
// weighted by a nonnegative temperature.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmb {

using Vec = Eigen::VectorXd;
// Feature sequences store one column per time step.
using Mat = Eigen::MatrixXd;

using TokenId = std::uint32_t;

// Lower bound applied to every Gaussian standard deviation after the exp.
inline constexpr double kSigmaFloor = 1e-6;

enum class Mode { b1, b2 };

// Continuous (Gaussian) factors. The word factor is handled separately since
// it has no learnable parameters.
enum class Factor { v = 0, a, wv, wa, va, wva };
inline constexpr std::size_t kFactorCount = 6;
inline constexpr std::array<Factor, kFactorCount> kAllFactors = {
    Factor::v, Factor::a, Factor::wv, Factor::wa, Factor::va, Factor::wva};

const char* to_string(Factor f);
const char* to_string(Mode m);
Factor factor_from_string(std::string_view name);
Mode mode_from_string(std::string_view name);

// Factors that carry parameters in the given mode, in evaluation order.
std::span<const Factor> factors_for(Mode mode);

struct Constituents {
  bool words = false;
  bool visual = false;
  bool acoustic = false;
};
Constituents constituents(Factor f);

class WordTable {
 public:
  explicit WordTable(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }

  // Adds a token; returns the existing id if already present.
  TokenId add(const std::string& token, const Vec& vector);
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id(std::string_view token) const;  // throws lookup error
  const std::string& token(TokenId id) const;

  Eigen::Map<const Vec> vector(TokenId id) const;
  double unigram(TokenId id) const;

  // One probability per token id; must sum to 1.
  void set_unigram(std::vector<double> probabilities);
  void set_unigram(const std::unordered_map<std::string, double>& by_token);
  const std::vector<double>& unigram() const { return unigram_; }

 private:
  void check(TokenId id) const;

  int dim_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<double> vectors_;
  std::vector<double> unigram_;
};

struct TemperatureConfig {
  Mode mode = Mode::b1;
  double alpha = 1.0 / (1.0 + 1e-3);  // smoothing
  double Z = 1.0;                     // partition constant
  double alpha_w = 1.0;
  double alpha_v = 1.0;
  double alpha_a = 1.0;
  double alpha_wv = 1.0;
  double alpha_wa = 1.0;
  double alpha_va = 1.0;
  double alpha_wva = 1.0;

  // beta = (1 - alpha) / (alpha Z), the only combination the closed form uses.
  double beta() const { return (1.0 - alpha) / (alpha * Z); }
  // Keeps Z and moves alpha so that beta() == b.
  void set_beta(double b);

  // Effective temperature; the concatenated factors are 0 in mode b1.
  double temperature(Factor f) const;
  void scale_all(double c);
  void validate() const;
};

struct FactorParams {
  Factor id = Factor::v;
  Mat w_mu;     // d_f x d_m
  Mat w_sigma;  // d_f x d_m
  Vec b_mu;     // d_f
  Vec b_sigma;  // d_f

  FactorParams() = default;
  FactorParams(Factor f, int feature_dim, int embedding_dim);

  int feature_dim() const { return static_cast<int>(b_mu.size()); }
  int embedding_dim() const { return static_cast<int>(w_mu.cols()); }
  std::size_t parameter_count() const;
  void validate() const;
};

struct ModelParams {
  int embedding_dim = 0;
  std::map<Factor, FactorParams> factors;

  const FactorParams& at(Factor f) const;  // throws config error if absent
  FactorParams& at(Factor f);
  bool has(Factor f) const { return factors.count(f) != 0; }
  std::size_t parameter_count() const;
  // Checks shapes and that every factor of `mode` is present.
  void validate(Mode mode) const;
};

struct UtteranceEmbedding {
  Vec m;
  bool degenerate = false;
};

struct MultimodalSegment {
  std::string id;
  std::vector<TokenId> tokens;
  Mat words;     // d_w x T_w, column t is the vector of tokens[t]
  Mat visual;    // d_v x T_v
  Mat acoustic;  // d_a x T_a
  std::optional<double> label;

  int length() const { return static_cast<int>(tokens.size()); }
  bool aligned() const;
  void validate() const;
};

// Per-factor feature sequences ready for evaluation: positional encodings
// already applied and concatenated factors materialized.
struct SegmentFeatures {
  std::vector<TokenId> tokens;
  Mat words;
  std::array<Mat, kFactorCount> continuous;

  const Mat& factor(Factor f) const { return continuous[static_cast<std::size_t>(f)]; }
  Mat& factor(Factor f) { return continuous[static_cast<std::size_t>(f)]; }
};

struct GaussianParams {
  Vec mu;
  Vec sigma;
};

// log[alpha p(w) + (1 - alpha) exp(<v_w, m>) / Z]
double word_log_prob(TokenId w, const Vec& m, const WordTable& table,
                     const TemperatureConfig& cfg);
double word_log_prob(const Eigen::Ref<const Vec>& word_vector, double p_w,
                     const Vec& m, const TemperatureConfig& cfg);

GaussianParams gaussian_factor_distribution(const Vec& m, const FactorParams& fp);

// Sum of per-coordinate normal log densities.
double gaussian_log_prob(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& mu,
                         const Eigen::Ref<const Vec>& sigma);

// Unweighted sum of Gaussian log densities over every column of `x`.
double factor_log_likelihood(const Mat& x, const Vec& m, const FactorParams& fp);

double segment_log_likelihood(const SegmentFeatures& seg, const Vec& m,
                              const ModelParams& params, const WordTable& table,
                              const TemperatureConfig& cfg);

}  // namespace mmb
