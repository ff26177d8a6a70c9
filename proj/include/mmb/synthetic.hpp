#pragma once

// Seeded data sampled from the Baseline 1 generative model with known
// parameters: m* uniform on the sphere, words from the smoothed log-linear
// model, visual and acoustic frames from the diagonal Gaussians.

#include "mmb/dataset_io.hpp"
#include "mmb/model.hpp"

#include <cstdint>
#include <vector>

namespace mmb {

struct SyntheticSpec {
  int segments = 100;
  int length = 20;
  int embedding_dim = 8;
  int visual_dim = 4;
  int acoustic_dim = 4;
  int vocabulary = 200;
  double word_scale = 1.0;   // norm of each word vector
  double smoothing = 0.5;    // probability a word is drawn from the unigram
  double mean_scale = 1.0;   // norm of each column of W*_mu
  bool orthogonal_means = false;  // columns of W*_mu mutually orthogonal; needs d_f >= d_m
  double sigma = 0.5;        // exp(b*_sigma)
  double sigma_weight_scale = 0.0;  // entries of W*_sigma
  std::uint64_t seed = 0;
};

struct SyntheticData {
  WordTable table;  // unigram set to the generating distribution
  std::vector<MultimodalSegment> segments;
  std::vector<Vec> truth_embeddings;
  ModelParams truth;  // factors v and a
  Vec label_direction;
};

// Labels are sign(<label_direction, m*>) in {-1, +1}.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Records with pre-aligned features and unit word intervals.
std::vector<SegmentRecord> to_records(const SyntheticData& data);

}  // namespace mmb
