#pragma once

// Feature pipeline: word-interval alignment of continuous streams,
// sinusoidal positional encodings, factor concatenation and unigram
// statistics.

#include "mmb/model.hpp"

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mmb {

struct RawStream {
  std::vector<double> timestamps;  // seconds, strictly increasing
  Mat frames;                      // d x N, one column per timestamp
  double rate = 0.0;               // Hz, informational

  void validate() const;
};

using WordInterval = std::pair<double, double>;  // [start, end) seconds
using WordIntervals = std::vector<WordInterval>;

void validate_intervals(const WordIntervals& intervals);

// One column per word: the mean of frames with timestamp in [start, end).
// An interval containing no frame takes the temporally nearest frame.
Mat align_to_words(const RawStream& stream, const WordIntervals& intervals);

// T x d matrix: PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(...)
Mat positional_encoding(int length, int dim);

// Adds positional_encoding(T, d) to a d x T sequence.
Mat apply_positional_encoding(const Mat& sequence);

// Per-time-step concatenation of the factor's constituent streams (raw,
// without positional encoding). Throws alignment error on unequal lengths.
Mat concat_factors(const MultimodalSegment& seg, Factor f);

struct PipelineOptions {
  Mode mode = Mode::b1;
  bool positional_encoding = true;
};

// Builds the per-factor sequences the likelihood and solver consume. PE is
// applied to the unimodal continuous streams, and separately at the
// concatenated dimension for concatenated factors; word vectors are never
// modified.
SegmentFeatures prepare_features(const MultimodalSegment& seg, const PipelineOptions& options);
std::vector<SegmentFeatures> prepare_all(std::span<const MultimodalSegment> segments,
                                         const PipelineOptions& options);

std::unordered_map<std::string, double> compute_unigram(
    const std::vector<std::vector<std::string>>& corpus);

}  // namespace mmb
