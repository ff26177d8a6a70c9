#include "mmb/pipeline.hpp"

#include "mmb/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mmb {

namespace {

std::string describe(const WordInterval& iv) {
  std::ostringstream os;
  os << '[' << iv.first << ", " << iv.second << ')';
  return os.str();
}

double frame_step(const RawStream& stream) {
  if (stream.rate > 0.0) return 1.0 / stream.rate;
  const auto& ts = stream.timestamps;
  if (ts.size() < 2) return 0.0;
  std::vector<double> diffs(ts.size() - 1);
  for (std::size_t i = 1; i < ts.size(); ++i) diffs[i - 1] = ts[i] - ts[i - 1];
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return diffs[diffs.size() / 2];
}

}  // namespace

void RawStream::validate() const {
  require(static_cast<Eigen::Index>(timestamps.size()) == frames.cols(), ErrorKind::data,
          "stream has " + std::to_string(timestamps.size()) + " timestamps for " +
              std::to_string(frames.cols()) + " frames");
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    require(std::isfinite(timestamps[i]), ErrorKind::data, "non-finite stream timestamp");
    if (i > 0)
      require(timestamps[i] > timestamps[i - 1], ErrorKind::data,
              "stream timestamps must be strictly increasing");
  }
  require(frames.allFinite(), ErrorKind::data, "non-finite stream frame value");
}

void validate_intervals(const WordIntervals& intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    require(std::isfinite(iv.first) && std::isfinite(iv.second) && iv.first < iv.second,
            ErrorKind::data, "word interval " + describe(iv) + " must satisfy start < end");
    if (i > 0)
      require(iv.first >= intervals[i - 1].second, ErrorKind::data,
              "word interval " + describe(iv) + " overlaps or precedes its predecessor");
  }
}

Mat align_to_words(const RawStream& stream, const WordIntervals& intervals) {
  stream.validate();
  validate_intervals(intervals);
  const auto& ts = stream.timestamps;
  const Eigen::Index dim = stream.frames.rows();
  Mat out(dim, static_cast<Eigen::Index>(intervals.size()));
  if (intervals.empty()) return out;
  if (ts.empty())
    fail(ErrorKind::alignment, "no frames available for word interval " + describe(intervals.front()));

  const double step = frame_step(stream);
  for (std::size_t w = 0; w < intervals.size(); ++w) {
    const auto& [start, end] = intervals[w];
    if (end <= ts.front() - step || start >= ts.back() + step)
      fail(ErrorKind::alignment, "word interval " + describe(intervals[w]) +
                                     " lies outside the stream time range");
    const auto lo = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), start) - ts.begin());
    const auto hi = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), end) - ts.begin());
    const auto col = static_cast<Eigen::Index>(w);
    if (hi > lo) {
      out.col(col) = stream.frames.middleCols(static_cast<Eigen::Index>(lo),
                                              static_cast<Eigen::Index>(hi - lo))
                         .rowwise()
                         .mean();
      continue;
    }
    // No frame inside: the frame before `start` or the first at/after `end`.
    std::size_t nearest;
    if (lo == 0) {
      nearest = hi;
    } else if (hi >= ts.size()) {
      nearest = lo - 1;
    } else {
      nearest = (start - ts[lo - 1] <= ts[hi] - end) ? lo - 1 : hi;
    }
    out.col(col) = stream.frames.col(static_cast<Eigen::Index>(nearest));
  }
  return out;
}

Mat positional_encoding(int length, int dim) {
  require(length >= 0 && dim >= 0, ErrorKind::dimension, "positional encoding needs T, d >= 0");
  Mat pe(length, dim);
  for (int c = 0; c < dim; ++c) {
    const int pair = c / 2;
    const double freq = std::pow(10000.0, 2.0 * pair / static_cast<double>(dim));
    for (int pos = 0; pos < length; ++pos) {
      const double angle = pos / freq;
      pe(pos, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Mat apply_positional_encoding(const Mat& sequence) {
  if (sequence.size() == 0) return sequence;
  return sequence + positional_encoding(static_cast<int>(sequence.cols()),
                                        static_cast<int>(sequence.rows()))
                        .transpose();
}

Mat concat_factors(const MultimodalSegment& seg, Factor f) {
  const Constituents parts = constituents(f);
  std::vector<const Mat*> pieces;
  if (parts.words) pieces.push_back(&seg.words);
  if (parts.visual) pieces.push_back(&seg.visual);
  if (parts.acoustic) pieces.push_back(&seg.acoustic);

  Eigen::Index rows = 0;
  bool any_empty = false;
  Eigen::Index length = -1;
  for (const Mat* p : pieces) {
    rows += p->rows();
    if (p->cols() == 0) {
      any_empty = true;
      continue;
    }
    if (length < 0) length = p->cols();
    require(p->cols() == length, ErrorKind::alignment,
            "segment " + seg.id + ": factor " + to_string(f) +
                " constituents have unequal lengths");
  }
  // An empty constituent makes the whole factor empty.
  if (any_empty || length < 0) return Mat(rows, 0);

  Mat out(rows, length);
  Eigen::Index r = 0;
  for (const Mat* p : pieces) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

SegmentFeatures prepare_features(const MultimodalSegment& seg, const PipelineOptions& options) {
  auto pe = [&](const Mat& m) { return options.positional_encoding ? apply_positional_encoding(m) : m; };
  SegmentFeatures out;
  out.tokens = seg.tokens;
  out.words = seg.words;
  out.factor(Factor::v) = pe(seg.visual);
  out.factor(Factor::a) = pe(seg.acoustic);
  if (options.mode == Mode::b2) {
    for (Factor f : {Factor::wv, Factor::wa, Factor::va, Factor::wva})
      out.factor(f) = pe(concat_factors(seg, f));
  }
  return out;
}

std::vector<SegmentFeatures> prepare_all(std::span<const MultimodalSegment> segments,
                                         const PipelineOptions& options) {
  std::vector<SegmentFeatures> out(segments.size());
  detail::parallel_for(segments.size(),
                       [&](std::size_t i) { out[i] = prepare_features(segments[i], options); });
  return out;
}

std::unordered_map<std::string, double> compute_unigram(
    const std::vector<std::vector<std::string>>& corpus) {
  std::unordered_map<std::string, double> counts;
  std::size_t total = 0;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) {
      counts[tok] += 1.0;
      ++total;
    }
  for (auto& [tok, c] : counts) c /= static_cast<double>(total);
  return counts;
}

}  // namespace mmb
