#pragma once

// Segment files and word-vector tables.
//
// Segment file: one JSON object per line with fields
//   id        string
//   tokens    [string]
//   intervals [[start, end]]          seconds, one per token
//   visual    [{"t": s, "x": [..]}]   timestamped frames, aligned on load
//   acoustic  same shape as visual
//   visual_aligned / acoustic_aligned [[..]]  per-word vectors (bypass alignment)
//   label     number or null
//   split     optional "train" / "valid" / "test"
// Blank lines are ignored. Word vectors: text lines `token v1 ... vN`; a
// leading `count dim` header line is skipped.

#include "mmb/model.hpp"
#include "mmb/pipeline.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmb {

struct SegmentRecord {
  std::string id;
  std::vector<std::string> tokens;
  WordIntervals intervals;
  std::optional<RawStream> visual;
  std::optional<RawStream> acoustic;
  std::optional<Mat> visual_aligned;    // d_v x T
  std::optional<Mat> acoustic_aligned;  // d_a x T
  std::optional<double> label;
  std::string split;
};

struct DatasetInfo {
  int visual_dim = 0;
  int acoustic_dim = 0;
  std::size_t segments = 0;
};

std::vector<SegmentRecord> parse_segment_records(std::istream& in, DatasetInfo* info = nullptr);
std::vector<SegmentRecord> load_segment_records(const std::string& path,
                                                DatasetInfo* info = nullptr);
void write_segment_records(std::ostream& out, const std::vector<SegmentRecord>& records);
void save_segment_records(const std::string& path, const std::vector<SegmentRecord>& records);

WordTable parse_word_vectors(std::istream& in);
WordTable load_word_vectors(const std::string& path);
void write_word_vectors(std::ostream& out, const WordTable& table);
void save_word_vectors(const std::string& path, const WordTable& table);

struct BuildOptions {
  // Tokens missing from the table are added with a zero vector; otherwise
  // they raise a lookup error.
  bool add_unknown_tokens = true;
};

// Aligns streams to word intervals and resolves tokens against the table,
// then sets the table's unigram distribution from the records' tokens.
std::vector<MultimodalSegment> build_segments(const std::vector<SegmentRecord>& records,
                                              WordTable& table, const DatasetInfo& info,
                                              const BuildOptions& options = {});

}  // namespace mmb
