#include "mmb/dataset_io.hpp"

#include "mmb/checkpoint.hpp"
#include "mmb/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace mmb {

using nlohmann::json;

namespace {

struct LineError {
  int line;
  [[noreturn]] void operator()(ErrorKind kind, const std::string& what) const {
    fail(kind, "line " + std::to_string(line) + ": " + what);
  }
};

double finite_number(const json& v, const LineError& err, const char* field) {
  if (!v.is_number()) err(ErrorKind::parse, std::string("field '") + field + "' must hold numbers");
  const double x = v.get<double>();
  if (!std::isfinite(x)) err(ErrorKind::data, std::string("non-finite value in field '") + field + "'");
  return x;
}

Vec number_array(const json& v, const LineError& err, const char* field) {
  if (!v.is_array()) err(ErrorKind::parse, std::string("field '") + field + "' must be an array");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = finite_number(v[i], err, field);
  return out;
}

// Column-stacks equally sized vectors.
Mat stack_columns(const std::vector<Vec>& cols, const LineError& err, const char* field) {
  if (cols.empty()) return Mat(0, 0);
  const auto rows = cols.front().size();
  Mat out(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].size() != rows)
      err(ErrorKind::data, std::string("field '") + field + "' mixes vector dimensions");
    out.col(static_cast<Eigen::Index>(i)) = cols[i];
  }
  return out;
}

RawStream parse_stream(const json& v, const LineError& err, const char* field) {
  if (!v.is_array()) err(ErrorKind::parse, std::string("field '") + field + "' must be an array of frames");
  RawStream s;
  std::vector<Vec> frames;
  for (const auto& frame : v) {
    if (!frame.is_object() || !frame.contains("t") || !frame.contains("x"))
      err(ErrorKind::parse, std::string("frames in '") + field + "' need fields t and x");
    const double t = finite_number(frame["t"], err, field);
    if (!s.timestamps.empty() && t <= s.timestamps.back())
      err(ErrorKind::data, std::string("timestamps in '") + field + "' must be strictly increasing");
    s.timestamps.push_back(t);
    frames.push_back(number_array(frame["x"], err, field));
  }
  s.frames = stack_columns(frames, err, field);
  return s;
}

Mat parse_aligned(const json& v, const LineError& err, const char* field) {
  if (!v.is_array()) err(ErrorKind::parse, std::string("field '") + field + "' must be an array");
  std::vector<Vec> cols;
  for (const auto& item : v) cols.push_back(number_array(item, err, field));
  return stack_columns(cols, err, field);
}

void check_dim(int& known, Eigen::Index found, bool present, const LineError& err,
               const char* modality) {
  if (!present) return;
  if (known < 0) {
    known = static_cast<int>(found);
    return;
  }
  if (known != found)
    err(ErrorKind::data, std::string(modality) + " dimension " + std::to_string(found) +
                             " differs from earlier segments (" + std::to_string(known) + ")");
}

SegmentRecord parse_record(const json& j, const LineError& err) {
  if (!j.is_object()) err(ErrorKind::parse, "segment record must be a JSON object");
  SegmentRecord r;
  if (!j.contains("id") || !j["id"].is_string()) err(ErrorKind::parse, "missing string field 'id'");
  r.id = j["id"].get<std::string>();
  if (j.contains("tokens")) {
    if (!j["tokens"].is_array()) err(ErrorKind::parse, "field 'tokens' must be an array");
    for (const auto& t : j["tokens"]) {
      if (!t.is_string()) err(ErrorKind::parse, "tokens must be strings");
      r.tokens.push_back(t.get<std::string>());
    }
  }
  if (j.contains("intervals")) {
    if (!j["intervals"].is_array()) err(ErrorKind::parse, "field 'intervals' must be an array");
    for (const auto& iv : j["intervals"]) {
      if (!iv.is_array() || iv.size() != 2) err(ErrorKind::parse, "intervals must be [start, end] pairs");
      r.intervals.emplace_back(finite_number(iv[0], err, "intervals"),
                               finite_number(iv[1], err, "intervals"));
    }
    if (r.intervals.size() != r.tokens.size())
      err(ErrorKind::data, "intervals and tokens have different lengths");
    try {
      validate_intervals(r.intervals);
    } catch (const Error& e) {
      err(e.kind(), e.what());
    }
  }
  auto has = [&](const char* k) { return j.contains(k) && !j[k].is_null(); };
  if (has("visual")) r.visual = parse_stream(j["visual"], err, "visual");
  if (has("acoustic")) r.acoustic = parse_stream(j["acoustic"], err, "acoustic");
  if (has("visual_aligned")) r.visual_aligned = parse_aligned(j["visual_aligned"], err, "visual_aligned");
  if (has("acoustic_aligned"))
    r.acoustic_aligned = parse_aligned(j["acoustic_aligned"], err, "acoustic_aligned");
  if ((r.visual && r.visual_aligned) || (r.acoustic && r.acoustic_aligned))
    err(ErrorKind::parse, "a modality cannot be given both raw and pre-aligned");
  for (const auto* aligned : {&r.visual_aligned, &r.acoustic_aligned})
    if (*aligned && (*aligned)->cols() != static_cast<Eigen::Index>(r.tokens.size()))
      err(ErrorKind::data, "pre-aligned features need one vector per token");
  if ((r.visual || r.acoustic) && !r.tokens.empty() && r.intervals.empty())
    err(ErrorKind::parse, "timestamped streams require 'intervals'");
  if (has("label")) r.label = finite_number(j["label"], err, "label");
  if (has("split")) {
    if (!j["split"].is_string()) err(ErrorKind::parse, "field 'split' must be a string");
    r.split = j["split"].get<std::string>();
  }
  return r;
}

json stream_json(const RawStream& s) {
  json frames = json::array();
  for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
    const auto col = s.frames.col(static_cast<Eigen::Index>(i));
    frames.push_back({{"t", s.timestamps[i]}, {"x", std::vector<double>(col.data(), col.data() + col.size())}});
  }
  return frames;
}

json aligned_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const Vec col = m.col(c);
    rows.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  return rows;
}

}  // namespace

std::vector<SegmentRecord> parse_segment_records(std::istream& in, DatasetInfo* info) {
  std::vector<SegmentRecord> out;
  int visual_dim = -1;
  int acoustic_dim = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const LineError err{lineno};
    json j;
    try {
      j = json::parse(line);
    } catch (const json::out_of_range&) {
      err(ErrorKind::data, "number out of range");
    } catch (const json::exception& e) {
      err(ErrorKind::parse, std::string("malformed JSON: ") + e.what());
    }
    SegmentRecord r = parse_record(j, err);
    const bool has_v = r.visual ? r.visual->frames.cols() > 0 : r.visual_aligned && r.visual_aligned->cols() > 0;
    const bool has_a = r.acoustic ? r.acoustic->frames.cols() > 0 : r.acoustic_aligned && r.acoustic_aligned->cols() > 0;
    check_dim(visual_dim, r.visual ? r.visual->frames.rows() : (r.visual_aligned ? r.visual_aligned->rows() : 0),
              has_v, err, "visual");
    check_dim(acoustic_dim,
              r.acoustic ? r.acoustic->frames.rows() : (r.acoustic_aligned ? r.acoustic_aligned->rows() : 0),
              has_a, err, "acoustic");
    out.push_back(std::move(r));
  }
  if (info) {
    info->visual_dim = std::max(visual_dim, 0);
    info->acoustic_dim = std::max(acoustic_dim, 0);
    info->segments = out.size();
  }
  return out;
}

std::vector<SegmentRecord> load_segment_records(const std::string& path, DatasetInfo* info) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open dataset " + path);
  try {
    return parse_segment_records(in, info);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

void write_segment_records(std::ostream& out, const std::vector<SegmentRecord>& records) {
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["tokens"] = r.tokens;
    json iv = json::array();
    for (const auto& [s, e] : r.intervals) iv.push_back({s, e});
    j["intervals"] = iv;
    if (r.visual) j["visual"] = stream_json(*r.visual);
    if (r.acoustic) j["acoustic"] = stream_json(*r.acoustic);
    if (r.visual_aligned) j["visual_aligned"] = aligned_json(*r.visual_aligned);
    if (r.acoustic_aligned) j["acoustic_aligned"] = aligned_json(*r.acoustic_aligned);
    j["label"] = r.label ? json(*r.label) : json(nullptr);
    if (!r.split.empty()) j["split"] = r.split;
    out << j.dump() << '\n';
  }
}

void save_segment_records(const std::string& path, const std::vector<SegmentRecord>& records) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  write_segment_records(out, records);
}

WordTable parse_word_vectors(std::istream& in) {
  std::string line;
  int lineno = 0;
  WordTable table;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ls >> field) {
      try {
        values.push_back(parse_double(field));
      } catch (const Error&) {
        fail(ErrorKind::parse, "word vectors line " + std::to_string(lineno) + ": bad number '" + field + "'");
      }
      if (!std::isfinite(values.back()))
        fail(ErrorKind::data, "word vectors line " + std::to_string(lineno) + ": non-finite value");
    }
    // word2vec-style "count dim" header
    if (lineno == 1 && values.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos)
      continue;
    if (!have_dim) {
      require(!values.empty(), ErrorKind::parse,
              "word vectors line " + std::to_string(lineno) + ": no vector values");
      table = WordTable(static_cast<int>(values.size()));
      have_dim = true;
    }
    if (static_cast<int>(values.size()) != table.dim())
      fail(ErrorKind::data, "word vectors line " + std::to_string(lineno) + ": expected " +
                                std::to_string(table.dim()) + " values, found " +
                                std::to_string(values.size()));
    table.add(token, Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return table;
}

WordTable load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open word vectors " + path);
  return parse_word_vectors(in);
}

void write_word_vectors(std::ostream& out, const WordTable& table) {
  for (TokenId id = 0; id < table.size(); ++id) {
    out << table.token(id);
    for (double v : table.vector(id)) out << ' ' << format_double(v);
    out << '\n';
  }
}

void save_word_vectors(const std::string& path, const WordTable& table) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path + "'");
  write_word_vectors(out, table);
  require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + path + "'");
}

std::vector<MultimodalSegment> build_segments(const std::vector<SegmentRecord>& records,
                                              WordTable& table, const DatasetInfo& info,
                                              const BuildOptions& options) {
  std::vector<MultimodalSegment> out;
  out.reserve(records.size());
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(records.size());
  const Vec zero = Vec::Zero(table.dim());
  for (const auto& r : records) {
    MultimodalSegment seg;
    seg.id = r.id;
    seg.label = r.label;
    seg.words.resize(table.dim(), static_cast<Eigen::Index>(r.tokens.size()));
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const TokenId id = options.add_unknown_tokens ? table.add(r.tokens[t], zero) : table.id(r.tokens[t]);
      seg.tokens.push_back(id);
      seg.words.col(static_cast<Eigen::Index>(t)) = table.vector(id);
    }
    auto modality = [&](const std::optional<RawStream>& raw, const std::optional<Mat>& aligned,
                        int dim) -> Mat {
      try {
        if (aligned) return aligned->cols() == 0 ? Mat(dim, 0) : *aligned;
        if (raw && !r.tokens.empty()) return align_to_words(*raw, r.intervals);
      } catch (const Error& e) {
        fail(e.kind(), "segment " + r.id + ": " + e.what());
      }
      return Mat(dim, 0);
    };
    seg.visual = modality(r.visual, r.visual_aligned, info.visual_dim);
    seg.acoustic = modality(r.acoustic, r.acoustic_aligned, info.acoustic_dim);
    seg.validate();
    corpus.push_back(r.tokens);
    out.push_back(std::move(seg));
  }
  if (table.size() > 0) {
    auto unigram = compute_unigram(corpus);
    if (!unigram.empty()) table.set_unigram(unigram);
  }
  return out;
}

}  // namespace mmb
