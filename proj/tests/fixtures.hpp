#pragma once

#include "mmb/dataset_io.hpp"
#include "mmb/run_config.hpp"
#include "mmb/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testutil {

// Writes a synthetic dataset and its word vectors under `dir` and returns a
// config pointing at them with outputs in dir/out.
inline mmb::RunConfig synthetic_run(const std::filesystem::path& dir, const mmb::SyntheticSpec& spec) {
  const mmb::SyntheticData data = mmb::generate_synthetic(spec);
  mmb::RunConfig cfg;
  cfg.dataset = (dir / "segments.jsonl").string();
  cfg.word_vectors = (dir / "vectors.txt").string();
  cfg.out = (dir / "out").string();
  mmb::save_segment_records(cfg.dataset, mmb::to_records(data));
  mmb::save_word_vectors(cfg.word_vectors, data.table);
  return cfg;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
