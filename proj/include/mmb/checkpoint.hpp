#pragma once

// Text container shared by model and classifier checkpoints:
//
//   mmb-archive 1
//   key <name> <value>
//   tensor <name> <rows> <cols>
//   <rows lines of <cols> shortest round-trip decimals>
//   end
//
// Keys and tensor names are single whitespace-free words. Values may contain
// spaces; they run to the end of the line.

#include "mmb/learning.hpp"
#include "mmb/model.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace mmb {

class Archive {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  std::optional<std::string> find(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws parse error
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;

  void put(const std::string& name, const Mat& tensor);
  void put(const std::string& name, const Vec& tensor) { put(name, Mat(tensor)); }
  bool has_tensor(const std::string& name) const { return tensors_.count(name) != 0; }
  const Mat& tensor(const std::string& name) const;
  Vec vector(const std::string& name) const;

  void write(std::ostream& out) const;
  void write(const std::string& path) const;
  static Archive read(std::istream& in);
  static Archive read(const std::string& path);

 private:
  std::map<std::string, std::string> keys_;
  std::map<std::string, Mat> tensors_;
};

std::string format_double(double v);
double parse_double(std::string_view text);

struct ModelCheckpoint {
  ModelParams params;
  TemperatureConfig config;
  OptimizerState optimizer;
  int iteration = 0;
  std::vector<double> history;
};

Archive to_archive(const ModelCheckpoint& ckpt);
ModelCheckpoint model_checkpoint_from(const Archive& archive);

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace mmb
