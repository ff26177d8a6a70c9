#include "mmb/checkpoint.hpp"

#include "mmb/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mmb {

namespace {

constexpr const char* kMagic = "mmb-archive";
constexpr int kVersion = 1;

[[noreturn]] void parse_fail(int line, const std::string& what) {
  fail(ErrorKind::parse, "archive line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    fail(ErrorKind::parse, "not a number: '" + std::string(text) + "'");
  return v;
}

void Archive::set(const std::string& key, const std::string& value) {
  require(!key.empty() && key.find_first_of(" \t\n") == std::string::npos, ErrorKind::config,
          "archive keys must be single words");
  require(value.find('\n') == std::string::npos, ErrorKind::config,
          "archive values must fit on one line");
  keys_[key] = value;
}

void Archive::set(const std::string& key, double value) { set(key, format_double(value)); }

std::optional<std::string> Archive::find(const std::string& key) const {
  auto it = keys_.find(key);
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

const std::string& Archive::get(const std::string& key) const {
  auto it = keys_.find(key);
  if (it == keys_.end()) fail(ErrorKind::parse, "archive is missing key '" + key + "'");
  return it->second;
}

double Archive::get_double(const std::string& key) const { return parse_double(get(key)); }

long long Archive::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorKind::parse, "archive key '" + key + "' is not an integer");
  return v;
}

void Archive::put(const std::string& name, const Mat& tensor) {
  require(!name.empty() && name.find_first_of(" \t\n") == std::string::npos, ErrorKind::config,
          "tensor names must be single words");
  tensors_[name] = tensor;
}

const Mat& Archive::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(ErrorKind::parse, "archive is missing tensor '" + name + "'");
  return it->second;
}

Vec Archive::vector(const std::string& name) const {
  const Mat& t = tensor(name);
  require(t.cols() == 1 || t.size() == 0, ErrorKind::parse, "tensor '" + name + "' is not a column vector");
  return t.size() == 0 ? Vec() : Vec(t.col(0));
}

void Archive::write(std::ostream& out) const {
  out << kMagic << ' ' << kVersion << '\n';
  for (const auto& [k, v] : keys_) out << "key " << k << ' ' << v << '\n';
  for (const auto& [name, t] : tensors_) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        if (c) out << ' ';
        out << format_double(t(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

void Archive::write(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path);
  write(out);
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path);
}

Archive Archive::read(std::istream& in) {
  Archive a;
  std::string line;
  int lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next()) parse_fail(1, "empty archive");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kMagic) parse_fail(lineno, "not an mmb archive");
    if (version != kVersion) parse_fail(lineno, "unsupported archive version " + std::to_string(version));
  }
  bool ended = false;
  while (next()) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      ended = true;
      break;
    }
    if (tag == "key") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      a.keys_[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      long long rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (name.empty() || rows < 0 || cols < 0) parse_fail(lineno, "bad tensor header");
      Mat t(rows, cols);
      for (long long r = 0; r < rows; ++r) {
        if (!next()) parse_fail(lineno, "truncated tensor '" + name + "'");
        std::istringstream rs(line);
        std::string tok;
        long long c = 0;
        while (rs >> tok) {
          if (c >= cols) parse_fail(lineno, "too many values in tensor '" + name + "'");
          try {
            t(r, c++) = parse_double(tok);
          } catch (const Error&) {
            parse_fail(lineno, "bad number '" + tok + "'");
          }
        }
        if (c != cols) parse_fail(lineno, "too few values in tensor '" + name + "'");
      }
      a.tensors_[name] = std::move(t);
    } else {
      parse_fail(lineno, "unknown record '" + tag + "'");
    }
  }
  if (!ended) parse_fail(lineno, "missing end marker");
  return a;
}

Archive Archive::read(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path);
  return read(in);
}

// ---- model checkpoints ------------------------------------------------------

Archive to_archive(const ModelCheckpoint& ckpt) {
  Archive a;
  const auto& c = ckpt.config;
  a.set("kind", std::string("model"));
  a.set("mode", std::string(to_string(c.mode)));
  a.set("alpha", c.alpha);
  a.set("Z", c.Z);
  a.set("alpha_w", c.alpha_w);
  a.set("alpha_v", c.alpha_v);
  a.set("alpha_a", c.alpha_a);
  a.set("alpha_wv", c.alpha_wv);
  a.set("alpha_wa", c.alpha_wa);
  a.set("alpha_va", c.alpha_va);
  a.set("alpha_wva", c.alpha_wva);
  a.set("embedding_dim", std::to_string(ckpt.params.embedding_dim));
  std::string factors;
  for (const auto& [f, fp] : ckpt.params.factors) {
    if (!factors.empty()) factors += ',';
    factors += to_string(f);
    const std::string prefix = std::string(to_string(f)) + ".";
    a.put(prefix + "w_mu", fp.w_mu);
    a.put(prefix + "w_sigma", fp.w_sigma);
    a.put(prefix + "b_mu", fp.b_mu);
    a.put(prefix + "b_sigma", fp.b_sigma);
  }
  a.set("factors", factors);
  const auto& o = ckpt.optimizer;
  a.set("optimizer.adaptive", std::string(o.config.adaptive ? "1" : "0"));
  a.set("optimizer.beta1", o.config.beta1);
  a.set("optimizer.beta2", o.config.beta2);
  a.set("optimizer.epsilon", o.config.epsilon);
  a.set("optimizer.step", std::to_string(o.step));
  a.put("optimizer.first_moment", o.first_moment);
  a.put("optimizer.second_moment", o.second_moment);
  a.set("iteration", std::to_string(ckpt.iteration));
  a.put("history", Vec(Eigen::Map<const Vec>(ckpt.history.data(),
                                         static_cast<Eigen::Index>(ckpt.history.size()))));
  return a;
}

ModelCheckpoint model_checkpoint_from(const Archive& a) {
  require(a.get("kind") == "model", ErrorKind::parse, "archive does not hold a model checkpoint");
  ModelCheckpoint ckpt;
  auto& c = ckpt.config;
  c.mode = mode_from_string(a.get("mode"));
  c.alpha = a.get_double("alpha");
  c.Z = a.get_double("Z");
  c.alpha_w = a.get_double("alpha_w");
  c.alpha_v = a.get_double("alpha_v");
  c.alpha_a = a.get_double("alpha_a");
  c.alpha_wv = a.get_double("alpha_wv");
  c.alpha_wa = a.get_double("alpha_wa");
  c.alpha_va = a.get_double("alpha_va");
  c.alpha_wva = a.get_double("alpha_wva");
  ckpt.params.embedding_dim = static_cast<int>(a.get_int("embedding_dim"));
  std::istringstream fs(a.get("factors"));
  std::string name;
  while (std::getline(fs, name, ',')) {
    if (name.empty()) continue;
    FactorParams fp;
    fp.id = factor_from_string(name);
    fp.w_mu = a.tensor(name + ".w_mu");
    fp.w_sigma = a.tensor(name + ".w_sigma");
    fp.b_mu = a.vector(name + ".b_mu");
    fp.b_sigma = a.vector(name + ".b_sigma");
    fp.validate();
    ckpt.params.factors.emplace(fp.id, std::move(fp));
  }
  auto& o = ckpt.optimizer;
  o.config.adaptive = a.get("optimizer.adaptive") == "1";
  o.config.beta1 = a.get_double("optimizer.beta1");
  o.config.beta2 = a.get_double("optimizer.beta2");
  o.config.epsilon = a.get_double("optimizer.epsilon");
  o.step = a.get_int("optimizer.step");
  o.first_moment = a.vector("optimizer.first_moment");
  o.second_moment = a.vector("optimizer.second_moment");
  ckpt.iteration = static_cast<int>(a.get_int("iteration"));
  const Vec h = a.vector("history");
  ckpt.history.assign(h.data(), h.data() + h.size());
  return ckpt;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  to_archive(ckpt).write(path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  return model_checkpoint_from(Archive::read(path));
}

}  // namespace mmb
