#include "mmb/run_config.hpp"

#include "mmb/checkpoint.hpp"
#include "mmb/error.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace mmb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected a number, got '" + v + "'");
  }
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& v) {
  Int out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  require(res.ec == std::errc() && res.ptr == v.data() + v.size(), ErrorKind::config,
          key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::config, key + ": expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_integer<int>(key, item));
  }
  return out;
}

std::string from_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define MMB_STR(name)                                             \
  Field {                                                         \
    #name, [](const RunConfig& c) { return c.name; },             \
        [](RunConfig& c, const std::string& v) { c.name = v; }    \
  }
#define MMB_REAL(name)                                                          \
  Field {                                                                       \
    #name, [](const RunConfig& c) { return format_double(c.name); },            \
        [](RunConfig& c, const std::string& v) { c.name = to_real(#name, v); }  \
  }
#define MMB_INT(name)                                                                          \
  Field {                                                                                      \
    #name, [](const RunConfig& c) { return std::to_string(c.name); },                          \
        [](RunConfig& c, const std::string& v) { c.name = to_integer<decltype(c.name)>(#name, v); } \
  }
#define MMB_BOOL(name)                                                          \
  Field {                                                                       \
    #name, [](const RunConfig& c) { return from_bool(c.name); },                \
        [](RunConfig& c, const std::string& v) { c.name = to_bool(#name, v); }  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      MMB_STR(dataset),
      MMB_STR(word_vectors),
      MMB_STR(out),
      MMB_STR(embeddings),
      MMB_STR(checkpoint),
      MMB_STR(classifier),
      Field{"mode", [](const RunConfig& c) { return to_string(c.mode); },
            [](RunConfig& c, const std::string& v) {
              try {
                c.mode = mode_from_string(v);
              } catch (const Error& e) {
                fail(ErrorKind::config, e.what());
              }
            }},
      MMB_REAL(beta),
      Field{"alpha", [](const RunConfig& c) { return c.alpha ? format_double(*c.alpha) : ""; },
            [](RunConfig& c, const std::string& v) {
              if (v.empty())
                c.alpha.reset();
              else
                c.alpha = to_real("alpha", v);
            }},
      MMB_REAL(Z),
      MMB_REAL(alpha_w),
      MMB_REAL(alpha_v),
      MMB_REAL(alpha_a),
      MMB_REAL(alpha_wv),
      MMB_REAL(alpha_wa),
      MMB_REAL(alpha_va),
      MMB_REAL(alpha_wva),
      MMB_BOOL(normalize_embeddings),
      MMB_INT(iterations),
      MMB_INT(inner_steps),
      MMB_REAL(lr),
      MMB_REAL(tolerance),
      Field{"task",
            [](const RunConfig& c) {
              return std::string(c.task == TaskKind::regression ? "regression" : "classification");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "regression")
                c.task = TaskKind::regression;
              else if (v == "classification")
                c.task = TaskKind::classification;
              else
                fail(ErrorKind::config, "task: expected regression or classification, got '" + v + "'");
            }},
      MMB_INT(classes),
      Field{"hidden", [](const RunConfig& c) { return from_int_list(c.hidden); },
            [](RunConfig& c, const std::string& v) { c.hidden = to_int_list("hidden", v); }},
      MMB_INT(clf_epochs),
      MMB_INT(clf_batch),
      MMB_REAL(clf_lr),
      MMB_INT(finetune_steps),
      MMB_REAL(finetune_lr),
      MMB_BOOL(finetune_renormalize),
      MMB_BOOL(finetune_update_head),
      MMB_BOOL(text_only),
      MMB_BOOL(no_pe),
      MMB_BOOL(no_finetune),
      MMB_REAL(label_fraction),
      MMB_REAL(test_fraction),
      MMB_INT(seed),
      MMB_INT(bench_segments),
      MMB_INT(bench_length),
      MMB_INT(bench_repetitions),
      MMB_INT(bench_embedding_dim),
      MMB_INT(bench_visual_dim),
      MMB_INT(bench_acoustic_dim),
      MMB_STR(hist_factor),
      Field{"hist_dims", [](const RunConfig& c) { return from_int_list(c.hist_dims); },
            [](RunConfig& c, const std::string& v) { c.hist_dims = to_int_list("hist_dims", v); }},
      MMB_INT(hist_bins),
  };
  return table;
}

#undef MMB_STR
#undef MMB_REAL
#undef MMB_INT
#undef MMB_BOOL

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  fail(ErrorKind::config, "unknown config key '" + key + "'");
}

std::string under_out(const std::string& explicit_path, const std::string& out,
                      const char* name) {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(out) / name).string();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, value);
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "schema_version = " << kRunConfigSchema << "\n";
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << "\n";
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool saw_version = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    const std::string where = "config line " + std::to_string(line) + ": ";
    require(eq != std::string::npos, ErrorKind::config, where + "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!saw_version) {
      require(key == "schema_version", ErrorKind::config,
              where + "the first key must be schema_version");
      require(value == std::to_string(kRunConfigSchema), ErrorKind::config,
              where + "unsupported schema_version " + value);
      saw_version = true;
      continue;
    }
    require(key != "schema_version", ErrorKind::config, where + "duplicate schema_version");
    try {
      cfg.set(key, value);
    } catch (const Error& e) {
      fail(ErrorKind::config, where + e.what());
    }
  }
  require(saw_version, ErrorKind::config, "config is missing schema_version");
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::embeddings_path() const { return under_out(embeddings, out, "embeddings.tsv"); }
std::string RunConfig::checkpoint_path() const { return under_out(checkpoint, out, "checkpoint.txt"); }
std::string RunConfig::classifier_path() const { return under_out(classifier, out, "classifier.txt"); }

TemperatureConfig RunConfig::temperatures() const {
  TemperatureConfig t;
  t.mode = mode;
  t.Z = Z;
  if (alpha)
    t.alpha = *alpha;
  else
    t.set_beta(beta);
  t.alpha_w = alpha_w;
  t.alpha_v = alpha_v;
  t.alpha_a = alpha_a;
  t.alpha_wv = alpha_wv;
  t.alpha_wa = alpha_wa;
  t.alpha_va = alpha_va;
  t.alpha_wva = alpha_wva;
  if (text_only) {
    t.alpha_v = t.alpha_a = 0.0;
    t.alpha_wv = t.alpha_wa = t.alpha_va = t.alpha_wva = 0.0;
  }
  return t;
}

FitOptions RunConfig::fit_options() const {
  FitOptions o;
  o.iterations = iterations;
  o.inner_steps = inner_steps;
  o.lr = lr;
  o.seed = seed;
  o.tolerance = tolerance;
  return o;
}

void RunConfig::validate() const {
  try {
    temperatures().validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  require(beta > 0.0, ErrorKind::config, "beta must be positive");
  require(label_fraction > 0.0 && label_fraction <= 1.0, ErrorKind::config,
          "label_fraction must lie in (0, 1]");
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::config,
          "test_fraction must lie in (0, 1)");
  require(iterations >= 0 && inner_steps >= 1, ErrorKind::config,
          "iterations must be >= 0 and inner_steps >= 1");
  require(lr >= 0.0 && tolerance >= 0.0, ErrorKind::config, "lr and tolerance must be >= 0");
  require(classes >= 2, ErrorKind::config, "classes must be >= 2");
  require(std::all_of(hidden.begin(), hidden.end(), [](int h) { return h > 0; }),
          ErrorKind::config, "hidden widths must be positive");
  require(clf_epochs >= 0 && clf_batch >= 1 && clf_lr > 0.0, ErrorKind::config,
          "invalid classifier hyperparameters");
  require(finetune_steps >= 0 && finetune_lr >= 0.0, ErrorKind::config,
          "invalid fine-tuning hyperparameters");
  require(bench_repetitions >= 5, ErrorKind::config, "bench_repetitions must be >= 5");
  require(bench_segments >= 0 && bench_length >= 1 &&
              bench_embedding_dim >= 1 && bench_visual_dim >= 1 && bench_acoustic_dim >= 1,
          ErrorKind::config, "invalid benchmark sizes");
  require(hist_bins >= 1, ErrorKind::config, "hist_bins must be >= 1");
  require(std::all_of(hist_dims.begin(), hist_dims.end(), [](int d) { return d >= 0; }),
          ErrorKind::config, "hist_dims must be nonnegative");
  try {
    (void)factor_from_string(hist_factor);
  } catch (const Error&) {
    require(hist_factor == "w", ErrorKind::config, "unknown hist_factor '" + hist_factor + "'");
  }
  require(!out.empty(), ErrorKind::config, "out must be set");
}

}  // namespace mmb
