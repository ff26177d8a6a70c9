// Command-line driver: fit, train-eval, benchmark, histogram.

#include "mmb/mmb.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> mode;
  std::optional<double> label_fraction;
  bool text_only = false;
  bool no_pe = false;
  bool no_finetune = false;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration file")->required();
  cmd->add_option("--mode", o.mode, "Model mode: B1 or B2");
  cmd->add_option("--label-fraction", o.label_fraction, "Fraction of training labels in (0, 1]");
  cmd->add_flag("--text-only", o.text_only, "Model only the language modality");
  cmd->add_flag("--no-pe", o.no_pe, "Disable positional encodings");
  cmd->add_flag("--no-finetune", o.no_finetune, "Skip embedding fine-tuning");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output directory");
}

int report(mmb_status status) {
  if (status != MMB_OK) std::fprintf(stderr, "mmb: error: %s\n", mmb_last_error());
  return mmb_exit_code(status);
}

using ConfigPtr = std::unique_ptr<mmb_config, decltype(&mmb_config_free)>;

mmb_status load_config(const Overrides& o, ConfigPtr& out) {
  mmb_config* raw = nullptr;
  mmb_status s = mmb_config_load(o.config.c_str(), &raw);
  if (s != MMB_OK) return s;
  out.reset(raw);
  auto set = [&](const char* key, const std::string& value) {
    if (s == MMB_OK) s = mmb_config_set(raw, key, value.c_str());
  };
  if (o.mode) set("mode", *o.mode);
  if (o.label_fraction) set("label_fraction", std::to_string(*o.label_fraction));
  if (o.text_only) set("text_only", "true");
  if (o.no_pe) set("no_pe", "true");
  if (o.no_finetune) set("no_finetune", "true");
  if (o.seed) set("seed", std::to_string(*o.seed));
  if (o.out) set("out", *o.out);
  return s;
}

int run(const std::string& name, const Overrides& o) {
  ConfigPtr cfg(nullptr, &mmb_config_free);
  if (mmb_status s = load_config(o, cfg); s != MMB_OK) return report(s);

  if (name == "fit") {
    mmb_fit_summary r{};
    const mmb_status s = mmb_cmd_fit(cfg.get(), &r);
    if (s == MMB_OK)
      std::printf("fit: %zu segments, %d iterations, objective %.6g -> %.6g, %zu degenerate\n",
                  r.segments, r.iterations, r.initial_objective, r.final_objective, r.degenerate);
    return report(s);
  }
  if (name == "train-eval") {
    mmb_eval_summary r{};
    const mmb_status s = mmb_cmd_train_eval(cfg.get(), &r);
    if (s == MMB_OK) {
      std::printf("train-eval: %zu train (%zu labeled), %zu test, fine-tuned %s\n", r.n_train,
                  r.n_labeled, r.n_test, r.fine_tuned ? "yes" : "no");
      std::printf("accuracy %.4f  f1 %.4f  mae %.4f  r ", r.accuracy, r.f1, r.mae);
      if (r.pearson_defined)
        std::printf("%.4f\n", r.pearson_r);
      else
        std::printf("undefined\n");
    }
    return report(s);
  }
  if (name == "benchmark") {
    mmb_benchmark_summary r{};
    const mmb_status s = mmb_cmd_benchmark(cfg.get(), &r);
    if (s == MMB_OK) {
      std::printf("benchmark: %zu segments x %d repetitions, %.4f s total, %zu parameters\n",
                  r.segments, r.repetitions, r.total_seconds, r.parameter_count);
      if (r.ips_defined)
        std::printf("IPS %.1f +- %.1f\n", r.ips_mean, r.ips_std);
      else
        std::printf("IPS undefined (no segments)\n");
    }
    return report(s);
  }
  mmb_histogram_summary r{};
  const mmb_status s = mmb_cmd_histogram(cfg.get(), &r);
  if (s == MMB_OK)
    std::printf("histogram: %zu dimensions, %zu samples each\n", r.dims, r.samples_per_dim);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal utterance embeddings: fitting, evaluation and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mmb_version()));

  Overrides o;
  const std::pair<const char*, const char*> commands[] = {
      {"fit", "Fit model parameters and utterance embeddings"},
      {"train-eval", "Train the prediction head and evaluate on the test split"},
      {"benchmark", "Time embedding inference on synthetic segments"},
      {"histogram", "Write per-dimension feature histograms"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (const auto* sub : app.get_subcommands()) return run(sub->get_name(), o);
  return 1;
}
