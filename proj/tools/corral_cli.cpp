// Command-line front end over the C API.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corral/corral.h"

namespace {

int exit_code(corral_status s) {
  switch (s) {
    case CORRAL_OK:
      return 0;
    case CORRAL_ERR_NUMERICAL:
    case CORRAL_ERR_INVARIANT:
      return 3;
    default:
      return 2;
  }
}

int report(corral_status s) {
  if (s != CORRAL_OK) std::fprintf(stderr, "error: %s\n", corral_last_error());
  return exit_code(s);
}

void print_and_free(char* text, std::FILE* to) {
  std::fputs(text, to);
  corral_string_free(text);
}

int cmd_run(const std::string& config, int jobs, bool full_trace, std::string out) {
  corral_experiment* exp = nullptr;
  corral_status s = corral_experiment_load(config.c_str(), &exp);
  if (s != CORRAL_OK) return report(s);
  if (full_trace) corral_experiment_set_full_trace(exp, 1);
  if (out.empty()) out = corral_experiment_output(exp);

  const corral_status run = corral_experiment_run(exp, jobs);
  std::string run_error = run == CORRAL_OK ? "" : corral_last_error();
  if (run != CORRAL_OK && run != CORRAL_ERR_NUMERICAL) {
    corral_experiment_destroy(exp);
    return report(run);
  }
  // Numerical failures still leave rows (with a diagnostics row) to write.
  if (out.empty()) {
    char* csv = nullptr;
    s = corral_experiment_csv(exp, &csv);
    if (s == CORRAL_OK) print_and_free(csv, stdout);
  } else {
    s = corral_experiment_write_csv(exp, out.c_str());
  }
  if (s != CORRAL_OK) {
    corral_experiment_destroy(exp);
    return report(s);
  }
  char* summary = nullptr;
  if (corral_experiment_summary(exp, &summary) == CORRAL_OK) {
    print_and_free(summary, out.empty() ? stderr : stdout);
  }
  corral_experiment_destroy(exp);
  if (run != CORRAL_OK) {
    std::fprintf(stderr, "error: %s\n", run_error.c_str());
    return exit_code(run);
  }
  return 0;
}

int cmd_oracle(const std::string& losses, int switches, double p) {
  char* text = nullptr;
  const corral_status s = corral_oracle(losses.c_str(), switches, p, nullptr, &text);
  if (s != CORRAL_OK) return report(s);
  print_and_free(text, stdout);
  return 0;
}

int cmd_aggregate(const std::vector<std::string>& paths) {
  std::vector<const char*> ptrs;
  for (const auto& p : paths) ptrs.push_back(p.c_str());
  char* text = nullptr;
  const corral_status s = corral_aggregate(ptrs.data(), ptrs.size(), &text);
  if (s != CORRAL_OK) return report(s);
  print_and_free(text, stdout);
  return 0;
}

int cmd_generate(const std::string& config, unsigned long long seed, const std::string& out) {
  return report(corral_generate_losses(config.c_str(), seed, out.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corralled bandit learners: simulation runner and oracles"};
  app.require_subcommand(1);

  std::string config, out, losses_path;
  int jobs = 1, switches = 1;
  bool full_trace = false;
  double p = 2.0;
  unsigned long long seed = 1;
  std::vector<std::string> paths;

  auto* run = app.add_subcommand("run", "run an experiment config and emit the CSV trace");
  run->add_option("--config", config, "JSON config file")->required();
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--full-trace", full_trace, "emit every round instead of T/4, T/2, T");
  run->add_option("--out", out, "CSV path (default: config output, else stdout)");

  auto* oracle = app.add_subcommand("oracle", "print the optimal switching comparator");
  oracle->add_option("--losses", losses_path, "loss file")->required();
  oracle->add_option("--switches", switches, "number of segments S")->required();
  oracle->add_option("--p", p, "norm exponent of the action ball");

  auto* aggregate = app.add_subcommand("aggregate", "mean/stderr summary over trace CSVs");
  aggregate->add_option("paths", paths, "CSV files")->required();

  auto* generate = app.add_subcommand("generate", "write the loss file a config produces");
  generate->add_option("--config", config, "JSON config file")->required();
  generate->add_option("--seed", seed, "seed");
  generate->add_option("--out", out, "loss file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run) return cmd_run(config, jobs, full_trace, out);
  if (*oracle) return cmd_oracle(losses_path, switches, p);
  if (*aggregate) return cmd_aggregate(paths);
  if (*generate) return cmd_generate(config, seed, out);
  return 2;
}
