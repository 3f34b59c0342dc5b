// nngp_lab: command-line front end for the experiment pipelines.
//
//   nngp_lab spectrum --config run.cfg --out runs/spec1 --seed 7 --threads 1
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 hypothesis
// violation.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nngp/config.hpp"
#include "nngp/errors.hpp"
#include "nngp/harness.hpp"
#include "nngp/parallel.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string format = "csv";
  std::vector<std::string> overrides;
  bool print_config = false;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "config file (key = value lines, or JSON)");
  sub->add_option("--out", o.out, "output directory (default: $NNGP_OUT_ROOT/<kind>-<hash>)");
  sub->add_option("--seed", o.seed, "RNG seed (overrides the config)");
  sub->add_option("--threads", o.threads, "worker threads (0: hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--format", o.format, "tabular output format")
      ->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--set", o.overrides, "override one knob, key=value (repeatable)");
  sub->add_flag("--print-config", o.print_config, "print the resolved config and exit");
}

std::string default_out_dir(const nngp::ExperimentConfig& cfg) {
  const char* root = std::getenv("NNGP_OUT_ROOT");
  const std::filesystem::path base = (root && *root) ? root : "runs";
  return (base / (std::string(nngp::to_string(cfg.kind)) + "-" + cfg.hash().substr(0, 8))).string();
}

int run(nngp::ExperimentKind kind, const Options& o) {
  nngp::ExperimentConfig cfg = o.config.empty() ? nngp::default_config(kind)
                                                : nngp::ExperimentConfig::load(o.config, kind);
  if (cfg.kind != kind)
    throw nngp::ConfigError("config declares kind '" + std::string(nngp::to_string(cfg.kind)) +
                            "' but the '" + std::string(nngp::to_string(kind)) +
                            "' subcommand was given");
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw nngp::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  if (o.print_config) {
    std::cout << cfg.to_text();
    return 0;
  }
  if (o.threads > 0) nngp::set_worker_threads(o.threads);

  const std::string dir = cfg.output_dir.empty() ? default_out_dir(cfg) : cfg.output_dir;
  const auto format = o.format == "json" ? nngp::OutputFormat::json : nngp::OutputFormat::csv;
  const nngp::RunResult result = nngp::run_experiment(cfg, dir, format);
  std::cout << "output: " << result.directory << "\n";
  std::cout << result.manifest.summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-width NNGP spectra and generalisation experiments"};
  app.require_subcommand(1);
  Options opts;
  struct Entry {
    const char* name;
    nngp::ExperimentKind kind;
    const char* help;
  };
  const Entry entries[] = {
      {"spectrum", nngp::ExperimentKind::spectrum, "finite-width kernel spectrum vs. MP map"},
      {"descent", nngp::ExperimentKind::descent, "generalisation error sweep over widths"},
      {"variance", nngp::ExperimentKind::variance, "entrywise kernel variance vs. width"},
      {"limits", nngp::ExperimentKind::limits, "asymptotic endpoints of the error curve"},
  };
  std::vector<std::pair<CLI::App*, nngp::ExperimentKind>> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, opts);
    subs.emplace_back(sub, e.kind);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& [sub, kind] : subs)
      if (sub->parsed()) return run(kind, opts);
  } catch (const std::exception& e) {
    std::cerr << "nngp_lab: " << nngp::error_category(e) << ": " << e.what() << "\n";
    return nngp::exit_code_for(e);
  }
  return 2;
}
