// pssc: synthetic data, clustering runs, out-of-sample runs and scoring.
//
//   pssc synth      --config c.txt --out dir      -> dir/data.csv
//   pssc run        --config c.txt [--seed N] [--out dir] [--dump-affinity] [--labels-col]
//   pssc largescale --config c.txt ...
//   pssc eval       --truth labels.csv --pred dir/labels.csv
//
// Exit status: 0 success, 1 configuration or input error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pssc/app.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool dump_affinity = false;
  bool labels_col = false;
  std::string truth;
  std::string pred;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "root seed (overrides config)");
  cmd->add_option("--out", f.out, "output directory (overrides config)");
}

pssc::RunSettings settings(const CLI::App* cmd, const Flags& f) {
  const auto kv = f.config.empty() ? pssc::KeyValueConfig{} : pssc::KeyValueConfig::load(f.config);
  pssc::CliOverrides o;
  if (cmd->count("--seed")) o.seed = f.seed;
  if (cmd->count("--out")) o.out = f.out;
  o.dump_affinity = f.dump_affinity;
  o.labels_col = f.labels_col;
  return pssc::settings_from_config(kv, o);
}

void print_metrics(const pssc::MetricReport& m) {
  std::printf("acc = %.17g\nnmi = %.17g\npurity = %.17g\n", m.acc, m.nmi, m.purity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-supervised deep subspace clustering"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "write a union-of-subspaces dataset as CSV");
  add_common(synth, f);

  auto* run = app.add_subcommand("run", "train, build the affinity and cluster");
  add_common(run, f);
  run->add_flag("--dump-affinity", f.dump_affinity, "write affinity.matbin");
  run->add_flag("--labels-col", f.labels_col, "last CSV column holds true labels");

  auto* large = app.add_subcommand("largescale", "cluster a subsample, label the rest by nearest neighbor");
  add_common(large, f);
  large->add_flag("--dump-affinity", f.dump_affinity, "write affinity.matbin (core samples)");
  large->add_flag("--labels-col", f.labels_col, "last CSV column holds true labels");

  auto* eval = app.add_subcommand("eval", "score predicted labels against reference labels");
  eval->add_option("--config", f.config, "config file (reads nmi_norm)");
  eval->add_option("--truth", f.truth, "reference labels (CSV, last column)")->required();
  eval->add_option("--pred", f.pred, "predicted labels (CSV, last column)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) {
      const auto s = settings(synth, f);
      std::cout << pssc::cmd_synth(s).string() << '\n';
    } else if (run->parsed()) {
      const auto r = pssc::cmd_run(settings(run, f));
      std::cout << pssc::format_report(r, "run");
    } else if (large->parsed()) {
      const auto r = pssc::cmd_largescale(settings(large, f));
      std::cout << pssc::format_report(r, "largescale");
    } else if (eval->parsed()) {
      const auto kv = f.config.empty() ? pssc::KeyValueConfig{} : pssc::KeyValueConfig::load(f.config);
      const auto norm =
          kv.get("nmi_norm", "arithmetic") == "geometric" ? pssc::NmiNorm::geometric : pssc::NmiNorm::arithmetic;
      print_metrics(pssc::cmd_eval(f.truth, f.pred, norm));
    }
  } catch (const pssc::ConfigError& e) {
    std::cerr << "pssc: config error: " << e.what() << '\n';
    return 1;
  } catch (const pssc::IngestionError& e) {
    std::cerr << "pssc: input error: " << e.what() << '\n';
    return 1;
  } catch (const pssc::ContractViolation& e) {
    std::cerr << "pssc: invalid input: " << e.what() << '\n';
    return 1;
  } catch (const pssc::DivergenceError& e) {
    std::cerr << "pssc: diverged (" << e.term() << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pssc: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
