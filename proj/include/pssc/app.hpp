#pragma once

// Command implementations behind the `pssc` tool: settings from a flat config,
// dataset loading, pipeline runs and report/artifact writing.
//
// Output directory layout:
//   report.txt        effective config (re-runnable) followed by report.* results
//   labels.csv        header "label", one predicted cluster per sample
//   trace.csv         per-epoch losses, pretraining epochs first
//   affinity.matbin   optional, --dump-affinity
//   checkpoint.matbin optional, checkpoint = true

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pssc/binio.hpp"
#include "pssc/config.hpp"
#include "pssc/dataset.hpp"
#include "pssc/largescale.hpp"
#include "pssc/metrics.hpp"
#include "pssc/pipeline.hpp"

namespace pssc {

struct RunSettings {
  std::string data = "synth";  // "synth" or a file path
  DataFormat format = DataFormat::csv;
  std::string labels_path;     // IDX label file or label CSV
  bool labels_col = false;
  SynthSpec synth;

  Architecture arch{{}, 16};
  TrainConfig train;
  AffinityConfig aff;

  std::size_t core_size = kDefaultCoreSize;
  std::size_t neighbors = 1;

  std::uint64_t seed = 0;
  std::string out = "pssc_out";
  bool dump_affinity = false;
  bool checkpoint = false;
  NmiNorm nmi_norm = NmiNorm::arithmetic;
  double psnr_peak = 0.0;  // 0: dynamic range of X
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dump_affinity = false;
  bool labels_col = false;
};

inline RunSettings settings_from_config(const KeyValueConfig& kv, const CliOverrides& cli = {}) {
  RunSettings s;
  s.seed = kv.get_u64("seed", 0);
  if (cli.seed) s.seed = *cli.seed;

  s.data = kv.get("data", s.data);
  s.format = parse_format(kv.get("format", "csv"));
  s.labels_path = kv.get("labels", "");
  s.labels_col = cli.labels_col || kv.get_bool("labels_col", false);

  s.synth.k = kv.get_size("synth.k", s.synth.k);
  s.synth.q = kv.get_size("synth.q", s.synth.q);
  s.synth.d = kv.get_size("synth.d", s.synth.d);
  s.synth.per_cluster = kv.get_size("synth.per_cluster", s.synth.per_cluster);
  s.synth.noise = kv.get_double("synth.noise", s.synth.noise);
  s.synth.seed = kv.get_u64("synth.seed", s.seed);

  s.arch.hidden = kv.get_sizes("hidden", s.arch.hidden);
  s.arch.latent = kv.get_size("latent", s.arch.latent);

  TrainConfig& t = s.train;
  t.gamma1 = kv.get_double("gamma1", t.gamma1);
  t.gamma2 = kv.get_double("gamma2", t.gamma2);
  t.gamma3 = kv.get_double("gamma3", t.gamma3);
  t.lr_pretrain = kv.get_double("lr_pretrain", t.lr_pretrain);
  t.lr_finetune = kv.get_double("lr_finetune", t.lr_finetune);
  t.epochs_pretrain = kv.get_size("epochs_pretrain", t.epochs_pretrain);
  t.epochs_finetune = kv.get_size("epochs_finetune", t.epochs_finetune);
  t.thres = kv.get_double("thres", t.thres);
  t.margin = kv.get_double("margin", t.margin);
  t.warmup_epochs = kv.get_size("warmup_epochs", t.warmup_epochs);
  t.freeze_laplacian = kv.get_bool("freeze_laplacian", t.freeze_laplacian);
  t.normalize_pair_losses = kv.get_bool("normalize_pair_losses", t.normalize_pair_losses);
  t.early_stop = kv.get_bool("early_stop", t.early_stop);
  t.seed = s.seed;

  AffinityConfig& a = s.aff;
  a.k = kv.get_size("k", s.data == "synth" ? s.synth.k : a.k);
  a.q = kv.get_size("q", s.data == "synth" ? s.synth.q : a.q);
  a.alpha_exp = kv.get_double("alpha", a.alpha_exp);
  a.kmeans_restarts = kv.get_size("kmeans_restarts", a.kmeans_restarts);
  a.normalize_rows = kv.get_bool("normalize_rows", a.normalize_rows);
  a.seed = s.seed;

  s.core_size = kv.get_size("m", s.core_size);
  s.neighbors = kv.get_size("neighbors", s.neighbors);

  s.out = kv.get("out", s.out);
  if (cli.out) s.out = *cli.out;
  s.dump_affinity = cli.dump_affinity || kv.get_bool("dump_affinity", false);
  s.checkpoint = kv.get_bool("checkpoint", false);
  const std::string norm = kv.get("nmi_norm", "arithmetic");
  if (norm == "arithmetic")
    s.nmi_norm = NmiNorm::arithmetic;
  else if (norm == "geometric")
    s.nmi_norm = NmiNorm::geometric;
  else
    throw ConfigError("nmi_norm must be 'arithmetic' or 'geometric'");
  s.psnr_peak = kv.get_double("psnr_peak", 0.0);

  kv.reject_unknown();
  t.validate();
  if (s.arch.latent == 0) throw ConfigError("latent must be positive");
  if (s.neighbors == 0) throw ConfigError("neighbors must be at least 1");
  return s;
}

// Every setting as "key = value", parseable by settings_from_config.
inline std::string echo_settings(const RunSettings& s) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const char* fmt = s.format == DataFormat::csv ? "csv" : s.format == DataFormat::idx ? "idx" : "matbin";
  kv("seed", std::to_string(s.seed));
  kv("data", s.data);
  kv("format", fmt);
  if (!s.labels_path.empty()) kv("labels", s.labels_path);
  kv("labels_col", b(s.labels_col));
  if (s.data == "synth") {
    kv("synth.k", std::to_string(s.synth.k));
    kv("synth.q", std::to_string(s.synth.q));
    kv("synth.d", std::to_string(s.synth.d));
    kv("synth.per_cluster", std::to_string(s.synth.per_cluster));
    kv("synth.noise", format_double(s.synth.noise));
    kv("synth.seed", std::to_string(s.synth.seed));
  }
  kv("hidden", format_sizes(s.arch.hidden));
  kv("latent", std::to_string(s.arch.latent));
  const TrainConfig& t = s.train;
  kv("gamma1", format_double(t.gamma1));
  kv("gamma2", format_double(t.gamma2));
  kv("gamma3", format_double(t.gamma3));
  kv("lr_pretrain", format_double(t.lr_pretrain));
  kv("lr_finetune", format_double(t.lr_finetune));
  kv("epochs_pretrain", std::to_string(t.epochs_pretrain));
  kv("epochs_finetune", std::to_string(t.epochs_finetune));
  kv("thres", format_double(t.thres));
  kv("margin", format_double(t.margin));
  kv("warmup_epochs", std::to_string(t.warmup_epochs));
  kv("freeze_laplacian", b(t.freeze_laplacian));
  kv("normalize_pair_losses", b(t.normalize_pair_losses));
  kv("early_stop", b(t.early_stop));
  kv("k", std::to_string(s.aff.k));
  kv("q", std::to_string(s.aff.q));
  kv("alpha", format_double(s.aff.alpha_exp));
  kv("kmeans_restarts", std::to_string(s.aff.kmeans_restarts));
  kv("normalize_rows", b(s.aff.normalize_rows));
  kv("m", std::to_string(s.core_size));
  kv("neighbors", std::to_string(s.neighbors));
  kv("out", s.out);
  kv("dump_affinity", b(s.dump_affinity));
  kv("checkpoint", b(s.checkpoint));
  kv("nmi_norm", s.nmi_norm == NmiNorm::arithmetic ? "arithmetic" : "geometric");
  kv("psnr_peak", format_double(s.psnr_peak));
  return os.str();
}

inline Dataset load_dataset(const RunSettings& s) {
  if (s.data == "synth") return make_subspace_data(s.synth);
  Dataset ds;
  switch (s.format) {
    case DataFormat::csv:
      ds = load_csv(s.data, s.labels_col);
      break;
    case DataFormat::idx:
      return load_idx(s.data, s.labels_path);
    case DataFormat::matbin:
      ds = load_matbin_dataset(s.data);
      break;
  }
  if (!s.labels_path.empty()) {
    auto y = parse_label_csv(read_file(s.labels_path));
    if (y.size() != ds.n())
      throw IngestionError("label file has " + std::to_string(y.size()) + " entries for " +
                               std::to_string(ds.n()) + " samples",
                           0);
    ds.labels = std::move(y);
  }
  return ds;
}

struct RunReport {
  std::string config_echo;
  std::optional<MetricReport> metrics;
  StageTimes seconds;
  double total_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t epochs_pretrain_run = 0;
  std::size_t epochs_finetune_run = 0;
  std::string trace_file = "trace.csv";
  std::vector<std::size_t> labels;
};

inline std::string format_report(const RunReport& r, const std::string& command) {
  std::ostringstream os;
  os << "# pssc " << command << " report\n" << r.config_echo;
  auto kv = [&](const std::string& k, const std::string& v) { os << "report." << k << " = " << v << '\n'; };
  kv("command", command);
  kv("n", std::to_string(r.n));
  kv("dim", std::to_string(r.dim));
  if (r.metrics) {
    kv("acc", format_double(r.metrics->acc));
    kv("nmi", format_double(r.metrics->nmi));
    kv("purity", format_double(r.metrics->purity));
  }
  if (r.metrics && r.metrics->psnr) kv("psnr", format_double(*r.metrics->psnr));
  kv("epochs_pretrain_run", std::to_string(r.epochs_pretrain_run));
  kv("epochs_finetune_run", std::to_string(r.epochs_finetune_run));
  kv("seconds.pretrain", format_double(r.seconds.pretrain));
  kv("seconds.finetune", format_double(r.seconds.finetune));
  kv("seconds.affinity", format_double(r.seconds.affinity));
  kv("seconds.spectral", format_double(r.seconds.spectral));
  kv("seconds.total", format_double(r.total_seconds));
  kv("trace", r.trace_file);
  kv("labels", "labels.csv");
  return os.str();
}

namespace detail {

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

template <class F>
void write_to(const std::filesystem::path& path, F&& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  body(os);
}

inline MetricReport score(const Dataset& ds, std::span<const std::size_t> pred, const Mat& xhat,
                          const RunSettings& s) {
  MetricReport m = evaluate(*ds.labels, pred, s.nmi_norm);
  const double peak = s.psnr_peak > 0.0 ? s.psnr_peak : dynamic_range(ds.X);
  if (peak > 0.0) m.psnr = psnr(ds.X, xhat, peak);
  return m;
}

inline void write_common(const std::filesystem::path& out, const RunReport& r, const TrainTrace& trace,
                         const std::string& command) {
  write_to(out / "labels.csv", [&](std::ostream& os) { write_labels_csv(os, r.labels); });
  write_to(out / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, trace); });
  write_to(out / "report.txt", [&](std::ostream& os) { os << format_report(r, command); });
}

}  // namespace detail

// pretrain → finetune → affinity → spectral clustering → metrics.
inline RunReport cmd_run(const RunSettings& s) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = load_dataset(s);
  PipelineResult res = run_pipeline(ds.X, s.arch, s.train, s.aff);

  RunReport r;
  r.config_echo = echo_settings(s);
  r.seed = s.seed;
  r.n = ds.n();
  r.dim = ds.dim();
  r.seconds = res.seconds;
  r.epochs_pretrain_run = res.pretrain_trace.size();
  r.epochs_finetune_run = res.finetune_trace.size();
  r.labels = res.clusters.labels;
  if (ds.labels) r.metrics = detail::score(ds, r.labels, forward(res.params, ds.X, ForwardMode::full).Xhat, s);
  r.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto out = detail::prepare_out(s.out);
  TrainTrace trace = res.pretrain_trace;
  trace.append(res.finetune_trace);
  detail::write_common(out, r, trace, "run");
  if (s.dump_affinity) binio::save_matbin((out / "affinity.matbin").string(), res.clusters.A);
  if (s.checkpoint) save_checkpoint((out / "checkpoint.matbin").string(), res.params);
  return r;
}

// Subsample of m = min(core_size, n) samples, trained and clustered; the rest
// labeled by nearest neighbor in latent space.
inline RunReport cmd_largescale(const RunSettings& s) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset ds = load_dataset(s);
  const std::size_t m = std::min(s.core_size, ds.n());
  LargeScaleResult res = run_largescale(ds.X, m, s.arch, s.train, s.aff, SeededRng(s.seed).split(kSplitStream),
                                        s.neighbors);

  RunReport r;
  r.config_echo = echo_settings(s);
  r.seed = s.seed;
  r.n = ds.n();
  r.dim = ds.dim();
  r.seconds = res.core_run.seconds;
  r.epochs_pretrain_run = res.core_run.pretrain_trace.size();
  r.epochs_finetune_run = res.core_run.finetune_trace.size();
  r.labels = res.clusters.labels;
  // Out-of-sample points never pass through C, so PSNR uses the plain
  // encoder → decoder path over all samples.
  if (ds.labels)
    r.metrics = detail::score(ds, r.labels, forward(res.core_run.params, ds.X, ForwardMode::pretrain).Xhat, s);
  r.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto out = detail::prepare_out(s.out);
  TrainTrace trace = res.core_run.pretrain_trace;
  trace.append(res.core_run.finetune_trace);
  detail::write_common(out, r, trace, "largescale");
  if (s.dump_affinity) binio::save_matbin((out / "affinity.matbin").string(), res.clusters.A);
  if (s.checkpoint) save_checkpoint((out / "checkpoint.matbin").string(), res.core_run.params);
  return r;
}

// Writes <out>/data.csv: one sample per row, cluster label in the last column.
inline std::filesystem::path cmd_synth(const RunSettings& s) {
  const Dataset ds = make_subspace_data(s.synth);
  const auto out = detail::prepare_out(s.out);
  const auto path = out / "data.csv";
  detail::write_to(path, [&](std::ostream& os) { write_csv(os, ds); });
  return path;
}

// Scores a predicted label file against a reference label file.
inline MetricReport cmd_eval(const std::string& truth_path, const std::string& pred_path,
                             NmiNorm norm = NmiNorm::arithmetic) {
  const auto truth = parse_label_csv(read_file(truth_path));
  const auto pred = parse_label_csv(read_file(pred_path));
  if (truth.size() != pred.size())
    throw ConfigError("eval: " + std::to_string(truth.size()) + " reference labels vs " +
                      std::to_string(pred.size()) + " predictions");
  return evaluate(truth, pred, norm);
}

}  // namespace pssc
