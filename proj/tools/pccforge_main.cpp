#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pccforge/core.hpp"
#include "pccforge/dataset.hpp"
#include "pccforge/eval.hpp"
#include "pccforge/geometry.hpp"
#include "pccforge/io.hpp"
#include "pccforge/remap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pccforge;

namespace {

constexpr std::string_view kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PCCFORGE_LOG: quiet | warn (default) | info | debug
int log_threshold() {
  static const int level = [] {
    const char* raw = std::getenv("PCCFORGE_LOG");
    if (raw == nullptr) return 1;
    const std::string v(raw);
    if (v == "quiet") return 0;
    if (v == "warn") return 1;
    if (v == "info") return 2;
    if (v == "debug") return 3;
    return 1;
  }();
  return level;
}

void log_warn(const std::string& msg) {
  if (log_threshold() >= 1) std::cerr << "[warn] " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (log_threshold() >= 2) std::cerr << "[info] " << msg << "\n";
}

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Global {
  std::string root;
  bool strict = true;
  int threads = 0;
  bool stamp = false;

  io::LabelPolicy policy() const {
    return strict ? io::LabelPolicy::Strict : io::LabelPolicy::Permissive;
  }
  fs::path root_or_usage() const {
    if (root.empty()) throw UsageError("--root is required for this subcommand");
    return root;
  }
};

void print_report(json j, const Global& g) {
  if (g.stamp) j["generated_at"] = utc_now();
  std::cout << j.dump(2) << "\n";
}

void write_text(const fs::path& p, std::string_view body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot open for writing: " + p.string());
  }
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "short write: " + p.string());
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

SequenceId seq_or_usage(const std::string& text) {
  auto id = SequenceId::try_parse(text);
  if (!id) {
    throw UsageError("invalid sequence id '" + text +
                     "' (1-3 digit index, 0..999)");
  }
  return *id;
}

std::vector<SequenceId> resolve_seqs(const std::vector<std::string>& given,
                                     const fs::path& root) {
  std::vector<SequenceId> out;
  if (given.empty()) {
    out = dataset::list_sequences(root);
  } else {
    for (const auto& s : given) out.push_back(seq_or_usage(s));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

json seq_names(std::span<const SequenceId> seqs) {
  json arr = json::array();
  for (const auto& s : seqs) arr.push_back(s.str());
  return arr;
}

io::SourceFormat parse_format(const std::string& name) {
  if (name == "xyzl") return io::SourceFormat::XyzLabelText;
  if (name == "ply") return io::SourceFormat::AsciiPly;
  throw UsageError("unknown format: " + name);
}

int run_convert(const Global& g, const std::string& format,
                const std::string& input, const std::string& mapping,
                const std::string& sequence, const std::string& label_field) {
  const fs::path root = g.root_or_usage();
  const SequenceId seq = seq_or_usage(sequence);

  auto parsed = io::parse_source(input, parse_format(format), label_field);
  log_info("parsed " + std::to_string(parsed.qc.total_points) + " points, kept " +
           std::to_string(parsed.cloud.size()));
  if (parsed.qc.label_count_mismatch) {
    log_warn(input + ": no per-point labels; everything starts unassigned");
  }

  auto table = remap::load_remap_csv(mapping, unified_schema());
  auto remapped = remap::apply_remap(parsed.raw_labels, table, g.threads);
  if (remapped.unmapped > 0) {
    log_warn(std::to_string(remapped.unmapped) +
             " labels had no mapping rule and fell back to unassigned");
  }

  auto cloud = parsed.cloud.with_labels(std::move(remapped.labels));
  auto entry = dataset::build_sequence(cloud, root, seq, table.source_name);

  json j;
  j["format"] = format;
  j["input"] = input;
  j["sequence"] = seq.str();
  j["source_dataset"] = table.source_name;
  j["total_points"] = parsed.qc.total_points;
  j["kept_points"] = cloud.size();
  j["dropped_nonfinite"] = parsed.qc.dropped_nonfinite;
  j["remission_out_of_range"] = parsed.qc.remission_out_of_range;
  j["label_count_mismatch"] = parsed.qc.label_count_mismatch;
  j["unmapped_labels"] = remapped.unmapped;
  j["frames"] = entry.frame_count;
  j["points_written"] = entry.point_count;
  print_report(std::move(j), g);
  return 0;
}

int run_remap(const Global& g, const std::string& mapping,
              const std::vector<std::string>& inputs, const std::string& format,
              const std::string& label_field) {
  auto table = remap::load_remap_csv(mapping, unified_schema());
  json in_arr = json::array();
  std::uint64_t total_points = 0;
  std::uint64_t total_unmapped = 0;
  for (const auto& input : inputs) {
    auto parsed = io::parse_source(input, parse_format(format), label_field);
    auto remapped = remap::apply_remap(parsed.raw_labels, table, g.threads);
    total_points += parsed.cloud.size();
    total_unmapped += remapped.unmapped;
    in_arr.push_back({{"input", input},
                      {"points", parsed.cloud.size()},
                      {"unmapped", remapped.unmapped}});
  }
  json j;
  j["source_dataset"] = table.source_name;
  j["rule_count"] = table.rules.size();
  j["inputs"] = in_arr;
  j["total_points"] = total_points;
  j["total_unmapped"] = total_unmapped;
  print_report(std::move(j), g);
  return 0;
}

int run_split(const Global& g, const std::string& config_name) {
  const fs::path root = g.root_or_usage();
  const auto config = dataset::parse_split_config(config_name);
  if (!config) throw UsageError("unknown split config: " + config_name);
  const auto spec = dataset::published_splits(*config);
  const auto warnings = dataset::split_warnings(spec);
  for (const auto& w : warnings) log_warn(w);
  const fs::path dir = dataset::write_split_files(spec, root);

  json j;
  j["config"] = config_name;
  j["directory"] = dir.string();
  j["train_count"] = spec.train.size();
  j["val_count"] = spec.val.size();
  j["test_count"] = spec.test.size();
  j["warnings"] = warnings;
  print_report(std::move(j), g);
  return 0;
}

int run_stats(const Global& g, const std::vector<std::string>& seqs_raw,
              const std::string& out) {
  const fs::path root = g.root_or_usage();
  const auto seqs = resolve_seqs(seqs_raw, root);
  const auto schema = unified_schema();
  const auto table =
      dataset::compute_distribution(root, seqs, schema, g.threads, g.policy());
  if (table.zero_total) log_warn("no points found; percentages are all zero");
  if (table.out_of_schema > 0) {
    log_warn(std::to_string(table.out_of_schema) +
             " points carry out-of-schema labels");
  }

  const fs::path csv_path =
      out.empty() ? root / "reports" / "distribution.csv" : fs::path(out);
  std::ostringstream body;
  dataset::write_distribution_csv(table, body);
  write_text(csv_path, body.str());

  json rows = json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"label", row.label},
                    {"class_name", row.class_name},
                    {"count", row.count},
                    {"percent", row.percent}});
  }
  json j;
  j["csv"] = csv_path.string();
  j["sequences"] = seq_names(seqs);
  j["total_points"] = table.total_points;
  j["out_of_schema"] = table.out_of_schema;
  j["zero_total"] = table.zero_total;
  j["rows"] = rows;
  print_report(std::move(j), g);
  return 0;
}

std::string histogram_csv(std::span<const geom::HistogramBin> bins) {
  std::string s = "bin_start,bin_end,count\n";
  for (const auto& b : bins) {
    s += fmt_double(b.start);
    s += ',';
    s += fmt_double(b.end);
    s += ',';
    s += std::to_string(b.count);
    s += '\n';
  }
  return s;
}

int run_geom(const Global& g, const std::vector<std::string>& seqs_raw,
             unsigned bins, unsigned k, const std::string& out_dir) {
  const fs::path root = g.root_or_usage();
  const auto seqs = resolve_seqs(seqs_raw, root);
  const auto report =
      geom::summarize_geometry(root, seqs, bins, k, g.threads, g.policy());

  const fs::path dir = out_dir.empty() ? root / "reports" : fs::path(out_dir);
  std::string records;
  for (const auto& s : report.sequences) {
    json r;
    r["sequence"] = s.seq.str();
    r["density"] = s.density ? json(*s.density) : json(nullptr);
    r["mean_nn_distance"] = s.mean_nn_distance;
    r["scene_height"] = s.scene_height;
    r["mean_curvature"] = s.mean_curvature;
    r["k"] = report.neighbor_count;
    r["area_definition"] = std::string(geom::kAreaDefinition);
    records += r.dump();
    records += '\n';
  }
  const fs::path records_path = dir / "geometry.jsonl";
  write_text(records_path, records);

  const std::pair<const char*, std::span<const geom::HistogramBin>> hists[] = {
      {"hist_density.csv", report.density_hist},
      {"hist_nn_distance.csv", report.nn_distance_hist},
      {"hist_height.csv", report.height_hist},
      {"hist_curvature.csv", report.curvature_hist},
  };
  json hist_paths;
  for (const auto& [name, data] : hists) {
    const fs::path p = dir / name;
    write_text(p, histogram_csv(data));
    hist_paths[name] = p.string();
  }

  json j;
  j["sequences"] = seq_names(seqs);
  j["k"] = report.neighbor_count;
  j["bins"] = report.bins;
  j["area_definition"] = std::string(geom::kAreaDefinition);
  j["records"] = records_path.string();
  j["histograms"] = hist_paths;
  print_report(std::move(j), g);
  return 0;
}

int run_eval(const Global& g, const std::string& gt, const std::string& pred,
             const std::vector<std::string>& seqs_raw,
             const std::string& out_dir) {
  const fs::path gt_root = gt;
  const auto seqs = resolve_seqs(seqs_raw, gt_root);
  const auto report = eval::evaluate_run(gt_root, pred, seqs, g.threads);

  const fs::path dir = out_dir.empty() ? gt_root / "reports" : fs::path(out_dir);
  std::ostringstream per_class;
  eval::write_per_class_csv(report.per_class, unified_schema(), per_class);
  write_text(dir / "per_class.csv", per_class.str());

  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json summary;
  summary["mean_accuracy"] = opt(report.summary.mean_accuracy);
  summary["miou_all"] = opt(report.summary.miou_all);
  summary["miou_excl_unassigned"] = opt(report.summary.miou_excl_unassigned);
  summary["total_points"] = report.total_points;
  summary["sequences"] = seq_names(report.sequences);
  summary["accuracy_definition"] = "per-class accuracy is recall: tp / (tp + fn)";
  summary["undefined_class_policy"] =
      "classes with an empty denominator are NA and excluded from the means";
  if (g.stamp) summary["generated_at"] = utc_now();

  write_text(dir / "eval_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_emit_train_config(const Global& g, const std::string& config_name,
                          const std::string& out) {
  const auto config = dataset::parse_split_config(config_name);
  if (!config) throw UsageError("unknown split config: " + config_name);
  dataset::emit_training_config(*config, out);
  const auto hp = dataset::published_hyperparameters();

  json j;
  j["config"] = config_name;
  j["path"] = out;
  j["hyperparameters"] = {{"learning_rate", hp.learning_rate},
                          {"momentum", hp.momentum},
                          {"weight_decay", hp.weight_decay},
                          {"lr_decay", hp.lr_decay},
                          {"batch_size", hp.batch_size}};
  print_report(std::move(j), g);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pccforge: converts heterogeneous indoor lidar scans into a unified "
      "SemanticKITTI-layout dataset and reports statistics, geometry, and "
      "segmentation metrics"};
  app.set_version_flag("--version", "pccforge " + std::string(kVersion));
  app.require_subcommand(1);

  Global g;
  app.add_option("--root", g.root, "dataset root directory (holds sequences/)");
  app.add_flag("--strict,!--permissive", g.strict,
               "error on out-of-schema labels (default); --permissive keeps "
               "and counts them");
  app.add_option("--threads", g.threads, "parallelism budget; 0 = all cores")
      ->check(CLI::Range(0, 1 << 15));
  app.add_flag("--stamp", g.stamp, "add generated_at timestamps to reports");

  auto* conv = app.add_subcommand(
      "convert", "parse one source scan, remap its labels, write a sequence");
  conv->fallthrough();
  std::string conv_format, conv_input, conv_mapping, conv_sequence;
  std::string conv_label_field = "label";
  conv->add_option("--format", conv_format, "source format")
      ->required()
      ->check(CLI::IsMember({"xyzl", "ply"}));
  conv->add_option("--input", conv_input, "source scan file")->required();
  conv->add_option("--mapping", conv_mapping, "remap rules CSV")->required();
  conv->add_option("--sequence", conv_sequence, "target sequence id")
      ->required();
  conv->add_option("--label-field", conv_label_field,
                   "PLY vertex property holding the label");

  auto* rmp = app.add_subcommand(
      "remap", "validate a mapping CSV and report how source scans remap");
  rmp->fallthrough();
  std::string rmp_mapping, rmp_format = "xyzl", rmp_label_field = "label";
  std::vector<std::string> rmp_inputs;
  rmp->add_option("--mapping", rmp_mapping, "remap rules CSV")->required();
  rmp->add_option("--input", rmp_inputs, "source scan files");
  rmp->add_option("--format", rmp_format, "source format")
      ->check(CLI::IsMember({"xyzl", "ply"}));
  rmp->add_option("--label-field", rmp_label_field,
                  "PLY vertex property holding the label");

  auto* spl = app.add_subcommand("split", "write train/val/test sequence lists");
  spl->fallthrough();
  std::string spl_config;
  spl->add_option("--config", spl_config, "split configuration")
      ->required()
      ->check(CLI::IsMember({"combined", "enfield-only", "memphis-only"}));

  auto* sts = app.add_subcommand("stats", "label distribution over sequences");
  sts->fallthrough();
  std::vector<std::string> sts_seqs;
  std::string sts_out;
  sts->add_option("--seqs", sts_seqs, "sequence ids (default: all under root)");
  sts->add_option("--out", sts_out,
                  "distribution CSV path (default: <root>/reports/"
                  "distribution.csv)");

  auto* geo = app.add_subcommand("geom", "per-sequence geometric scene metrics");
  geo->fallthrough();
  std::vector<std::string> geo_seqs;
  std::string geo_out_dir;
  unsigned geo_bins = 50;
  unsigned geo_k = 16;
  geo->add_option("--seqs", geo_seqs, "sequence ids (default: all under root)");
  geo->add_option("--bins", geo_bins, "histogram bin count")
      ->check(CLI::Range(1u, 1u << 20));
  geo->add_option("--k", geo_k, "neighborhood size for curvature")
      ->check(CLI::Range(1u, 4096u));
  geo->add_option("--out-dir", geo_out_dir,
                  "report directory (default: <root>/reports)");

  auto* evl = app.add_subcommand(
      "eval", "confusion matrix, per-class IoU/accuracy, summary means");
  evl->fallthrough();
  std::string evl_gt, evl_pred, evl_out_dir;
  std::vector<std::string> evl_seqs;
  evl->add_option("--gt", evl_gt, "ground-truth dataset root")->required();
  evl->add_option("--pred", evl_pred, "prediction dataset root")->required();
  evl->add_option("--seqs", evl_seqs, "sequence ids (default: all under --gt)");
  evl->add_option("--out-dir", evl_out_dir,
                  "report directory (default: <gt>/reports)");

  auto* emt = app.add_subcommand("emit-train-config",
                                 "write the training manifest for a split");
  emt->fallthrough();
  std::string emt_config, emt_out;
  emt->add_option("--config", emt_config, "split configuration")
      ->required()
      ->check(CLI::IsMember({"combined", "enfield-only", "memphis-only"}));
  emt->add_option("--out", emt_out, "manifest file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (conv->parsed()) {
      return run_convert(g, conv_format, conv_input, conv_mapping,
                         conv_sequence, conv_label_field);
    }
    if (rmp->parsed()) {
      return run_remap(g, rmp_mapping, rmp_inputs, rmp_format, rmp_label_field);
    }
    if (spl->parsed()) return run_split(g, spl_config);
    if (sts->parsed()) return run_stats(g, sts_seqs, sts_out);
    if (geo->parsed()) return run_geom(g, geo_seqs, geo_bins, geo_k, geo_out_dir);
    if (evl->parsed()) {
      return run_eval(g, evl_gt, evl_pred, evl_seqs, evl_out_dir);
    }
    if (emt->parsed()) return run_emit_train_config(g, emt_config, emt_out);
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::IoFailure ? 4 : 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
