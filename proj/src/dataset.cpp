#include "pccforge/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "pccforge/io.hpp"

namespace pccforge::dataset {

namespace fs = std::filesystem;

std::uint64_t DatasetManifest::total_points() const {
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.point_count;
  return total;
}

namespace {

fs::path sequence_dir(const fs::path& root, SequenceId seq) {
  return root / "sequences" / seq.str();
}

bool dir_populated(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return false;
  return fs::directory_iterator(dir, ec) != fs::directory_iterator();
}

std::vector<fs::path> sorted_files_with_extension(const fs::path& dir,
                                                  std::string_view ext) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace

ManifestEntry build_sequence(const LabeledCloud& cloud, const fs::path& root,
                             SequenceId seq, const std::string& source_dataset) {
  const fs::path seq_dir = sequence_dir(root, seq);
  const fs::path velodyne = seq_dir / "velodyne";
  const fs::path labels = seq_dir / "labels";
  if (dir_populated(velodyne) || dir_populated(labels)) {
    throw Error(ErrorKind::DuplicateSequence,
                seq_dir.string() + " is already populated");
  }
  std::error_code ec;
  fs::create_directories(velodyne, ec);
  if (ec) {
    throw Error(ErrorKind::IoFailure,
                "cannot create " + velodyne.string() + ": " + ec.message());
  }
  fs::create_directories(labels, ec);
  if (ec) {
    throw Error(ErrorKind::IoFailure,
                "cannot create " + labels.string() + ": " + ec.message());
  }

  const std::string frame = io::frame_name(0);
  io::write_skitti_scan(cloud, velodyne / (frame + ".bin"),
                        labels / (frame + ".label"));

  ManifestEntry entry;
  entry.seq = seq;
  entry.source_dataset = source_dataset;
  entry.frame_count = 1;
  entry.point_count = cloud.size();
  return entry;
}

std::vector<SequenceId> list_sequences(const fs::path& root) {
  std::vector<SequenceId> seqs;
  const fs::path seq_root = root / "sequences";
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(seq_root, ec)) {
    if (!entry.is_directory()) continue;
    if (auto id = SequenceId::try_parse(entry.path().filename().string())) {
      seqs.push_back(*id);
    }
  }
  std::sort(seqs.begin(), seqs.end());
  return seqs;
}

DatasetManifest scan_dataset(const fs::path& root) {
  DatasetManifest manifest;
  manifest.root = root;
  for (SequenceId seq : list_sequences(root)) {
    const fs::path velodyne = sequence_dir(root, seq) / "velodyne";
    ManifestEntry entry;
    entry.seq = seq;
    for (const auto& scan : sorted_files_with_extension(velodyne, ".bin")) {
      std::error_code ec;
      const auto size = fs::file_size(scan, ec);
      if (ec) {
        throw Error(ErrorKind::IoFailure,
                    "cannot stat " + scan.string() + ": " + ec.message());
      }
      if (size % 16 != 0) {
        throw Error(ErrorKind::TruncatedFile,
                    scan.string() + ": size " + std::to_string(size) +
                        " is not a multiple of 16");
      }
      ++entry.frame_count;
      entry.point_count += size / 16;
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Splits

std::string_view to_string(SplitConfig config) {
  switch (config) {
    case SplitConfig::Combined: return "combined";
    case SplitConfig::EnfieldOnly: return "enfield-only";
    case SplitConfig::MemphisOnly: return "memphis-only";
  }
  return "unknown";
}

std::optional<SplitConfig> parse_split_config(std::string_view name) {
  if (name == "combined") return SplitConfig::Combined;
  if (name == "enfield-only") return SplitConfig::EnfieldOnly;
  if (name == "memphis-only") return SplitConfig::MemphisOnly;
  return std::nullopt;
}

namespace {

void append_range(std::vector<SequenceId>& out, unsigned first, unsigned last) {
  for (unsigned i = first; i <= last; ++i) out.emplace_back(i);
}

struct StatedCounts {
  std::size_t train, val, test;
};

// Sequence totals as published per configuration; they do not all match the
// published ranges, which is why split_warnings exists.
StatedCounts stated_counts(SplitConfig config) {
  switch (config) {
    case SplitConfig::Combined: return {87, 1, 76};
    case SplitConfig::EnfieldOnly: return {59, 1, 60};
    case SplitConfig::MemphisOnly: return {15, 1, 15};
  }
  return {0, 0, 0};
}

}  // namespace

SplitSpec published_splits(SplitConfig config) {
  SplitSpec spec;
  spec.config = config;
  switch (config) {
    case SplitConfig::Combined:
      append_range(spec.train, 0, 58);
      append_range(spec.train, 118, 133);
      append_range(spec.val, 59, 59);
      append_range(spec.test, 60, 117);
      append_range(spec.test, 134, 149);
      break;
    case SplitConfig::EnfieldOnly:
      append_range(spec.train, 0, 58);
      append_range(spec.val, 59, 59);
      append_range(spec.test, 60, 118);
      break;
    case SplitConfig::MemphisOnly:
      append_range(spec.train, 119, 133);
      append_range(spec.val, 134, 134);
      append_range(spec.test, 135, 149);
      break;
  }
  return spec;
}

std::vector<std::string> split_warnings(const SplitSpec& spec) {
  const StatedCounts stated = stated_counts(spec.config);
  std::vector<std::string> warnings;
  auto check = [&](const char* part, std::size_t computed, std::size_t claim) {
    if (computed != claim) {
      warnings.push_back(std::string(to_string(spec.config)) + ": " + part +
                         " has " + std::to_string(computed) +
                         " sequences from the published ranges, but the "
                         "published count is " +
                         std::to_string(claim));
    }
  };
  check("train", spec.train.size(), stated.train);
  check("val", spec.val.size(), stated.val);
  check("test", spec.test.size(), stated.test);
  return warnings;
}

fs::path write_split_files(const SplitSpec& spec, const fs::path& root) {
  const fs::path dir = root / "splits" / std::string(to_string(spec.config));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::IoFailure,
                "cannot create " + dir.string() + ": " + ec.message());
  }
  auto write_list = [&](const char* name, const std::vector<SequenceId>& ids) {
    const fs::path path = dir / (std::string(name) + ".txt");
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    }
    for (SequenceId id : ids) out << id.str() << "\n";
    if (!out) {
      throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    }
  };
  write_list("train", spec.train);
  write_list("val", spec.val);
  write_list("test", spec.test);
  return dir;
}

// ---------------------------------------------------------------------------
// Label distribution

DistributionTable compute_distribution(const fs::path& root,
                                       std::span<const SequenceId> seqs,
                                       const LabelSchema& schema, int threads,
                                       io::LabelPolicy policy) {
  const std::size_t k = schema.size();
  // slot k tallies out-of-schema ids a permissive read lets through
  std::vector<std::vector<std::uint64_t>> partial(
      seqs.size(), std::vector<std::uint64_t>(k + 1, 0));
  std::vector<std::exception_ptr> failures(seqs.size());
  [[maybe_unused]] const int budget = resolve_threads(threads);
  const auto n_seqs = static_cast<std::ptrdiff_t>(seqs.size());

#pragma omp parallel for num_threads(budget) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n_seqs; ++i) {
    try {
      const fs::path seq_dir = sequence_dir(root, seqs[i]);
      if (!fs::is_directory(seq_dir)) {
        throw Error(ErrorKind::MissingSequence, seq_dir.string());
      }
      for (const auto& label_file :
           sorted_files_with_extension(seq_dir / "labels", ".label")) {
        fs::path scan_file =
            seq_dir / "velodyne" / label_file.filename().replace_extension(".bin");
        const auto scan = io::read_skitti_scan(scan_file, label_file, policy);
        for (ClassId label : scan.cloud.labels()) {
          ++partial[i][label < k ? label : k];
        }
      }
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  DistributionTable table;
  table.rows.resize(k);
  std::vector<std::uint64_t> counts(k + 1, 0);
  for (const auto& p : partial) {
    for (std::size_t c = 0; c <= k; ++c) counts[c] += p[c];
  }
  for (std::size_t c = 0; c <= k; ++c) table.total_points += counts[c];
  table.out_of_schema = counts[k];
  table.zero_total = table.total_points == 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& row = table.rows[c];
    row.label = schema.classes[c].id;
    row.class_name = schema.classes[c].name;
    row.count = counts[c];
    row.percent = table.zero_total
                      ? 0.0
                      : 100.0 * static_cast<double>(counts[c]) /
                            static_cast<double>(table.total_points);
  }
  return table;
}

void write_distribution_csv(const DistributionTable& table, std::ostream& out) {
  out << "label,class_name,count,percent\n";
  char percent[32];
  for (const auto& row : table.rows) {
    std::snprintf(percent, sizeof(percent), "%.4f", row.percent);
    out << row.label << "," << row.class_name << "," << row.count << ","
        << percent << "\n";
  }
}

// ---------------------------------------------------------------------------
// Training configuration manifest

Hyperparameters published_hyperparameters() { return Hyperparameters{}; }

namespace {

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void emit_training_config(SplitConfig config, const fs::path& out_path) {
  const SplitSpec spec = published_splits(config);
  const Hyperparameters hp = published_hyperparameters();
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot open " + out_path.string());
  }
  out << "config: " << to_string(config) << "\n";
  out << "learning_rate: " << format_g(hp.learning_rate) << "\n";
  out << "momentum: " << format_g(hp.momentum) << "\n";
  out << "weight_decay: " << format_g(hp.weight_decay) << "\n";
  out << "lr_decay: " << format_g(hp.lr_decay) << "\n";
  out << "batch_size: " << hp.batch_size << "\n";
  auto write_list = [&](const char* key, const std::vector<SequenceId>& ids) {
    out << key << ":";
    for (SequenceId id : ids) out << " " << id.str();
    out << "\n";
  };
  write_list("train", spec.train);
  write_list("val", spec.val);
  write_list("test", spec.test);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot write " + out_path.string());
  }
}

TrainingConfig parse_training_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected 'key: value'");
    }
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    kv[key] = value;
  }

  auto require = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ": missing key '" + std::string(key) + "'");
    }
    return it->second;
  };
  auto as_double = [&](const char* key) {
    const std::string& text = require(key);
    double v = 0.0;
    auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + ": bad value for '" + std::string(key) +
                      "': '" + text + "'");
    }
    return v;
  };
  auto as_seq_list = [&](const char* key) {
    std::vector<SequenceId> ids;
    for (const auto& tok : split_ws(require(key))) {
      ids.push_back(SequenceId::parse(tok));
    }
    return ids;
  };

  TrainingConfig config;
  const std::string& name = require("config");
  auto parsed = parse_split_config(name);
  if (!parsed) {
    throw Error(ErrorKind::MalformedRecord,
                path.string() + ": unknown config '" + name + "'");
  }
  config.split.config = *parsed;
  config.hp.learning_rate = as_double("learning_rate");
  config.hp.momentum = as_double("momentum");
  config.hp.weight_decay = as_double("weight_decay");
  config.hp.lr_decay = as_double("lr_decay");
  config.hp.batch_size = static_cast<int>(as_double("batch_size"));
  config.split.train = as_seq_list("train");
  config.split.val = as_seq_list("val");
  config.split.test = as_seq_list("test");
  return config;
}

}  // namespace pccforge::dataset
