#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pccforge/core.hpp"
#include "pccforge/io.hpp"

namespace pccforge::dataset {

// ---------------------------------------------------------------------------
// Folder layout: <root>/sequences/<seq>/{velodyne,labels}/<frame>.{bin,label}

struct ManifestEntry {
  SequenceId seq;
  std::string source_dataset;
  std::size_t frame_count = 0;
  std::uint64_t point_count = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::uint64_t total_points() const;
};

/// Materializes one sequence (a single building scan, frame 000000) under
/// root. Errors with DuplicateSequence if the sequence folders are already
/// populated.
ManifestEntry build_sequence(const LabeledCloud& cloud,
                             const std::filesystem::path& root, SequenceId seq,
                             const std::string& source_dataset = {});

/// Re-reads the inventory from disk; point counts come from scan file sizes.
DatasetManifest scan_dataset(const std::filesystem::path& root);

std::vector<SequenceId> list_sequences(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Splits

enum class SplitConfig { Combined, EnfieldOnly, MemphisOnly };

std::string_view to_string(SplitConfig config);
std::optional<SplitConfig> parse_split_config(std::string_view name);

struct SplitSpec {
  SplitConfig config = SplitConfig::Combined;
  std::vector<SequenceId> train;
  std::vector<SequenceId> val;
  std::vector<SequenceId> test;
};

/// The published sequence ranges for each training configuration. The ranges
/// are authoritative; the stated sequence totals do not all agree with them
/// (see split_warnings).
SplitSpec published_splits(SplitConfig config);

/// Human-readable warnings where a computed split cardinality disagrees with
/// the stated count for that configuration. Never empties the split.
std::vector<std::string> split_warnings(const SplitSpec& spec);

/// Writes <root>/splits/<config>/{train,val,test}.txt, one sequence id per
/// line. Returns the split directory.
std::filesystem::path write_split_files(const SplitSpec& spec,
                                        const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Label distribution

struct DistributionRow {
  ClassId label = 0;
  std::string class_name;
  std::uint64_t count = 0;
  double percent = 0.0;  // 100 * count / total, 0 when the total is zero
};

struct DistributionTable {
  std::vector<DistributionRow> rows;  // one per schema class, id order
  std::uint64_t total_points = 0;
  std::uint64_t out_of_schema = 0;  // permissive reads only
  bool zero_total = true;
};

/// Tallies the semantic part of every label word across all frames of the
/// given sequences. An empty sequence set yields an all-zero table with the
/// zero_total flag, not an error. Under the strict policy an out-of-schema
/// semantic id aborts the tally; under the permissive policy it lands in
/// out_of_schema and still counts toward total_points.
DistributionTable compute_distribution(
    const std::filesystem::path& root, std::span<const SequenceId> seqs,
    const LabelSchema& schema, int threads = 0,
    io::LabelPolicy policy = io::LabelPolicy::Strict);

/// CSV rows: label,class_name,count,percent (percent with 4 decimals).
void write_distribution_csv(const DistributionTable& table, std::ostream& out);

// ---------------------------------------------------------------------------
// Training configuration manifest

struct Hyperparameters {
  double learning_rate = 0.01;
  double momentum = 0.98;
  double weight_decay = 0.001;
  double lr_decay = 0.98477;
  int batch_size = 1;
};

Hyperparameters published_hyperparameters();

/// Line-oriented `key: value` manifest with the hyperparameters and the
/// split's sequence lists, for an external training stack.
void emit_training_config(SplitConfig config, const std::filesystem::path& out);

struct TrainingConfig {
  Hyperparameters hp;
  SplitSpec split;
};

TrainingConfig parse_training_config(const std::filesystem::path& path);

}  // namespace pccforge::dataset
