#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pccforge/core.hpp"

namespace pccforge::remap {

/// Per-source mapping of raw label keys onto unified class ids. Keys are
/// case-folded and whitespace-trimmed; anything absent resolves to class 0.
struct RemapTable {
  std::string source_name;
  std::unordered_map<std::string, ClassId> rules;

  static constexpr ClassId kDefaultTarget = kUnassignedClass;

  /// Resolved target for one raw key (after normalization).
  ClassId resolve(std::string_view raw_key) const;
};

/// ASCII lowercase + trim. Matching is done on normalized keys because the
/// source collections were labeled by different organizations.
std::string normalize_key(std::string_view key);

/// Loads a `source_dataset,source_key,target_id` CSV. One table per file;
/// rows must agree on source_dataset. Duplicate identical rows are tolerated,
/// conflicting targets for one (case-folded) key are an error.
RemapTable load_remap_csv(const std::filesystem::path& path,
                          const LabelSchema& schema);

struct RemapResult {
  std::vector<ClassId> labels;
  std::size_t unmapped = 0;
};

/// Element-wise, order-preserving, total: every key not in the table maps to
/// class 0 and counts as unmapped.
RemapResult apply_remap(std::span<const std::string> raw_labels,
                        const RemapTable& table, int threads = 0);

}  // namespace pccforge::remap
