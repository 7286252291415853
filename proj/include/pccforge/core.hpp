#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pccforge {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorKind {
  InvalidArgument,
  MalformedHeader,
  MalformedRecord,
  EmptyCloud,
  SizeMismatch,
  TruncatedFile,
  UnknownClassId,
  ConflictingRule,
  InvalidTargetId,
  MalformedCsv,
  DuplicateSequence,
  MissingSequence,
  MissingPrediction,
  TooFewPoints,
  LengthMismatch,
  ClassOutOfRange,
  NoDefinedClasses,
  IoFailure,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Points and clouds

struct Point3 {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float remission = 0.0f;  // reflectance in [0,1]; 0 when the source has none
};

bool is_finite(const Point3& p);

using ClassId = std::uint16_t;

inline constexpr std::size_t kClassCount = 20;
inline constexpr ClassId kUnassignedClass = 0;

/// N points paired with N semantic labels and N instance ids. Order is
/// significant: point i keeps label i through every transformation.
class LabeledCloud {
 public:
  LabeledCloud() = default;

  LabeledCloud(std::vector<Point3> points, std::vector<ClassId> labels,
               std::vector<std::uint16_t> instance_ids);

  LabeledCloud(std::vector<Point3> points, std::vector<ClassId> labels);

  explicit LabeledCloud(std::vector<Point3> points);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const std::vector<Point3>& points() const noexcept { return points_; }
  const std::vector<ClassId>& labels() const noexcept { return labels_; }
  const std::vector<std::uint16_t>& instance_ids() const noexcept {
    return instance_ids_;
  }

  void reserve(std::size_t n);
  void push_back(const Point3& p, ClassId label = 0, std::uint16_t instance = 0);

  /// Same points and instances with a replacement label array (used after
  /// remapping raw source labels).
  LabeledCloud with_labels(std::vector<ClassId> labels) const;

 private:
  std::vector<Point3> points_;
  std::vector<ClassId> labels_;
  std::vector<std::uint16_t> instance_ids_;
};

// ---------------------------------------------------------------------------
// Label schema

struct LabelClass {
  ClassId id;
  std::string name;
};

struct RemapRule {
  std::string source_dataset;
  std::string source_key;
  ClassId target;
};

/// The unified class table plus optional per-source remap rules. Any source
/// key without a rule resolves to class 0 ("unassigned").
struct LabelSchema {
  std::vector<LabelClass> classes;
  std::vector<RemapRule> remap_rules;

  std::size_t size() const noexcept { return classes.size(); }
  const std::string& name_of(ClassId id) const;          // throws ClassOutOfRange
  std::optional<ClassId> id_of(std::string_view name) const;
};

/// The 20-class PCC-SKITTI table, ids 0..19, no remap rules.
LabelSchema unified_schema();

// ---------------------------------------------------------------------------
// Sequence ids

/// Sequence folder index in [0,999]. Rendered zero-padded to 2 digits for
/// indices <= 99 and 3 digits above; parsing accepts 1 to 3 digits.
class SequenceId {
 public:
  SequenceId() = default;
  explicit SequenceId(unsigned index);

  unsigned value() const noexcept { return index_; }
  std::string str() const;

  static SequenceId parse(std::string_view text);
  static std::optional<SequenceId> try_parse(std::string_view text) noexcept;

  auto operator<=>(const SequenceId&) const = default;

 private:
  unsigned index_ = 0;
};

inline constexpr unsigned kMaxSequenceIndex = 999;

/// Parallelism budget: requested worker count, or the hardware default when
/// requested <= 0. Always >= 1.
int resolve_threads(int requested) noexcept;

}  // namespace pccforge
