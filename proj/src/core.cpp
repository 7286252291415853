#include "pccforge/core.hpp"

#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pccforge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::MalformedHeader: return "malformed header";
    case ErrorKind::MalformedRecord: return "malformed record";
    case ErrorKind::EmptyCloud: return "empty cloud";
    case ErrorKind::SizeMismatch: return "size mismatch";
    case ErrorKind::TruncatedFile: return "truncated file";
    case ErrorKind::UnknownClassId: return "unknown class id";
    case ErrorKind::ConflictingRule: return "conflicting rule";
    case ErrorKind::InvalidTargetId: return "invalid target id";
    case ErrorKind::MalformedCsv: return "malformed csv";
    case ErrorKind::DuplicateSequence: return "duplicate sequence";
    case ErrorKind::MissingSequence: return "missing sequence";
    case ErrorKind::MissingPrediction: return "missing prediction";
    case ErrorKind::TooFewPoints: return "too few points";
    case ErrorKind::LengthMismatch: return "length mismatch";
    case ErrorKind::ClassOutOfRange: return "class out of range";
    case ErrorKind::NoDefinedClasses: return "no defined classes";
    case ErrorKind::IoFailure: return "io failure";
  }
  return "unknown error";
}

bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         std::isfinite(p.remission);
}

LabeledCloud::LabeledCloud(std::vector<Point3> points,
                           std::vector<ClassId> labels,
                           std::vector<std::uint16_t> instance_ids)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      instance_ids_(std::move(instance_ids)) {
  if (points_.size() != labels_.size() ||
      points_.size() != instance_ids_.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "cloud with " + std::to_string(points_.size()) + " points, " +
                    std::to_string(labels_.size()) + " labels, " +
                    std::to_string(instance_ids_.size()) + " instance ids");
  }
}

LabeledCloud::LabeledCloud(std::vector<Point3> points,
                           std::vector<ClassId> labels)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      instance_ids_(points_.size(), 0) {
  if (points_.size() != labels_.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "cloud with " + std::to_string(points_.size()) + " points, " +
                    std::to_string(labels_.size()) + " labels");
  }
}

LabeledCloud::LabeledCloud(std::vector<Point3> points)
    : points_(std::move(points)),
      labels_(points_.size(), 0),
      instance_ids_(points_.size(), 0) {}

void LabeledCloud::reserve(std::size_t n) {
  points_.reserve(n);
  labels_.reserve(n);
  instance_ids_.reserve(n);
}

void LabeledCloud::push_back(const Point3& p, ClassId label,
                             std::uint16_t instance) {
  points_.push_back(p);
  labels_.push_back(label);
  instance_ids_.push_back(instance);
}

LabeledCloud LabeledCloud::with_labels(std::vector<ClassId> labels) const {
  return LabeledCloud(points_, std::move(labels), instance_ids_);
}

const std::string& LabelSchema::name_of(ClassId id) const {
  for (const auto& c : classes) {
    if (c.id == id) return c.name;
  }
  throw Error(ErrorKind::ClassOutOfRange,
              "class id " + std::to_string(id) + " not in schema");
}

std::optional<ClassId> LabelSchema::id_of(std::string_view name) const {
  for (const auto& c : classes) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

LabelSchema unified_schema() {
  LabelSchema schema;
  schema.classes = {
      {0, "unassigned"},
      {1, "stairway"},
      {2, "door"},
      {3, "non exit door"},
      {4, "fire door"},
      {5, "window"},
      {6, "roof access"},
      {7, "exit sign"},
      {8, "emergency lighting"},
      {9, "smoke detector"},
      {10, "extinguisher"},
      {11, "fire alarm"},
      {12, "person"},
      {13, "AED"},
      {14, "sprinkler"},
      {15, "standpipe"},
      {16, "utility shutoffs - electric"},
      {17, "elevator"},
      {18, "hydrant"},
      {19, "gas shutoff"},
  };
  return schema;
}

SequenceId::SequenceId(unsigned index) : index_(index) {
  if (index > kMaxSequenceIndex) {
    throw Error(ErrorKind::InvalidArgument,
                "sequence index " + std::to_string(index) + " exceeds " +
                    std::to_string(kMaxSequenceIndex));
  }
}

std::string SequenceId::str() const {
  char buf[8];
  std::snprintf(buf, sizeof(buf), index_ <= 99 ? "%02u" : "%03u", index_);
  return buf;
}

std::optional<SequenceId> SequenceId::try_parse(std::string_view text) noexcept {
  if (text.empty() || text.size() > 3) return std::nullopt;
  unsigned value = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<unsigned>(c - '0');
  }
  return SequenceId(value);
}

SequenceId SequenceId::parse(std::string_view text) {
  auto id = try_parse(text);
  if (!id) {
    throw Error(ErrorKind::InvalidArgument,
                "'" + std::string(text) + "' is not a sequence id");
  }
  return *id;
}

int resolve_threads(int requested) noexcept {
  if (requested > 0) return requested;
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = static_cast<int>(std::thread::hardware_concurrency());
#endif
  return n > 0 ? n : 1;
}

}  // namespace pccforge
