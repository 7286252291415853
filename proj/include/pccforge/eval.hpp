#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pccforge/core.hpp"

namespace pccforge::eval {

/// K x K point tally; cell (g, p) counts points with ground truth g predicted
/// as p. Accumulation over scans is additive, so partial matrices can be
/// merged in any order.
class ConfusionMatrix {
 public:
  ConfusionMatrix() : counts_{} {}

  void add(ClassId gt, ClassId pred, std::uint64_t n = 1);
  std::uint64_t at(ClassId gt, ClassId pred) const;
  std::uint64_t row_sum(ClassId gt) const;
  std::uint64_t col_sum(ClassId pred) const;
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;

 private:
  std::array<std::uint64_t, kClassCount * kClassCount> counts_;
};

/// Tallies (gt[i], pred[i]) pairs into the matrix.
void accumulate(std::span<const ClassId> gt, std::span<const ClassId> pred,
                ConfusionMatrix& matrix);

struct ClassMetric {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::optional<double> iou;       // TP/(TP+FP+FN); undefined when denom is 0
  std::optional<double> accuracy;  // recall TP/(TP+FN); undefined when gt absent
};

using ClassMetrics = std::array<ClassMetric, kClassCount>;

ClassMetrics class_metrics(const ConfusionMatrix& matrix);

struct SummaryMetrics {
  std::optional<double> mean_accuracy;         // mean of defined accuracies
  std::optional<double> miou_all;              // mean of defined IoUs, all classes
  std::optional<double> miou_excl_unassigned;  // same, skipping class 0
};

/// Means over defined per-class metrics only; NoDefinedClasses when the
/// matrix is entirely empty.
SummaryMetrics summary_metrics(const ClassMetrics& metrics);

struct EvalReport {
  ConfusionMatrix matrix;
  ClassMetrics per_class;
  SummaryMetrics summary;
  std::uint64_t total_points = 0;
  std::vector<SequenceId> sequences;
};

/// Pairs every ground-truth label file with its prediction mirror and
/// accumulates one matrix over all frames. Instance bits are ignored;
/// semantic ids must be < 20.
EvalReport evaluate_run(const std::filesystem::path& gt_root,
                        const std::filesystem::path& pred_root,
                        std::span<const SequenceId> seqs, int threads = 0);

/// CSV rows: label,class_name,tp,fp,fn,iou,accuracy ("NA" when undefined).
void write_per_class_csv(const ClassMetrics& metrics, const LabelSchema& schema,
                         std::ostream& out);

}  // namespace pccforge::eval
