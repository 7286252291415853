#include "pccforge/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <ostream>

#include "pccforge/io.hpp"

namespace pccforge::eval {

namespace fs = std::filesystem;

void ConfusionMatrix::add(ClassId gt, ClassId pred, std::uint64_t n) {
  if (gt >= kClassCount || pred >= kClassCount) {
    throw Error(ErrorKind::ClassOutOfRange,
                "(" + std::to_string(gt) + ", " + std::to_string(pred) +
                    ") outside the " + std::to_string(kClassCount) +
                    "-class schema");
  }
  counts_[static_cast<std::size_t>(gt) * kClassCount + pred] += n;
}

std::uint64_t ConfusionMatrix::at(ClassId gt, ClassId pred) const {
  return counts_[static_cast<std::size_t>(gt) * kClassCount + pred];
}

std::uint64_t ConfusionMatrix::row_sum(ClassId gt) const {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < kClassCount; ++p) {
    sum += counts_[static_cast<std::size_t>(gt) * kClassCount + p];
  }
  return sum;
}

std::uint64_t ConfusionMatrix::col_sum(ClassId pred) const {
  std::uint64_t sum = 0;
  for (std::size_t g = 0; g < kClassCount; ++g) {
    sum += counts_[g * kClassCount + pred];
  }
  return sum;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
  return *this;
}

void accumulate(std::span<const ClassId> gt, std::span<const ClassId> pred,
                ConfusionMatrix& matrix) {
  if (gt.size() != pred.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(gt.size()) + " ground-truth labels vs " +
                    std::to_string(pred.size()) + " predictions");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    matrix.add(gt[i], pred[i]);
  }
}

ClassMetrics class_metrics(const ConfusionMatrix& matrix) {
  ClassMetrics metrics;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const auto id = static_cast<ClassId>(c);
    ClassMetric& m = metrics[c];
    m.tp = matrix.at(id, id);
    m.fn = matrix.row_sum(id) - m.tp;
    m.fp = matrix.col_sum(id) - m.tp;
    const std::uint64_t iou_denom = m.tp + m.fp + m.fn;
    if (iou_denom > 0) {
      m.iou = static_cast<double>(m.tp) / static_cast<double>(iou_denom);
    }
    const std::uint64_t gt_points = m.tp + m.fn;
    if (gt_points > 0) {
      m.accuracy = static_cast<double>(m.tp) / static_cast<double>(gt_points);
    }
  }
  return metrics;
}

SummaryMetrics summary_metrics(const ClassMetrics& metrics) {
  double acc_sum = 0.0, iou_sum = 0.0, iou_excl_sum = 0.0;
  std::size_t acc_n = 0, iou_n = 0, iou_excl_n = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (metrics[c].accuracy) {
      acc_sum += *metrics[c].accuracy;
      ++acc_n;
    }
    if (metrics[c].iou) {
      iou_sum += *metrics[c].iou;
      ++iou_n;
      if (c != kUnassignedClass) {
        iou_excl_sum += *metrics[c].iou;
        ++iou_excl_n;
      }
    }
  }
  if (acc_n == 0 && iou_n == 0) {
    throw Error(ErrorKind::NoDefinedClasses,
                "no class has any ground-truth or predicted points");
  }
  SummaryMetrics summary;
  if (acc_n > 0) summary.mean_accuracy = acc_sum / static_cast<double>(acc_n);
  if (iou_n > 0) summary.miou_all = iou_sum / static_cast<double>(iou_n);
  if (iou_excl_n > 0) {
    summary.miou_excl_unassigned = iou_excl_sum / static_cast<double>(iou_excl_n);
  }
  return summary;
}

namespace {

std::vector<fs::path> sorted_label_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".label") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

ConfusionMatrix evaluate_sequence(const fs::path& gt_root,
                                  const fs::path& pred_root, SequenceId seq,
                                  std::uint64_t& points) {
  const fs::path gt_dir = gt_root / "sequences" / seq.str() / "labels";
  if (!fs::is_directory(gt_dir)) {
    throw Error(ErrorKind::MissingSequence, gt_dir.string());
  }
  ConfusionMatrix matrix;
  for (const auto& gt_file : sorted_label_files(gt_dir)) {
    const fs::path pred_file =
        pred_root / "sequences" / seq.str() / "labels" / gt_file.filename();
    if (!fs::is_regular_file(pred_file)) {
      throw Error(ErrorKind::MissingPrediction, pred_file.string());
    }
    const auto gt_words = io::read_labels(gt_file);
    const auto pred_words = io::read_labels(pred_file);
    if (gt_words.size() != pred_words.size()) {
      throw Error(ErrorKind::SizeMismatch,
                  gt_file.string() + " has " + std::to_string(gt_words.size()) +
                      " labels but " + pred_file.string() + " has " +
                      std::to_string(pred_words.size()));
    }
    for (std::size_t i = 0; i < gt_words.size(); ++i) {
      // instance bits never affect evaluation
      matrix.add(io::unpack_label(gt_words[i]).first,
                 io::unpack_label(pred_words[i]).first);
    }
    points += gt_words.size();
  }
  return matrix;
}

}  // namespace

EvalReport evaluate_run(const fs::path& gt_root, const fs::path& pred_root,
                        std::span<const SequenceId> seqs, int threads) {
  const auto n_seqs = static_cast<std::ptrdiff_t>(seqs.size());
  std::vector<ConfusionMatrix> partial(seqs.size());
  std::vector<std::uint64_t> partial_points(seqs.size(), 0);
  std::vector<std::exception_ptr> failures(seqs.size());
  [[maybe_unused]] const int budget = resolve_threads(threads);

#pragma omp parallel for num_threads(budget) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n_seqs; ++i) {
    try {
      partial[i] =
          evaluate_sequence(gt_root, pred_root, seqs[i], partial_points[i]);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  EvalReport report;
  report.sequences.assign(seqs.begin(), seqs.end());
  for (std::size_t i = 0; i < partial.size(); ++i) {
    report.matrix += partial[i];
    report.total_points += partial_points[i];
  }
  report.per_class = class_metrics(report.matrix);
  report.summary = summary_metrics(report.per_class);
  return report;
}

void write_per_class_csv(const ClassMetrics& metrics, const LabelSchema& schema,
                         std::ostream& out) {
  out << "label,class_name,tp,fp,fn,iou,accuracy\n";
  char value[32];
  auto format = [&value](const std::optional<double>& v) -> const char* {
    if (!v) return "NA";
    std::snprintf(value, sizeof(value), "%.6f", *v);
    return value;
  };
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const auto id = static_cast<ClassId>(c);
    const ClassMetric& m = metrics[c];
    out << id << "," << schema.name_of(id) << "," << m.tp << "," << m.fp << ","
        << m.fn << "," << format(m.iou) << "," << format(m.accuracy) << "\n";
  }
}

}  // namespace pccforge::eval
