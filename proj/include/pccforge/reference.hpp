#pragma once

#include <span>
#include <string>
#include <vector>

#include "pccforge/core.hpp"
#include "pccforge/eval.hpp"
#include "pccforge/geometry.hpp"
#include "pccforge/remap.hpp"

// Serial reference implementations. These take no shortcuts: neighbor
// queries are O(N^2) scans, eigenvalues come from a dense solver, metrics are
// recomputed from the raw label arrays. They exist as test oracles for the
// parallel kernels and as the baseline for the benchmark tool; nothing in the
// production pipeline calls them.
namespace pccforge::ref {

/// All-pairs scan, sorted ascending by (distance, index), self excluded.
std::vector<geom::Neighbor> brute_force_k_nearest(const LabeledCloud& cloud,
                                                  std::size_t query,
                                                  std::size_t k);

double brute_force_mean_nn_distance(const LabeledCloud& cloud);

/// Brute-force neighborhoods + dense eigensolver.
double brute_force_mean_curvature(const LabeledCloud& cloud,
                                  std::size_t k = 16);

/// Per-class tp/fp/fn counted directly from the label arrays, bypassing the
/// confusion matrix.
struct ScalarClassMetric {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::optional<double> iou;
  std::optional<double> accuracy;
};

std::array<ScalarClassMetric, kClassCount> scalar_class_metrics(
    std::span<const ClassId> gt, std::span<const ClassId> pred);

struct ScalarSummary {
  std::optional<double> mean_accuracy;
  std::optional<double> miou_all;
  std::optional<double> miou_excl_unassigned;
};

ScalarSummary scalar_summary(
    const std::array<ScalarClassMetric, kClassCount>& metrics);

/// One-key-at-a-time dictionary lookup.
remap::RemapResult serial_remap(std::span<const std::string> raw_labels,
                                const remap::RemapTable& table);

}  // namespace pccforge::ref
