#include "pccforge/reference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pccforge::ref {

namespace {

double sq_dist(const Point3& a, const Point3& b) {
  const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
  const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
  const double dz = static_cast<double>(a.z) - static_cast<double>(b.z);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<geom::Neighbor> brute_force_k_nearest(const LabeledCloud& cloud,
                                                  std::size_t query,
                                                  std::size_t k) {
  if (query >= cloud.size()) {
    throw Error(ErrorKind::InvalidArgument, "query index out of range");
  }
  if (k == 0) {
    throw Error(ErrorKind::InvalidArgument, "k must be positive");
  }
  struct Cand {
    double d2;
    std::size_t index;
  };
  std::vector<Cand> all;
  all.reserve(cloud.size());
  const auto& pts = cloud.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == query) continue;
    all.push_back({sq_dist(pts[query], pts[i]), i});
  }
  std::sort(all.begin(), all.end(), [](const Cand& a, const Cand& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.index < b.index;
  });
  if (all.size() > k) all.resize(k);
  std::vector<geom::Neighbor> out;
  out.reserve(all.size());
  for (const auto& c : all) {
    out.push_back({c.index, std::sqrt(c.d2)});
  }
  return out;
}

double brute_force_mean_nn_distance(const LabeledCloud& cloud) {
  if (cloud.size() < 2) {
    throw Error(ErrorKind::TooFewPoints,
                "nearest-neighbor distance needs at least two points");
  }
  const auto& pts = cloud.points();
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      best = std::min(best, sq_dist(pts[i], pts[j]));
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(pts.size());
}

double brute_force_mean_curvature(const LabeledCloud& cloud, std::size_t k) {
  if (cloud.size() < 4) {
    throw Error(ErrorKind::TooFewPoints,
                "curvature needs at least four points");
  }
  const auto& pts = cloud.points();
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto nbrs = brute_force_k_nearest(cloud, i, k);
    const std::size_t m = nbrs.size() + 1;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    auto coord = [&](std::size_t idx) {
      return Eigen::Vector3d(static_cast<double>(pts[idx].x),
                             static_cast<double>(pts[idx].y),
                             static_cast<double>(pts[idx].z));
    };
    mean += coord(i);
    for (const auto& n : nbrs) mean += coord(n.index);
    mean /= static_cast<double>(m);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto accumulate = [&](std::size_t idx) {
      const Eigen::Vector3d d = coord(idx) - mean;
      cov += d * d.transpose();
    };
    accumulate(i);
    for (const auto& n : nbrs) accumulate(n.index);
    cov /= static_cast<double>(m);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
    const double total = ev[0] + ev[1] + ev[2];
    double c = 0.0;
    if (total > 0.0) {
      c = std::min(std::max(ev[0], 0.0) / total, 1.0 / 3.0);
    }
    sum += c;
  }
  return sum / static_cast<double>(pts.size());
}

std::array<ScalarClassMetric, kClassCount> scalar_class_metrics(
    std::span<const ClassId> gt, std::span<const ClassId> pred) {
  if (gt.size() != pred.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "ground truth and prediction lengths differ");
  }
  std::array<ScalarClassMetric, kClassCount> out{};
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool g = gt[i] == c;
      const bool p = pred[i] == c;
      if (g && p) ++tp;
      if (!g && p) ++fp;
      if (g && !p) ++fn;
    }
    out[c].tp = tp;
    out[c].fp = fp;
    out[c].fn = fn;
    if (tp + fp + fn > 0) {
      out[c].iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    if (tp + fn > 0) {
      out[c].accuracy = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
  }
  return out;
}

ScalarSummary scalar_summary(
    const std::array<ScalarClassMetric, kClassCount>& metrics) {
  ScalarSummary out;
  double acc_sum = 0.0;
  std::size_t acc_n = 0;
  double iou_sum = 0.0;
  std::size_t iou_n = 0;
  double iou_excl_sum = 0.0;
  std::size_t iou_excl_n = 0;
  for (std::size_t c = 0; c < metrics.size(); ++c) {
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
  if (acc_n > 0) out.mean_accuracy = acc_sum / static_cast<double>(acc_n);
  if (iou_n > 0) out.miou_all = iou_sum / static_cast<double>(iou_n);
  if (iou_excl_n > 0) {
    out.miou_excl_unassigned = iou_excl_sum / static_cast<double>(iou_excl_n);
  }
  return out;
}

remap::RemapResult serial_remap(std::span<const std::string> raw_labels,
                                const remap::RemapTable& table) {
  remap::RemapResult out;
  out.labels.reserve(raw_labels.size());
  for (const auto& raw : raw_labels) {
    const auto key = remap::normalize_key(raw);
    auto it = table.rules.find(key);
    if (it == table.rules.end()) {
      out.labels.push_back(remap::RemapTable::kDefaultTarget);
      ++out.unmapped;
    } else {
      out.labels.push_back(it->second);
    }
  }
  return out;
}

}  // namespace pccforge::ref
