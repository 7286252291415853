#include "pccforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>

#include "pccforge/io.hpp"

namespace pccforge::geom {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// SpatialIndex

SpatialIndex::SpatialIndex(const LabeledCloud& cloud) {
  if (cloud.empty()) {
    throw Error(ErrorKind::EmptyCloud, "cannot index an empty cloud");
  }
  points_.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points()[i];
    points_[i] = {static_cast<double>(p.x), static_cast<double>(p.y),
                  static_cast<double>(p.z)};
  }
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto node_index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[node_index].begin = begin;
    nodes_[node_index].end = end;
    return node_index;
  }

  // widest bounding-box extent picks the split axis
  std::array<double, 3> lo{std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity()};
  std::array<double, 3> hi{-std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity()};
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });

  nodes_[node_index].axis = static_cast<std::int8_t>(axis);
  nodes_[node_index].split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

namespace {

double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

void SpatialIndex::search(std::uint32_t node_index,
                          const std::array<double, 3>& query,
                          std::uint32_t skip, std::size_t k,
                          std::vector<Candidate>& heap) const {
  const Node& node = nodes_[node_index];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      if (idx == skip) continue;
      const Candidate c{dist2(query, points_[idx]), idx};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }

  const double diff = query[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search(near, query, skip, k, heap);
  // the far side can still hold an equal-distance, lower-index neighbor
  if (heap.size() < k || diff * diff <= heap.front().d2) {
    search(far, query, skip, k, heap);
  }
}

std::vector<Neighbor> SpatialIndex::k_nearest(std::size_t query_index,
                                              std::size_t k) const {
  if (query_index >= size()) {
    throw Error(ErrorKind::InvalidArgument,
                "query index " + std::to_string(query_index) +
                    " out of range for " + std::to_string(size()) + " points");
  }
  k = std::min(k, size() - 1);
  std::vector<Candidate> heap;
  if (k == 0) return {};
  heap.reserve(k + 1);
  search(0, points_[query_index], static_cast<std::uint32_t>(query_index), k,
         heap);
  std::sort(heap.begin(), heap.end());
  std::vector<Neighbor> result(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) {
    result[i] = Neighbor{heap[i].index, std::sqrt(heap[i].d2)};
  }
  return result;
}

Neighbor SpatialIndex::nearest(std::size_t query_index) const {
  if (size() < 2) {
    throw Error(ErrorKind::TooFewPoints,
                "nearest-neighbor query needs at least 2 points");
  }
  return k_nearest(query_index, 1)[0];
}

// ---------------------------------------------------------------------------
// Eigenvalues

std::array<double, 3> symmetric_eigenvalues(double a00, double a01, double a02,
                                            double a11, double a12,
                                            double a22) {
  const double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) {
    std::array<double, 3> e{a00, a11, a22};
    std::sort(e.begin(), e.end(), std::greater<>());
    return e;
  }
  const double q = (a00 + a11 + a22) / 3.0;
  const double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) +
                    (a22 - q) * (a22 - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  if (p == 0.0) return {q, q, q};
  const double b00 = (a00 - q) / p;
  const double b11 = (a11 - q) / p;
  const double b22 = (a22 - q) / p;
  const double b01 = a01 / p;
  const double b02 = a02 / p;
  const double b12 = a12 / p;
  const double det_b = b00 * (b11 * b22 - b12 * b12) -
                       b01 * (b01 * b22 - b12 * b02) +
                       b02 * (b01 * b12 - b11 * b02);
  const double r = std::clamp(det_b / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 =
      q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  return {e1, e2, e3};
}

// ---------------------------------------------------------------------------
// Metrics

std::optional<double> point_density(const LabeledCloud& cloud) {
  if (cloud.empty()) {
    throw Error(ErrorKind::EmptyCloud, "density of an empty cloud");
  }
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  for (const Point3& p : cloud.points()) {
    min_x = std::min(min_x, static_cast<double>(p.x));
    max_x = std::max(max_x, static_cast<double>(p.x));
    min_y = std::min(min_y, static_cast<double>(p.y));
    max_y = std::max(max_y, static_cast<double>(p.y));
  }
  const double area = (max_x - min_x) * (max_y - min_y);
  if (area <= 0.0) return std::nullopt;
  return static_cast<double>(cloud.size()) / area;
}

double scene_height(const LabeledCloud& cloud) {
  if (cloud.empty()) {
    throw Error(ErrorKind::EmptyCloud, "height of an empty cloud");
  }
  double min_z = std::numeric_limits<double>::infinity();
  double max_z = -std::numeric_limits<double>::infinity();
  for (const Point3& p : cloud.points()) {
    min_z = std::min(min_z, static_cast<double>(p.z));
    max_z = std::max(max_z, static_cast<double>(p.z));
  }
  return max_z - min_z;
}

double mean_nn_distance(const SpatialIndex& index, int threads) {
  if (index.size() < 2) {
    throw Error(ErrorKind::TooFewPoints,
                "mean NN distance needs at least 2 points");
  }
  const auto n = static_cast<std::ptrdiff_t>(index.size());
  std::vector<double> distances(index.size());
  [[maybe_unused]] const int budget = resolve_threads(threads);

#pragma omp parallel for num_threads(budget) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    distances[i] = index.nearest(static_cast<std::size_t>(i)).distance;
  }

  // indexed reduction: summing in a fixed order keeps the result bit-stable
  // across thread counts
  double sum = 0.0;
  for (double d : distances) sum += d;
  return sum / static_cast<double>(index.size());
}

double mean_curvature(const SpatialIndex& index, std::size_t k, int threads) {
  if (index.size() < 4) {
    throw Error(ErrorKind::TooFewPoints, "curvature needs at least 4 points");
  }
  const auto n = static_cast<std::ptrdiff_t>(index.size());
  std::vector<double> curvature(index.size());
  [[maybe_unused]] const int budget = resolve_threads(threads);

#pragma omp parallel for num_threads(budget) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto neighbors = index.k_nearest(static_cast<std::size_t>(i), k);

    double mx = 0.0, my = 0.0, mz = 0.0;
    const auto& self = index.point(static_cast<std::size_t>(i));
    mx += self[0];
    my += self[1];
    mz += self[2];
    for (const Neighbor& nb : neighbors) {
      const auto& p = index.point(nb.index);
      mx += p[0];
      my += p[1];
      mz += p[2];
    }
    const double m = static_cast<double>(neighbors.size() + 1);
    mx /= m;
    my /= m;
    mz /= m;

    double c00 = 0.0, c01 = 0.0, c02 = 0.0, c11 = 0.0, c12 = 0.0, c22 = 0.0;
    auto accumulate = [&](const std::array<double, 3>& p) {
      const double dx = p[0] - mx;
      const double dy = p[1] - my;
      const double dz = p[2] - mz;
      c00 += dx * dx;
      c01 += dx * dy;
      c02 += dx * dz;
      c11 += dy * dy;
      c12 += dy * dz;
      c22 += dz * dz;
    };
    accumulate(self);
    for (const Neighbor& nb : neighbors) accumulate(index.point(nb.index));
    c00 /= m;
    c01 /= m;
    c02 /= m;
    c11 /= m;
    c12 /= m;
    c22 /= m;

    const auto eig = symmetric_eigenvalues(c00, c01, c02, c11, c12, c22);
    const double sum = eig[0] + eig[1] + eig[2];
    curvature[i] =
        sum > 0.0 ? std::min(std::max(eig[2], 0.0) / sum, 1.0 / 3.0) : 0.0;
  }

  double sum = 0.0;
  for (double c : curvature) sum += c;
  return sum / static_cast<double>(index.size());
}

// ---------------------------------------------------------------------------
// Histograms and the per-sequence report

std::vector<HistogramBin> equal_width_histogram(std::span<const double> values,
                                                std::uint32_t bins) {
  if (values.empty() || bins == 0) return {};
  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    return {HistogramBin{lo, hi, values.size()}};
  }
  std::vector<HistogramBin> out(bins);
  const double range = hi - lo;
  for (std::uint32_t b = 0; b < bins; ++b) {
    out[b].start = lo + range * b / bins;
    out[b].end = lo + range * (b + 1) / bins;
    out[b].count = 0;
  }
  out.back().end = hi;
  for (double v : values) {
    auto idx = static_cast<std::int64_t>((v - lo) / range * bins);
    idx = std::clamp<std::int64_t>(idx, 0, bins - 1);
    ++out[static_cast<std::size_t>(idx)].count;
  }
  return out;
}

GeometryReport summarize_geometry(const fs::path& root,
                                  std::span<const SequenceId> seqs,
                                  std::uint32_t bins, std::size_t k,
                                  int threads, io::LabelPolicy policy) {
  GeometryReport report;
  report.neighbor_count = k;
  report.bins = bins;

  std::vector<double> densities, nn_distances, heights, curvatures;
  for (SequenceId seq : seqs) {
    const fs::path seq_dir = root / "sequences" / seq.str();
    if (!fs::is_directory(seq_dir)) {
      throw Error(ErrorKind::MissingSequence, seq_dir.string());
    }
    LabeledCloud cloud;
    std::vector<fs::path> label_files;
    for (const auto& entry : fs::directory_iterator(seq_dir / "labels")) {
      if (entry.is_regular_file() && entry.path().extension() == ".label") {
        label_files.push_back(entry.path());
      }
    }
    std::sort(label_files.begin(), label_files.end());
    for (const auto& label_file : label_files) {
      fs::path scan_file = seq_dir / "velodyne" /
                           fs::path(label_file).filename().replace_extension(".bin");
      auto scan = io::read_skitti_scan(scan_file, label_file, policy);
      for (std::size_t i = 0; i < scan.cloud.size(); ++i) {
        cloud.push_back(scan.cloud.points()[i], scan.cloud.labels()[i],
                        scan.cloud.instance_ids()[i]);
      }
    }

    SequenceGeometry g;
    g.seq = seq;
    g.point_count = cloud.size();
    g.density = point_density(cloud);
    g.scene_height = scene_height(cloud);
    const SpatialIndex index(cloud);
    g.mean_nn_distance = mean_nn_distance(index, threads);
    g.mean_curvature = mean_curvature(index, k, threads);

    if (g.density) densities.push_back(*g.density);
    nn_distances.push_back(g.mean_nn_distance);
    heights.push_back(g.scene_height);
    curvatures.push_back(g.mean_curvature);
    report.sequences.push_back(std::move(g));
  }

  report.density_hist = equal_width_histogram(densities, bins);
  report.nn_distance_hist = equal_width_histogram(nn_distances, bins);
  report.height_hist = equal_width_histogram(heights, bins);
  report.curvature_hist = equal_width_histogram(curvatures, bins);
  return report;
}

}  // namespace pccforge::geom
