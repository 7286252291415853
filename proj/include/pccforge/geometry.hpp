#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pccforge/core.hpp"
#include "pccforge/io.hpp"

namespace pccforge::geom {

struct Neighbor {
  std::size_t index;
  double distance;  // meters
};

/// Exact k-d tree (axis-median splits, leaf size 16). Queries return the
/// brute-force answer: neighbors sorted ascending by distance, ties broken
/// by lower point index. Distances are computed in double from the stored
/// float coordinates.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  explicit SpatialIndex(const LabeledCloud& cloud);  // EmptyCloud if empty

  std::size_t size() const noexcept { return points_.size(); }
  const std::array<double, 3>& point(std::size_t i) const {
    return points_[i];
  }

  /// k nearest points other than query_index itself (clamped to size()-1).
  std::vector<Neighbor> k_nearest(std::size_t query_index, std::size_t k) const;

  /// Nearest other point; TooFewPoints when the cloud has < 2 points.
  Neighbor nearest(std::size_t query_index) const;

 private:
  struct Node {
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int8_t axis = -1;  // -1 marks a leaf
  };

  struct Candidate {
    double d2;
    std::uint32_t index;
    friend bool operator<(const Candidate& a, const Candidate& b) {
      return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
    }
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const std::array<double, 3>& query,
              std::uint32_t skip, std::size_t k,
              std::vector<Candidate>& heap) const;

  std::vector<std::array<double, 3>> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Eigenvalues of a symmetric 3x3 matrix, descending. Analytic (trigonometric)
/// solution; inputs are the upper triangle.
std::array<double, 3> symmetric_eigenvalues(double a00, double a01, double a02,
                                            double a11, double a12, double a22);

inline constexpr std::size_t kDefaultCurvatureNeighbors = 16;
inline constexpr std::string_view kAreaDefinition = "xy_bounding_box";

/// Points per m^2 over the XY bounding-box footprint; nullopt when the
/// footprint has zero area (degenerate cloud).
std::optional<double> point_density(const LabeledCloud& cloud);

/// max z - min z.
double scene_height(const LabeledCloud& cloud);

/// Mean over all points of the distance to the nearest other point.
double mean_nn_distance(const SpatialIndex& index, int threads = 0);

/// Mean surface-variation curvature: per point, the covariance of its k
/// nearest neighbors plus itself has eigenvalues l1 >= l2 >= l3 >= 0 and the
/// point's curvature is l3/(l1+l2+l3), in [0, 1/3]; 0 when the sum is 0.
double mean_curvature(const SpatialIndex& index,
                      std::size_t k = kDefaultCurvatureNeighbors,
                      int threads = 0);

struct SequenceGeometry {
  SequenceId seq;
  std::optional<double> density;  // nullopt: degenerate footprint
  double mean_nn_distance = 0.0;
  double scene_height = 0.0;
  double mean_curvature = 0.0;
  std::uint64_t point_count = 0;
};

struct HistogramBin {
  double start;
  double end;
  std::uint64_t count;
};

/// Equal-width bins over [min, max] of the observations; bins are half-open
/// [start, end) except the last, which is closed. A zero-width range
/// collapses to a single [v, v] bin.
std::vector<HistogramBin> equal_width_histogram(std::span<const double> values,
                                                std::uint32_t bins);

struct GeometryReport {
  std::vector<SequenceGeometry> sequences;
  std::size_t neighbor_count = kDefaultCurvatureNeighbors;
  std::uint32_t bins = 50;
  std::vector<HistogramBin> density_hist;
  std::vector<HistogramBin> nn_distance_hist;
  std::vector<HistogramBin> height_hist;
  std::vector<HistogramBin> curvature_hist;
};

/// Per-sequence metrics plus pooled histograms (one observation per sequence
/// and metric; undefined densities are excluded from the density histogram).
GeometryReport summarize_geometry(const std::filesystem::path& root,
                                  std::span<const SequenceId> seqs,
                                  std::uint32_t bins = 50,
                                  std::size_t k = kDefaultCurvatureNeighbors,
                                  int threads = 0,
                                  io::LabelPolicy policy = io::LabelPolicy::Strict);

}  // namespace pccforge::geom
