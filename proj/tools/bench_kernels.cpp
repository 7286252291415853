// Times the parallel kernels against their serial reference implementations
// and checks that both sides agree. Build target: bench_kernels (not a test).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "pccforge/core.hpp"
#include "pccforge/eval.hpp"
#include "pccforge/geometry.hpp"
#include "pccforge/reference.hpp"
#include "pccforge/remap.hpp"

using namespace pccforge;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

LabeledCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(-25.0f, 25.0f);
  LabeledCloud cloud;
  cloud.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.push_back({coord(rng), coord(rng), coord(rng), 0.0f});
  }
  return cloud;
}

void report(const char* name, std::size_t n, double serial_ms,
            double parallel_ms, bool agree) {
  std::printf("%-18s n=%-9zu serial %9.2f ms   parallel %9.2f ms   x%5.2f   %s\n",
              name, n, serial_ms, parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0,
              agree ? "results agree" : "MISMATCH");
}

void bench_mean_nn(std::size_t n) {
  const auto cloud = random_cloud(n, 11);

  auto t0 = Clock::now();
  const double serial = ref::brute_force_mean_nn_distance(cloud);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const geom::SpatialIndex index(cloud);
  const double parallel = geom::mean_nn_distance(index);
  const double parallel_ms = ms_since(t0);

  report("mean_nn_distance", n, serial_ms, parallel_ms,
         std::abs(serial - parallel) <= 1e-12 * std::abs(serial));
}

void bench_curvature(std::size_t n) {
  const auto cloud = random_cloud(n, 12);

  auto t0 = Clock::now();
  const double serial = ref::brute_force_mean_curvature(cloud, 16);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const geom::SpatialIndex index(cloud);
  const double parallel = geom::mean_curvature(index, 16);
  const double parallel_ms = ms_since(t0);

  report("mean_curvature", n, serial_ms, parallel_ms,
         std::abs(serial - parallel) <= 1e-9 * std::max(1.0, std::abs(serial)));
}

void bench_remap(std::size_t n) {
  remap::RemapTable table;
  table.source_name = "bench";
  for (int i = 0; i < 400; ++i) {
    table.rules["key_" + std::to_string(i)] =
        static_cast<ClassId>(i % kClassCount);
  }
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> pick(0, 499);  // 1 in 5 keys unmapped
  std::vector<std::string> keys;
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys.push_back("key_" + std::to_string(pick(rng)));
  }

  auto t0 = Clock::now();
  const auto serial = ref::serial_remap(keys, table);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const auto parallel = remap::apply_remap(keys, table);
  const double parallel_ms = ms_since(t0);

  report("apply_remap", n, serial_ms, parallel_ms,
         serial.labels == parallel.labels &&
             serial.unmapped == parallel.unmapped);
}

void bench_metrics(std::size_t n) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> cls(0, kClassCount - 1);
  std::vector<ClassId> gt(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    gt[i] = static_cast<ClassId>(cls(rng));
    pred[i] = static_cast<ClassId>(cls(rng));
  }

  auto t0 = Clock::now();
  const auto serial = ref::scalar_class_metrics(gt, pred);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  eval::ConfusionMatrix matrix;
  eval::accumulate(gt, pred, matrix);
  const auto fast = eval::class_metrics(matrix);
  const double fast_ms = ms_since(t0);

  bool agree = true;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    agree = agree && serial[c].tp == fast[c].tp && serial[c].fp == fast[c].fp &&
            serial[c].fn == fast[c].fn;
  }
  report("class_metrics", n, serial_ms, fast_ms, agree);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t scale = 1;
  if (argc > 1) scale = std::max<long>(1, std::atol(argv[1]));

  std::printf("threads available: %d\n\n", resolve_threads(0));
  bench_mean_nn(20000 * scale);
  bench_curvature(4000 * scale);
  bench_remap(1000000 * scale);
  bench_metrics(2000000 * scale);
  return 0;
}
