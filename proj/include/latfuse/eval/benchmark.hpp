#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/image.hpp"
#include "latfuse/core/random.hpp"

namespace latfuse::eval {

inline constexpr int kBenchmarkResolution = 512;

struct ThroughputRow {
  std::string method_id;
  int n_inputs = 0;
  double images_per_second = 0.0;  // median over trials
  double spread = 0.0;             // max − min images/s over trials
  int trials = 0;
  int patch_resolution = kBenchmarkResolution;
};

struct BenchmarkEnvironment {
  std::string hardware_id;
  unsigned hardware_threads = 0;
  int trials = 0;
  int warmup = 0;
  std::string note = "timed sections ran one at a time with no concurrent work";
};

struct BenchmarkReport {
  std::vector<ThroughputRow> rows;
  BenchmarkEnvironment environment;
};

inline std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(line.find_first_not_of(' ', colon + 1));
    }
  return "unknown";
}

/// Produces one stack per call; the benchmark times fuse_fn only.
using FuseFn = std::function<void(const FocusStack&)>;

/// Times `fuse_fn` on random `resolution`² stacks of each size in
/// `n_inputs_list`. Warmup runs are discarded; the reported rate is the median
/// of `trials` timed runs. Trials go round-robin over the input counts so slow
/// drift in machine speed hits every count alike.
inline BenchmarkReport throughput_benchmark(const std::string& method_id, const FuseFn& fuse_fn,
                                            const std::vector<int>& n_inputs_list, int trials, int warmup,
                                            int resolution = kBenchmarkResolution, std::uint64_t seed = 0) {
  if (trials < 3) throw ValueError("throughput_benchmark needs trials >= 3");
  if (warmup < 1) throw ValueError("throughput_benchmark needs warmup >= 1");
  if (n_inputs_list.empty()) throw ValueError("throughput_benchmark needs at least one input count");
  BenchmarkReport report;
  report.environment = {cpu_model(), std::thread::hardware_concurrency(), trials, warmup};
  Rng rng(seed);
  std::vector<FocusStack> stacks;
  for (int n : n_inputs_list) {
    if (n < 1 || n > kMaxStackSize) throw ValueError("input count must lie in [1, 7]");
    std::vector<ImageBuffer> imgs;
    for (int i = 0; i < n; ++i) {
      ImageBuffer img(resolution, resolution, 3);
      for (float& v : img.values()) v = static_cast<float>(rng.uniform());
      imgs.push_back(std::move(img));
    }
    stacks.push_back(FocusStack::with_unit_distances(std::move(imgs)));
  }
  for (const auto& stack : stacks)
    for (int w = 0; w < warmup; ++w) fuse_fn(stack);
  std::vector<std::vector<double>> rates(stacks.size());
  for (int t = 0; t < trials; ++t)
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      fuse_fn(stacks[i]);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rates[i].push_back(1.0 / std::max(s, 1e-9));
    }
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    auto& r = rates[i];
    std::sort(r.begin(), r.end());
    const double median = trials % 2 ? r[trials / 2] : 0.5 * (r[trials / 2 - 1] + r[trials / 2]);
    report.rows.push_back({method_id, n_inputs_list[i], median, r.back() - r.front(), trials, resolution});
  }
  return report;
}

}  // namespace latfuse::eval
