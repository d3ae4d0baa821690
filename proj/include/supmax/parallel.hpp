#pragma once

// Deterministic chunked Monte Carlo. Samples are split into fixed-size
// chunks; each chunk draws its normals from the counter-based stream at the
// chunk's own sample indices, accumulates per-channel statistics, and the
// chunk results are merged by a fixed-order pairwise tree. The number of
// worker threads therefore never changes a single bit of the output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "supmax/rng.hpp"

namespace supmax::parallel {

/// Mean/variance accumulator (Welford) with exact-order merging (Chan et al.).
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double sum = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void push(double x) noexcept {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
    sum += x;
    min = std::min(min, x);
    max = std::max(max, x);
  }

  static RunningStats merge(const RunningStats& a, const RunningStats& b) noexcept {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    RunningStats r;
    r.count = a.count + b.count;
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = static_cast<double>(r.count);
    const double d = b.mean - a.mean;
    r.mean = a.mean + d * (nb / n);
    r.m2 = a.m2 + b.m2 + d * d * (na * nb / n);
    r.sum = a.sum + b.sum;
    r.min = std::min(a.min, b.min);
    r.max = std::max(a.max, b.max);
    return r;
  }

  /// Unbiased sample variance.
  double variance() const noexcept {
    return count > 1 ? std::max(0.0, m2 / static_cast<double>(count - 1)) : 0.0;
  }
  double std_dev() const noexcept { return std::sqrt(variance()); }
  double std_error() const noexcept {
    return count > 0 ? std_dev() / std::sqrt(static_cast<double>(count)) : 0.0;
  }
};

inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{0};
  return cap;
}

/// Caps the worker count for subsequent estimates (0 = automatic).
inline void set_max_threads(int n) { thread_cap().store(std::max(0, n)); }

/// Worker count: explicit cap, else SUPMAX_THREADS, else hardware concurrency.
inline int max_threads() {
  if (const int cap = thread_cap().load(); cap > 0) return cap;
  if (const char* env = std::getenv("SUPMAX_THREADS"); env != nullptr) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(index) for index in [0, count) on up to max_threads() workers.
/// Results must be written to per-index slots; no ordering is implied.
template <class Body>
void for_each_index(std::size_t count, Body&& body) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(
      static_cast<std::size_t>(max_threads()), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
}

/// Fixed-order pairwise reduction over per-chunk results.
template <class T, class Combine>
T tree_reduce(std::span<const T> items, Combine&& combine) {
  if (items.empty()) return T{};
  if (items.size() == 1) return items[0];
  const std::size_t half = items.size() / 2;
  return combine(tree_reduce(items.first(half), combine), tree_reduce(items.subspan(half), combine));
}

inline constexpr std::uint64_t kChunkSize = 8192;

/// Monte Carlo driver.
///
/// For every sample s in [0, n) the kernel receives `dim` standard normals
/// (identical for a given (seed, stream_id, s)) and writes `channels`
/// values, each of which is accumulated into its own RunningStats. The
/// kernel object is copied once per chunk so it may own scratch buffers.
template <class Kernel>
std::vector<RunningStats> monte_carlo(std::uint64_t n, std::uint64_t seed, std::uint32_t stream_id,
                                      std::size_t dim, std::size_t channels, const Kernel& kernel) {
  const std::uint64_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<std::vector<RunningStats>> partial(n_chunks);
  const rng::NormalStream stream(seed, stream_id);

  for_each_index(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
    Kernel local = kernel;
    std::vector<double> z(dim);
    std::vector<double> out(channels);
    std::vector<RunningStats> acc(channels);
    const std::uint64_t begin = c * kChunkSize;
    const std::uint64_t end = std::min(n, begin + kChunkSize);
    for (std::uint64_t s = begin; s < end; ++s) {
      stream.fill(s, z);
      local(std::span<const double>(z), std::span<double>(out));
      for (std::size_t ch = 0; ch < channels; ++ch) acc[ch].push(out[ch]);
    }
    partial[c] = std::move(acc);
  });

  std::vector<RunningStats> result(channels);
  std::vector<RunningStats> column(n_chunks);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) column[c] = partial[c][ch];
    result[ch] = tree_reduce(std::span<const RunningStats>(column), RunningStats::merge);
  }
  return result;
}

}  // namespace supmax::parallel
