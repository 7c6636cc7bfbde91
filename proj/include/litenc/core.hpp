#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace litenc {

/// Malformed textual input (variant strings, fixture files).
class ParseError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: NaN in inputs, failed gradient check.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
void add_bias_rows(Matrix& m, const std::vector<double>& bias);
Matrix gather_rows(const Matrix& m, const std::vector<int>& indices);
void scatter_rows(Matrix& dst, const std::vector<int>& indices, const Matrix& src);

bool has_nan(const double* p, std::size_t n);
bool has_nan(const Matrix& m);

/// splitmix64 stream, pinned bit-for-bit so seeded fixtures reproduce across
/// platforms (std:: distributions are not specified that tightly).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [-1, 1).
  double uniform_sym() { return 2.0 * uniform01() - 1.0; }

 private:
  std::uint64_t state_;
};

/// Derive an independent sub-seed from (seed, tag).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

std::uint64_t fnv1a(const void* data, std::size_t nbytes);
std::string to_hex(std::uint64_t v);

/// Worker count: LITE_ENCODER_THREADS if set, hardware concurrency otherwise.
int thread_budget();

/// Run fn(lo, hi) over a static partition of [0, n). Each index is processed
/// by exactly one worker with identical serial arithmetic, so results are
/// bit-identical for every thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  if (n <= 0) return;
  const int workers = std::min(thread_budget(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const int chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(0, std::min(chunk, n));
  for (auto& th : pool) th.join();
}

}  // namespace litenc
