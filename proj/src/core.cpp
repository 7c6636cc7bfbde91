#include "litenc/core.hpp"

#include <cmath>
#include <cstdlib>

namespace litenc {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows) + ")");
  }
  Matrix c(a.rows, b.cols);
  parallel_for(a.rows, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* arow = a.row(i);
      double* crow = c.row(i);
      for (int k = 0; k < a.cols; ++k) {
        const double aik = arow[k];
        if (aik == 0.0) continue;
        const double* brow = b.row(k);
        for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
      }
    }
  });
  return c;
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  if (static_cast<int>(bias.size()) != m.cols) {
    throw std::invalid_argument("add_bias_rows: bias length " + std::to_string(bias.size()) +
                                " does not match " + std::to_string(m.cols) + " columns");
  }
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (int j = 0; j < m.cols; ++j) row[j] += bias[j];
  }
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& indices) {
  Matrix out(static_cast<int>(indices.size()), m.cols);
  for (int i = 0; i < out.rows; ++i) {
    const int src = indices[i];
    if (src < 0 || src >= m.rows) throw std::invalid_argument("gather_rows: index out of range");
    std::copy(m.row(src), m.row(src) + m.cols, out.row(i));
  }
  return out;
}

void scatter_rows(Matrix& dst, const std::vector<int>& indices, const Matrix& src) {
  if (static_cast<int>(indices.size()) != src.rows || dst.cols != src.cols) {
    throw std::invalid_argument("scatter_rows: shape mismatch");
  }
  for (int i = 0; i < src.rows; ++i) {
    const int d = indices[i];
    if (d < 0 || d >= dst.rows) throw std::invalid_argument("scatter_rows: index out of range");
    std::copy(src.row(i), src.row(i) + src.cols, dst.row(d));
  }
}

bool has_nan(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(p[i])) return true;
  }
  return false;
}

bool has_nan(const Matrix& m) { return has_nan(m.data.data(), m.data.size()); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  Rng r(seed ^ (0xD1B54A32D192ED03ULL * (tag + 1)));
  return r.next_u64();
}

std::uint64_t fnv1a(const void* data, std::size_t nbytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < nbytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

int thread_budget() {
  if (const char* env = std::getenv("LITE_ENCODER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace litenc
