#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "litenc/pyramid.hpp"
#include "litenc/sampler.hpp"
#include "oracles.hpp"

using namespace litenc;

namespace {

FeatureLevel random_level(int height, int width, int d_model, std::uint64_t seed) {
  FeatureLevel lvl;
  lvl.height = height;
  lvl.width = width;
  lvl.stride = 8;
  lvl.d_model = d_model;
  lvl.data.resize(static_cast<std::size_t>(height) * width * d_model);
  Rng rng(seed);
  for (double& v : lvl.data) v = rng.uniform_sym();
  return lvl;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("sampling at a cell center returns that cell's feature") {
  const auto lvl = random_level(3, 4, 5, 1);
  for (int i = 0; i < lvl.height; ++i) {
    for (int j = 0; j < lvl.width; ++j) {
      const auto s = bilinear_sample(lvl, j + 0.5, i + 0.5);
      const double* cell = lvl.at(i, j);
      for (int c = 0; c < lvl.d_model; ++c) {
        CHECK(s[c] == doctest::Approx(cell[c]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("sampling midway between two adjacent centers returns their mean") {
  const auto lvl = random_level(2, 3, 4, 2);
  const auto s = bilinear_sample(lvl, 1.0, 0.5);  // between cells (0,0) and (0,1)
  for (int c = 0; c < lvl.d_model; ++c) {
    CHECK(s[c] == doctest::Approx(0.5 * (lvl.at(0, 0)[c] + lvl.at(0, 1)[c])).epsilon(1e-14));
  }
}

TEST_CASE("200 random points match the brute-force weight oracle") {
  const auto lvl = random_level(7, 9, 3, 3);
  Rng rng(99);
  for (int t = 0; t < 200; ++t) {
    const double x = -2.0 + 13.0 * rng.uniform01();
    const double y = -2.0 + 11.0 * rng.uniform01();
    const auto got = bilinear_sample(lvl, x, y);
    const auto want = oracle::bilinear(lvl, x, y);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("fully out-of-bounds points sample the zero vector") {
  const auto lvl = random_level(4, 4, 3, 4);
  for (const auto& [x, y] : {std::pair{-5.0, -5.0}, {10.0, 2.0}, {2.0, -1.5}}) {
    for (double v : bilinear_sample(lvl, x, y)) CHECK(v == 0.0);
  }

  SUBCASE("absurd coordinates are total-function safe") {
    const double inf = std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : {std::pair{1e12, 2.0}, {2.0, -1e12}, {inf, 1.0}, {1.0, -inf}}) {
      for (double v : bilinear_sample(lvl, x, y)) CHECK(v == 0.0);
      const std::vector<double> upstream{1.0, 1.0, 1.0};
      const auto grad = bilinear_backward(lvl, x, y, upstream);
      CHECK(grad.cells.empty());
      CHECK(grad.grad_x == 0.0);
      CHECK(grad.grad_y == 0.0);
    }
  }
}

TEST_CASE("sample_batch matches per-point calls and preserves order") {
  FeaturePyramid pyr = build_pyramid(64, 64, 3, {8, 16}, PyramidSource::seeded(5));
  Rng rng(17);
  std::vector<SampleLocation> locs;
  for (int t = 0; t < 50; ++t) {
    const int level = static_cast<int>(rng.next_u64() % 2);
    locs.push_back({10.0 * rng.uniform01(), 10.0 * rng.uniform01(), level});
  }

  const Matrix batch = sample_batch(pyr, locs);
  REQUIRE(batch.rows == 50);
  for (int i = 0; i < batch.rows; ++i) {
    const auto single = bilinear_sample(pyr.levels[locs[i].level], locs[i].x, locs[i].y);
    for (int c = 0; c < batch.cols; ++c) CHECK(batch(i, c) == single[c]);
  }

  SUBCASE("permuting locations permutes rows identically") {
    std::vector<SampleLocation> rev(locs.rbegin(), locs.rend());
    const Matrix swapped = sample_batch(pyr, rev);
    for (int i = 0; i < batch.rows; ++i) {
      for (int c = 0; c < batch.cols; ++c) {
        CHECK(swapped(batch.rows - 1 - i, c) == batch(i, c));
      }
    }
  }

  SUBCASE("invalid level index is an error") {
    locs[3].level = 2;
    CHECK_THROWS_AS(sample_batch(pyr, locs), std::invalid_argument);
    locs[3].level = -1;
    CHECK_THROWS_AS(sample_batch(pyr, locs), std::invalid_argument);
  }
}

TEST_CASE("bilinear sampling is linear in the features") {
  const auto a = random_level(5, 6, 4, 6);
  auto b = random_level(5, 6, 4, 7);
  FeatureLevel mix = a;
  const double alpha = 0.37, beta = -1.25;
  for (std::size_t i = 0; i < mix.data.size(); ++i) {
    mix.data[i] = alpha * a.data[i] + beta * b.data[i];
  }
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const double x = -1.0 + 8.0 * rng.uniform01();
    const double y = -1.0 + 7.0 * rng.uniform01();
    const auto sa = bilinear_sample(a, x, y);
    const auto sb = bilinear_sample(b, x, y);
    const auto sm = bilinear_sample(mix, x, y);
    for (int c = 0; c < a.d_model; ++c) {
      CHECK(std::abs(sm[c] - (alpha * sa[c] + beta * sb[c])) < 1e-12);
    }
  }
}

TEST_CASE("sampling commutes with feature projection") {
  const auto lvl = random_level(6, 5, 8, 9);
  Matrix w(8, 3);
  Rng rng(10);
  for (double& v : w.data) v = rng.uniform_sym();

  // Project every cell, then sample.
  FeatureLevel projected;
  projected.height = lvl.height;
  projected.width = lvl.width;
  projected.stride = lvl.stride;
  projected.d_model = 3;
  projected.data.assign(static_cast<std::size_t>(lvl.height) * lvl.width * 3, 0.0);
  for (int i = 0; i < lvl.height; ++i) {
    for (int j = 0; j < lvl.width; ++j) {
      const double* src = lvl.at(i, j);
      double* dst = projected.at(i, j);
      for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 3; ++b) dst[b] += src[a] * w(a, b);
      }
    }
  }

  for (int t = 0; t < 100; ++t) {
    const double x = -1.0 + 7.0 * rng.uniform01();
    const double y = -1.0 + 8.0 * rng.uniform01();
    const auto s = bilinear_sample(lvl, x, y);
    const auto sp = bilinear_sample(projected, x, y);
    for (int b = 0; b < 3; ++b) {
      double want = 0.0;
      for (int a = 0; a < 8; ++a) want += s[a] * w(a, b);
      CHECK(std::abs(sp[b] - want) < 1e-10);
    }
  }
}

TEST_CASE("interior weights form a partition of unity") {
  const auto lvl = random_level(6, 6, 1, 11);
  const std::vector<double> upstream{1.0};
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    // Interior: at least half a cell away from every border.
    const double x = 1.0 + 4.0 * rng.uniform01();
    const double y = 1.0 + 4.0 * rng.uniform01();
    const auto grad = bilinear_backward(lvl, x, y, upstream);
    double sum = 0.0;
    for (const auto& cell : grad.cells) {
      CHECK(cell.weight >= 0.0);
      CHECK(cell.weight <= 1.0);
      sum += cell.weight;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("a constant map has zero location gradients") {
  FeatureLevel lvl = random_level(4, 4, 3, 13);
  for (double& v : lvl.data) v = 2.5;
  const std::vector<double> upstream{0.3, -1.0, 0.7};
  const auto grad = bilinear_backward(lvl, 2.3, 1.7, upstream);
  CHECK(grad.grad_x == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(grad.grad_y == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("bilinear_backward matches central finite differences") {
  const auto lvl = random_level(6, 7, 4, 14);
  std::vector<double> upstream(4);
  Rng rng(15);
  for (double& v : upstream) v = rng.uniform_sym();

  const double h = 1e-6;
  auto phi = [&](const FeatureLevel& m, double x, double y) {
    const auto s = bilinear_sample(m, x, y);
    double acc = 0.0;
    for (int c = 0; c < m.d_model; ++c) acc += upstream[c] * s[c];
    return acc;
  };

  int checked = 0;
  while (checked < 100) {
    const double x = -0.5 + 8.0 * rng.uniform01();
    const double y = -0.5 + 7.0 * rng.uniform01();
    // Keep clear of interpolation breakpoints where the derivative is one-sided.
    const double fx = x - 0.5 - std::floor(x - 0.5);
    const double fy = y - 0.5 - std::floor(y - 0.5);
    if (std::min(fx, 1 - fx) < 1e-3 || std::min(fy, 1 - fy) < 1e-3) continue;
    ++checked;

    const auto grad = bilinear_backward(lvl, x, y, upstream);
    const double fd_x = (phi(lvl, x + h, y) - phi(lvl, x - h, y)) / (2 * h);
    const double fd_y = (phi(lvl, x, y + h) - phi(lvl, x, y - h)) / (2 * h);
    CHECK(std::abs(grad.grad_x - fd_x) <= 1e-6 * std::max(1.0, std::abs(fd_x)));
    CHECK(std::abs(grad.grad_y - fd_y) <= 1e-6 * std::max(1.0, std::abs(fd_y)));

    // Feature gradients on the touched cells.
    FeatureLevel perturbed = lvl;
    for (const auto& cell : grad.cells) {
      for (int c = 0; c < lvl.d_model; ++c) {
        double* slot = perturbed.at(cell.i, cell.j) + c;
        const double saved = *slot;
        *slot = saved + h;
        const double hi = phi(perturbed, x, y);
        *slot = saved - h;
        const double lo = phi(perturbed, x, y);
        *slot = saved;
        const double fd = (hi - lo) / (2 * h);
        CHECK(std::abs(cell.weight * upstream[c] - fd) <=
              1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("sampling is Lipschitz on bounded maps") {
  const auto lvl = random_level(8, 8, 3, 16);
  double max_abs = 0.0;
  for (double v : lvl.data) max_abs = std::max(max_abs, std::abs(v));
  const double bound = 8.0 * max_abs * std::sqrt(3.0);

  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const double x = 8.0 * rng.uniform01();
    const double y = 8.0 * rng.uniform01();
    const double eps = 1e-3 * rng.uniform01();
    const double dir = 2 * std::numbers::pi * rng.uniform01();
    const auto a = bilinear_sample(lvl, x, y);
    const auto b = bilinear_sample(lvl, x + eps * std::cos(dir), y + eps * std::sin(dir));
    double dist = 0.0;
    for (int c = 0; c < 3; ++c) dist += (a[c] - b[c]) * (a[c] - b[c]);
    CHECK(std::sqrt(dist) <= bound * eps + 1e-15);
  }
}
