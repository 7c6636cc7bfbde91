#include "litenc/sampler.hpp"

#include <cmath>
#include <cstring>

namespace litenc {

namespace {

struct Neighborhood {
  int x0, y0;      // top-left neighbor in cell-index space
  double fx, fy;   // fractional position within the 2x2 neighborhood, in [0, 1)
};

Neighborhood locate(double x, double y) {
  const double gx = x - 0.5;
  const double gy = y - 0.5;
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  return {static_cast<int>(fx0), static_cast<int>(fy0), gx - fx0, gy - fy0};
}

// Sites this far out never touch the map; also keeps the int cast in
// locate() away from overflow on absurd or non-finite coordinates.
bool far_outside(const FeatureLevel& lvl, double x, double y) {
  return !(x > -1e9 && x < lvl.width + 1e9 && y > -1e9 && y < lvl.height + 1e9);
}

bool in_map(const FeatureLevel& lvl, int i, int j) {
  return i >= 0 && i < lvl.height && j >= 0 && j < lvl.width;
}

}  // namespace

void bilinear_sample_into(const FeatureLevel& level, double x, double y, double* out) {
  if (far_outside(level, x, y)) {
    std::memset(out, 0, sizeof(double) * level.d_model);
    return;
  }
  const auto [x0, y0, fx, fy] = locate(x, y);
  const double w00 = (1.0 - fy) * (1.0 - fx);
  const double w01 = (1.0 - fy) * fx;
  const double w10 = fy * (1.0 - fx);
  const double w11 = fy * fx;

  std::memset(out, 0, sizeof(double) * level.d_model);
  const int is[4] = {y0, y0, y0 + 1, y0 + 1};
  const int js[4] = {x0, x0 + 1, x0, x0 + 1};
  const double ws[4] = {w00, w01, w10, w11};
  for (int k = 0; k < 4; ++k) {
    if (ws[k] == 0.0 || !in_map(level, is[k], js[k])) continue;
    const double* cell = level.at(is[k], js[k]);
    const double w = ws[k];
    for (int c = 0; c < level.d_model; ++c) out[c] += w * cell[c];
  }
}

std::vector<double> bilinear_sample(const FeatureLevel& level, double x, double y) {
  std::vector<double> out(level.d_model);
  bilinear_sample_into(level, x, y, out.data());
  return out;
}

Matrix sample_batch(const FeaturePyramid& pyramid, const std::vector<SampleLocation>& locations) {
  const int n_levels = static_cast<int>(pyramid.levels.size());
  for (const auto& loc : locations) {
    if (loc.level < 0 || loc.level >= n_levels) {
      throw std::invalid_argument("sample_batch: level index " + std::to_string(loc.level) +
                                  " out of range [0, " + std::to_string(n_levels - 1) + "]");
    }
  }
  Matrix out(static_cast<int>(locations.size()), pyramid.d_model);
  parallel_for(out.rows, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const auto& loc = locations[i];
      bilinear_sample_into(pyramid.levels[loc.level], loc.x, loc.y, out.row(i));
    }
  });
  return out;
}

BilinearGrad bilinear_backward(const FeatureLevel& level, double x, double y,
                               std::span<const double> upstream) {
  if (static_cast<int>(upstream.size()) != level.d_model) {
    throw std::invalid_argument("bilinear_backward: upstream length does not match d_model");
  }
  if (far_outside(level, x, y)) return {};
  const auto [x0, y0, fx, fy] = locate(x, y);

  BilinearGrad grad;
  const int is[4] = {y0, y0, y0 + 1, y0 + 1};
  const int js[4] = {x0, x0 + 1, x0, x0 + 1};
  const double ws[4] = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
  // d(weight)/dx and d(weight)/dy per neighbor; x and y enter the weights
  // with unit slope through the fractional parts.
  const double dwx[4] = {-(1.0 - fy), (1.0 - fy), -fy, fy};
  const double dwy[4] = {-(1.0 - fx), -fx, (1.0 - fx), fx};

  for (int k = 0; k < 4; ++k) {
    if (!in_map(level, is[k], js[k])) continue;
    grad.cells.push_back({is[k], js[k], ws[k]});
    const double* cell = level.at(is[k], js[k]);
    double dot = 0.0;
    for (int c = 0; c < level.d_model; ++c) dot += upstream[c] * cell[c];
    grad.grad_x += dwx[k] * dot;
    grad.grad_y += dwy[k] * dot;
  }
  return grad;
}

}  // namespace litenc
