#pragma once

#include <span>
#include <vector>

#include "litenc/core.hpp"
#include "litenc/pyramid.hpp"

namespace litenc {

/// A continuous sampling site in level-pixel units of `level`. Cell (i, j)
/// has its feature centered at (x, y) = (j + 0.5, i + 0.5). Sites may lie
/// outside the map; missing neighbors contribute zero (zero padding).
struct SampleLocation {
  double x = 0.0;
  double y = 0.0;
  int level = 0;
};

/// 4-neighbor bilinear interpolation at (x, y). Total function: fully
/// out-of-bounds sites return the zero vector.
std::vector<double> bilinear_sample(const FeatureLevel& level, double x, double y);

/// As bilinear_sample, writing d_model values to `out`.
void bilinear_sample_into(const FeatureLevel& level, double x, double y, double* out);

/// Row i holds the sample at locations[i]. Invalid level indices are an error.
Matrix sample_batch(const FeaturePyramid& pyramid, const std::vector<SampleLocation>& locations);

/// Gradient of dot(upstream, bilinear_sample(level, x, y)).
///
/// The gradient with respect to the feature vector of touched cell (i, j) is
/// cells[k].weight * upstream. At interpolation breakpoints (sites an integer
/// offset from a cell center) the one-sided derivative from the interior is
/// used, which is what the floor-based neighborhood yields.
struct BilinearGrad {
  struct Cell {
    int i = 0;
    int j = 0;
    double weight = 0.0;
  };
  std::vector<Cell> cells;  // at most 4
  double grad_x = 0.0;
  double grad_y = 0.0;
};

BilinearGrad bilinear_backward(const FeatureLevel& level, double x, double y,
                               std::span<const double> upstream);

}  // namespace litenc
