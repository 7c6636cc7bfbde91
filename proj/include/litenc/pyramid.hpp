#pragma once

#include <string>
#include <vector>

#include "litenc/core.hpp"

namespace litenc {

struct LevelShape {
  int height = 0;
  int width = 0;
  int stride = 0;
};

/// One pyramid level. `data` holds height*width tokens of d_model channels,
/// row-major in (i, j, c) order.
struct FeatureLevel {
  int height = 0;
  int width = 0;
  int stride = 0;
  int d_model = 0;
  std::vector<double> data;

  const double* at(int i, int j) const {
    return data.data() + (static_cast<std::size_t>(i) * width + j) * d_model;
  }
  double* at(int i, int j) {
    return data.data() + (static_cast<std::size_t>(i) * width + j) * d_model;
  }
  int tokens() const { return height * width; }
};

/// Multi-scale feature pyramid. Levels are stored smallest map first (largest
/// stride first), and the flattened token order is level-major then row-major.
struct FeaturePyramid {
  std::vector<FeatureLevel> levels;
  int d_model = 0;

  int total_tokens() const;
  /// First flattened token index of `level`.
  int level_offset(int level) const;
  std::vector<LevelShape> shapes() const;
  /// N x d_model view of all tokens in flattened order.
  Matrix flatten() const;
};

/// Rebuild a pyramid with the given level shapes from a flattened token matrix.
FeaturePyramid pyramid_from_tokens(const std::vector<LevelShape>& shapes, int d_model,
                                   const Matrix& tokens);

/// High/low split of the flattened token index range. Both index maps are
/// bijections into the flattened pyramid; together they cover every token
/// exactly once.
struct TokenPartition {
  std::vector<int> high_indices;
  std::vector<int> low_indices;

  int n_high() const { return static_cast<int>(high_indices.size()); }
  int n_low() const { return static_cast<int>(low_indices.size()); }
};

/// Normalized cell-center anchor of one token: x = (j+0.5)/width,
/// y = (i+0.5)/height on its source level.
struct ReferencePoint {
  double x = 0.0;
  double y = 0.0;
  int level = 0;
};

/// Where pyramid features come from: a deterministic seeded generator or a
/// fixture file (JSON, see json_io.hpp).
struct PyramidSource {
  static PyramidSource seeded(std::uint64_t seed) { return PyramidSource{seed, {}}; }
  static PyramidSource fixture(std::string path) { return PyramidSource{0, std::move(path)}; }
  bool is_seeded() const { return fixture_path.empty(); }

  std::uint64_t seed = 0;
  std::string fixture_path;
};

/// Build an L-level pyramid for the given input size. `strides` is read
/// low-to-high level (strictly increasing powers of two); the base dimensions
/// must be divisible by the largest stride so every level divides exactly.
FeaturePyramid build_pyramid(int base_height, int base_width, int d_model,
                             const std::vector<int>& strides, const PyramidSource& source);

/// 2x2 mean pooling; halves both dimensions and doubles the stride.
FeatureLevel downsample_half(const FeatureLevel& level);

/// Fraction of all tokens contributed by each level, in stored order. Sums to 1.
std::vector<double> token_ratios(const FeaturePyramid& pyramid);

/// The n_high_levels smallest maps become the high-level token set, the rest
/// the low-level set.
TokenPartition split_tokens(const FeaturePyramid& pyramid, int n_high_levels);

/// One reference point per token, in flattened token order.
std::vector<ReferencePoint> reference_points(const FeaturePyramid& pyramid);

}  // namespace litenc
