#include "litenc/pyramid.hpp"

#include <algorithm>

#include "litenc/json_io.hpp"

namespace litenc {

int FeaturePyramid::total_tokens() const {
  int n = 0;
  for (const auto& lvl : levels) n += lvl.tokens();
  return n;
}

int FeaturePyramid::level_offset(int level) const {
  if (level < 0 || level >= static_cast<int>(levels.size())) {
    throw std::invalid_argument("level_offset: level " + std::to_string(level) + " out of range");
  }
  int off = 0;
  for (int l = 0; l < level; ++l) off += levels[l].tokens();
  return off;
}

std::vector<LevelShape> FeaturePyramid::shapes() const {
  std::vector<LevelShape> out;
  out.reserve(levels.size());
  for (const auto& lvl : levels) out.push_back({lvl.height, lvl.width, lvl.stride});
  return out;
}

Matrix FeaturePyramid::flatten() const {
  Matrix m(total_tokens(), d_model);
  double* dst = m.data.data();
  for (const auto& lvl : levels) {
    std::copy(lvl.data.begin(), lvl.data.end(), dst);
    dst += lvl.data.size();
  }
  return m;
}

FeaturePyramid pyramid_from_tokens(const std::vector<LevelShape>& shapes, int d_model,
                                   const Matrix& tokens) {
  int expected = 0;
  for (const auto& s : shapes) expected += s.height * s.width;
  if (tokens.rows != expected || tokens.cols != d_model) {
    throw std::invalid_argument("pyramid_from_tokens: token matrix is " +
                                std::to_string(tokens.rows) + "x" + std::to_string(tokens.cols) +
                                ", expected " + std::to_string(expected) + "x" +
                                std::to_string(d_model));
  }
  FeaturePyramid pyr;
  pyr.d_model = d_model;
  const double* src = tokens.data.data();
  for (const auto& s : shapes) {
    FeatureLevel lvl;
    lvl.height = s.height;
    lvl.width = s.width;
    lvl.stride = s.stride;
    lvl.d_model = d_model;
    const std::size_t n = static_cast<std::size_t>(s.height) * s.width * d_model;
    lvl.data.assign(src, src + n);
    src += n;
    pyr.levels.push_back(std::move(lvl));
  }
  return pyr;
}

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void validate_strides(const std::vector<int>& strides) {
  if (strides.empty()) throw std::invalid_argument("build_pyramid: empty stride list");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (!is_power_of_two(strides[i])) {
      throw std::invalid_argument("build_pyramid: stride " + std::to_string(strides[i]) +
                                  " is not a power of two");
    }
    if (i > 0 && strides[i] <= strides[i - 1]) {
      throw std::invalid_argument("build_pyramid: strides must be strictly increasing, got " +
                                  std::to_string(strides[i]) + " after " +
                                  std::to_string(strides[i - 1]));
    }
  }
}

}  // namespace

FeaturePyramid build_pyramid(int base_height, int base_width, int d_model,
                             const std::vector<int>& strides, const PyramidSource& source) {
  if (base_height <= 0 || base_width <= 0 || d_model <= 0) {
    throw std::invalid_argument("build_pyramid: dimensions must be positive");
  }
  validate_strides(strides);
  const int max_stride = strides.back();
  if (base_height % max_stride != 0) {
    throw std::invalid_argument("build_pyramid: base height " + std::to_string(base_height) +
                                " not divisible by stride " + std::to_string(max_stride));
  }
  if (base_width % max_stride != 0) {
    throw std::invalid_argument("build_pyramid: base width " + std::to_string(base_width) +
                                " not divisible by stride " + std::to_string(max_stride));
  }

  if (!source.is_seeded()) {
    FeaturePyramid pyr = load_pyramid_fixture(source.fixture_path);
    if (pyr.d_model != d_model || pyr.levels.size() != strides.size()) {
      throw std::invalid_argument("build_pyramid: fixture does not match requested shape");
    }
    for (std::size_t i = 0; i < strides.size(); ++i) {
      const auto& lvl = pyr.levels[i];
      const int stride = strides[strides.size() - 1 - i];
      if (lvl.stride != stride || lvl.height != base_height / stride ||
          lvl.width != base_width / stride) {
        throw std::invalid_argument("build_pyramid: fixture level " + std::to_string(i) +
                                    " does not match requested shape");
      }
    }
    return pyr;
  }

  FeaturePyramid pyr;
  pyr.d_model = d_model;
  Rng rng(mix_seed(source.seed, 0x70797261ULL));
  for (auto it = strides.rbegin(); it != strides.rend(); ++it) {
    FeatureLevel lvl;
    lvl.stride = *it;
    lvl.height = base_height / *it;
    lvl.width = base_width / *it;
    lvl.d_model = d_model;
    lvl.data.resize(static_cast<std::size_t>(lvl.height) * lvl.width * d_model);
    for (double& v : lvl.data) v = rng.uniform_sym();
    pyr.levels.push_back(std::move(lvl));
  }
  return pyr;
}

FeatureLevel downsample_half(const FeatureLevel& level) {
  if (level.height % 2 != 0 || level.width % 2 != 0) {
    throw std::invalid_argument("downsample_half: dimensions " + std::to_string(level.height) +
                                "x" + std::to_string(level.width) + " are not even");
  }
  FeatureLevel out;
  out.height = level.height / 2;
  out.width = level.width / 2;
  out.stride = level.stride * 2;
  out.d_model = level.d_model;
  out.data.resize(static_cast<std::size_t>(out.height) * out.width * out.d_model);
  for (int i = 0; i < out.height; ++i) {
    for (int j = 0; j < out.width; ++j) {
      double* dst = out.at(i, j);
      const double* a = level.at(2 * i, 2 * j);
      const double* b = level.at(2 * i, 2 * j + 1);
      const double* c = level.at(2 * i + 1, 2 * j);
      const double* d = level.at(2 * i + 1, 2 * j + 1);
      for (int ch = 0; ch < out.d_model; ++ch) {
        dst[ch] = 0.25 * (a[ch] + b[ch] + c[ch] + d[ch]);
      }
    }
  }
  return out;
}

std::vector<double> token_ratios(const FeaturePyramid& pyramid) {
  if (pyramid.levels.empty()) throw std::invalid_argument("token_ratios: empty pyramid");
  const double total = static_cast<double>(pyramid.total_tokens());
  std::vector<double> out;
  out.reserve(pyramid.levels.size());
  for (const auto& lvl : pyramid.levels) out.push_back(static_cast<double>(lvl.tokens()) / total);
  return out;
}

TokenPartition split_tokens(const FeaturePyramid& pyramid, int n_high_levels) {
  const int n_levels = static_cast<int>(pyramid.levels.size());
  if (n_high_levels < 1 || n_high_levels >= n_levels) {
    throw std::invalid_argument("split_tokens: n_high_levels " + std::to_string(n_high_levels) +
                                " out of range [1, " + std::to_string(n_levels - 1) + "]");
  }
  TokenPartition part;
  const int n_high = pyramid.level_offset(n_high_levels);
  const int n_total = pyramid.total_tokens();
  part.high_indices.resize(n_high);
  part.low_indices.resize(n_total - n_high);
  for (int i = 0; i < n_high; ++i) part.high_indices[i] = i;
  for (int i = n_high; i < n_total; ++i) part.low_indices[i - n_high] = i;
  return part;
}

std::vector<ReferencePoint> reference_points(const FeaturePyramid& pyramid) {
  std::vector<ReferencePoint> out;
  out.reserve(pyramid.total_tokens());
  for (int l = 0; l < static_cast<int>(pyramid.levels.size()); ++l) {
    const auto& lvl = pyramid.levels[l];
    for (int i = 0; i < lvl.height; ++i) {
      for (int j = 0; j < lvl.width; ++j) {
        out.push_back({(j + 0.5) / lvl.width, (i + 0.5) / lvl.height, l});
      }
    }
  }
  return out;
}

}  // namespace litenc
