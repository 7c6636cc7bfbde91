#pragma once

#include <span>
#include <string>

#include "litenc/attention.hpp"
#include "litenc/pyramid.hpp"

namespace litenc {

struct GradcheckOptions {
  double step = 1e-6;       // central-difference half step
  double tolerance = 1e-5;  // max allowed relative error
  std::uint64_t seed = 0;   // seeds the upstream sensitivity
};

struct GradcheckResult {
  double max_rel_err = 0.0;
  std::size_t n_scalars = 0;
  bool pass = false;
  std::string worst;  // which input or parameter produced max_rel_err
};

/// Number of differentiable scalars a gradcheck would sweep: queries, every
/// pyramid cell, and every parameter matrix and bias of the layer.
std::size_t gradcheck_scalar_count(const FeaturePyramid& pyramid, const Matrix& queries,
                                   const AttentionParams& params);

/// init_params with small seeded offset and weight heads. The stock
/// initialization places every sampling site an integer offset from a cell
/// center, exactly on the interpolation breakpoints where one-sided
/// derivatives and central differences disagree; gradient checks need
/// generic sites.
AttentionParams generic_params(const AttentionHyper& hyper, std::uint64_t seed, AttnKind kind);

/// Compare attn_backward against central finite differences of the forward
/// pass, sweeping every differentiable scalar. The objective is the inner
/// product of the output with a seeded random sensitivity, so its gradient is
/// exactly one attn_backward call. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-2).
GradcheckResult gradcheck_attention(const FeaturePyramid& pyramid, const Matrix& queries,
                                    std::span<const ReferencePoint> refs,
                                    const AttentionParams& params, const AttentionHyper& hyper,
                                    const GradcheckOptions& opts = {});

}  // namespace litenc
