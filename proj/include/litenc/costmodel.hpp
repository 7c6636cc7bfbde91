#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "litenc/attention.hpp"
#include "litenc/encoder.hpp"

namespace litenc {

/// Analytic FLOP counts for one attention layer, per component.
///
/// Counting convention (the absolute numbers are only meaningful as ratios):
///   - one multiply-accumulate = 2 FLOPs, bias adds counted as 1 FLOP each
///   - softmax and activations cost 5 FLOPs per element
///   - each normalization costs 6 FLOPs per channel per token
///   - sampling touches 4 neighbors of d_head channels per slot
///   - w_v / w_k / w_o are counted once per query at d_model^2 MACs
struct FlopBreakdown {
  std::uint64_t offsets = 0;
  std::uint64_t weights = 0;  // w_a head, or w_k + QK^T for kda; includes softmax
  std::uint64_t sampling = 0;
  std::uint64_t combine = 0;
  std::uint64_t projections = 0;  // w_v and w_o
  std::uint64_t ffn = 0;
  std::uint64_t norm = 0;

  std::uint64_t total() const {
    return offsets + weights + sampling + combine + projections + ffn + norm;
  }
  FlopBreakdown scaled(std::uint64_t n) const;
};

struct StageCost {
  std::string kind;  // "high", "low", or "baseline"
  std::int64_t n_queries = 0;
  FlopBreakdown flops;
};

struct CostInput {
  int height = 800;
  int width = 1216;
  int d_model = 256;
  std::vector<int> strides = {8, 16, 32, 64};
  int m_heads = 8;
  int k_points = 4;
};

/// Per-variant encoder cost against the fixed baseline: six deformable
/// layers over all tokens with the full-size FFN.
struct CostReport {
  std::string variant;
  CostInput input;
  std::vector<StageCost> stages;
  std::uint64_t total_flops = 0;
  std::uint64_t baseline_flops = 0;
  double reduction_fraction = 0.0;  // 1 - total / baseline
};

/// FLOPs of one attention layer processing n_queries queries.
FlopBreakdown layer_flops(std::int64_t n_queries, const AttentionHyper& hyper, AttnKind kind,
                          int ffn_hidden);

/// Tokens per level for the given input, in stored level order (largest
/// stride first). Level dimensions use ceiling division.
std::vector<std::int64_t> level_token_counts(const CostInput& input);

CostReport encoder_flops(const ScheduleConfig& config, const CostInput& input);

/// One report per variant string against a shared baseline, in input order.
std::vector<CostReport> variant_sweep(const std::vector<std::string>& variants,
                                      const CostInput& input);

/// The six-layer baseline reported against itself (reduction 0).
CostReport baseline_report(const CostInput& input);

}  // namespace litenc
