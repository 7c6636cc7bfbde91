#pragma once

#include <string>
#include <vector>

#include "litenc/attention.hpp"
#include "litenc/core.hpp"
#include "litenc/pyramid.hpp"

namespace litenc {

/// Parsed `H<h>L<l>-(<a>+1)x<b>` schedule. Each of the `b_blocks` blocks runs
/// `a_high_updates` high-level layers followed by one low-level layer, so the
/// encoder has (A+1)*B attention layers in total.
struct ScheduleConfig {
  int h_levels = 0;
  int l_levels = 0;
  int a_high_updates = 0;
  int b_blocks = 0;
  AttnKind attn_kind = AttnKind::kda;
  int ffn_hidden_high = 0;  // 0 means 4 * d_model
  int ffn_lambda = 8;       // low-level FFN hidden divisor

  int total_layers() const { return (a_high_updates + 1) * b_blocks; }
  int resolved_ffn_hidden(int d_model) const {
    return ffn_hidden_high > 0 ? ffn_hidden_high : 4 * d_model;
  }
  int low_ffn_hidden(int d_model) const {
    return std::max(1, resolved_ffn_hidden(d_model) / std::max(1, ffn_lambda));
  }
  std::string variant_name() const;
};

ScheduleConfig parse_variant(const std::string& text);

/// One encoder layer: attention, a two-layer FFN with rectified-linear
/// activation, and two token-wise normalizations (post-attention, post-FFN).
struct EncoderLayerParams {
  AttentionParams attention;
  Matrix ffn_w1;  // d_model x hidden
  std::vector<double> ffn_b1;
  Matrix ffn_w2;  // hidden x d_model
  std::vector<double> ffn_b2;
  std::vector<double> norm1_gamma, norm1_beta;
  std::vector<double> norm2_gamma, norm2_beta;

  int ffn_hidden() const { return ffn_w1.cols; }
};

/// Independent per-layer parameters for the full (A+1)*B schedule, in layer
/// order [A high layers, 1 low layer] per block. Deterministic given seed.
std::vector<EncoderLayerParams> init_encoder_params(const ScheduleConfig& config,
                                                    const AttentionHyper& hyper,
                                                    std::uint64_t seed);

/// Flattened encoder state. Token count and order are fixed for the whole
/// encoder; stages only rewrite the rows they update.
struct EncoderState {
  std::vector<LevelShape> shapes;
  int d_model = 0;
  Matrix tokens;  // N x d_model
  TokenPartition partition;
  std::vector<ReferencePoint> refs;
};

EncoderState make_encoder_state(const FeaturePyramid& pyramid, int n_high_levels);

/// One high-level stage: the current high-level tokens query the full token
/// set and are rewritten through attention + residual + norm + FFN + residual
/// + norm. Low-level rows are byte-identical to the input.
EncoderState high_level_layer(const EncoderState& state, const EncoderLayerParams& params,
                              const AttentionHyper& hyper);

/// One low-level stage: the block-initial low-level tokens query the full
/// token set (updated high-level plus block-initial low-level tokens). High
/// rows pass through untouched; the FFN uses the lambda-reduced hidden size.
EncoderState low_level_layer(const EncoderState& state, const EncoderLayerParams& params,
                             const AttentionHyper& hyper);

struct StageTrace {
  int stage_index = 0;
  bool is_high = false;
  int n_queries = 0;
  std::vector<std::uint64_t> level_checksums;
  Matrix snapshot;  // post-stage tokens; empty unless snapshots were requested
};

struct TraceOptions {
  bool enabled = false;
  bool snapshots = false;
  int capture_field_stage = -1;  // record that stage's sampling field
};

struct EncoderResult {
  FeaturePyramid output;
  std::vector<StageTrace> trace;
  bool has_captured_field = false;
  SamplingField captured_field;
  std::vector<int> captured_query_tokens;  // global token index per query row
};

EncoderResult run_encoder(const FeaturePyramid& pyramid, const ScheduleConfig& config,
                          const AttentionHyper& hyper,
                          const std::vector<EncoderLayerParams>& params,
                          const TraceOptions& trace = {});

/// Convenience overload that derives the layer parameters from `seed`.
EncoderResult run_encoder(const FeaturePyramid& pyramid, const ScheduleConfig& config,
                          const AttentionHyper& hyper, std::uint64_t seed,
                          const TraceOptions& trace = {});

/// FNV-1a over `count` token rows starting at `offset`.
std::uint64_t token_checksum(const Matrix& tokens, int offset, int count);

/// True for stage indices 0..A-1 within each (A+1)-stage block.
bool stage_is_high(const ScheduleConfig& config, int stage_index);

}  // namespace litenc
