#include "litenc/costmodel.hpp"

namespace litenc {

namespace {

constexpr int kBaselineLayers = 6;
constexpr std::uint64_t kMacFlops = 2;
constexpr std::uint64_t kElementwiseFlops = 5;  // softmax / activation, per element
constexpr std::uint64_t kNormFlopsPerChannel = 6;

std::uint64_t linear_flops(std::uint64_t d_in, std::uint64_t d_out) {
  return kMacFlops * d_in * d_out + d_out;  // matmul + bias add
}

}  // namespace

FlopBreakdown FlopBreakdown::scaled(std::uint64_t n) const {
  return {offsets * n, weights * n,     sampling * n, combine * n,
          projections * n, ffn * n, norm * n};
}

FlopBreakdown layer_flops(std::int64_t n_queries, const AttentionHyper& hyper, AttnKind kind,
                          int ffn_hidden) {
  hyper.validate();
  if (n_queries < 0 || ffn_hidden <= 0) {
    throw std::invalid_argument("layer_flops: dimensions must be positive");
  }
  const std::uint64_t d = hyper.d_model;
  const std::uint64_t dh = hyper.d_head();
  const std::uint64_t mlk = hyper.n_slots();
  const std::uint64_t hidden = ffn_hidden;

  FlopBreakdown per_query;
  per_query.offsets = linear_flops(d, 2 * mlk);
  if (kind == AttnKind::deformable) {
    per_query.weights = linear_flops(d, mlk) + kElementwiseFlops * mlk;
  } else {
    per_query.weights = linear_flops(d, d)            // key projection
                        + kMacFlops * mlk * dh        // QK^T over the sampled keys
                        + kElementwiseFlops * mlk;    // softmax
  }
  per_query.sampling = kMacFlops * 4 * dh * mlk;
  per_query.combine = kMacFlops * mlk * dh;
  per_query.projections = linear_flops(d, d) * 2;
  per_query.ffn = linear_flops(d, hidden) + kElementwiseFlops * hidden + linear_flops(hidden, d);
  per_query.norm = 2 * kNormFlopsPerChannel * d;
  return per_query.scaled(static_cast<std::uint64_t>(n_queries));
}

std::vector<std::int64_t> level_token_counts(const CostInput& input) {
  if (input.height <= 0 || input.width <= 0 || input.strides.empty()) {
    throw std::invalid_argument("level_token_counts: invalid input dimensions");
  }
  for (std::size_t i = 0; i < input.strides.size(); ++i) {
    if (input.strides[i] <= 0 || (i > 0 && input.strides[i] <= input.strides[i - 1])) {
      throw std::invalid_argument(
          "level_token_counts: strides must be positive and strictly increasing");
    }
  }
  std::vector<std::int64_t> counts;
  counts.reserve(input.strides.size());
  for (auto it = input.strides.rbegin(); it != input.strides.rend(); ++it) {
    const std::int64_t h = (input.height + *it - 1) / *it;
    const std::int64_t w = (input.width + *it - 1) / *it;
    counts.push_back(h * w);
  }
  return counts;
}

namespace {

AttentionHyper hyper_for(const CostInput& input) {
  AttentionHyper hyper;
  hyper.m_heads = input.m_heads;
  hyper.k_points = input.k_points;
  hyper.n_levels = static_cast<int>(input.strides.size());
  hyper.d_model = input.d_model;
  return hyper;
}

std::uint64_t baseline_flops_for(const CostInput& input, std::int64_t n_total, int ffn_hidden) {
  const FlopBreakdown layer =
      layer_flops(n_total, hyper_for(input), AttnKind::deformable, ffn_hidden);
  return layer.total() * kBaselineLayers;
}

}  // namespace

CostReport encoder_flops(const ScheduleConfig& config, const CostInput& input) {
  const auto counts = level_token_counts(input);
  const int n_levels = static_cast<int>(counts.size());
  if (config.h_levels + config.l_levels != n_levels) {
    throw std::invalid_argument("encoder_flops: H" + std::to_string(config.h_levels) + "L" +
                                std::to_string(config.l_levels) + " does not cover " +
                                std::to_string(n_levels) + " levels");
  }
  std::int64_t n_total = 0;
  for (auto c : counts) n_total += c;
  std::int64_t n_high = 0;
  for (int l = 0; l < config.h_levels; ++l) n_high += counts[l];
  const std::int64_t n_low = n_total - n_high;

  const AttentionHyper hyper = hyper_for(input);
  const int hidden_high = config.resolved_ffn_hidden(input.d_model);
  const int hidden_low = config.low_ffn_hidden(input.d_model);

  CostReport report;
  report.variant = config.variant_name();
  report.input = input;
  for (int i = 0; i < config.total_layers(); ++i) {
    StageCost stage;
    if (stage_is_high(config, i)) {
      stage.kind = "high";
      stage.n_queries = n_high;
      stage.flops = layer_flops(n_high, hyper, config.attn_kind, hidden_high);
    } else {
      stage.kind = "low";
      stage.n_queries = n_low;
      stage.flops = layer_flops(n_low, hyper, config.attn_kind, hidden_low);
    }
    report.total_flops += stage.flops.total();
    report.stages.push_back(std::move(stage));
  }
  report.baseline_flops = baseline_flops_for(input, n_total, hidden_high);
  report.reduction_fraction =
      1.0 - static_cast<double>(report.total_flops) / static_cast<double>(report.baseline_flops);
  return report;
}

std::vector<CostReport> variant_sweep(const std::vector<std::string>& variants,
                                      const CostInput& input) {
  std::vector<CostReport> reports;
  reports.reserve(variants.size());
  for (const auto& v : variants) {
    ScheduleConfig config;
    try {
      config = parse_variant(v);
    } catch (const ParseError& e) {
      throw ParseError("variant_sweep: '" + v + "': " + e.what());
    }
    reports.push_back(encoder_flops(config, input));
  }
  return reports;
}

CostReport baseline_report(const CostInput& input) {
  const auto counts = level_token_counts(input);
  std::int64_t n_total = 0;
  for (auto c : counts) n_total += c;
  const int hidden = 4 * input.d_model;

  CostReport report;
  report.variant = "baseline";
  report.input = input;
  for (int i = 0; i < kBaselineLayers; ++i) {
    StageCost stage;
    stage.kind = "baseline";
    stage.n_queries = n_total;
    stage.flops = layer_flops(n_total, hyper_for(input), AttnKind::deformable, hidden);
    report.total_flops += stage.flops.total();
    report.stages.push_back(std::move(stage));
  }
  report.baseline_flops = report.total_flops;
  report.reduction_fraction = 0.0;
  return report;
}

}  // namespace litenc
