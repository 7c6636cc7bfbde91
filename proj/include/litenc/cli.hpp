#pragma once

#include <string>
#include <vector>

#include "litenc/attention.hpp"
#include "litenc/json_io.hpp"

namespace litenc {

/// One parsed CLI invocation. Defaults mirror the model: d_model 256, eight
/// heads, four points, strides 8/16/32/64, lambda 8.
struct RunSpec {
  std::string command;  // run | cost | gradcheck | topk
  std::string variant = "H3L1-(2+1)x3";
  AttnKind attn_kind = AttnKind::kda;
  int height = 512;
  int width = 512;
  int d_model = 256;
  std::vector<int> strides = {8, 16, 32, 64};
  std::uint64_t seed = 0;
  std::string fixture_path;
  std::string out_path;  // empty writes to stdout
  int layer = 0;         // topk
  int k_top = 100;       // topk
  bool baseline_only = false;
  bool explicit_dims = false;  // gradcheck keeps its micro instance otherwise
};

/// Sampling slots ranked by attention weight (ties broken by slot order),
/// truncated to k_top. `query_tokens` maps field query rows to global token
/// indices.
std::vector<TopkEntry> topk_entries(const SamplingField& field,
                                    const std::vector<int>& query_tokens, int k_top);

/// Dispatch a spec. Exit codes: 0 success, 1 usage or parse error, 2
/// numerical failure (NaN, failed gradient check).
int run_command(const RunSpec& spec);

}  // namespace litenc
