#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "litenc/attention.hpp"
#include "litenc/costmodel.hpp"
#include "litenc/encoder.hpp"
#include "litenc/pyramid.hpp"

namespace litenc {

// Pyramid fixture: {"d_model": int, "levels": [{"height", "width", "stride",
// "data": [row-major floats]}]} with levels in stored order.
nlohmann::json pyramid_to_json(const FeaturePyramid& pyramid);
FeaturePyramid pyramid_from_json(const nlohmann::json& j);
FeaturePyramid load_pyramid_fixture(const std::string& path);
void save_pyramid_fixture(const FeaturePyramid& pyramid, const std::string& path);

// Attention parameters keyed by matrix name, row-major arrays, plus the hyper
// block and kind.
nlohmann::json params_to_json(const AttentionParams& params, const AttentionHyper& hyper);
std::pair<AttentionParams, AttentionHyper> params_from_json(const nlohmann::json& j);

// Trace export: array of {"stage_index", "kind", "n_queries",
// "token_checksums": [hex per level]}.
nlohmann::json trace_to_json(const std::vector<StageTrace>& trace);

nlohmann::json cost_report_to_json(const CostReport& report);

struct TopkEntry {
  int level = 0;
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
  int query_index = 0;
};

// {"layer", "attn_kind", "k_top", "locations": [...], "by_level": [{"level",
// "locations": [...]}]} with locations sorted by non-increasing weight.
nlohmann::json topk_to_json(int layer, AttnKind kind, const std::vector<TopkEntry>& entries,
                            int n_levels);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Canonical serialization used for all CLI output files.
std::string dump_json(const nlohmann::json& j);

}  // namespace litenc
