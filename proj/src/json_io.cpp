#include "litenc/json_io.hpp"

#include <fstream>
#include <sstream>

namespace litenc {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) { return m.data; }

Matrix matrix_from_json(const json& j, int rows, int cols, const char* name) {
  Matrix m(rows, cols);
  if (!j.is_array() || j.size() != m.data.size()) {
    throw ParseError(std::string("params: '") + name + "' must hold " +
                     std::to_string(m.data.size()) + " values");
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = j[i].get<double>();
  return m;
}

std::vector<double> vector_from_json(const json& j, std::size_t n, const char* name) {
  if (!j.is_array() || j.size() != n) {
    throw ParseError(std::string("params: '") + name + "' must hold " + std::to_string(n) +
                     " values");
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

json pyramid_to_json(const FeaturePyramid& pyramid) {
  json levels = json::array();
  for (const auto& lvl : pyramid.levels) {
    levels.push_back({{"height", lvl.height},
                      {"width", lvl.width},
                      {"stride", lvl.stride},
                      {"data", lvl.data}});
  }
  return {{"d_model", pyramid.d_model}, {"levels", levels}};
}

FeaturePyramid pyramid_from_json(const json& j) {
  if (!j.is_object() || !j.contains("d_model") || !j.contains("levels")) {
    throw ParseError("pyramid fixture: expected object with 'd_model' and 'levels'");
  }
  FeaturePyramid pyr;
  pyr.d_model = j.at("d_model").get<int>();
  if (pyr.d_model <= 0) throw ParseError("pyramid fixture: d_model must be positive");
  const auto& levels = j.at("levels");
  if (!levels.is_array() || levels.empty()) {
    throw ParseError("pyramid fixture: 'levels' must be a non-empty array");
  }
  int prev_stride = 0;
  for (const auto& lj : levels) {
    FeatureLevel lvl;
    lvl.height = lj.at("height").get<int>();
    lvl.width = lj.at("width").get<int>();
    lvl.stride = lj.at("stride").get<int>();
    lvl.d_model = pyr.d_model;
    if (lvl.height <= 0 || lvl.width <= 0 || lvl.stride <= 0 ||
        (lvl.stride & (lvl.stride - 1)) != 0) {
      throw ParseError("pyramid fixture: level dimensions must be positive, stride a power of two");
    }
    if (prev_stride != 0 && lvl.stride >= prev_stride) {
      throw ParseError("pyramid fixture: strides must strictly decrease from smallest map down");
    }
    prev_stride = lvl.stride;
    const auto& data = lj.at("data");
    const std::size_t expected = static_cast<std::size_t>(lvl.height) * lvl.width * pyr.d_model;
    if (!data.is_array() || data.size() != expected) {
      throw ParseError("pyramid fixture: level data must hold height*width*d_model values");
    }
    lvl.data.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) lvl.data[i] = data[i].get<double>();
    pyr.levels.push_back(std::move(lvl));
  }
  return pyr;
}

FeaturePyramid load_pyramid_fixture(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError("pyramid fixture '" + path + "': " + e.what());
  }
  return pyramid_from_json(j);
}

void save_pyramid_fixture(const FeaturePyramid& pyramid, const std::string& path) {
  write_text_file(path, dump_json(pyramid_to_json(pyramid)));
}

json params_to_json(const AttentionParams& params, const AttentionHyper& hyper) {
  json jm = {{"hyper",
              {{"m_heads", hyper.m_heads},
               {"k_points", hyper.k_points},
               {"n_levels", hyper.n_levels},
               {"d_model", hyper.d_model}}},
             {"kind", to_string(params.kind)},
             {"w_p", matrix_to_json(params.w_p)},
             {"b_p", params.b_p},
             {"w_v", matrix_to_json(params.w_v)},
             {"b_v", params.b_v},
             {"w_o", matrix_to_json(params.w_o)},
             {"b_o", params.b_o}};
  if (params.kind == AttnKind::deformable) {
    jm["w_a"] = matrix_to_json(params.w_a);
    jm["b_a"] = params.b_a;
  } else {
    jm["w_k"] = matrix_to_json(params.w_k);
    jm["b_k"] = params.b_k;
  }
  return jm;
}

std::pair<AttentionParams, AttentionHyper> params_from_json(const json& j) {
  AttentionHyper hyper;
  const auto& h = j.at("hyper");
  hyper.m_heads = h.at("m_heads").get<int>();
  hyper.k_points = h.at("k_points").get<int>();
  hyper.n_levels = h.at("n_levels").get<int>();
  hyper.d_model = h.at("d_model").get<int>();
  hyper.validate();

  AttentionParams p;
  p.kind = attn_kind_from_string(j.at("kind").get<std::string>());
  const int d = hyper.d_model;
  const int slots = hyper.n_slots();
  p.w_p = matrix_from_json(j.at("w_p"), d, 2 * slots, "w_p");
  p.b_p = vector_from_json(j.at("b_p"), 2 * static_cast<std::size_t>(slots), "b_p");
  p.w_v = matrix_from_json(j.at("w_v"), d, d, "w_v");
  p.b_v = vector_from_json(j.at("b_v"), d, "b_v");
  p.w_o = matrix_from_json(j.at("w_o"), d, d, "w_o");
  p.b_o = vector_from_json(j.at("b_o"), d, "b_o");
  if (p.kind == AttnKind::deformable) {
    p.w_a = matrix_from_json(j.at("w_a"), d, slots, "w_a");
    p.b_a = vector_from_json(j.at("b_a"), slots, "b_a");
  } else {
    p.w_k = matrix_from_json(j.at("w_k"), d, d, "w_k");
    p.b_k = vector_from_json(j.at("b_k"), d, "b_k");
  }
  p.validate(hyper);
  return {std::move(p), hyper};
}

json trace_to_json(const std::vector<StageTrace>& trace) {
  json arr = json::array();
  for (const auto& st : trace) {
    json checks = json::array();
    for (auto c : st.level_checksums) checks.push_back(to_hex(c));
    arr.push_back({{"stage_index", st.stage_index},
                   {"kind", st.is_high ? "high" : "low"},
                   {"n_queries", st.n_queries},
                   {"token_checksums", checks}});
  }
  return arr;
}

json cost_report_to_json(const CostReport& report) {
  json stages = json::array();
  for (const auto& st : report.stages) {
    stages.push_back({{"kind", st.kind},
                      {"n_queries", st.n_queries},
                      {"flops",
                       {{"offsets", st.flops.offsets},
                        {"weights", st.flops.weights},
                        {"sampling", st.flops.sampling},
                        {"combine", st.flops.combine},
                        {"projections", st.flops.projections},
                        {"ffn", st.flops.ffn},
                        {"norm", st.flops.norm},
                        {"total", st.flops.total()}}}});
  }
  return {{"variant", report.variant},
          {"input",
           {{"height", report.input.height},
            {"width", report.input.width},
            {"d_model", report.input.d_model},
            {"strides", report.input.strides},
            {"m_heads", report.input.m_heads},
            {"k_points", report.input.k_points}}},
          {"stages", stages},
          {"total_flops", report.total_flops},
          {"baseline_flops", report.baseline_flops},
          {"reduction_fraction", report.reduction_fraction}};
}

json topk_to_json(int layer, AttnKind kind, const std::vector<TopkEntry>& entries, int n_levels) {
  auto entry_json = [](const TopkEntry& e) {
    return json{{"level", e.level},
                {"x", e.x},
                {"y", e.y},
                {"weight", e.weight},
                {"query_index", e.query_index}};
  };
  json locations = json::array();
  for (const auto& e : entries) locations.push_back(entry_json(e));
  json by_level = json::array();
  for (int l = 0; l < n_levels; ++l) {
    json lvl_locations = json::array();
    for (const auto& e : entries) {
      if (e.level == l) lvl_locations.push_back(entry_json(e));
    }
    by_level.push_back({{"level", l}, {"locations", lvl_locations}});
  }
  return {{"layer", layer},
          {"attn_kind", to_string(kind)},
          {"k_top", static_cast<int>(entries.size())},
          {"locations", locations},
          {"by_level", by_level}};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write file '" + path + "'");
  out << content;
  if (!out) throw std::invalid_argument("failed writing file '" + path + "'");
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace litenc
