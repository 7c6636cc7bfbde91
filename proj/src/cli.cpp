#include "litenc/cli.hpp"

#include <algorithm>
#include <iostream>

#include "litenc/costmodel.hpp"
#include "litenc/encoder.hpp"
#include "litenc/gradcheck.hpp"

namespace litenc {

namespace {

void emit(const RunSpec& spec, const nlohmann::json& j) {
  const std::string text = dump_json(j);
  if (spec.out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(spec.out_path, text);
  }
}

FeaturePyramid make_pyramid(const RunSpec& spec) {
  if (!spec.fixture_path.empty()) return load_pyramid_fixture(spec.fixture_path);
  return build_pyramid(spec.height, spec.width, spec.d_model, spec.strides,
                       PyramidSource::seeded(spec.seed));
}

AttentionHyper hyper_for(const FeaturePyramid& pyramid, int m_heads = 8, int k_points = 4) {
  AttentionHyper hyper;
  hyper.m_heads = m_heads;
  hyper.k_points = k_points;
  hyper.n_levels = static_cast<int>(pyramid.levels.size());
  hyper.d_model = pyramid.d_model;
  return hyper;
}

std::vector<std::string> split_variants(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

int cmd_run(const RunSpec& spec) {
  const FeaturePyramid pyramid = make_pyramid(spec);
  ScheduleConfig config = parse_variant(spec.variant);
  config.attn_kind = spec.attn_kind;
  TraceOptions trace;
  trace.enabled = true;
  const EncoderResult result =
      run_encoder(pyramid, config, hyper_for(pyramid), mix_seed(spec.seed, 0xEC0DE), trace);
  emit(spec, trace_to_json(result.trace));
  return 0;
}

int cmd_cost(const RunSpec& spec) {
  CostInput input;
  input.height = spec.height;
  input.width = spec.width;
  input.d_model = spec.d_model;
  input.strides = spec.strides;

  if (spec.baseline_only) {
    emit(spec, cost_report_to_json(baseline_report(input)));
    return 0;
  }
  const std::vector<std::string> variants = split_variants(spec.variant);
  if (variants.size() == 1) {
    ScheduleConfig config = parse_variant(variants[0]);
    config.attn_kind = spec.attn_kind;
    emit(spec, cost_report_to_json(encoder_flops(config, input)));
    return 0;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : variants) {
    ScheduleConfig config = parse_variant(v);
    config.attn_kind = spec.attn_kind;
    arr.push_back(cost_report_to_json(encoder_flops(config, input)));
  }
  emit(spec, arr);
  return 0;
}

int cmd_gradcheck(const RunSpec& spec) {
  // Default micro instance: a 16x16 input at strides 8/16 gives a 2x2 plus a
  // 1x1 level, five query tokens, d_model 8 with two heads and two points.
  int height = 16, width = 16, d_model = 8;
  std::vector<int> strides = {8, 16};
  if (spec.explicit_dims) {
    height = spec.height;
    width = spec.width;
    d_model = spec.d_model;
    strides = spec.strides;
  }
  const FeaturePyramid pyramid =
      build_pyramid(height, width, d_model, strides, PyramidSource::seeded(spec.seed));
  const AttentionHyper hyper = hyper_for(pyramid, 2, 2);
  const AttentionParams params =
      generic_params(hyper, mix_seed(spec.seed, 0xA77), spec.attn_kind);
  const Matrix queries = pyramid.flatten();

  const std::size_t n_scalars = gradcheck_scalar_count(pyramid, queries, params);
  constexpr std::size_t kMaxScalars = 10000;
  if (n_scalars > kMaxScalars) {
    throw std::invalid_argument("gradcheck: instance has " + std::to_string(n_scalars) +
                                " differentiable scalars (cap " + std::to_string(kMaxScalars) +
                                "); reduce --height/--width/--dmodel");
  }

  GradcheckOptions opts;
  opts.seed = spec.seed;
  const std::vector<ReferencePoint> refs = reference_points(pyramid);
  const GradcheckResult result = gradcheck_attention(pyramid, queries, refs, params, hyper, opts);

  emit(spec, nlohmann::json{{"kind", to_string(spec.attn_kind)},
                            {"step", opts.step},
                            {"tolerance", opts.tolerance},
                            {"n_scalars", result.n_scalars},
                            {"max_rel_err", result.max_rel_err},
                            {"worst", result.worst},
                            {"pass", result.pass}});
  return result.pass ? 0 : 2;
}

int cmd_topk(const RunSpec& spec) {
  const FeaturePyramid pyramid = make_pyramid(spec);
  ScheduleConfig config = parse_variant(spec.variant);
  config.attn_kind = spec.attn_kind;
  if (spec.layer < 0 || spec.layer >= config.total_layers()) {
    throw std::invalid_argument("topk: layer " + std::to_string(spec.layer) +
                                " out of range [0, " + std::to_string(config.total_layers() - 1) +
                                "]");
  }
  if (spec.k_top < 1) throw std::invalid_argument("topk: --k-top must be >= 1");

  TraceOptions trace;
  trace.enabled = true;
  trace.capture_field_stage = spec.layer;
  const EncoderResult result =
      run_encoder(pyramid, config, hyper_for(pyramid), mix_seed(spec.seed, 0xEC0DE), trace);
  const std::vector<TopkEntry> entries =
      topk_entries(result.captured_field, result.captured_query_tokens, spec.k_top);
  emit(spec, topk_to_json(spec.layer, spec.attn_kind, entries,
                          static_cast<int>(pyramid.levels.size())));
  return 0;
}

}  // namespace

std::vector<TopkEntry> topk_entries(const SamplingField& field,
                                    const std::vector<int>& query_tokens, int k_top) {
  if (!field.has_weights()) {
    throw std::invalid_argument("topk_entries: field carries no attention weights");
  }
  if (static_cast<int>(query_tokens.size()) != field.n_queries) {
    throw std::invalid_argument("topk_entries: query token map does not match field");
  }
  const std::size_t total = field.weights.size();
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (field.weights[a] != field.weights[b]) return field.weights[a] > field.weights[b];
    return a < b;
  });

  const int slots = field.slots_per_query();
  const std::size_t keep = std::min<std::size_t>(k_top, total);
  std::vector<TopkEntry> entries;
  entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t s = order[i];
    const int q = static_cast<int>(s / slots);
    const int within = static_cast<int>(s % slots);
    const int level = (within / field.k_points) % field.n_levels;
    entries.push_back({level, field.locations[2 * s], field.locations[2 * s + 1],
                       field.weights[s], query_tokens[q]});
  }
  return entries;
}

int run_command(const RunSpec& spec) {
  try {
    if (spec.command == "run") return cmd_run(spec);
    if (spec.command == "cost") return cmd_cost(spec);
    if (spec.command == "gradcheck") return cmd_gradcheck(spec);
    if (spec.command == "topk") return cmd_topk(spec);
    throw std::invalid_argument("unknown command '" + spec.command + "'");
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace litenc
