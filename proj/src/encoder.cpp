#include "litenc/encoder.hpp"

#include <cctype>
#include <cmath>

namespace litenc {

std::string ScheduleConfig::variant_name() const {
  return "H" + std::to_string(h_levels) + "L" + std::to_string(l_levels) + "-(" +
         std::to_string(a_high_updates) + "+1)x" + std::to_string(b_blocks);
}

namespace {

struct VariantScanner {
  const std::string& text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& expected) const {
    throw ParseError("variant '" + text + "': expected " + expected + " at position " +
                     std::to_string(pos));
  }

  void literal(char c) {
    if (pos >= text.size() || text[pos] != c) fail(std::string("'") + c + "'");
    ++pos;
  }

  int digits() {
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
      fail("a digit");
    }
    long v = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      v = v * 10 + (text[pos] - '0');
      if (v > 1'000'000) fail("a smaller number");
      ++pos;
    }
    return static_cast<int>(v);
  }
};

}  // namespace

ScheduleConfig parse_variant(const std::string& text) {
  VariantScanner s{text};
  ScheduleConfig cfg;
  s.literal('H');
  cfg.h_levels = s.digits();
  s.literal('L');
  cfg.l_levels = s.digits();
  s.literal('-');
  s.literal('(');
  cfg.a_high_updates = s.digits();
  s.literal('+');
  s.literal('1');
  s.literal(')');
  s.literal('x');
  cfg.b_blocks = s.digits();
  if (s.pos != text.size()) s.fail("end of string");

  if (cfg.h_levels < 1) throw ParseError("variant '" + text + "': H must be >= 1");
  if (cfg.a_high_updates < 1) throw ParseError("variant '" + text + "': A must be >= 1");
  if (cfg.b_blocks < 1) throw ParseError("variant '" + text + "': B must be >= 1");
  return cfg;
}

std::vector<EncoderLayerParams> init_encoder_params(const ScheduleConfig& config,
                                                    const AttentionHyper& hyper,
                                                    std::uint64_t seed) {
  hyper.validate();
  const int d = hyper.d_model;
  std::vector<EncoderLayerParams> layers;
  layers.reserve(config.total_layers());
  for (int i = 0; i < config.total_layers(); ++i) {
    const bool high = stage_is_high(config, i);
    const int hidden = high ? config.resolved_ffn_hidden(d) : config.low_ffn_hidden(d);
    const std::uint64_t layer_seed = mix_seed(seed, 0x1000 + static_cast<std::uint64_t>(i));

    EncoderLayerParams p;
    p.attention = init_params(hyper, layer_seed, config.attn_kind);
    p.ffn_w1 = Matrix(d, hidden);
    p.ffn_b1.assign(hidden, 0.0);
    p.ffn_w2 = Matrix(hidden, d);
    p.ffn_b2.assign(d, 0.0);
    Rng rng(mix_seed(layer_seed, 0xFF));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : p.ffn_w1.data) v = s1 * rng.uniform_sym();
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : p.ffn_w2.data) v = s2 * rng.uniform_sym();
    p.norm1_gamma.assign(d, 1.0);
    p.norm1_beta.assign(d, 0.0);
    p.norm2_gamma.assign(d, 1.0);
    p.norm2_beta.assign(d, 0.0);
    layers.push_back(std::move(p));
  }
  return layers;
}

EncoderState make_encoder_state(const FeaturePyramid& pyramid, int n_high_levels) {
  EncoderState state;
  state.shapes = pyramid.shapes();
  state.d_model = pyramid.d_model;
  state.tokens = pyramid.flatten();
  state.partition = split_tokens(pyramid, n_high_levels);
  state.refs = reference_points(pyramid);
  return state;
}

namespace {

constexpr double kNormEpsilon = 1e-5;

/// Token-wise standardization over channels with learned scale and shift.
void normalize_rows(Matrix& m, const std::vector<double>& gamma, const std::vector<double>& beta) {
  const int d = m.cols;
  parallel_for(m.rows, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      double* row = m.row(i);
      double mean = 0.0;
      for (int c = 0; c < d; ++c) mean += row[c];
      mean /= d;
      double var = 0.0;
      for (int c = 0; c < d; ++c) {
        const double dev = row[c] - mean;
        var += dev * dev;
      }
      var /= d;
      const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
      for (int c = 0; c < d; ++c) row[c] = gamma[c] * (row[c] - mean) * inv + beta[c];
    }
  });
}

Matrix ffn_forward(const Matrix& x, const EncoderLayerParams& p) {
  Matrix hidden = matmul(x, p.ffn_w1);
  add_bias_rows(hidden, p.ffn_b1);
  for (double& v : hidden.data) v = v > 0.0 ? v : 0.0;
  Matrix out = matmul(hidden, p.ffn_w2);
  add_bias_rows(out, p.ffn_b2);
  return out;
}

EncoderState apply_stage(const EncoderState& state, const EncoderLayerParams& params,
                         const AttentionHyper& hyper, bool high, SamplingField* capture,
                         std::vector<int>* capture_tokens) {
  if (hyper.d_model != state.d_model ||
      hyper.n_levels != static_cast<int>(state.shapes.size())) {
    throw std::invalid_argument("encoder stage: hyper does not match the pyramid");
  }
  const std::vector<int>& idx =
      high ? state.partition.high_indices : state.partition.low_indices;

  const FeaturePyramid pyramid = pyramid_from_tokens(state.shapes, state.d_model, state.tokens);
  Matrix queries = gather_rows(state.tokens, idx);
  std::vector<ReferencePoint> refs(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) refs[i] = state.refs[idx[i]];

  SamplingField field =
      resolve_locations(queries, refs, params.attention, hyper, state.shapes);
  Matrix attn = params.attention.kind == AttnKind::deformable
                    ? deform_attn(queries, field, pyramid, params.attention, hyper)
                    : kda_attn(queries, field, pyramid, params.attention, hyper);

  Matrix x1 = std::move(queries);
  for (std::size_t i = 0; i < x1.data.size(); ++i) x1.data[i] += attn.data[i];
  normalize_rows(x1, params.norm1_gamma, params.norm1_beta);

  Matrix f = ffn_forward(x1, params);
  for (std::size_t i = 0; i < x1.data.size(); ++i) x1.data[i] += f.data[i];
  normalize_rows(x1, params.norm2_gamma, params.norm2_beta);

  EncoderState next = state;
  scatter_rows(next.tokens, idx, x1);

  if (capture) *capture = std::move(field);
  if (capture_tokens) *capture_tokens = idx;
  return next;
}

}  // namespace

EncoderState high_level_layer(const EncoderState& state, const EncoderLayerParams& params,
                              const AttentionHyper& hyper) {
  return apply_stage(state, params, hyper, true, nullptr, nullptr);
}

EncoderState low_level_layer(const EncoderState& state, const EncoderLayerParams& params,
                             const AttentionHyper& hyper) {
  return apply_stage(state, params, hyper, false, nullptr, nullptr);
}

std::uint64_t token_checksum(const Matrix& tokens, int offset, int count) {
  return fnv1a(tokens.row(offset), static_cast<std::size_t>(count) * tokens.cols * sizeof(double));
}

bool stage_is_high(const ScheduleConfig& config, int stage_index) {
  return stage_index % (config.a_high_updates + 1) < config.a_high_updates;
}

EncoderResult run_encoder(const FeaturePyramid& pyramid, const ScheduleConfig& config,
                          const AttentionHyper& hyper,
                          const std::vector<EncoderLayerParams>& params,
                          const TraceOptions& trace) {
  const int n_levels = static_cast<int>(pyramid.levels.size());
  if (config.h_levels + config.l_levels != n_levels) {
    throw std::invalid_argument("run_encoder: H" + std::to_string(config.h_levels) + "L" +
                                std::to_string(config.l_levels) + " does not cover " +
                                std::to_string(n_levels) + " pyramid levels");
  }
  const int expected = config.total_layers();
  if (static_cast<int>(params.size()) != expected) {
    throw std::invalid_argument("run_encoder: schedule (" + std::to_string(config.a_high_updates) +
                                "+1)x" + std::to_string(config.b_blocks) + " needs " +
                                std::to_string(expected) + " layer params, got " +
                                std::to_string(params.size()));
  }

  EncoderState state = make_encoder_state(pyramid, config.h_levels);
  EncoderResult result;

  for (int i = 0; i < expected; ++i) {
    const bool high = stage_is_high(config, i);
    const bool capture = trace.capture_field_stage == i;
    state = apply_stage(state, params[i], hyper, high,
                        capture ? &result.captured_field : nullptr,
                        capture ? &result.captured_query_tokens : nullptr);
    if (capture) result.has_captured_field = true;

    if (trace.enabled) {
      StageTrace st;
      st.stage_index = i;
      st.is_high = high;
      st.n_queries = high ? state.partition.n_high() : state.partition.n_low();
      int offset = 0;
      for (const auto& shape : state.shapes) {
        const int count = shape.height * shape.width;
        st.level_checksums.push_back(token_checksum(state.tokens, offset, count));
        offset += count;
      }
      if (trace.snapshots) st.snapshot = state.tokens;
      result.trace.push_back(std::move(st));
    }
  }

  result.output = pyramid_from_tokens(state.shapes, state.d_model, state.tokens);
  return result;
}

EncoderResult run_encoder(const FeaturePyramid& pyramid, const ScheduleConfig& config,
                          const AttentionHyper& hyper, std::uint64_t seed,
                          const TraceOptions& trace) {
  return run_encoder(pyramid, config, hyper, init_encoder_params(config, hyper, seed), trace);
}

}  // namespace litenc
