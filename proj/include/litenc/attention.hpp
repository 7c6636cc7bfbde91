#pragma once

#include <span>
#include <string>
#include <vector>

#include "litenc/core.hpp"
#include "litenc/pyramid.hpp"
#include "litenc/sampler.hpp"

namespace litenc {

enum class AttnKind { deformable, kda };

const char* to_string(AttnKind kind);
AttnKind attn_kind_from_string(const std::string& s);

/// Shape hyperparameters of one attention layer: M heads, K points per level,
/// L levels. Every query gathers N_v = M*L*K sampled value slots.
struct AttentionHyper {
  int m_heads = 8;
  int k_points = 4;
  int n_levels = 4;
  int d_model = 256;

  int d_head() const { return d_model / m_heads; }
  int n_slots() const { return m_heads * n_levels * k_points; }
  void validate() const;
};

/// Projection matrices for one attention layer. Deformable layers predict
/// attention weights directly from the query (w_a); key-aware layers sample
/// keys through w_k and score them against the query instead.
struct AttentionParams {
  AttnKind kind = AttnKind::deformable;

  Matrix w_p;                // d_model x 2*M*L*K, sampling offsets
  std::vector<double> b_p;
  Matrix w_a;                // d_model x M*L*K, deformable only
  std::vector<double> b_a;
  Matrix w_v;                // d_model x d_model, value projection
  std::vector<double> b_v;
  Matrix w_k;                // d_model x d_model, kda only
  std::vector<double> b_k;
  Matrix w_o;                // d_model x d_model, output projection
  std::vector<double> b_o;

  void validate(const AttentionHyper& hyper) const;
};

/// Deterministic layer initialization. Offset weights start at zero with a
/// directional bias grid: head h points at angle 2*pi*h/M with radius k+1 for
/// point k, the same on every level. The deformable weight head starts at
/// zero, so a fresh layer attends uniformly. w_v/w_k/w_o are seeded uniform
/// scaled by 1/sqrt(d_model).
AttentionParams init_params(const AttentionHyper& hyper, std::uint64_t seed, AttnKind kind);

/// Per-query sampling geometry and attention weights. Slots are ordered
/// (head, level, point) with x before y in the paired arrays; locations are
/// absolute level-pixel coordinates on each slot's level. Weights are filled
/// by resolve_locations for deformable layers and by kda_attn for key-aware
/// layers; per (query, head) they always sum to 1.
struct SamplingField {
  int n_queries = 0;
  int m_heads = 0;
  int n_levels = 0;
  int k_points = 0;

  std::vector<double> offsets;    // n * M*L*K * 2
  std::vector<double> locations;  // n * M*L*K * 2
  std::vector<double> weights;    // n * M*L*K, may be empty until resolved

  int slots_per_query() const { return m_heads * n_levels * k_points; }
  std::size_t slot(int q, int h, int l, int k) const {
    return static_cast<std::size_t>(q) * slots_per_query() +
           (static_cast<std::size_t>(h) * n_levels + l) * k_points + k;
  }
  bool has_weights() const { return !weights.empty(); }
};

/// Predict sampling offsets from the queries and resolve absolute locations:
/// each query's reference point is scaled to every level and the offset is
/// added in that level's pixel units. For deformable params the attention
/// weights (softmax per head over its L*K logits) are resolved here too.
SamplingField resolve_locations(const Matrix& queries, std::span<const ReferencePoint> refs,
                                const AttentionParams& params, const AttentionHyper& hyper,
                                const std::vector<LevelShape>& level_shapes);

/// Intermediates recorded by a forward pass, required by attn_backward.
///
/// A slot's projected value and key only ever enter the output through the
/// slot's own head slice, so `values` and `keys` store just that d_head-wide
/// slice per row.
struct AttnCache {
  bool valid = false;
  AttnKind kind = AttnKind::deformable;
  SamplingField field;
  Matrix samples;  // (n * M*L*K) x d_model
  Matrix values;   // (n * M*L*K) x d_head, head slice of samples * w_v + b_v
  Matrix keys;     // (n * M*L*K) x d_head, head slice of samples * w_k + b_k
  Matrix concat;   // n x d_model, heads concatenated before w_o
};

/// Deformable attention: per head, the weighted sum of projected sampled
/// values under the field's weights; heads concatenated, then w_o. The field
/// must carry resolved weights.
Matrix deform_attn(const Matrix& queries, const SamplingField& field,
                   const FeaturePyramid& pyramid, const AttentionParams& params,
                   const AttentionHyper& hyper, AttnCache* cache = nullptr);

/// Key-aware deformable attention: keys and values are sampled at the same
/// locations; per head, weights are softmax(q_h . k_h / sqrt(d_head)) over
/// the L*K sampled keys. Computed weights are written back into the field.
Matrix kda_attn(const Matrix& queries, SamplingField& field, const FeaturePyramid& pyramid,
                const AttentionParams& params, const AttentionHyper& hyper,
                AttnCache* cache = nullptr);

/// Reverse-mode gradients for one attention call, including the paths through
/// bilinear sampling into the feature maps and through the predicted offsets.
struct AttnGrads {
  Matrix d_queries;
  FeaturePyramid d_pyramid;
  Matrix d_w_p;
  std::vector<double> d_b_p;
  Matrix d_w_a;
  std::vector<double> d_b_a;
  Matrix d_w_v;
  std::vector<double> d_b_v;
  Matrix d_w_k;
  std::vector<double> d_b_k;
  Matrix d_w_o;
  std::vector<double> d_b_o;
};

AttnGrads attn_backward(const Matrix& queries, const FeaturePyramid& pyramid,
                        const AttentionParams& params, const AttentionHyper& hyper,
                        const AttnCache& cache, const Matrix& upstream);

}  // namespace litenc
