#include "litenc/gradcheck.hpp"

#include <cmath>

namespace litenc {

namespace {

double objective(const FeaturePyramid& pyramid, const Matrix& queries,
                 std::span<const ReferencePoint> refs, const AttentionParams& params,
                 const AttentionHyper& hyper, const Matrix& sensitivity, AttnCache* cache) {
  SamplingField field = resolve_locations(queries, refs, params, hyper, pyramid.shapes());
  const Matrix out = params.kind == AttnKind::deformable
                         ? deform_attn(queries, field, pyramid, params, hyper, cache)
                         : kda_attn(queries, field, pyramid, params, hyper, cache);
  double phi = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) phi += out.data[i] * sensitivity.data[i];
  return phi;
}

}  // namespace

AttentionParams generic_params(const AttentionHyper& hyper, std::uint64_t seed, AttnKind kind) {
  AttentionParams params = init_params(hyper, seed, kind);
  Rng rng(mix_seed(seed, 0x0FF5));
  for (double& v : params.w_p.data) v = 0.2 * rng.uniform_sym();
  for (double& v : params.b_p) v += 0.3 * rng.uniform_sym();
  if (kind == AttnKind::deformable) {
    for (double& v : params.w_a.data) v = 0.5 * rng.uniform_sym();
  }
  return params;
}

std::size_t gradcheck_scalar_count(const FeaturePyramid& pyramid, const Matrix& queries,
                                   const AttentionParams& params) {
  std::size_t n = queries.data.size();
  for (const auto& lvl : pyramid.levels) n += lvl.data.size();
  n += params.w_p.data.size() + params.b_p.size();
  n += params.w_v.data.size() + params.b_v.size();
  n += params.w_o.data.size() + params.b_o.size();
  n += params.w_a.data.size() + params.b_a.size();
  n += params.w_k.data.size() + params.b_k.size();
  return n;
}

GradcheckResult gradcheck_attention(const FeaturePyramid& pyramid, const Matrix& queries,
                                    std::span<const ReferencePoint> refs,
                                    const AttentionParams& params, const AttentionHyper& hyper,
                                    const GradcheckOptions& opts) {
  Matrix sensitivity(queries.rows, hyper.d_model);
  Rng rng(mix_seed(opts.seed, 0x5E45));
  for (double& v : sensitivity.data) v = rng.uniform_sym();

  // Mutable copies; finite differences perturb these in place.
  FeaturePyramid pyr = pyramid;
  Matrix q = queries;
  AttentionParams p = params;

  AttnCache cache;
  objective(pyr, q, refs, p, hyper, sensitivity, &cache);
  const AttnGrads grads = attn_backward(q, pyr, p, hyper, cache, sensitivity);

  GradcheckResult result;
  result.pass = true;

  auto eval = [&] { return objective(pyr, q, refs, p, hyper, sensitivity, nullptr); };
  auto sweep = [&](double* data, const double* analytic, std::size_t n, const std::string& name) {
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = data[i];
      data[i] = saved + opts.step;
      const double hi = eval();
      data[i] = saved - opts.step;
      const double lo = eval();
      data[i] = saved;
      const double numeric = (hi - lo) / (2.0 * opts.step);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-2});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
      ++result.n_scalars;
    }
  };

  sweep(q.data.data(), grads.d_queries.data.data(), q.data.size(), "queries");
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    sweep(pyr.levels[l].data.data(), grads.d_pyramid.levels[l].data.data(),
          pyr.levels[l].data.size(), "pyramid.level" + std::to_string(l));
  }
  sweep(p.w_p.data.data(), grads.d_w_p.data.data(), p.w_p.data.size(), "w_p");
  sweep(p.b_p.data(), grads.d_b_p.data(), p.b_p.size(), "b_p");
  sweep(p.w_v.data.data(), grads.d_w_v.data.data(), p.w_v.data.size(), "w_v");
  sweep(p.b_v.data(), grads.d_b_v.data(), p.b_v.size(), "b_v");
  sweep(p.w_o.data.data(), grads.d_w_o.data.data(), p.w_o.data.size(), "w_o");
  sweep(p.b_o.data(), grads.d_b_o.data(), p.b_o.size(), "b_o");
  if (params.kind == AttnKind::deformable) {
    sweep(p.w_a.data.data(), grads.d_w_a.data.data(), p.w_a.data.size(), "w_a");
    sweep(p.b_a.data(), grads.d_b_a.data(), p.b_a.size(), "b_a");
  } else {
    sweep(p.w_k.data.data(), grads.d_w_k.data.data(), p.w_k.data.size(), "w_k");
    sweep(p.b_k.data(), grads.d_b_k.data(), p.b_k.size(), "b_k");
  }

  result.pass = result.max_rel_err < opts.tolerance;
  return result;
}

}  // namespace litenc
