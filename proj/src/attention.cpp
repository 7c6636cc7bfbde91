#include "litenc/attention.hpp"

#include <cmath>
#include <numbers>

namespace litenc {

const char* to_string(AttnKind kind) {
  return kind == AttnKind::deformable ? "deformable" : "kda";
}

AttnKind attn_kind_from_string(const std::string& s) {
  if (s == "deformable") return AttnKind::deformable;
  if (s == "kda") return AttnKind::kda;
  throw ParseError("unknown attention kind '" + s + "' (expected 'deformable' or 'kda')");
}

void AttentionHyper::validate() const {
  if (m_heads <= 0 || k_points <= 0 || n_levels <= 0 || d_model <= 0) {
    throw std::invalid_argument("attention hyperparameters must be positive");
  }
  if (d_model % m_heads != 0) {
    throw std::invalid_argument("d_model " + std::to_string(d_model) + " not divisible by " +
                                std::to_string(m_heads) + " heads");
  }
}

void AttentionParams::validate(const AttentionHyper& hyper) const {
  const int d = hyper.d_model;
  const int slots = hyper.n_slots();
  auto check = [&](const Matrix& m, const std::vector<double>& b, int out, const char* name) {
    if (m.rows != d || m.cols != out || static_cast<int>(b.size()) != out) {
      throw std::invalid_argument(std::string("attention params: ") + name +
                                  " has inconsistent shape");
    }
  };
  check(w_p, b_p, 2 * slots, "w_p");
  check(w_v, b_v, d, "w_v");
  check(w_o, b_o, d, "w_o");
  if (kind == AttnKind::deformable) {
    check(w_a, b_a, slots, "w_a");
  } else {
    check(w_k, b_k, d, "w_k");
  }
}

AttentionParams init_params(const AttentionHyper& hyper, std::uint64_t seed, AttnKind kind) {
  hyper.validate();
  const int d = hyper.d_model;
  const int slots = hyper.n_slots();

  AttentionParams p;
  p.kind = kind;
  p.w_p = Matrix(d, 2 * slots);
  p.b_p.assign(2 * slots, 0.0);
  for (int h = 0; h < hyper.m_heads; ++h) {
    const double angle = 2.0 * std::numbers::pi * h / hyper.m_heads;
    for (int l = 0; l < hyper.n_levels; ++l) {
      for (int k = 0; k < hyper.k_points; ++k) {
        const int slot = (h * hyper.n_levels + l) * hyper.k_points + k;
        p.b_p[2 * slot + 0] = std::cos(angle) * (k + 1);
        p.b_p[2 * slot + 1] = std::sin(angle) * (k + 1);
      }
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  auto seeded = [&](std::uint64_t tag) {
    Matrix m(d, d);
    Rng rng(mix_seed(seed, tag));
    for (double& v : m.data) v = scale * rng.uniform_sym();
    return m;
  };
  p.w_v = seeded(1);
  p.b_v.assign(d, 0.0);
  p.w_o = seeded(3);
  p.b_o.assign(d, 0.0);
  if (kind == AttnKind::deformable) {
    p.w_a = Matrix(d, slots);
    p.b_a.assign(slots, 0.0);
  } else {
    p.w_k = seeded(2);
    p.b_k.assign(d, 0.0);
  }
  return p;
}

namespace {

void softmax_in_place(double* v, int n) {
  double m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - m);
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
}

void check_finite_inputs(const Matrix& queries, const SamplingField& field,
                         const FeaturePyramid& pyramid, const AttentionParams& params) {
  if (has_nan(queries)) throw NumericError("attention: NaN in queries");
  if (has_nan(field.locations.data(), field.locations.size())) {
    throw NumericError("attention: NaN in sampling locations");
  }
  for (const auto& lvl : pyramid.levels) {
    if (has_nan(lvl.data.data(), lvl.data.size())) {
      throw NumericError("attention: NaN in pyramid features");
    }
  }
  if (has_nan(params.w_p) || has_nan(params.w_v) || has_nan(params.w_o) || has_nan(params.w_a) ||
      has_nan(params.w_k)) {
    throw NumericError("attention: NaN in parameters");
  }
}

void check_field_shape(const Matrix& queries, const SamplingField& field,
                       const AttentionHyper& hyper) {
  if (field.n_queries != queries.rows || field.m_heads != hyper.m_heads ||
      field.n_levels != hyper.n_levels || field.k_points != hyper.k_points) {
    throw std::invalid_argument("attention: sampling field does not match queries and hyper");
  }
}

/// One sampled vector per slot, row (q * MLK + slot) of the result.
Matrix gather_samples(const SamplingField& field, const FeaturePyramid& pyramid) {
  const int slots = field.slots_per_query();
  Matrix samples(field.n_queries * slots, pyramid.d_model);
  parallel_for(field.n_queries, [&](int lo, int hi) {
    for (int q = lo; q < hi; ++q) {
      for (int h = 0; h < field.m_heads; ++h) {
        for (int l = 0; l < field.n_levels; ++l) {
          for (int k = 0; k < field.k_points; ++k) {
            const std::size_t s = field.slot(q, h, l, k);
            bilinear_sample_into(pyramid.levels[l], field.locations[2 * s],
                                 field.locations[2 * s + 1],
                                 samples.row(static_cast<int>(s)));
          }
        }
      }
    }
  });
  return samples;
}

/// Per-slot head slice of samples * w + b: row r holds only the d_head
/// columns belonging to slot r's head, which is all the combine and the KDA
/// logits ever read.
Matrix project_head_slices(const Matrix& samples, const SamplingField& field, const Matrix& w,
                           const std::vector<double>& bias, const AttentionHyper& hyper) {
  const int d = hyper.d_model;
  const int dh = hyper.d_head();
  const int slots = field.slots_per_query();
  const int lk = hyper.n_levels * hyper.k_points;
  Matrix out(samples.rows, dh);
  parallel_for(field.n_queries, [&](int lo, int hi) {
    for (int q = lo; q < hi; ++q) {
      for (int h = 0; h < hyper.m_heads; ++h) {
        const int base = q * slots + h * lk;
        for (int s = 0; s < lk; ++s) {
          const double* srow = samples.row(base + s);
          double* orow = out.row(base + s);
          for (int t = 0; t < dh; ++t) orow[t] = bias[h * dh + t];
          for (int i = 0; i < d; ++i) {
            const double si = srow[i];
            if (si == 0.0) continue;
            const double* wrow = w.row(i) + h * dh;
            for (int t = 0; t < dh; ++t) orow[t] += si * wrow[t];
          }
        }
      }
    }
  });
  return out;
}

/// Weighted per-head combination of the projected values, heads concatenated.
Matrix combine_heads(const SamplingField& field, const Matrix& values,
                     const AttentionHyper& hyper) {
  const int dh = hyper.d_head();
  const int lk = hyper.n_levels * hyper.k_points;
  Matrix concat(field.n_queries, hyper.d_model);
  parallel_for(field.n_queries, [&](int lo, int hi) {
    for (int q = lo; q < hi; ++q) {
      double* out = concat.row(q);
      for (int h = 0; h < hyper.m_heads; ++h) {
        const std::size_t base = field.slot(q, h, 0, 0);
        for (int s = 0; s < lk; ++s) {
          const double w = field.weights[base + s];
          const double* v = values.row(static_cast<int>(base + s));
          for (int t = 0; t < dh; ++t) out[h * dh + t] += w * v[t];
        }
      }
    }
  });
  return concat;
}

}  // namespace

SamplingField resolve_locations(const Matrix& queries, std::span<const ReferencePoint> refs,
                                const AttentionParams& params, const AttentionHyper& hyper,
                                const std::vector<LevelShape>& level_shapes) {
  hyper.validate();
  params.validate(hyper);
  if (queries.cols != hyper.d_model) {
    throw std::invalid_argument("resolve_locations: queries have " + std::to_string(queries.cols) +
                                " channels, expected " + std::to_string(hyper.d_model));
  }
  if (static_cast<int>(refs.size()) != queries.rows) {
    throw std::invalid_argument("resolve_locations: need one reference point per query");
  }
  if (static_cast<int>(level_shapes.size()) != hyper.n_levels) {
    throw std::invalid_argument("resolve_locations: level count does not match hyper");
  }

  SamplingField field;
  field.n_queries = queries.rows;
  field.m_heads = hyper.m_heads;
  field.n_levels = hyper.n_levels;
  field.k_points = hyper.k_points;

  Matrix offs = matmul(queries, params.w_p);
  add_bias_rows(offs, params.b_p);
  field.offsets = std::move(offs.data);

  field.locations.resize(field.offsets.size());
  const int slots = field.slots_per_query();
  for (int q = 0; q < queries.rows; ++q) {
    for (int h = 0; h < hyper.m_heads; ++h) {
      for (int l = 0; l < hyper.n_levels; ++l) {
        for (int k = 0; k < hyper.k_points; ++k) {
          const std::size_t s = field.slot(q, h, l, k);
          field.locations[2 * s] = refs[q].x * level_shapes[l].width + field.offsets[2 * s];
          field.locations[2 * s + 1] =
              refs[q].y * level_shapes[l].height + field.offsets[2 * s + 1];
        }
      }
    }
  }

  if (params.kind == AttnKind::deformable) {
    Matrix logits = matmul(queries, params.w_a);
    add_bias_rows(logits, params.b_a);
    field.weights = std::move(logits.data);
    const int lk = hyper.n_levels * hyper.k_points;
    for (int q = 0; q < queries.rows; ++q) {
      for (int h = 0; h < hyper.m_heads; ++h) {
        softmax_in_place(field.weights.data() + static_cast<std::size_t>(q) * slots +
                             static_cast<std::size_t>(h) * lk,
                         lk);
      }
    }
  }
  return field;
}

Matrix deform_attn(const Matrix& queries, const SamplingField& field,
                   const FeaturePyramid& pyramid, const AttentionParams& params,
                   const AttentionHyper& hyper, AttnCache* cache) {
  hyper.validate();
  params.validate(hyper);
  check_field_shape(queries, field, hyper);
  if (params.kind != AttnKind::deformable) {
    throw std::invalid_argument("deform_attn: params were built for kda");
  }
  if (!field.has_weights()) {
    throw std::invalid_argument("deform_attn: field carries no resolved attention weights");
  }
  check_finite_inputs(queries, field, pyramid, params);

  Matrix samples = gather_samples(field, pyramid);
  Matrix values = project_head_slices(samples, field, params.w_v, params.b_v, hyper);
  Matrix concat = combine_heads(field, values, hyper);
  Matrix out = matmul(concat, params.w_o);
  add_bias_rows(out, params.b_o);

  if (cache) {
    cache->valid = true;
    cache->kind = AttnKind::deformable;
    cache->field = field;
    cache->samples = std::move(samples);
    cache->values = std::move(values);
    cache->keys = Matrix();
    cache->concat = std::move(concat);
  }
  return out;
}

Matrix kda_attn(const Matrix& queries, SamplingField& field, const FeaturePyramid& pyramid,
                const AttentionParams& params, const AttentionHyper& hyper, AttnCache* cache) {
  hyper.validate();
  params.validate(hyper);
  check_field_shape(queries, field, hyper);
  if (params.kind != AttnKind::kda) {
    throw std::invalid_argument("kda_attn: params were built for deformable");
  }
  check_finite_inputs(queries, field, pyramid, params);

  Matrix samples = gather_samples(field, pyramid);
  Matrix values = project_head_slices(samples, field, params.w_v, params.b_v, hyper);
  Matrix keys = project_head_slices(samples, field, params.w_k, params.b_k, hyper);

  const int dh = hyper.d_head();
  const int lk = hyper.n_levels * hyper.k_points;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));
  field.weights.assign(static_cast<std::size_t>(field.n_queries) * field.slots_per_query(), 0.0);
  parallel_for(field.n_queries, [&](int lo, int hi) {
    for (int q = lo; q < hi; ++q) {
      const double* qrow = queries.row(q);
      for (int h = 0; h < hyper.m_heads; ++h) {
        const std::size_t base = field.slot(q, h, 0, 0);
        double* w = field.weights.data() + base;
        for (int s = 0; s < lk; ++s) {
          const double* key = keys.row(static_cast<int>(base + s));
          double dot = 0.0;
          for (int t = 0; t < dh; ++t) dot += qrow[h * dh + t] * key[t];
          w[s] = dot * inv_sqrt_dk;
        }
        softmax_in_place(w, lk);
      }
    }
  });

  Matrix concat = combine_heads(field, values, hyper);
  Matrix out = matmul(concat, params.w_o);
  add_bias_rows(out, params.b_o);

  if (cache) {
    cache->valid = true;
    cache->kind = AttnKind::kda;
    cache->field = field;
    cache->samples = std::move(samples);
    cache->values = std::move(values);
    cache->keys = std::move(keys);
    cache->concat = std::move(concat);
  }
  return out;
}

AttnGrads attn_backward(const Matrix& queries, const FeaturePyramid& pyramid,
                        const AttentionParams& params, const AttentionHyper& hyper,
                        const AttnCache& cache, const Matrix& upstream) {
  if (!cache.valid) {
    throw std::invalid_argument("attn_backward: missing forward cache");
  }
  hyper.validate();
  params.validate(hyper);
  if (cache.kind != params.kind) {
    throw std::invalid_argument("attn_backward: cache kind does not match params");
  }
  if (upstream.rows != queries.rows || upstream.cols != hyper.d_model) {
    throw std::invalid_argument("attn_backward: upstream shape does not match output");
  }
  const SamplingField& field = cache.field;
  check_field_shape(queries, field, hyper);

  const int n = queries.rows;
  const int d = hyper.d_model;
  const int dh = hyper.d_head();
  const int lk = hyper.n_levels * hyper.k_points;
  const int slots = field.slots_per_query();
  const bool kda = params.kind == AttnKind::kda;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));

  AttnGrads g;
  g.d_queries = Matrix(n, d);
  g.d_pyramid = pyramid_from_tokens(pyramid.shapes(), d, Matrix(pyramid.total_tokens(), d));
  g.d_w_p = Matrix(d, 2 * slots);
  g.d_b_p.assign(2 * slots, 0.0);
  g.d_w_v = Matrix(d, d);
  g.d_b_v.assign(d, 0.0);
  g.d_w_o = Matrix(d, d);
  g.d_b_o.assign(d, 0.0);
  if (kda) {
    g.d_w_k = Matrix(d, d);
    g.d_b_k.assign(d, 0.0);
  } else {
    g.d_w_a = Matrix(d, slots);
    g.d_b_a.assign(slots, 0.0);
  }

  // Output projection: out = concat * w_o + b_o.
  Matrix g_concat(n, d);
  for (int q = 0; q < n; ++q) {
    const double* gout = upstream.row(q);
    const double* crow = cache.concat.row(q);
    for (int j = 0; j < d; ++j) g.d_b_o[j] += gout[j];
    for (int i = 0; i < d; ++i) {
      const double ci = crow[i];
      double acc = 0.0;
      const double* worow = params.w_o.row(i);
      double* gwo = g.d_w_o.row(i);
      for (int j = 0; j < d; ++j) {
        gwo[j] += ci * gout[j];
        acc += gout[j] * worow[j];
      }
      g_concat(q, i) = acc;
    }
  }

  // Head combination and attention weights.
  Matrix g_values(n * slots, dh);
  Matrix g_keys = kda ? Matrix(n * slots, dh) : Matrix();
  for (int q = 0; q < n; ++q) {
    for (int h = 0; h < hyper.m_heads; ++h) {
      const double* g_oh = g_concat.row(q) + h * dh;
      const std::size_t base = field.slot(q, h, 0, 0);

      // Gradients with respect to the head's slot weights.
      std::vector<double> g_w(lk, 0.0);
      for (int s = 0; s < lk; ++s) {
        const int row = static_cast<int>(base + s);
        const double* u = cache.values.row(row);
        const double w = field.weights[base + s];
        double* gv = g_values.row(row);
        double dot = 0.0;
        for (int t = 0; t < dh; ++t) {
          dot += g_oh[t] * u[t];
          gv[t] += w * g_oh[t];
        }
        g_w[s] = dot;
      }

      // Softmax backward over the head's L*K slots.
      double inner = 0.0;
      for (int s = 0; s < lk; ++s) inner += g_w[s] * field.weights[base + s];
      std::vector<double> g_logit(lk);
      for (int s = 0; s < lk; ++s) g_logit[s] = field.weights[base + s] * (g_w[s] - inner);

      if (kda) {
        // logit = dot(q_h, k_h) / sqrt(d_head)
        const double* qrow = queries.row(q);
        double* gq = g.d_queries.row(q);
        for (int s = 0; s < lk; ++s) {
          const int row = static_cast<int>(base + s);
          const double gl = g_logit[s] * inv_sqrt_dk;
          const double* key = cache.keys.row(row);
          double* gk = g_keys.row(row);
          for (int t = 0; t < dh; ++t) {
            gq[h * dh + t] += gl * key[t];
            gk[t] += gl * qrow[h * dh + t];
          }
        }
      } else {
        // logits = q * w_a + b_a, head slice [h*lk, (h+1)*lk)
        const double* qrow = queries.row(q);
        double* gq = g.d_queries.row(q);
        for (int s = 0; s < lk; ++s) {
          const int col = h * lk + s;
          g.d_b_a[col] += g_logit[s];
          for (int i = 0; i < d; ++i) {
            g.d_w_a(i, col) += qrow[i] * g_logit[s];
            gq[i] += g_logit[s] * params.w_a(i, col);
          }
        }
      }
    }
  }

  // Value (and key) projections back to the raw samples. Only the slot's
  // head columns of w_v / w_k ever touch the output, so gradients land there.
  Matrix g_samples(n * slots, d);
  for (int r = 0; r < n * slots; ++r) {
    const int head = (r % slots) / lk;
    const int col0 = head * dh;
    const double* srow = cache.samples.row(r);
    const double* gvrow = g_values.row(r);
    double* gsrow = g_samples.row(r);
    for (int t = 0; t < dh; ++t) g.d_b_v[col0 + t] += gvrow[t];
    for (int i = 0; i < d; ++i) {
      const double si = srow[i];
      const double* wvrow = params.w_v.row(i) + col0;
      double* gwv = g.d_w_v.row(i) + col0;
      double acc = 0.0;
      for (int t = 0; t < dh; ++t) {
        gwv[t] += si * gvrow[t];
        acc += gvrow[t] * wvrow[t];
      }
      gsrow[i] += acc;
    }
    if (kda) {
      const double* gkrow = g_keys.row(r);
      for (int t = 0; t < dh; ++t) g.d_b_k[col0 + t] += gkrow[t];
      for (int i = 0; i < d; ++i) {
        const double si = srow[i];
        const double* wkrow = params.w_k.row(i) + col0;
        double* gwk = g.d_w_k.row(i) + col0;
        double acc = 0.0;
        for (int t = 0; t < dh; ++t) {
          gwk[t] += si * gkrow[t];
          acc += gkrow[t] * wkrow[t];
        }
        gsrow[i] += acc;
      }
    }
  }

  // Bilinear sampling: gradients flow into the feature maps and into the
  // sampling locations, hence into the offset head.
  Matrix g_offsets(n, 2 * slots);
  for (int q = 0; q < n; ++q) {
    for (int h = 0; h < hyper.m_heads; ++h) {
      for (int l = 0; l < hyper.n_levels; ++l) {
        for (int k = 0; k < hyper.k_points; ++k) {
          const std::size_t s = field.slot(q, h, l, k);
          const int row = static_cast<int>(s);
          const BilinearGrad bg = bilinear_backward(
              pyramid.levels[l], field.locations[2 * s], field.locations[2 * s + 1],
              std::span<const double>(g_samples.row(row), static_cast<std::size_t>(d)));
          auto& glvl = g.d_pyramid.levels[l];
          const double* gsrow = g_samples.row(row);
          for (const auto& cell : bg.cells) {
            double* dst = glvl.at(cell.i, cell.j);
            for (int c = 0; c < d; ++c) dst[c] += cell.weight * gsrow[c];
          }
          const std::size_t off = 2 * (s - static_cast<std::size_t>(q) * slots);
          g_offsets(q, static_cast<int>(off)) = bg.grad_x;
          g_offsets(q, static_cast<int>(off) + 1) = bg.grad_y;
        }
      }
    }
  }

  // Offset head: offsets = q * w_p + b_p.
  for (int q = 0; q < n; ++q) {
    const double* go = g_offsets.row(q);
    const double* qrow = queries.row(q);
    double* gq = g.d_queries.row(q);
    for (int j = 0; j < 2 * slots; ++j) g.d_b_p[j] += go[j];
    for (int i = 0; i < d; ++i) {
      const double qi = qrow[i];
      const double* wprow = params.w_p.row(i);
      double* gwp = g.d_w_p.row(i);
      double acc = 0.0;
      for (int j = 0; j < 2 * slots; ++j) {
        gwp[j] += qi * go[j];
        acc += go[j] * wprow[j];
      }
      gq[i] += acc;
    }
  }

  return g;
}

}  // namespace litenc
