// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line each. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "litenc/cli.hpp"
#include "litenc/costmodel.hpp"
#include "litenc/encoder.hpp"
#include "litenc/gradcheck.hpp"
#include "litenc/json_io.hpp"
#include "litenc/pyramid.hpp"
#include "litenc/sampler.hpp"
#include "oracles.hpp"

using namespace litenc;

namespace {

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 disables the runtime check
  std::function<bool(std::string&)> run;
};

bool expect(bool ok, std::string& detail, const std::string& message) {
  if (!ok && detail.empty()) detail = message;
  return ok;
}

// ---- 1. token ratios ------------------------------------------------------

bool check_token_ratios(std::string& detail) {
  const auto pyr = build_pyramid(512, 512, 1, {8, 16, 32, 64}, PyramidSource::seeded(0));
  const auto ratios = token_ratios(pyr);
  const int total = pyr.total_tokens();
  const int numerators[4] = {1, 4, 16, 64};
  bool ok = expect(ratios.size() == 4, detail, "expected four levels");
  for (int l = 0; l < 4 && ok; ++l) {
    ok = expect(pyr.levels[l].tokens() * 85 == numerators[l] * total, detail,
                "level " + std::to_string(l) + " ratio is not " +
                    std::to_string(numerators[l]) + "/85");
    ok = ok && expect(std::abs(ratios[l] - numerators[l] / 85.0) < 1e-15, detail,
                      "floating ratio mismatch at level " + std::to_string(l));
  }
  double sum = 0.0;
  for (double r : ratios) sum += r;
  return ok && expect(std::abs(sum - 1.0) < 1e-12, detail, "ratios do not sum to 1");
}

// ---- 2. query reduction ---------------------------------------------------

bool check_query_reduction(std::string& detail) {
  const auto pyr = build_pyramid(512, 512, 1, {8, 16, 32, 64}, PyramidSource::seeded(0));
  const int total = pyr.total_tokens();
  const auto h3 = split_tokens(pyr, 3);
  const auto h2 = split_tokens(pyr, 2);
  bool ok = expect(h3.n_high() * 85 == 21 * total, detail, "H=3 does not keep 21/85");
  ok = ok && expect(h2.n_high() * 85 == 5 * total, detail, "H=2 does not keep 5/85");
  ok = ok && expect(std::abs(h3.n_high() / double(total) - 0.247) < 1e-3, detail,
                    "H=3 fraction is not about 24.7%");
  ok = ok && expect(std::abs(h2.n_high() / double(total) - 0.059) < 1e-3, detail,
                    "H=2 fraction is not about 5.9%");
  return ok;
}

// ---- 3. cost-model ratios -------------------------------------------------

bool check_cost_ratios(std::string& detail) {
  const CostInput input{800, 1216, 256, {8, 16, 32, 64}, 8, 4};
  struct Band {
    const char* variant;
    double lo, hi;
  };
  const Band bands[] = {
      {"H2L2-(2+1)x3", 0.70, 0.84},
      {"H3L1-(6+1)x1", 0.62, 0.78},
      {"H3L1-(2+1)x3", 0.54, 0.70},
  };
  std::vector<double> reductions;
  for (const auto& band : bands) {
    const auto report = encoder_flops(parse_variant(band.variant), input);
    std::ostringstream msg;
    msg << band.variant << " reduction " << report.reduction_fraction << " outside ["
        << band.lo << ", " << band.hi << "]";
    if (!expect(report.reduction_fraction >= band.lo && report.reduction_fraction <= band.hi,
                detail, msg.str())) {
      return false;
    }
    reductions.push_back(report.reduction_fraction);
  }
  return expect(reductions[0] > reductions[1] && reductions[1] > reductions[2], detail,
                "reduction ordering 78% > 70% > 62% not preserved");
}

// ---- 4. gradient check ----------------------------------------------------

// Independent finite-difference sweep over every differentiable scalar,
// comparing against attn_backward. h = 1e-6, rel error floor 1e-2.
bool check_gradients(std::string& detail) {
  const auto pyramid = build_pyramid(16, 16, 8, {8, 16}, PyramidSource::seeded(3));
  const AttentionHyper hyper{2, 2, 2, 8};
  const Matrix queries = pyramid.flatten();
  if (!expect(queries.rows == 5, detail, "micro instance should have 5 queries")) return false;
  const auto refs = reference_points(pyramid);
  const double h = 1e-6;

  for (AttnKind kind : {AttnKind::deformable, AttnKind::kda}) {
    const AttentionParams params = generic_params(hyper, 41, kind);
    Matrix upstream(queries.rows, 8);
    Rng rng(5);
    for (double& v : upstream.data) v = rng.uniform_sym();

    FeaturePyramid pyr = pyramid;
    Matrix q = queries;
    AttentionParams p = params;

    auto phi = [&]() {
      SamplingField field = resolve_locations(q, refs, p, hyper, pyr.shapes());
      const Matrix out = kind == AttnKind::deformable
                             ? deform_attn(q, field, pyr, p, hyper)
                             : kda_attn(q, field, pyr, p, hyper);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * upstream.data[i];
      return acc;
    };

    AttnCache cache;
    {
      SamplingField field = resolve_locations(q, refs, p, hyper, pyr.shapes());
      if (kind == AttnKind::deformable) {
        deform_attn(q, field, pyr, p, hyper, &cache);
      } else {
        kda_attn(q, field, pyr, p, hyper, &cache);
      }
    }
    const AttnGrads grads = attn_backward(q, pyr, p, hyper, cache, upstream);

    double max_rel = 0.0;
    auto sweep = [&](double* data, const double* analytic, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double hi = phi();
        data[i] = saved - h;
        const double lo = phi();
        data[i] = saved;
        const double fd = (hi - lo) / (2 * h);
        const double rel = std::abs(analytic[i] - fd) /
                           std::max({std::abs(analytic[i]), std::abs(fd), 1e-2});
        max_rel = std::max(max_rel, rel);
      }
    };

    sweep(q.data.data(), grads.d_queries.data.data(), q.data.size());
    for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
      sweep(pyr.levels[l].data.data(), grads.d_pyramid.levels[l].data.data(),
            pyr.levels[l].data.size());
    }
    sweep(p.w_p.data.data(), grads.d_w_p.data.data(), p.w_p.data.size());
    sweep(p.b_p.data(), grads.d_b_p.data(), p.b_p.size());
    sweep(p.w_v.data.data(), grads.d_w_v.data.data(), p.w_v.data.size());
    sweep(p.b_v.data(), grads.d_b_v.data(), p.b_v.size());
    sweep(p.w_o.data.data(), grads.d_w_o.data.data(), p.w_o.data.size());
    sweep(p.b_o.data(), grads.d_b_o.data(), p.b_o.size());
    if (kind == AttnKind::deformable) {
      sweep(p.w_a.data.data(), grads.d_w_a.data.data(), p.w_a.data.size());
      sweep(p.b_a.data(), grads.d_b_a.data(), p.b_a.size());
    } else {
      sweep(p.w_k.data.data(), grads.d_w_k.data.data(), p.w_k.data.size());
      sweep(p.b_k.data(), grads.d_b_k.data(), p.b_k.size());
    }

    std::ostringstream msg;
    msg << to_string(kind) << " max relative error " << max_rel;
    if (!expect(max_rel < 1e-5, detail, msg.str())) return false;
  }
  return true;
}

// ---- 5. sampling oracle ---------------------------------------------------

bool check_sampling_oracle(std::string& detail) {
  FeatureLevel lvl;
  lvl.height = 7;
  lvl.width = 9;
  lvl.stride = 8;
  lvl.d_model = 4;
  lvl.data.resize(7 * 9 * 4);
  Rng rng(11);
  for (double& v : lvl.data) v = rng.uniform_sym();

  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double x = -2.0 + 13.0 * rng.uniform01();
    const double y = -2.0 + 11.0 * rng.uniform01();
    const auto got = bilinear_sample(lvl, x, y);
    const auto want = oracle::bilinear(lvl, x, y);
    for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(got[c] - want[c]));
  }
  if (!expect(worst < 1e-12, detail,
              "sampling oracle max abs error " + std::to_string(worst))) {
    return false;
  }

  // Sample/project commutation.
  Matrix w(4, 3);
  for (double& v : w.data) v = rng.uniform_sym();
  FeatureLevel projected = lvl;
  projected.d_model = 3;
  projected.data.assign(7 * 9 * 3, 0.0);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 9; ++j) {
      const double* src = lvl.at(i, j);
      double* dst = projected.at(i, j);
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 3; ++b) dst[b] += src[a] * w(a, b);
      }
    }
  }
  double worst_commute = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double x = -1.0 + 11.0 * rng.uniform01();
    const double y = -1.0 + 9.0 * rng.uniform01();
    const auto s = bilinear_sample(lvl, x, y);
    const auto sp = bilinear_sample(projected, x, y);
    for (int b = 0; b < 3; ++b) {
      double want = 0.0;
      for (int a = 0; a < 4; ++a) want += s[a] * w(a, b);
      worst_commute = std::max(worst_commute, std::abs(sp[b] - want));
    }
  }
  return expect(worst_commute < 1e-10, detail,
                "commutation max abs error " + std::to_string(worst_commute));
}

// ---- 6. attention normalization -------------------------------------------

bool check_weight_normalization(std::string& detail) {
  int instances = 0;
  for (std::uint64_t seed = 0; instances < 100; ++seed) {
    Rng rng(seed);
    const int m_heads = 1 << (rng.next_u64() % 3);
    const int d_model = m_heads * static_cast<int>(2 + rng.next_u64() % 4);
    const int k_points = 1 + static_cast<int>(rng.next_u64() % 4);
    const int n_levels = 1 + static_cast<int>(rng.next_u64() % 2);
    const std::vector<int> strides = n_levels == 1 ? std::vector<int>{8}
                                                   : std::vector<int>{8, 16};
    const auto pyr = build_pyramid(32, 32, d_model, strides, PyramidSource::seeded(seed));
    const AttentionHyper hyper{m_heads, k_points, n_levels, d_model};
    const Matrix queries = pyr.flatten();
    const auto refs = reference_points(pyr);

    for (AttnKind kind : {AttnKind::deformable, AttnKind::kda}) {
      const auto params = generic_params(hyper, seed + 1000, kind);
      SamplingField field = resolve_locations(queries, refs, params, hyper, pyr.shapes());
      if (kind == AttnKind::deformable) {
        deform_attn(queries, field, pyr, params, hyper);
      } else {
        kda_attn(queries, field, pyr, params, hyper);
      }
      const int lk = n_levels * k_points;
      for (int q = 0; q < field.n_queries; ++q) {
        for (int h = 0; h < m_heads; ++h) {
          double sum = 0.0;
          for (int s = 0; s < lk; ++s) sum += field.weights[field.slot(q, h, 0, 0) + s];
          if (!expect(std::abs(sum - 1.0) < 1e-12, detail,
                      std::string(to_string(kind)) + " weights sum to " + std::to_string(sum))) {
            return false;
          }
        }
      }
      ++instances;
    }
  }
  return true;
}

// ---- 7. encoder structural invariants -------------------------------------

bool check_encoder_invariants(std::string& detail) {
  const auto pyr = build_pyramid(64, 64, 16, {8, 16, 32, 64}, PyramidSource::seeded(7));
  const AttentionHyper hyper{4, 2, 4, 16};
  const Matrix input = pyr.flatten();
  const auto part = split_tokens(pyr, 3);  // H3 variants
  const auto part2 = split_tokens(pyr, 2); // H2 variant

  for (const char* name : {"H2L2-(2+1)x3", "H3L1-(6+1)x1", "H3L1-(3+1)x2", "H3L1-(2+1)x3"}) {
    const ScheduleConfig config = parse_variant(name);
    TraceOptions topt;
    topt.enabled = true;
    topt.snapshots = true;
    const auto result = run_encoder(pyr, config, hyper, std::uint64_t{8}, topt);

    if (!expect(static_cast<int>(result.trace.size()) == config.total_layers(), detail,
                std::string(name) + ": stage count is not (A+1)*B")) {
      return false;
    }
    for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
      if (!expect(result.output.levels[l].height == pyr.levels[l].height &&
                      result.output.levels[l].width == pyr.levels[l].width &&
                      result.output.levels[l].stride == pyr.levels[l].stride,
                  detail, std::string(name) + ": output shape differs from input")) {
        return false;
      }
    }

    const auto& partition = config.h_levels == 2 ? part2 : part;
    const Matrix* prev = &input;
    for (const auto& st : result.trace) {
      const auto& bystanders = st.is_high ? partition.low_indices : partition.high_indices;
      for (int row : bystanders) {
        if (std::memcmp(st.snapshot.row(row), prev->row(row), 16 * sizeof(double)) != 0) {
          detail = std::string(name) + ": bystander token " + std::to_string(row) +
                   " changed in stage " + std::to_string(st.stage_index);
          return false;
        }
      }
      prev = &st.snapshot;
    }
  }
  return true;
}

// ---- 8. cost/encoder agreement --------------------------------------------

bool check_cost_encoder_agreement(std::string& detail) {
  const auto pyr = build_pyramid(64, 64, 16, {8, 16, 32, 64}, PyramidSource::seeded(9));
  const AttentionHyper hyper{4, 2, 4, 16};
  const CostInput input{64, 64, 16, {8, 16, 32, 64}, 4, 2};

  for (const char* name : {"H2L2-(2+1)x3", "H3L1-(6+1)x1", "H3L1-(3+1)x2", "H3L1-(2+1)x3"}) {
    const ScheduleConfig config = parse_variant(name);
    const auto report = encoder_flops(config, input);
    TraceOptions topt;
    topt.enabled = true;
    const auto result = run_encoder(pyr, config, hyper, std::uint64_t{10}, topt);
    if (!expect(report.stages.size() == result.trace.size(), detail,
                std::string(name) + ": stage counts differ")) {
      return false;
    }
    for (std::size_t i = 0; i < report.stages.size(); ++i) {
      if (!expect(report.stages[i].n_queries == result.trace[i].n_queries, detail,
                  std::string(name) + ": stage " + std::to_string(i) +
                      " n_queries differ (cost " + std::to_string(report.stages[i].n_queries) +
                      " vs trace " + std::to_string(result.trace[i].n_queries) + ")")) {
        return false;
      }
    }
  }
  return true;
}

// ---- 9. CLI determinism ----------------------------------------------------

bool check_cli_determinism(std::string& detail) {
  const std::string args =
      " run --variant 'H3L1-(2+1)x3' --height 64 --width 64 --dmodel 16 --seed 4 --out ";
  struct Run {
    const char* env;
    const char* path;
  };
  const Run runs[] = {
      {"LITE_ENCODER_THREADS=1 ", "acc_trace_a.json"},
      {"LITE_ENCODER_THREADS=1 ", "acc_trace_b.json"},
      {"LITE_ENCODER_THREADS=4 ", "acc_trace_c.json"},
  };
  for (const auto& r : runs) {
    const std::string cmd =
        std::string(r.env) + LITENC_CLI_PATH + args + r.path + " > /dev/null 2>&1";
    if (!expect(std::system(cmd.c_str()) == 0, detail, "CLI run failed")) return false;
  }
  const std::string a = read_text_file(runs[0].path);
  const std::string b = read_text_file(runs[1].path);
  const std::string c = read_text_file(runs[2].path);
  for (const auto& r : runs) std::remove(r.path);
  bool ok = expect(!a.empty(), detail, "empty trace file");
  ok = ok && expect(a == b, detail, "repeated runs differ byte-wise");
  ok = ok && expect(a == c, detail, "thread settings change the trace bytes");
  return ok;
}

// ---- 10. top-k export ------------------------------------------------------

bool check_topk(std::string& detail) {
  const auto pyr = build_pyramid(64, 64, 16, {8, 16, 32, 64}, PyramidSource::seeded(12));
  const AttentionHyper hyper{4, 2, 4, 16};
  ScheduleConfig config = parse_variant("H3L1-(2+1)x3");
  TraceOptions topt;
  topt.enabled = true;
  topt.capture_field_stage = 1;
  const auto result = run_encoder(pyr, config, hyper, std::uint64_t{13}, topt);
  if (!expect(result.has_captured_field, detail, "no sampling field captured")) return false;

  const auto entries = topk_entries(result.captured_field, result.captured_query_tokens, 50);
  if (!expect(entries.size() == 50, detail, "expected 50 entries")) return false;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!expect(entries[i].weight <= entries[i - 1].weight, detail,
                "weights are not non-increasing")) {
      return false;
    }
  }

  // Brute-force sort of the full weight tensor.
  std::vector<double> sorted = result.captured_field.weights;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!expect(entries[i].weight == sorted[i], detail,
                "entry " + std::to_string(i) + " does not match the full sort")) {
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "token ratios are {1,4,16,64}/85 on the canonical pyramid", 1.0, check_token_ratios},
      {2, "split_tokens keeps 24.7% (H=3) and 5.9% (H=2) of tokens", 1.0, check_query_reduction},
      {3, "cost-model reductions match the published bands and ordering", 1.0, check_cost_ratios},
      {4, "attention gradients match finite differences (< 1e-5)", 60.0, check_gradients},
      {5, "bilinear sampling matches the brute-force oracle (< 1e-12)", 5.0,
       check_sampling_oracle},
      {6, "attention weights sum to 1 per query and head (< 1e-12)", 5.0,
       check_weight_normalization},
      {7, "encoder preserves structure and bystander bytes per stage", 30.0,
       check_encoder_invariants},
      {8, "cost-model and runtime traces agree on per-stage queries", 0.0,
       check_cost_encoder_agreement},
      {9, "trace files are byte-identical across runs and thread caps", 0.0,
       check_cli_determinism},
      {10, "top-k export equals a full sort with non-increasing weights", 0.0, check_topk},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && criterion.budget_seconds > 0.0 && seconds > criterion.budget_seconds) {
      ok = false;
      detail = "runtime " + std::to_string(seconds) + "s exceeds " +
               std::to_string(criterion.budget_seconds) + "s";
    }
    if (!ok) ++failures;
    std::printf("[%s] %2d. %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", criterion.id,
                criterion.name.c_str(), seconds, detail.empty() ? "" : " -- ",
                detail.c_str());
  }
  if (failures > 0) {
    std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
