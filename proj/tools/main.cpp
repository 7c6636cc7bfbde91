#include <string>

#include <CLI11.hpp>

#include "litenc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Interleaved multi-scale encoder: traces, cost reports, gradient checks, "
               "sampling-location export"};
  app.require_subcommand(1);

  litenc::RunSpec spec;
  std::string attn = "kda";
  std::vector<CLI::Option*> dim_options;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--variant", spec.variant, "Schedule variant, e.g. H3L1-(2+1)x3");
    sub->add_option("--attn", attn, "Attention kind")
        ->check(CLI::IsMember({"deformable", "kda"}));
    dim_options.push_back(sub->add_option("--height", spec.height, "Input height in pixels"));
    dim_options.push_back(sub->add_option("--width", spec.width, "Input width in pixels"));
    dim_options.push_back(sub->add_option("--dmodel", spec.d_model, "Channel dimension"));
    dim_options.push_back(sub->add_option("--strides", spec.strides,
                                          "Comma-separated level strides, low level first")
                              ->delimiter(','));
    sub->add_option("--seed", spec.seed, "Seed for pyramids and parameters");
    sub->add_option("--fixture", spec.fixture_path, "Pyramid fixture JSON instead of a seed");
    sub->add_option("--out", spec.out_path, "Output file (stdout when omitted)");
  };

  CLI::App* run = app.add_subcommand("run", "Run the encoder and write the stage trace");
  add_common(run);
  CLI::App* cost = app.add_subcommand("cost", "Analytic FLOPs report for one or more variants");
  add_common(cost);
  cost->add_flag("--baseline-only", spec.baseline_only,
                 "Report the six-layer baseline against itself");
  CLI::App* grad =
      app.add_subcommand("gradcheck", "Finite-difference check of the attention gradients");
  add_common(grad);
  CLI::App* topk =
      app.add_subcommand("topk", "Export the top-k sampling locations by attention weight");
  add_common(topk);
  topk->add_option("--layer", spec.layer, "Encoder stage to inspect");
  topk->add_option("--k-top", spec.k_top, "Number of locations to keep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  spec.command = app.get_subcommands().front()->get_name();
  spec.attn_kind = litenc::attn_kind_from_string(attn);
  for (const CLI::Option* opt : dim_options) {
    if (opt->count() > 0) spec.explicit_dims = true;
  }
  return litenc::run_command(spec);
}
