#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bemdc/commands.hpp"
#include "bemdc/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bemdc: diffusion-curve fitting from noisy point samples"};
  app.require_subcommand(1);

  std::filesystem::path config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::string profile;
  auto* fit = app.add_subcommand("fit", "Fit handles to a scene's sample oracle");
  fit->add_option("--config", config_path, "Run configuration (bemdc-config JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--seed", seed, "Random seed (overrides the config)");
  fit->add_option("--out", out_dir, "Output directory")->required();
  fit->add_option("--profile", profile, "Settings profile")->check(CLI::IsMember({"test", "paper"}));

  std::filesystem::path handles_path, out_path, ref_path;
  int resolution = 256;
  bool linear = false;
  auto* render = app.add_subcommand("render", "Rasterize a handle file to PNG");
  render->add_option("--handles", handles_path, "Handle file")->required()->check(CLI::ExistingFile);
  render->add_option("--res", resolution, "Output resolution (square)")->check(CLI::PositiveNumber);
  render->add_option("--out", out_path, "Output PNG")->required();

  auto* svg = app.add_subcommand("export-svg", "Write handles and subdomain outlines as SVG");
  svg->add_option("--handles", handles_path, "Handle file")->required()->check(CLI::ExistingFile);
  svg->add_option("--out", out_path, "Output SVG")->required();

  auto* eval = app.add_subcommand("eval-rmse", "RMSE of a handle file against a reference");
  eval->add_option("--handles", handles_path, "Handle file")->required()->check(CLI::ExistingFile);
  eval->add_option("--ref", ref_path, "Reference PNG or scene JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--res", resolution, "Evaluation resolution (square)")->check(CLI::PositiveNumber);
  eval->add_flag("--linear", linear, "Compare linear values instead of tone-mapped ones");

  CLI11_PARSE(app, argc, argv);

  try {
    bemdc::configure_threads_from_env();
    if (*fit) {
      bemdc::RunConfig config = bemdc::read_run_config(config_path, profile);
      if (seed) config.seed = *seed;
      const auto result = bemdc::cmd_fit(config, out_dir);
      std::cout << "wrote " << (out_dir / "handles.json").string() << " (" << result.final_handles.handle_count()
                << " handles, " << result.metrics.size() << " steps)\n";
    } else if (*render) {
      bemdc::cmd_render(handles_path, resolution, out_path);
    } else if (*svg) {
      bemdc::cmd_export_svg(handles_path, out_path);
    } else if (*eval) {
      std::printf("%.9g\n", bemdc::cmd_eval_rmse(handles_path, ref_path, resolution, linear));
    }
  } catch (const std::exception& e) {
    std::cerr << "bemdc: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
