#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bemdc/handle_file.hpp"
#include "bemdc/run_config.hpp"

namespace bemdc {

/// Oracle selected by a run configuration.
std::shared_ptr<const SampleOracle> make_oracle(const SceneSpec& scene, OracleKind kind);

struct FitResult {
  HandleFile final_handles;
  std::vector<StepMetrics> metrics;
};

/// Runs the optimizer and writes into `out_dir`:
///   handles.json               final state
///   snapshots/step_NNNN.json   periodic snapshots
///   metrics.jsonl              one record per step
FitResult cmd_fit(const RunConfig& config, const std::filesystem::path& out_dir);

/// One metrics record as a single JSON line (no trailing newline).
std::string metrics_json_line(const StepMetrics& m);

Image render_handles(const HandleFile& file, int resolution);
void cmd_render(const std::filesystem::path& handles, int resolution, const std::filesystem::path& out_png);

/// SVG in a 0..1000 viewBox: gray image border, black subdomain outlines,
/// handles stroked with a per-subdomain palette color.
std::string export_svg(const HandleFile& file);
void cmd_export_svg(const std::filesystem::path& handles, const std::filesystem::path& out_svg);

/// Stroke color of subdomain `id` in exported SVGs.
std::string palette_color(std::size_t id);

/// RMSE of a reconstruction against a reference. A PNG reference is compared
/// with the 8-bit tone-mapped render (or, with `linear`, both decoded to
/// linear). A scene reference (.json) uses its noise-free target at `resolution`.
double cmd_eval_rmse(const std::filesystem::path& handles, const std::filesystem::path& reference, int resolution,
                     bool linear = false);

}  // namespace bemdc
