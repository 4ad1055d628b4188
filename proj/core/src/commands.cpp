#include "bemdc/commands.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bemdc/scene_file.hpp"
#include "json_util.hpp"

namespace bemdc {

using detail::Json;

namespace {

constexpr std::array<const char*, 8> kPalette = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                                                 "#911eb4", "#42d4f4", "#f032e6", "#9a6324"};

std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string snapshot_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04d.json", step);
  return buf;
}

HandleFile state_file(const Optimizer& opt) { return make_handle_file(opt.reconstruction()); }

std::string lower_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

std::shared_ptr<const SampleOracle> make_oracle(const SceneSpec& scene, OracleKind kind) {
  auto oracle = std::make_shared<const SceneOracle>(scene);
  if (kind == OracleKind::noise_free) return std::make_shared<const NoiseFreeOracle>(oracle);
  return oracle;
}

std::string metrics_json_line(const StepMetrics& m) {
  Json j;
  j["step"] = m.step;
  j["loss_before"] = m.loss_before;
  j["loss_after"] = std::isfinite(m.loss_after) ? Json(m.loss_after) : Json(nullptr);
  j["lambda"] = m.lambda;
  j["accepted"] = m.accepted;
  j["handle_count"] = m.handle_count;
  j["max_compatibility_violation"] = m.max_compatibility_violation;
  if (m.rmse_linear) j["rmse_linear"] = *m.rmse_linear;
  if (m.rmse_tonemapped) j["rmse_tonemapped"] = *m.rmse_tonemapped;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

FitResult cmd_fit(const RunConfig& config, const std::filesystem::path& out_dir) {
  const SceneSpec scene = read_scene_file(config.scene);
  const auto oracle = make_oracle(scene, config.oracle);

  std::filesystem::create_directories(out_dir / "snapshots");
  std::ofstream metrics_out(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics_out) throw std::runtime_error("cannot write " + (out_dir / "metrics.jsonl").string());

  OptimizeOptions options;
  options.seed = config.seed;
  options.rmse_every = config.rmse_every;
  if (config.rmse_every > 0) options.reference = true_image(*oracle, config.rmse_resolution);

  Optimizer opt(config.lm, scene.boundaries(), oracle, options);
  opt.initialize();
  auto wants_snapshot = [&](int step) {
    return (config.snapshot_every > 0 && step % config.snapshot_every == 0) ||
           std::find(config.snapshot_steps.begin(), config.snapshot_steps.end(), step) != config.snapshot_steps.end();
  };
  if (wants_snapshot(0)) write_handle_file(out_dir / "snapshots" / snapshot_name(0), state_file(opt));
  while (opt.state().step < config.lm.max_steps) {
    const StepMetrics m = opt.step();
    metrics_out << metrics_json_line(m) << '\n';
    metrics_out.flush();
    if (wants_snapshot(m.step)) write_handle_file(out_dir / "snapshots" / snapshot_name(m.step), state_file(opt));
  }
  FitResult result{state_file(opt), opt.history()};
  write_handle_file(out_dir / "handles.json", result.final_handles);
  return result;
}

Image render_handles(const HandleFile& file, int resolution) { return to_reconstruction(file).render(resolution); }

void cmd_render(const std::filesystem::path& handles, int resolution, const std::filesystem::path& out_png) {
  write_png(out_png, render_handles(read_handle_file(handles), resolution));
}

std::string palette_color(std::size_t id) { return kPalette[id % kPalette.size()]; }

std::string export_svg(const HandleFile& file) {
  auto coord = [](double v) { return svg_number(1000.0 * v); };
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\" width=\"1000\" height=\"1000\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"none\" stroke=\"#808080\" "
         "stroke-width=\"2\"/>\n";
  for (const auto& s : file.subdomains) {
    svg << "  <polyline fill=\"none\" stroke=\"#000000\" stroke-width=\"2\" points=\"";
    const auto& v = s.boundary.vertices;
    for (std::size_t i = 0; i <= v.size(); ++i) {
      const Point2& p = v[i % v.size()];
      svg << (i ? " " : "") << coord(p.x()) << ',' << coord(p.y());
    }
    svg << "\"/>\n";
  }
  for (std::size_t d = 0; d < file.subdomains.size(); ++d) {
    const std::string color = palette_color(d);
    for (const auto& h : file.subdomains[d].handles)
      svg << "  <line x1=\"" << coord(h.p0.x()) << "\" y1=\"" << coord(h.p0.y()) << "\" x2=\"" << coord(h.p1.x())
          << "\" y2=\"" << coord(h.p1.y()) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_export_svg(const std::filesystem::path& handles, const std::filesystem::path& out_svg) {
  detail::write_text_file(out_svg, export_svg(read_handle_file(handles)));
}

double cmd_eval_rmse(const std::filesystem::path& handles, const std::filesystem::path& reference, int resolution,
                     bool linear) {
  const HandleFile file = read_handle_file(handles);
  const std::string ext = lower_extension(reference);
  if (ext == ".png") {
    const Image ref = linear ? read_png_linear(reference) : read_png_encoded(reference);
    if (ref.width != resolution || ref.height != resolution)
      throw std::invalid_argument("reference " + reference.string() + " is " + std::to_string(ref.width) + "x" +
                                  std::to_string(ref.height) + ", expected " + std::to_string(resolution) + "x" +
                                  std::to_string(resolution));
    const Image render = render_handles(file, resolution);
    if (linear) {
      Image quantized = tone_map_8bit(render);
      for (double& v : quantized.data) v = srgb_decode(v);
      return rmse(quantized, ref);
    }
    return rmse(tone_map_8bit(render), ref);
  }
  if (ext == ".json") {
    const SceneSpec scene = read_scene_file(reference);
    const Image ref = true_image(SceneOracle(scene), resolution);
    const Image render = render_handles(file, resolution);
    return linear ? rmse(render, ref) : rmse(tone_map(render), tone_map(ref));
  }
  throw std::invalid_argument("unsupported reference " + reference.string() + " (expected .png or a scene .json)");
}

}  // namespace bemdc
