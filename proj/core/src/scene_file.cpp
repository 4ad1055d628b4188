#include "bemdc/scene_file.hpp"

#include "json_util.hpp"

namespace bemdc {

using detail::Json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Handle parse_handle(const Json& j, const std::string& ctx) {
  detail::check_keys(j, {"p0", "p1", "w_d", "w_c"}, ctx);
  Handle h;
  h.p0 = detail::vec2(detail::field(j, "p0", ctx), ctx + ".p0");
  h.p1 = detail::vec2(detail::field(j, "p1", ctx), ctx + ".p1");
  h.w_d = detail::rgb(detail::field(j, "w_d", ctx), ctx + ".w_d");
  h.w_c = detail::rgb(detail::field(j, "w_c", ctx), ctx + ".w_c");
  return h;
}

Shading parse_shading(const Json& j, double default_sigma, const std::filesystem::path& base_dir,
                      const std::string& ctx) {
  detail::require_object(j, ctx);
  const Json& type_j = detail::field(j, "type", ctx);
  if (!type_j.is_string()) detail::format_error(ctx, "type must be a string");
  const auto type = type_j.get<std::string>();
  const double sigma = detail::number_or(j, "sigma", default_sigma, ctx);
  if (sigma < 0.0) detail::format_error(ctx, "sigma must be non-negative");

  if (type == "constant") {
    detail::check_keys(j, {"type", "albedo", "sigma"}, ctx);
    return ConstantShading{detail::rgb(detail::field(j, "albedo", ctx), ctx + ".albedo"), sigma};
  }
  if (type == "linear") {
    detail::check_keys(j, {"type", "base", "grad_x", "grad_y", "sigma"}, ctx);
    return LinearShading{detail::rgb(detail::field(j, "base", ctx), ctx + ".base"),
                         detail::rgb(detail::field(j, "grad_x", ctx), ctx + ".grad_x"),
                         detail::rgb(detail::field(j, "grad_y", ctx), ctx + ".grad_y"), sigma};
  }
  if (type == "blob") {
    detail::check_keys(j, {"type", "base", "amplitude", "center", "radius", "sigma"}, ctx);
    BlobShading s;
    s.base = detail::rgb(detail::field(j, "base", ctx), ctx + ".base");
    s.amplitude = detail::rgb(detail::field(j, "amplitude", ctx), ctx + ".amplitude");
    s.center = detail::vec2(detail::field(j, "center", ctx), ctx + ".center");
    s.radius = detail::number_field(j, "radius", ctx);
    s.sigma = sigma;
    if (!(s.radius > 0.0)) detail::format_error(ctx, "radius must be positive");
    return s;
  }
  if (type == "raster") {
    detail::check_keys(j, {"type", "path", "sigma"}, ctx);
    const Json& p = detail::field(j, "path", ctx);
    if (!p.is_string()) detail::format_error(ctx, "path must be a string");
    RasterShading s;
    s.path = p.get<std::string>();
    std::filesystem::path full = s.path;
    if (full.is_relative() && !base_dir.empty()) full = base_dir / full;
    s.image = std::make_shared<const Image>(read_image_linear(full));
    s.sigma = sigma;
    return s;
  }
  if (type == "soft_shadow") {
    detail::check_keys(j, {"type", "albedo", "light", "occluders"}, ctx);
    SoftShadowShading s;
    s.albedo = detail::rgb(detail::field(j, "albedo", ctx), ctx + ".albedo");
    const Json& light = detail::field(j, "light", ctx);
    detail::check_keys(light, {"center", "radius", "height"}, ctx + ".light");
    s.light.center = detail::vec2(detail::field(light, "center", ctx + ".light"), ctx + ".light.center");
    s.light.radius = detail::number_field(light, "radius", ctx + ".light");
    s.light.height = detail::number_field(light, "height", ctx + ".light");
    const Json& occ = detail::field(j, "occluders", ctx);
    if (!occ.is_array()) detail::format_error(ctx, "occluders must be an array");
    for (std::size_t k = 0; k < occ.size(); ++k) {
      const std::string octx = ctx + ".occluders[" + std::to_string(k) + "]";
      detail::check_keys(occ[k], {"height", "point", "normal"}, octx);
      HalfPlaneOccluder o;
      o.height = detail::number_field(occ[k], "height", octx);
      o.point = detail::vec2(detail::field(occ[k], "point", octx), octx + ".point");
      const Vec2 n = detail::vec2(detail::field(occ[k], "normal", octx), octx + ".normal");
      if (!(n.norm() > 0.0)) detail::format_error(octx, "normal must be non-zero");
      o.normal = n.normalized();
      s.occluders.push_back(o);
    }
    return s;
  }
  if (type == "diffusion_curve") {
    detail::check_keys(j, {"type", "mean_color", "handles", "sigma"}, ctx);
    DiffusionCurveShading s;
    s.mean_color = detail::rgb(detail::field(j, "mean_color", ctx), ctx + ".mean_color");
    const Json& hs = detail::field(j, "handles", ctx);
    if (!hs.is_array()) detail::format_error(ctx, "handles must be an array");
    for (std::size_t k = 0; k < hs.size(); ++k)
      s.handles.push_back(parse_handle(hs[k], ctx + ".handles[" + std::to_string(k) + "]"));
    s.sigma = sigma;
    return s;
  }
  detail::format_error(ctx, "unknown shading type '" + type + "'");
}

Json shading_json(const Shading& shading) {
  using detail::to_json;
  return std::visit(
      Overloaded{
          [](const ConstantShading& s) -> Json {
            return {{"type", "constant"}, {"albedo", to_json(s.albedo)}, {"sigma", s.sigma}};
          },
          [](const LinearShading& s) -> Json {
            return {{"type", "linear"},
                    {"base", to_json(s.base)},
                    {"grad_x", to_json(s.grad_x)},
                    {"grad_y", to_json(s.grad_y)},
                    {"sigma", s.sigma}};
          },
          [](const BlobShading& s) -> Json {
            return {{"type", "blob"},          {"base", to_json(s.base)},     {"amplitude", to_json(s.amplitude)},
                    {"center", to_json(s.center)}, {"radius", s.radius}, {"sigma", s.sigma}};
          },
          [](const RasterShading& s) -> Json { return {{"type", "raster"}, {"path", s.path}, {"sigma", s.sigma}}; },
          [](const SoftShadowShading& s) -> Json {
            Json occ = Json::array();
            for (const auto& o : s.occluders)
              occ.push_back({{"height", o.height}, {"point", to_json(o.point)}, {"normal", to_json(o.normal)}});
            return {{"type", "soft_shadow"},
                    {"albedo", to_json(s.albedo)},
                    {"light",
                     {{"center", to_json(s.light.center)}, {"radius", s.light.radius}, {"height", s.light.height}}},
                    {"occluders", std::move(occ)}};
          },
          [](const DiffusionCurveShading& s) -> Json {
            Json hs = Json::array();
            for (const auto& h : s.handles)
              hs.push_back(
                  {{"p0", to_json(h.p0)}, {"p1", to_json(h.p1)}, {"w_d", to_json(h.w_d)}, {"w_c", to_json(h.w_c)}});
            return {{"type", "diffusion_curve"},
                    {"mean_color", to_json(s.mean_color)},
                    {"handles", std::move(hs)},
                    {"sigma", s.sigma}};
          },
      },
      shading);
}

}  // namespace

SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("scene: ") + e.what());
  }
  const std::string ctx = "scene";
  detail::check_header(root, "bemdc-scene", ctx);
  detail::check_keys(root, {"format", "version", "kernel", "noise_sigma", "subdomains"}, ctx);
  SceneSpec scene;
  if (root.contains("kernel")) {
    const Json& k = root["kernel"];
    detail::check_keys(k, {"epsilon", "h_max"}, ctx + ".kernel");
    scene.kernel.epsilon = detail::number_or(k, "epsilon", scene.kernel.epsilon, ctx + ".kernel");
    scene.kernel.h_max = detail::number_or(k, "h_max", scene.kernel.h_max, ctx + ".kernel");
  }
  const double default_sigma = detail::number_or(root, "noise_sigma", 0.0, ctx);
  const Json& subs = detail::field(root, "subdomains", ctx);
  if (!subs.is_array()) detail::format_error(ctx, "subdomains must be an array");
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::string sctx = ctx + ".subdomains[" + std::to_string(i) + "]";
    detail::check_keys(subs[i], {"name", "polygon", "shading"}, sctx);
    SceneSubdomain sub;
    sub.name = subs[i].contains("name") && subs[i]["name"].is_string() ? subs[i]["name"].get<std::string>()
                                                                        : "subdomain " + std::to_string(i);
    sub.boundary.id = static_cast<SubdomainId>(i);
    sub.boundary.vertices = detail::polygon(detail::field(subs[i], "polygon", sctx), sctx + ".polygon");
    sub.shading = parse_shading(detail::field(subs[i], "shading", sctx), default_sigma, base_dir, sctx + ".shading");
    scene.subdomains.push_back(std::move(sub));
  }
  validate(scene);
  return scene;
}

SceneSpec read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene(ss.str(), path.parent_path());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string serialize(const SceneSpec& scene) {
  Json root;
  root["format"] = "bemdc-scene";
  root["version"] = 1;
  root["kernel"] = {{"epsilon", scene.kernel.epsilon}, {"h_max", scene.kernel.h_max}};
  Json subs = Json::array();
  for (const auto& s : scene.subdomains)
    subs.push_back({{"name", s.name},
                    {"polygon", detail::polygon_json(s.boundary.vertices)},
                    {"shading", shading_json(s.shading)}});
  root["subdomains"] = std::move(subs);
  return root.dump(1) + "\n";
}

}  // namespace bemdc
