#include "bemdc/handle_file.hpp"

#include "json_util.hpp"

namespace bemdc {

using detail::Json;

std::size_t HandleFile::handle_count() const {
  std::size_t n = 0;
  for (const auto& s : subdomains) n += s.handles.size();
  return n;
}

std::string serialize(const HandleFile& file) {
  Json root;
  root["format"] = "bemdc-handles";
  root["version"] = 1;
  root["kernel"] = {{"epsilon", file.kernel.epsilon}, {"h_max", file.kernel.h_max}};
  Json subs = Json::array();
  for (const auto& s : file.subdomains) {
    Json handles = Json::array();
    for (const auto& h : s.handles)
      handles.push_back({{"p0", detail::to_json(h.p0)},
                         {"p1", detail::to_json(h.p1)},
                         {"w_d", detail::to_json(h.w_d)},
                         {"w_c", detail::to_json(h.w_c)}});
    subs.push_back({{"id", s.boundary.id},
                    {"polygon", detail::polygon_json(s.boundary.vertices)},
                    {"mean_color", detail::to_json(s.mean_color)},
                    {"handles", std::move(handles)}});
  }
  root["subdomains"] = std::move(subs);
  return root.dump(1) + "\n";
}

HandleFile parse_handle_file(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("handle file: ") + e.what());
  }
  const std::string ctx = "handle file";
  detail::check_header(root, "bemdc-handles", ctx);
  detail::check_keys(root, {"format", "version", "kernel", "subdomains"}, ctx);

  HandleFile file;
  const Json& kernel = detail::field(root, "kernel", ctx);
  detail::check_keys(kernel, {"epsilon", "h_max"}, ctx + ".kernel");
  file.kernel.epsilon = detail::number_field(kernel, "epsilon", ctx + ".kernel");
  file.kernel.h_max = detail::number_field(kernel, "h_max", ctx + ".kernel");
  if (!(file.kernel.epsilon > 0.0) || !(file.kernel.h_max > 0.0))
    detail::format_error(ctx + ".kernel", "epsilon and h_max must be positive");

  const Json& subs = detail::field(root, "subdomains", ctx);
  if (!subs.is_array() || subs.empty()) detail::format_error(ctx, "subdomains must be a non-empty array");
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::string sctx = ctx + ".subdomains[" + std::to_string(i) + "]";
    const Json& s = subs[i];
    detail::check_keys(s, {"id", "polygon", "mean_color", "handles"}, sctx);
    HandleFileSubdomain sub;
    sub.boundary.id = static_cast<SubdomainId>(i);
    if (s.contains("id") && (!s["id"].is_number_integer() || s["id"].get<int>() != static_cast<int>(i)))
      detail::format_error(sctx, "id must equal the subdomain's position");
    sub.boundary.vertices = detail::polygon(detail::field(s, "polygon", sctx), sctx + ".polygon");
    try {
      validate(sub.boundary);
    } catch (const std::invalid_argument& e) {
      detail::format_error(sctx, e.what());
    }
    sub.mean_color = detail::rgb(detail::field(s, "mean_color", sctx), sctx + ".mean_color");
    const Json& hs = detail::field(s, "handles", sctx);
    if (!hs.is_array()) detail::format_error(sctx, "handles must be an array");
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const std::string hctx = sctx + ".handles[" + std::to_string(k) + "]";
      detail::check_keys(hs[k], {"p0", "p1", "w_d", "w_c"}, hctx);
      Handle h;
      h.p0 = detail::vec2(detail::field(hs[k], "p0", hctx), hctx + ".p0");
      h.p1 = detail::vec2(detail::field(hs[k], "p1", hctx), hctx + ".p1");
      h.w_d = detail::rgb(detail::field(hs[k], "w_d", hctx), hctx + ".w_d");
      h.w_c = detail::rgb(detail::field(hs[k], "w_c", hctx), hctx + ".w_c");
      h.owner = static_cast<SubdomainId>(i);
      if (!(h.length() > 0.0)) detail::format_error(hctx, "zero-length handle");
      sub.handles.push_back(h);
    }
    file.subdomains.push_back(std::move(sub));
  }
  return file;
}

void write_handle_file(const std::filesystem::path& path, const HandleFile& file) {
  detail::write_text_file(path, serialize(file));
}

HandleFile read_handle_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_handle_file(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

HandleFile make_handle_file(const Reconstruction& recon) {
  HandleFile file;
  file.kernel = recon.params();
  for (std::size_t d = 0; d < recon.subdomain_count(); ++d)
    file.subdomains.push_back({recon.system(d).boundary, recon.mean_color(d), recon.handles(d)});
  return file;
}

Reconstruction to_reconstruction(const HandleFile& file) {
  std::vector<SubdomainBoundary> boundaries;
  for (const auto& s : file.subdomains) boundaries.push_back(s.boundary);
  Reconstruction recon(std::move(boundaries), file.kernel);
  for (std::size_t d = 0; d < file.subdomains.size(); ++d) {
    recon.set_handles(d, file.subdomains[d].handles);
    recon.set_mean_color(d, file.subdomains[d].mean_color);
  }
  return recon;
}

}  // namespace bemdc
