#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bemdc/reconstruction.hpp"

namespace bemdc {

struct HandleFileSubdomain {
  SubdomainBoundary boundary;
  Rgb mean_color = Rgb::Zero();
  std::vector<Handle> handles;
};

/// Persistent form of a fitted image: kernel, and per subdomain the polygon,
/// mean color and handles.
struct HandleFile {
  KernelParams kernel;
  std::vector<HandleFileSubdomain> subdomains;

  std::size_t handle_count() const;
};

/// JSON text ("bemdc-handles", version 1). Doubles are written with
/// round-trip precision.
std::string serialize(const HandleFile& file);
/// Throws std::invalid_argument on malformed input or unknown fields.
HandleFile parse_handle_file(const std::string& text);

void write_handle_file(const std::filesystem::path& path, const HandleFile& file);
HandleFile read_handle_file(const std::filesystem::path& path);

HandleFile make_handle_file(const Reconstruction& recon);
Reconstruction to_reconstruction(const HandleFile& file);

}  // namespace bemdc
