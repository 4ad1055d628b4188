#pragma once

#include <filesystem>
#include <string>

#include "bemdc/target.hpp"

namespace bemdc {

/// Parses a "bemdc-scene" JSON document. Raster paths are resolved against
/// `base_dir`. The result is validated.
SceneSpec parse_scene(const std::string& text, const std::filesystem::path& base_dir = {});
SceneSpec read_scene_file(const std::filesystem::path& path);

std::string serialize(const SceneSpec& scene);

}  // namespace bemdc
