#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bemdc/optimizer.hpp"

namespace bemdc {

enum class Profile { test, paper };
enum class OracleKind { scene, noise_free };

Profile parse_profile(const std::string& name);
std::string to_string(Profile profile);

/// LMConfig defaults of a profile. `paper` keeps the full-size settings;
/// `test` scales the per-step budget down for desktop runs.
LMConfig profile_defaults(Profile profile);

struct RunConfig {
  std::filesystem::path scene;
  OracleKind oracle = OracleKind::scene;
  Profile profile = Profile::test;
  LMConfig lm = profile_defaults(Profile::test);
  std::uint64_t seed = 1;
  int snapshot_every = 5;            // 0 disables periodic snapshots
  std::vector<int> snapshot_steps;   // extra explicit snapshot steps
  int rmse_every = 5;                // 0 disables RMSE metrics
  int rmse_resolution = 256;
};

/// Parses a "bemdc-config" document. `profile_override` replaces the
/// document's profile before LM overrides are applied. Relative scene paths
/// are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {},
                           const std::string& profile_override = {});
RunConfig read_run_config(const std::filesystem::path& path, const std::string& profile_override = {});

/// Applies "lm" override keys (LMConfig field names) onto `config`.
void apply_lm_overrides(LMConfig& config, const std::string& json_object_text);

}  // namespace bemdc
