#include "bemdc/run_config.hpp"

#include "json_util.hpp"

namespace bemdc {

using detail::Json;

namespace {

int integer(const Json& j, const std::string& ctx) {
  if (!j.is_number_integer()) detail::format_error(ctx, "expected an integer");
  return j.get<int>();
}

bool boolean(const Json& j, const std::string& ctx) {
  if (!j.is_boolean()) detail::format_error(ctx, "expected true or false");
  return j.get<bool>();
}

void apply_overrides(LMConfig& c, const Json& j) {
  const std::string ctx = "config.lm";
  detail::require_object(j, ctx);
  for (const auto& [key, v] : j.items()) {
    const std::string k = ctx + "." + key;
    if (key == "samples_per_step") c.samples_per_step = integer(v, k);
    else if (key == "spp") c.spp = integer(v, k);
    else if (key == "eps") c.eps = detail::number(v, k);
    else if (key == "lambda0") c.lambda0 = detail::number(v, k);
    else if (key == "lambda_up") c.lambda_up = detail::number(v, k);
    else if (key == "lambda_down") c.lambda_down = detail::number(v, k);
    else if (key == "max_steps") c.max_steps = integer(v, k);
    else if (key == "handle_count0") c.handle_count0 = integer(v, k);
    else if (key == "init_length") c.init_length = detail::number(v, k);
    else if (key == "h_max") c.h_max = detail::number(v, k);
    else if (key == "update_positions") c.update_positions = boolean(v, k);
    else if (key == "length_enabled") c.length_enabled = boolean(v, k);
    else if (key == "length_threshold") c.length_threshold = detail::number(v, k);
    else if (key == "length_kappa") c.length_kappa = detail::number(v, k);
    else if (key == "snapping_enabled") c.snapping_enabled = boolean(v, k);
    else if (key == "snap_distance") c.snap_distance = detail::number(v, k);
    else if (key == "snap_dir_weight") c.snap_dir_weight = detail::number(v, k);
    else if (key == "snap_kappa") c.snap_kappa = detail::number(v, k);
    else if (key == "sparsity_enabled") c.sparsity_enabled = boolean(v, k);
    else if (key == "lambda_w_d") c.lambda_w_d = detail::number(v, k);
    else if (key == "lambda_w_c") c.lambda_w_c = detail::number(v, k);
    else if (key == "sparsity_t") c.sparsity_t = detail::number(v, k);
    else if (key == "sparsity_eps") c.sparsity_eps = detail::number(v, k);
    else if (key == "prune_threshold") c.prune_threshold = detail::number(v, k);
    else if (key == "mean_color_rule") {
      if (!v.is_string()) detail::format_error(k, "expected \"residual\" or \"sample_mean\"");
      const auto rule = v.get<std::string>();
      if (rule == "residual") c.mean_color_rule = MeanColorRule::residual;
      else if (rule == "sample_mean") c.mean_color_rule = MeanColorRule::sample_mean;
      else detail::format_error(k, "expected \"residual\" or \"sample_mean\"");
    } else {
      detail::format_error(ctx, "unknown field '" + key + "'");
    }
  }
}

}  // namespace

Profile parse_profile(const std::string& name) {
  if (name == "test") return Profile::test;
  if (name == "paper") return Profile::paper;
  throw std::invalid_argument("unknown profile '" + name + "' (expected test or paper)");
}

std::string to_string(Profile profile) { return profile == Profile::test ? "test" : "paper"; }

LMConfig profile_defaults(Profile profile) {
  LMConfig c;
  if (profile == Profile::test) {
    c.samples_per_step = 20000;
    c.spp = 32;
    c.handle_count0 = 64;
  }
  return c;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::string& profile_override) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  const std::string ctx = "config";
  detail::check_header(root, "bemdc-config", ctx);
  detail::check_keys(root,
                     {"format", "version", "scene", "oracle", "profile", "seed", "lm", "snapshot_every",
                      "snapshot_steps", "rmse_every", "rmse_resolution"},
                     ctx);
  RunConfig rc;
  const Json& scene = detail::field(root, "scene", ctx);
  if (!scene.is_string()) detail::format_error(ctx + ".scene", "expected a path");
  rc.scene = scene.get<std::string>();
  if (rc.scene.is_relative() && !base_dir.empty()) rc.scene = base_dir / rc.scene;

  if (root.contains("oracle")) {
    const Json& o = root["oracle"];
    const std::string name = o.is_string() ? o.get<std::string>() : "";
    if (name == "scene") rc.oracle = OracleKind::scene;
    else if (name == "noise_free") rc.oracle = OracleKind::noise_free;
    else detail::format_error(ctx + ".oracle", "expected \"scene\" or \"noise_free\"");
  }
  if (!profile_override.empty()) {
    rc.profile = parse_profile(profile_override);
  } else if (root.contains("profile")) {
    if (!root["profile"].is_string()) detail::format_error(ctx + ".profile", "expected \"test\" or \"paper\"");
    rc.profile = parse_profile(root["profile"].get<std::string>());
  }
  rc.lm = profile_defaults(rc.profile);
  if (rc.profile == Profile::paper) {
    rc.snapshot_every = 0;
    rc.snapshot_steps = {1, 25, 50, 100};
  }
  if (root.contains("lm")) apply_overrides(rc.lm, root["lm"]);
  if (root.contains("seed")) {
    const Json& s = root["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      detail::format_error(ctx + ".seed", "expected a non-negative integer");
    rc.seed = s.get<std::uint64_t>();
  }
  if (root.contains("snapshot_every")) rc.snapshot_every = integer(root["snapshot_every"], ctx + ".snapshot_every");
  if (root.contains("snapshot_steps")) {
    const Json& s = root["snapshot_steps"];
    if (!s.is_array()) detail::format_error(ctx + ".snapshot_steps", "expected an array of integers");
    rc.snapshot_steps.clear();
    for (const auto& v : s) rc.snapshot_steps.push_back(integer(v, ctx + ".snapshot_steps"));
  }
  if (root.contains("rmse_every")) rc.rmse_every = integer(root["rmse_every"], ctx + ".rmse_every");
  if (root.contains("rmse_resolution"))
    rc.rmse_resolution = integer(root["rmse_resolution"], ctx + ".rmse_resolution");
  if (rc.snapshot_every < 0 || rc.rmse_every < 0 || rc.rmse_resolution < 1)
    detail::format_error(ctx, "snapshot_every and rmse_every must be >= 0, rmse_resolution >= 1");
  validate(rc.lm);
  return rc;
}

RunConfig read_run_config(const std::filesystem::path& path, const std::string& profile_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str(), path.parent_path(), profile_override);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void apply_lm_overrides(LMConfig& config, const std::string& json_object_text) {
  Json j;
  try {
    j = Json::parse(json_object_text);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("lm overrides: ") + e.what());
  }
  apply_overrides(config, j);
}

}  // namespace bemdc
