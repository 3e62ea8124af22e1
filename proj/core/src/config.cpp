#include "geofill/config.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "geofill/error.hpp"
#include "geofill/io.hpp"
#include "json.hpp"

namespace geofill {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw PreconditionError("config: \"" + key + "\" " + why);
}

double as_double(const Json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "must be a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_key(key, "must be an integer");
  const auto i = v.get<long long>();
  if (i < INT32_MIN || i > INT32_MAX) bad_key(key, "is out of range");
  return static_cast<int>(i);
}

bool as_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) bad_key(key, "must be true or false");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "must be a string");
  return v.get<std::string>();
}

template <std::size_t N>
std::optional<std::array<double, N>> as_optional_array(const Json& v, const std::string& key) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_array() || v.size() != N) bad_key(key, "must be null or an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = as_double(v[i], key);
  return out;
}

template <std::size_t N>
Json optional_array_json(const std::optional<std::array<double, N>>& a) {
  if (!a) return nullptr;
  Json j = Json::array();
  for (double d : *a) j.push_back(d);
  return j;
}

}  // namespace

OptimizeSet parse_optimize_set(const std::string& name) {
  if (name == "all") return OptimizeSet::kAll;
  if (name == "pose") return OptimizeSet::kPose;
  if (name == "depth") return OptimizeSet::kDepth;
  throw PreconditionError("unknown optimize set \"" + name + "\" (expected all, pose, depth)");
}

std::string to_string(OptimizeSet set) {
  switch (set) {
    case OptimizeSet::kAll: return "all";
    case OptimizeSet::kPose: return "pose";
    case OptimizeSet::kDepth: return "depth";
  }
  return "all";
}

ParamMask param_mask(OptimizeSet set) {
  switch (set) {
    case OptimizeSet::kPose: return kPoseParams;
    case OptimizeSet::kDepth: return kDepthParams;
    case OptimizeSet::kAll: break;
  }
  return kAllParams;
}

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) bad_key(key, "must be a positive finite number");
  };
  auto non_negative = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad_key(key, "must be a non-negative finite number");
  };
  non_negative(lambda_photo, "lambda_photo");
  non_negative(lambda_feat, "lambda_feat");
  non_negative(lambda_negd, "lambda_negd");
  positive(learning_rate, "learning_rate");
  if (pyramid_levels < 1) bad_key("pyramid_levels", "must be >= 1");
  try {
    schedule().validate();
  } catch (const PreconditionError& e) {
    bad_key("level_caps", std::string("invalid: ") + e.what());
  }
  non_negative(eps_opt, "eps_opt");
  positive(sigma_hole, "sigma_hole");
  if (edge_scales < 1) bad_key("edge_scales", "must be >= 1");
  if (edge_dilation < 1) bad_key("edge_dilation", "must be >= 1");
  positive(focal, "focal");
  if (principal_point) {
    for (double c : *principal_point) {
      if (!std::isfinite(c)) bad_key("principal_point", "must be finite");
    }
  }
  non_negative(eps_edge, "eps_edge");
  if (!std::isfinite(robust_alpha) || robust_alpha == 0.0 || robust_alpha == 2.0) {
    bad_key("robust_alpha", "must be finite and differ from 0 and 2");
  }
  positive(robust_scale, "robust_scale");
  positive(ransac_threshold, "ransac_threshold");
  if (ransac_max_iters < 1) bad_key("ransac_max_iters", "must be >= 1");
  if (!(ransac_confidence > 0.0 && ransac_confidence < 1.0)) bad_key("ransac_confidence", "must be in (0, 1)");
  non_negative(feather_radius, "feather_radius");
  if (fallback_color) {
    for (double c : *fallback_color) {
      if (!(c >= 0.0 && c <= 1.0)) bad_key("fallback_color", "components must be in [0, 1]");
    }
  }
  if (!(degraded_fallback_fraction >= 0.0 && degraded_fallback_fraction <= 1.0)) {
    bad_key("degraded_fallback_fraction", "must be in [0, 1]");
  }
}

CameraIntrinsics PipelineConfig::intrinsics(int width, int height) const {
  CameraIntrinsics k = CameraIntrinsics::centered(width, height, focal);
  if (principal_point) {
    k.cx = (*principal_point)[0];
    k.cy = (*principal_point)[1];
  }
  k.validate(width, height);
  return k;
}

ObjectiveOptions PipelineConfig::objective_options() const {
  ObjectiveOptions o;
  o.lambda = {lambda_photo, lambda_feat, lambda_negd};
  o.robust_alpha = robust_alpha;
  o.robust_scale = robust_scale;
  o.levels = pyramid_levels;
  o.feature_weighting = feature_weighting;
  return o;
}

WeightOptions PipelineConfig::weight_options() const {
  return {sigma_hole, edge_scales, edge_dilation, use_hole_weight, use_edge_weight};
}

Schedule PipelineConfig::schedule() const {
  Schedule s;
  s.levels = pyramid_levels;
  s.level_caps = level_caps;
  s.learning_rate = learning_rate;
  s.eps_opt = eps_opt;
  s.history_length = history_length;
  return s;
}

RansacConfig PipelineConfig::ransac() const {
  return {ransac_threshold, ransac_max_iters, ransac_confidence, seed};
}

CompositeConfig PipelineConfig::composite() const { return {feather_radius, color_correction}; }

void PipelineConfig::set_max_iters(int max_iters) {
  level_caps = Schedule::default_caps(pyramid_levels, max_iters);
}

PipelineConfig config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be an object");

  PipelineConfig c;
  using Setter = std::function<void(const Json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"lambda_photo", [&](const Json& v, const std::string& k) { c.lambda_photo = as_double(v, k); }},
      {"lambda_feat", [&](const Json& v, const std::string& k) { c.lambda_feat = as_double(v, k); }},
      {"lambda_negd", [&](const Json& v, const std::string& k) { c.lambda_negd = as_double(v, k); }},
      {"learning_rate", [&](const Json& v, const std::string& k) { c.learning_rate = as_double(v, k); }},
      {"level_caps",
       [&](const Json& v, const std::string& k) {
         if (!v.is_array()) bad_key(k, "must be an array of integers");
         c.level_caps.clear();
         for (const auto& e : v) c.level_caps.push_back(as_int(e, k));
       }},
      {"pyramid_levels", [&](const Json& v, const std::string& k) { c.pyramid_levels = as_int(v, k); }},
      {"eps_opt", [&](const Json& v, const std::string& k) { c.eps_opt = as_double(v, k); }},
      {"history_length", [&](const Json& v, const std::string& k) { c.history_length = as_int(v, k); }},
      {"optimize",
       [&](const Json& v, const std::string& k) { c.optimize = parse_optimize_set(as_string(v, k)); }},
      {"sigma_hole", [&](const Json& v, const std::string& k) { c.sigma_hole = as_double(v, k); }},
      {"edge_scales", [&](const Json& v, const std::string& k) { c.edge_scales = as_int(v, k); }},
      {"edge_dilation", [&](const Json& v, const std::string& k) { c.edge_dilation = as_int(v, k); }},
      {"use_hole_weight", [&](const Json& v, const std::string& k) { c.use_hole_weight = as_bool(v, k); }},
      {"use_edge_weight", [&](const Json& v, const std::string& k) { c.use_edge_weight = as_bool(v, k); }},
      {"feature_weighting",
       [&](const Json& v, const std::string& k) {
         c.feature_weighting = parse_feature_weighting(as_string(v, k));
       }},
      {"focal", [&](const Json& v, const std::string& k) { c.focal = as_double(v, k); }},
      {"principal_point",
       [&](const Json& v, const std::string& k) { c.principal_point = as_optional_array<2>(v, k); }},
      {"eps_edge", [&](const Json& v, const std::string& k) { c.eps_edge = as_double(v, k); }},
      {"robust_alpha", [&](const Json& v, const std::string& k) { c.robust_alpha = as_double(v, k); }},
      {"robust_scale", [&](const Json& v, const std::string& k) { c.robust_scale = as_double(v, k); }},
      {"ransac_threshold", [&](const Json& v, const std::string& k) { c.ransac_threshold = as_double(v, k); }},
      {"ransac_max_iters", [&](const Json& v, const std::string& k) { c.ransac_max_iters = as_int(v, k); }},
      {"ransac_confidence",
       [&](const Json& v, const std::string& k) { c.ransac_confidence = as_double(v, k); }},
      {"seed",
       [&](const Json& v, const std::string& k) {
         if (!v.is_number_unsigned()) bad_key(k, "must be a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"feather_radius", [&](const Json& v, const std::string& k) { c.feather_radius = as_double(v, k); }},
      {"color_correction",
       [&](const Json& v, const std::string& k) {
         c.color_correction = parse_color_correction(as_string(v, k));
       }},
      {"fallback_color",
       [&](const Json& v, const std::string& k) { c.fallback_color = as_optional_array<3>(v, k); }},
      {"degraded_fallback_fraction",
       [&](const Json& v, const std::string& k) { c.degraded_fallback_fraction = as_double(v, k); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw PreconditionError("config: unknown key \"" + key + "\"");
    it->second(value, key);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) { return config_from_json(read_text_file(path)); }

std::string config_to_json(const PipelineConfig& c) {
  Json j;
  j["lambda_photo"] = c.lambda_photo;
  j["lambda_feat"] = c.lambda_feat;
  j["lambda_negd"] = c.lambda_negd;
  j["learning_rate"] = c.learning_rate;
  j["level_caps"] = c.level_caps;
  j["pyramid_levels"] = c.pyramid_levels;
  j["eps_opt"] = c.eps_opt;
  j["history_length"] = c.history_length;
  j["optimize"] = to_string(c.optimize);
  j["sigma_hole"] = c.sigma_hole;
  j["edge_scales"] = c.edge_scales;
  j["edge_dilation"] = c.edge_dilation;
  j["use_hole_weight"] = c.use_hole_weight;
  j["use_edge_weight"] = c.use_edge_weight;
  j["feature_weighting"] = to_string(c.feature_weighting);
  j["focal"] = c.focal;
  j["principal_point"] = optional_array_json(c.principal_point);
  j["eps_edge"] = c.eps_edge;
  j["robust_alpha"] = c.robust_alpha;
  j["robust_scale"] = c.robust_scale;
  j["ransac_threshold"] = c.ransac_threshold;
  j["ransac_max_iters"] = c.ransac_max_iters;
  j["ransac_confidence"] = c.ransac_confidence;
  j["seed"] = c.seed;
  j["feather_radius"] = c.feather_radius;
  j["color_correction"] = to_string(c.color_correction);
  j["fallback_color"] = optional_array_json(c.fallback_color);
  j["degraded_fallback_fraction"] = c.degraded_fallback_fraction;
  return j.dump(2) + "\n";
}

}  // namespace geofill
