#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamtrack/beamformer.hpp"
#include "beamtrack/errors.hpp"
#include "beamtrack/geometry.hpp"
#include "beamtrack/simulator.hpp"
#include "beamtrack/spectral.hpp"
#include "beamtrack/tracker.hpp"

namespace beamtrack {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw io_error("'" + path + "': " + e.what());
  }
}

namespace detail {

template <typename T>
T field(const json& j, const std::string& context, const std::string& key,
        T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for field '" + context +
                                key + "'");
  }
}

}  // namespace detail

/// Geometry schema: {"mics": [[x,y,z], ...], "speed_of_sound": 343,
/// "sample_rate": 48000}. Positions are meters in an array-centered frame.
inline ArrayGeometry geometry_from_json(const json& j) {
  if (!j.contains("mics") || !j.at("mics").is_array()) {
    throw std::invalid_argument("geometry: missing 'mics' array");
  }
  std::vector<Vec3> mics;
  for (const auto& m : j.at("mics")) {
    if (!m.is_array() || m.size() != 3) {
      throw std::invalid_argument(
          "geometry: each entry of 'mics' must be [x, y, z]");
    }
    mics.push_back(
        {m[0].get<double>(), m[1].get<double>(), m[2].get<double>()});
  }
  ArrayGeometry g(std::move(mics),
                  detail::field<double>(j, "", "speed_of_sound", 343.0),
                  detail::field<double>(j, "", "sample_rate", 48000.0));
  return g;
}

inline ArrayGeometry load_geometry(const std::string& path) {
  return geometry_from_json(load_json_file(path));
}

/// Scene schema: duration, seed, noise_level, optional reverb
/// ({"rt60": s} or {"decay_per_second": d}, "wet_level", "density"),
/// sources: [{kind, level, tone_hz, trajectory: [{t, azimuth_deg,
/// elevation_deg, distance_m}], on: [[t0, t1], ...]}].
inline SceneSpec scene_from_json(const json& j) {
  SceneSpec spec;
  spec.duration = detail::field<double>(j, "", "duration", 1.0);
  spec.noise_level = detail::field<double>(j, "", "noise_level", 0.0);
  spec.seed = detail::field<std::uint64_t>(j, "", "seed", 1);
  spec.gt_interval =
      detail::field<double>(j, "", "gt_interval", 2048.0 / 48000.0);

  if (j.contains("reverb") && !j.at("reverb").is_null()) {
    const json& r = j.at("reverb");
    ReverbSpec rv;
    if (r.contains("rt60")) {
      rv.decay_per_second =
          ReverbSpec::decay_from_rt60(r.at("rt60").get<double>());
    } else {
      rv.decay_per_second = detail::field<double>(r, "reverb.",
                                                  "decay_per_second", 19.7);
    }
    rv.wet_level = detail::field<double>(r, "reverb.", "wet_level", 0.3);
    rv.density = detail::field<double>(r, "reverb.", "density", 500.0);
    spec.reverb = rv;
  }

  if (!j.contains("sources") || !j.at("sources").is_array()) {
    throw std::invalid_argument("scene: missing 'sources' array");
  }
  for (const auto& s : j.at("sources")) {
    SourceScript script;
    script.kind = signal_kind_from_string(
        detail::field<std::string>(s, "sources[].", "kind", "speech"));
    script.level = detail::field<double>(s, "sources[].", "level", 1.0);
    script.tone_hz = detail::field<double>(s, "sources[].", "tone_hz", 1000.0);
    if (!s.contains("trajectory") || !s.at("trajectory").is_array() ||
        s.at("trajectory").empty()) {
      throw std::invalid_argument(
          "scene: each source needs a non-empty 'trajectory'");
    }
    for (const auto& k : s.at("trajectory")) {
      TrajectoryKeypoint kp;
      kp.t = detail::field<double>(k, "trajectory[].", "t", 0.0);
      double az = detail::field<double>(k, "trajectory[].", "azimuth_deg", 0.0);
      double el =
          detail::field<double>(k, "trajectory[].", "elevation_deg", 0.0);
      kp.direction = direction_from_angles_deg(az, el);
      kp.distance_m =
          detail::field<double>(k, "trajectory[].", "distance_m", 2.0);
      script.trajectory.push_back(kp);
    }
    if (s.contains("on")) {
      for (const auto& iv : s.at("on")) {
        if (!iv.is_array() || iv.size() != 2) {
          throw std::invalid_argument(
              "scene: 'on' entries must be [start, end]");
        }
        script.on_intervals.emplace_back(iv[0].get<double>(),
                                         iv[1].get<double>());
      }
    }
    spec.sources.push_back(std::move(script));
  }
  spec.validate();
  return spec;
}

inline SceneSpec load_scene(const std::string& path) {
  return scene_from_json(load_json_file(path));
}

/// Everything the offline pipeline needs: where the geometry lives, the
/// analysis settings and every tracker constant, all overridable from one
/// JSON document plus --set key=value switches.
struct PipelineConfig {
  std::string geometry_path;
  int grid_level = 4;
  FrontendConfig frontend;
  BeamformerConfig beamformer;
  TrackerConfig tracker;
  int delay_updates = 0;  // delayed estimation lag (updates)

  void validate() const {
    frontend.validate();
    if (grid_level < 0 || grid_level > 8) {
      throw std::invalid_argument("config: grid_level out of range");
    }
    if (delay_updates < 0) {
      throw std::invalid_argument("config: delay_updates must be >= 0");
    }
  }
};

inline PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig cfg;
  cfg.geometry_path = detail::field<std::string>(j, "", "geometry", "");
  cfg.grid_level = detail::field<int>(j, "", "grid_level", 4);

  if (j.contains("stft")) {
    const json& s = j.at("stft");
    cfg.frontend.stft.frame_length =
        detail::field<int>(s, "stft.", "frame_length", 1024);
    cfg.frontend.stft.hop =
        detail::field<int>(s, "stft.", "hop",
                           cfg.frontend.stft.frame_length / 2);
    cfg.frontend.stft.frames_per_update =
        detail::field<int>(s, "stft.", "frames_per_update", 4);
  }
  if (j.contains("frontend")) {
    const json& s = j.at("frontend");
    auto& f = cfg.frontend;
    f.alpha_d = detail::field<double>(s, "frontend.", "alpha_d", f.alpha_d);
    f.gamma = detail::field<double>(s, "frontend.", "gamma", f.gamma);
    f.delta = detail::field<double>(s, "frontend.", "delta", f.delta);
    f.mag_floor =
        detail::field<double>(s, "frontend.", "mag_floor", f.mag_floor);
    f.whiten = detail::field<bool>(s, "frontend.", "whiten", f.whiten);
    f.snr_weight =
        detail::field<bool>(s, "frontend.", "snr_weight", f.snr_weight);
    f.noise_smooth =
        detail::field<double>(s, "frontend.", "noise_smooth", f.noise_smooth);
    f.noise_gate =
        detail::field<double>(s, "frontend.", "noise_gate", f.noise_gate);
    f.noise_window_s = detail::field<double>(s, "frontend.", "noise_window_s",
                                             f.noise_window_s);
    f.noise_adapt =
        detail::field<double>(s, "frontend.", "noise_adapt", f.noise_adapt);
  }
  if (j.contains("beamformer")) {
    const json& s = j.at("beamformer");
    auto& b = cfg.beamformer;
    b.energy_threshold = detail::field<double>(s, "beamformer.",
                                               "energy_threshold",
                                               b.energy_threshold);
    b.refine = detail::field<bool>(s, "beamformer.", "refine", b.refine);
    b.refine_ranks =
        detail::field<int>(s, "beamformer.", "refine_ranks", b.refine_ranks);
    b.coarse_radius_deg = detail::field<double>(
        s, "beamformer.", "coarse_radius_deg", b.coarse_radius_deg);
  }
  if (j.contains("tracker")) {
    const json& s = j.at("tracker");
    auto& t = cfg.tracker;
    t.particles_per_source =
        detail::field<int>(s, "tracker.", "particles", t.particles_per_source);
    t.obs_sigma = detail::field<double>(s, "tracker.", "obs_sigma", t.obs_sigma);
    t.init_sigma =
        detail::field<double>(s, "tracker.", "init_sigma", t.init_sigma);
    t.p_not_observed = detail::field<double>(s, "tracker.", "p_not_observed",
                                             t.p_not_observed);
    t.p_active_stay = detail::field<double>(s, "tracker.", "p_active_stay",
                                            t.p_active_stay);
    t.p_active_gain = detail::field<double>(s, "tracker.", "p_active_gain",
                                            t.p_active_gain);
    t.p_new = detail::field<double>(s, "tracker.", "p_new", t.p_new);
    t.p_false = detail::field<double>(s, "tracker.", "p_false", t.p_false);
    t.new_source_threshold = detail::field<double>(
        s, "tracker.", "new_source_threshold", t.new_source_threshold);
    t.confirm_threshold = detail::field<double>(
        s, "tracker.", "confirm_threshold", t.confirm_threshold);
    t.observed_threshold = detail::field<double>(
        s, "tracker.", "observed_threshold", t.observed_threshold);
    t.removal_horizon_s = detail::field<double>(
        s, "tracker.", "removal_horizon_s", t.removal_horizon_s);
    t.duplicate_cone_deg = detail::field<double>(
        s, "tracker.", "duplicate_cone_deg", t.duplicate_cone_deg);
    t.resample_fraction = detail::field<double>(
        s, "tracker.", "resample_fraction", t.resample_fraction);
    t.max_sources =
        detail::field<int>(s, "tracker.", "max_sources", t.max_sources);
    t.seed = detail::field<std::uint64_t>(s, "tracker.", "seed", t.seed);
  }
  cfg.delay_updates = detail::field<int>(j, "", "delay_updates", 0);
  cfg.validate();
  return cfg;
}

/// Applies "section.key=value" overrides onto the raw JSON document.
/// Values parse as JSON when possible, otherwise as strings.
inline json apply_overrides(json doc, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    }
    std::string key = s.substr(0, eq);
    std::string val = s.substr(eq + 1);
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    json parsed;
    try {
      parsed = json::parse(val);
    } catch (const json::parse_error&) {
      parsed = val;
    }
    doc[json::json_pointer(pointer)] = parsed;
  }
  return doc;
}

inline PipelineConfig load_pipeline_config(
    const std::string& path, const std::vector<std::string>& sets = {}) {
  json doc = path.empty() ? json::object() : load_json_file(path);
  return pipeline_config_from_json(apply_overrides(std::move(doc), sets));
}

}  // namespace beamtrack
