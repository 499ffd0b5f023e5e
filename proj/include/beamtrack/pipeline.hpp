#pragma once

#include <chrono>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "beamtrack/beamformer.hpp"
#include "beamtrack/config.hpp"
#include "beamtrack/errors.hpp"
#include "beamtrack/spectral.hpp"
#include "beamtrack/tracker.hpp"
#include "beamtrack/wav.hpp"

namespace beamtrack {

struct TrajectoryRecord {
  double t = 0.0;
  int source_id = 0;
  double azimuth_deg = 0.0;    // (-180, 180]
  double elevation_deg = 0.0;  // [-90, 90]
  double existence = 0.0;
  double activity = 0.0;
  bool observed = false;
};

struct BeamformerDiagnostic {
  double t = 0.0;
  int rank = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double energy = 0.0;
  double confidence = 0.0;
};

inline std::string trajectory_csv(const std::vector<TrajectoryRecord>& recs) {
  std::string out = "time_s,source_id,azimuth_deg,elevation_deg,existence,activity,observed\n";
  char line[160];
  for (const auto& r : recs) {
    std::snprintf(line, sizeof(line), "%.6f,%d,%.3f,%.3f,%.4f,%.4f,%d\n", r.t,
                  r.source_id, r.azimuth_deg, r.elevation_deg, r.existence,
                  r.activity, r.observed ? 1 : 0);
    out += line;
  }
  return out;
}

inline std::vector<TrajectoryRecord> parse_trajectory_csv(std::istream& in) {
  std::vector<TrajectoryRecord> recs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("time_s") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    TrajectoryRecord r;
    int observed = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%lf,%lf,%lf,%lf,%d", &r.t,
                    &r.source_id, &r.azimuth_deg, &r.elevation_deg,
                    &r.existence, &r.activity, &observed) < 4) {
      throw io_error("trajectory csv: malformed line '" + line + "'");
    }
    r.observed = observed != 0;
    recs.push_back(r);
  }
  return recs;
}

inline std::vector<TrajectoryRecord> read_trajectory_csv(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "'");
  return parse_trajectory_csv(f);
}

inline std::string ground_truth_csv(const std::vector<GroundTruthEntry>& gt) {
  std::string out = "time_s,source_id,azimuth_deg,elevation_deg,active\n";
  char line[128];
  for (const auto& e : gt) {
    std::snprintf(line, sizeof(line), "%.6f,%d,%.3f,%.3f,%d\n", e.t,
                  e.source_id, azimuth_deg(e.direction),
                  elevation_deg(e.direction), e.active ? 1 : 0);
    out += line;
  }
  return out;
}

struct GroundTruthRecord {
  double t = 0.0;
  int source_id = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  bool active = false;
};

inline std::vector<GroundTruthRecord> parse_ground_truth_csv(
    std::istream& in) {
  std::vector<GroundTruthRecord> recs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("time_s") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    GroundTruthRecord r;
    int active = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%lf,%lf,%d", &r.t, &r.source_id,
                    &r.azimuth_deg, &r.elevation_deg, &active) != 5) {
      throw io_error("ground truth csv: malformed line '" + line + "'");
    }
    r.active = active != 0;
    recs.push_back(r);
  }
  return recs;
}

inline std::vector<GroundTruthRecord> read_ground_truth_csv(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "'");
  return parse_ground_truth_csv(f);
}

struct TrackResult {
  std::vector<TrajectoryRecord> records;
  std::vector<BeamformerDiagnostic> diagnostics;
  int updates = 0;
  double duration_s = 0.0;
  double realtime_factor = 0.0;  // audio seconds per wall second
};

/// Offline pipeline: frames -> weighted cross-correlations -> grid search ->
/// particle tracking. One trajectory record per confirmed source per update;
/// with a delay configured, records carry the lagged timestamp and the
/// delayed position estimate.
inline TrackResult run_tracking(const WavData& wav,
                                const ArrayGeometry& geometry,
                                const PipelineConfig& cfg) {
  if (wav.channel_count() != geometry.mic_count()) {
    throw std::invalid_argument(
        "track: WAV channel count does not match the geometry");
  }
  if (std::abs(wav.sample_rate - geometry.sample_rate) > 1e-6) {
    throw std::invalid_argument(
        "track: unsupported sample rate (resampling is out of scope)");
  }
  PipelineConfig run_cfg = cfg;
  run_cfg.frontend.stft.sample_rate = geometry.sample_rate;
  run_cfg.tracker.delay_updates = cfg.delay_updates;
  run_cfg.tracker.nominal_dt = run_cfg.frontend.stft.update_period();
  run_cfg.validate();

  const auto t_start = std::chrono::steady_clock::now();

  SphericalGrid grid = build_icosahedral_grid(run_cfg.grid_level);
  TdoaLookup lookup = build_tdoa_lookup(geometry, grid);
  SpectralFrontend frontend(geometry.mic_count(), run_cfg.frontend);
  SourceTracker tracker(run_cfg.tracker);

  TrackResult result;
  const int delay = run_cfg.delay_updates;
  std::deque<double> update_times;  // newest first

  auto emit = [&](double t_out, int d) {
    for (const auto& src : tracker.sources()) {
      if (!src.confirmed) continue;
      Vec3 dir = d == 0 ? src.estimate : tracker.delayed_estimate(src, d);
      result.records.push_back({t_out, src.id, azimuth_deg(dir),
                                elevation_deg(dir), src.existence,
                                src.activity,
                                src.observed_prob >=
                                    run_cfg.tracker.observed_threshold});
    }
  };

  const std::size_t chunk_frames = 4096;
  std::vector<std::vector<double>> chunk(wav.channel_count());
  CrossCorrelationSet corr;
  for (std::size_t pos = 0; pos < wav.frames(); pos += chunk_frames) {
    std::size_t n = std::min(chunk_frames, wav.frames() - pos);
    for (int c = 0; c < wav.channel_count(); ++c) {
      chunk[c].assign(wav.channels[c].begin() + static_cast<long>(pos),
                      wav.channels[c].begin() + static_cast<long>(pos + n));
    }
    frontend.push(chunk);
    while (frontend.pop(corr)) {
      LocalizeResult loc =
          localize_multiple(corr, lookup, grid, geometry, run_cfg.beamformer);
      for (const auto& ps : loc.observation.sources) {
        result.diagnostics.push_back({corr.timestamp, ps.rank,
                                      azimuth_deg(ps.direction),
                                      elevation_deg(ps.direction), ps.energy,
                                      ps.confidence});
      }
      tracker.update(loc.observation);
      result.updates += 1;
      update_times.push_front(corr.timestamp);
      if (static_cast<int>(update_times.size()) > delay + 1) {
        update_times.pop_back();
      }
      if (delay == 0) {
        emit(corr.timestamp, 0);
      } else if (static_cast<int>(update_times.size()) > delay) {
        emit(update_times.back(), delay);
      }
    }
  }
  // Flush the delayed estimates that are still pending at end of stream.
  if (delay > 0 && !update_times.empty()) {
    int newest = static_cast<int>(update_times.size()) - 1;
    for (int d = std::min(delay - 1, newest); d >= 0; --d) {
      emit(update_times[static_cast<std::size_t>(d)], d);
    }
  }

  result.duration_s = wav.frames() / wav.sample_rate;
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  result.realtime_factor = wall > 0.0 ? result.duration_s / wall : 0.0;
  return result;
}

inline std::string diagnostics_csv(
    const std::vector<BeamformerDiagnostic>& rows) {
  std::string out = "time_s,rank,azimuth_deg,elevation_deg,energy,confidence\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%.6f,%d,%.3f,%.3f,%.3f,%.4f\n", r.t,
                  r.rank, r.azimuth_deg, r.elevation_deg, r.energy,
                  r.confidence);
    out += line;
  }
  return out;
}

}  // namespace beamtrack
