// beamtrack command line: synthesize array recordings, localize and track
// sources in multichannel WAV files, and score trajectories against ground
// truth.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamtrack/config.hpp"
#include "beamtrack/evaluate.hpp"
#include "beamtrack/pipeline.hpp"
#include "beamtrack/simulator.hpp"
#include "beamtrack/tracker.hpp"
#include "beamtrack/wav.hpp"

namespace {

using namespace beamtrack;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw io_error("short write to '" + path + "'");
}

std::vector<int> parse_mic_selection(const std::string& spec) {
  // 1-based, e.g. "1-4" or "1,2,5,7".
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t comma = spec.find(',', pos);
    std::string tok = spec.substr(pos, comma == std::string::npos
                                           ? std::string::npos
                                           : comma - pos);
    std::size_t dash = tok.find('-');
    if (dash != std::string::npos) {
      int a = std::stoi(tok.substr(0, dash));
      int b = std::stoi(tok.substr(dash + 1));
      for (int k = a; k <= b; ++k) out.push_back(k - 1);
    } else if (!tok.empty()) {
      out.push_back(std::stoi(tok) - 1);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("--mics: empty selection");
  return out;
}

int cmd_simulate(const std::string& scene_path, const std::string& geom_path,
                 const std::string& out_wav, const std::string& out_truth,
                 const std::string& format) {
  SceneSpec spec = load_scene(scene_path);
  ArrayGeometry geometry = load_geometry(geom_path);
  RenderedScene scene = render_scene(spec, geometry);

  WavData wav;
  wav.sample_rate = scene.sample_rate;
  wav.channels = std::move(scene.channels);
  write_wav(out_wav, wav,
            format == "pcm16" ? WavFormat::pcm16 : WavFormat::float32);
  if (!out_truth.empty()) {
    write_text_file(out_truth, ground_truth_csv(scene.ground_truth));
  }
  std::cout << "wrote " << wav.channel_count() << "x" << wav.frames()
            << " samples to " << out_wav << "\n";
  return 0;
}

int cmd_track(const std::string& wav_path, const std::string& geom_path,
              const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& out,
              const std::string& diag, const std::string& mics,
              double delay_ms) {
  PipelineConfig cfg = load_pipeline_config(config_path, sets);
  std::string geometry_file =
      !geom_path.empty() ? geom_path : cfg.geometry_path;
  if (geometry_file.empty()) {
    throw std::invalid_argument(
        "track: no geometry given (use --geometry or the config)");
  }
  ArrayGeometry geometry = load_geometry(geometry_file);
  WavData wav = read_wav(wav_path);

  if (!mics.empty()) {
    std::vector<int> sel = parse_mic_selection(mics);
    geometry = geometry.subset(sel);
    std::vector<std::vector<double>> chans;
    for (int idx : sel) {
      if (idx < 0 || idx >= wav.channel_count()) {
        throw std::invalid_argument("--mics: channel index out of range");
      }
      chans.push_back(std::move(wav.channels[idx]));
    }
    wav.channels = std::move(chans);
  }
  if (delay_ms > 0.0) {
    cfg.delay_updates = static_cast<int>(
        std::lround(delay_ms / 1000.0 / cfg.frontend.stft.update_period()));
  }

  TrackResult result = run_tracking(wav, geometry, cfg);
  std::string csv = trajectory_csv(result.records);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(out, csv);
  }
  if (!diag.empty()) {
    write_text_file(diag, diagnostics_csv(result.diagnostics));
  }
  std::cerr << "processed " << result.duration_s << " s in " << result.updates
            << " updates, realtime factor " << result.realtime_factor << "\n";
  return 0;
}

int cmd_evaluate(const std::string& tracks_path, const std::string& truth_path,
                 double match_deg, bool as_json) {
  auto tracks = read_trajectory_csv(tracks_path);
  auto truth = read_ground_truth_csv(truth_path);
  EvalOptions opt;
  opt.match_deg = match_deg;
  EvalReport rep = evaluate_tracks(truth, tracks, opt);

  if (as_json) {
    json j;
    j["empty"] = rep.empty;
    j["active_updates"] = rep.active_updates;
    j["matched_updates"] = rep.matched_updates;
    j["detection_rate"] = rep.detection_rate;
    j["azimuth_rms_deg"] = rep.az_rms;
    j["elevation_rms_deg"] = rep.el_rms;
    j["false_tracks"] = rep.false_tracks;
    j["id_switches"] = rep.id_switches;
    j["reliably_tracked"] = rep.reliably_tracked;
    j["per_source"] = json::array();
    for (const auto& s : rep.per_source) {
      j["per_source"].push_back({{"gt_id", s.gt_id},
                                 {"active_updates", s.active_updates},
                                 {"matched_updates", s.matched_updates},
                                 {"detection_rate", s.detection_rate},
                                 {"azimuth_rms_deg", s.az_rms},
                                 {"elevation_rms_deg", s.el_rms},
                                 {"mean_abs_azimuth_err_deg",
                                  s.mean_abs_az_err},
                                 {"id_switches", s.id_switches}});
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (rep.empty) {
    std::cout << "empty report: no active ground truth and no tracks\n";
    return 0;
  }
  std::cout << "detection rate: " << rep.detection_rate * 100.0 << "%\n"
            << "azimuth rms:    " << rep.az_rms << " deg\n"
            << "elevation rms:  " << rep.el_rms << " deg\n"
            << "false tracks:   " << rep.false_tracks << "\n"
            << "id switches:    " << rep.id_switches << "\n"
            << "tracked >=50%:  " << rep.reliably_tracked << " of "
            << rep.per_source.size() << "\n";
  for (const auto& s : rep.per_source) {
    std::cout << "  source " << s.gt_id << ": detect "
              << s.detection_rate * 100.0 << "%, az rms " << s.az_rms
              << " deg, mean |az err| " << s.mean_abs_az_err << " deg, swaps "
              << s.id_switches << "\n";
  }
  return 0;
}

int cmd_bench(double seconds, int source_count, const std::string& config_path,
              const std::vector<std::string>& sets) {
  PipelineConfig cfg = load_pipeline_config(config_path, sets);

  std::vector<Vec3> mics;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) mics.push_back({0.08 * sx, 0.08 * sy, 0.08 * sz});
  ArrayGeometry geometry(mics);

  SceneSpec spec;
  spec.duration = seconds;
  spec.noise_level = 0.02;
  spec.seed = 7;
  for (int s = 0; s < source_count; ++s) {
    SourceScript src;
    src.kind = SignalKind::speech;
    double az = 360.0 * s / source_count;
    src.trajectory = {{0.0, direction_from_angles_deg(az, 0.0), 2.0},
                      {seconds, direction_from_angles_deg(az + 60.0, 0.0), 2.0}};
    spec.sources.push_back(src);
  }
  RenderedScene scene = render_scene(spec, geometry);
  WavData wav;
  wav.sample_rate = scene.sample_rate;
  wav.channels = std::move(scene.channels);

  TrackResult result = run_tracking(wav, geometry, cfg);
  json j;
  j["audio_seconds"] = result.duration_s;
  j["updates"] = result.updates;
  j["realtime_factor"] = result.realtime_factor;
  j["confirmed_records"] = result.records.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microphone-array sound source localization and tracking"};
  app.require_subcommand(1);

  std::string scene_path, geom_path, out_wav, out_truth, format = "float32";
  auto* sim = app.add_subcommand("simulate",
                                 "render a scripted scene to WAV + truth CSV");
  sim->add_option("--scene", scene_path, "scene JSON")->required();
  sim->add_option("--geometry", geom_path, "geometry JSON")->required();
  sim->add_option("--out-wav", out_wav, "output WAV path")->required();
  sim->add_option("--out-truth", out_truth, "output ground-truth CSV path");
  sim->add_option("--format", format, "wav sample format: float32|pcm16")
      ->check(CLI::IsMember({"float32", "pcm16"}));

  std::string wav_path, config_path, out_csv, diag_csv, mics;
  std::vector<std::string> sets;
  double delay_ms = 0.0;
  auto* trk = app.add_subcommand("track",
                                 "localize and track sources in a WAV file");
  trk->add_option("--wav", wav_path, "input multichannel WAV")->required();
  trk->add_option("--geometry", geom_path, "geometry JSON");
  trk->add_option("--config", config_path, "pipeline config JSON");
  trk->add_option("--set", sets, "override config values (key.path=value)");
  trk->add_option("--out", out_csv, "trajectory CSV path (default: stdout)");
  trk->add_option("--diag", diag_csv, "per-update beamformer peaks CSV");
  trk->add_option("--mics", mics, "microphone subset, 1-based (e.g. 1-4)");
  trk->add_option("--delay-ms", delay_ms,
                  "delayed estimation lag in milliseconds");

  std::string tracks_path, truth_path;
  double match_deg = 10.0;
  bool as_json = false;
  auto* ev = app.add_subcommand("evaluate",
                                "score a trajectory CSV against ground truth");
  ev->add_option("--tracks", tracks_path, "trajectory CSV")->required();
  ev->add_option("--truth", truth_path, "ground-truth CSV")->required();
  ev->add_option("--match-deg", match_deg, "correct-localization gate");
  ev->add_flag("--json", as_json, "emit a JSON report");

  double bench_seconds = 10.0;
  int bench_sources = 4;
  auto* bn = app.add_subcommand("bench", "end-to-end throughput check");
  bn->add_option("--seconds", bench_seconds, "audio length to synthesize");
  bn->add_option("--sources", bench_sources, "number of simulated sources");
  bn->add_option("--config", config_path, "pipeline config JSON");
  bn->add_option("--set", sets, "override config values");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(scene_path, geom_path, out_wav, out_truth, format);
    }
    if (trk->parsed()) {
      return cmd_track(wav_path, geom_path, config_path, sets, out_csv,
                       diag_csv, mics, delay_ms);
    }
    if (ev->parsed()) {
      return cmd_evaluate(tracks_path, truth_path, match_deg, as_json);
    }
    if (bn->parsed()) {
      return cmd_bench(bench_seconds, bench_sources, config_path, sets);
    }
  } catch (const beamtrack::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
