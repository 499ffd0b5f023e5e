#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/math.hpp"
#include "beamtrack/rng.hpp"

namespace beamtrack {

enum class SignalKind { speech, noise, clap, tone };

inline SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "speech") return SignalKind::speech;
  if (s == "noise" || s == "noise_burst") return SignalKind::noise;
  if (s == "clap") return SignalKind::clap;
  if (s == "tone") return SignalKind::tone;
  throw std::invalid_argument("scene: unknown signal kind '" + s + "'");
}

struct TrajectoryKeypoint {
  double t = 0.0;
  Vec3 direction{1.0, 0.0, 0.0};  // unit
  double distance_m = 2.0;
};

struct SourceScript {
  SignalKind kind = SignalKind::speech;
  double level = 1.0;     // active-region RMS of the emitted signal
  double tone_hz = 1000.0;
  std::vector<TrajectoryKeypoint> trajectory;
  std::vector<std::pair<double, double>> on_intervals;  // empty = always on

  Vec3 direction_at(double t) const {
    const auto& kp = trajectory;
    if (kp.empty()) throw std::invalid_argument("scene: empty trajectory");
    if (t <= kp.front().t) return kp.front().direction;
    if (t >= kp.back().t) return kp.back().direction;
    for (std::size_t s = 0; s + 1 < kp.size(); ++s) {
      if (t <= kp[s + 1].t) {
        double span = kp[s + 1].t - kp[s].t;
        double u = span > 0.0 ? (t - kp[s].t) / span : 0.0;
        return nlerp(kp[s].direction, kp[s + 1].direction, u);
      }
    }
    return kp.back().direction;
  }

  double distance_at(double t) const {
    const auto& kp = trajectory;
    if (kp.empty()) throw std::invalid_argument("scene: empty trajectory");
    if (t <= kp.front().t) return kp.front().distance_m;
    if (t >= kp.back().t) return kp.back().distance_m;
    for (std::size_t s = 0; s + 1 < kp.size(); ++s) {
      if (t <= kp[s + 1].t) {
        double span = kp[s + 1].t - kp[s].t;
        double u = span > 0.0 ? (t - kp[s].t) / span : 0.0;
        return kp[s].distance_m + u * (kp[s + 1].distance_m - kp[s].distance_m);
      }
    }
    return kp.back().distance_m;
  }

  bool active_at(double t) const {
    if (on_intervals.empty()) return true;
    for (const auto& [t0, t1] : on_intervals) {
      if (t >= t0 && t < t1) return true;
    }
    return false;
  }
};

struct ReverbSpec {
  double decay_per_second = 19.7;  // amplitude decay exponent; -60 dB at rt60
  double wet_level = 0.3;
  double density = 500.0;  // diffuse impulses per second

  static double decay_from_rt60(double rt60_s) {
    return std::log(1000.0) / rt60_s;  // e^{-d t} hits -60 dB at rt60
  }
};

struct SceneSpec {
  double duration = 1.0;
  std::vector<SourceScript> sources;
  double noise_level = 0.0;  // sensor noise amplitude per channel
  std::optional<ReverbSpec> reverb;
  std::uint64_t seed = 1;
  double gt_interval = 2048.0 / 48000.0;

  void validate() const {
    if (!(duration > 0.0)) {
      throw std::invalid_argument("scene: duration must be positive");
    }
    if (noise_level < 0.0) {
      throw std::invalid_argument("scene: noise_level must be >= 0");
    }
    for (const auto& s : sources) {
      if (s.trajectory.empty()) {
        throw std::invalid_argument("scene: source without trajectory");
      }
      for (const auto& kp : s.trajectory) {
        if (kp.distance_m < 0.5) {
          throw std::invalid_argument(
              "scene: trajectory distance below 0.5 m is rejected");
        }
        if (!kp.direction.finite() ||
            std::abs(kp.direction.norm() - 1.0) > 1e-6) {
          throw std::invalid_argument(
              "scene: trajectory directions must be unit vectors");
        }
      }
      for (const auto& [t0, t1] : s.on_intervals) {
        if (t0 < 0.0 || t1 > duration || t1 <= t0) {
          throw std::invalid_argument(
              "scene: on/off intervals must lie within the duration");
        }
      }
    }
  }
};

struct GroundTruthEntry {
  double t = 0.0;
  int source_id = 0;
  Vec3 direction{1.0, 0.0, 0.0};
  bool active = false;
};

struct RenderedScene {
  double sample_rate = 48000.0;
  std::vector<std::vector<double>> channels;
  std::vector<GroundTruthEntry> ground_truth;
};

/// Scripted per-source state at an arbitrary time.
inline std::vector<GroundTruthEntry> ground_truth_at(const SceneSpec& spec,
                                                     double t) {
  if (t < 0.0 || t > spec.duration) {
    throw std::domain_error("ground_truth_at: timestamp outside the scene");
  }
  std::vector<GroundTruthEntry> out;
  out.reserve(spec.sources.size());
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    out.push_back({t, static_cast<int>(s), spec.sources[s].direction_at(t),
                   spec.sources[s].active_at(t)});
  }
  return out;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// 16-tap windowed-sinc read at a fractional index; taps renormalized for
/// exact unity DC gain so amplitudes survive interpolation.
inline double sinc_read(const std::vector<double>& sig, double idx) {
  const int half = 8;
  int i0 = static_cast<int>(std::floor(idx));
  double frac = idx - i0;
  double acc = 0.0;
  double wsum = 0.0;
  for (int k = -half + 1; k <= half; ++k) {
    double x = k - frac;
    double s = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    double w = 0.5 + 0.5 * std::cos(kPi * x / half);
    double tap = s * w;
    wsum += tap;
    int n = i0 + k;
    if (n >= 0 && n < static_cast<int>(sig.size())) {
      acc += tap * sig[n];
    }
  }
  return wsum != 0.0 ? acc / wsum : 0.0;
}

/// Two-pole resonator used to shape the speech-like carrier.
struct Resonator {
  double b1 = 0.0, b2 = 0.0, y1 = 0.0, y2 = 0.0;
  void tune(double freq_hz, double bandwidth_hz, double fs) {
    double r = std::exp(-kPi * bandwidth_hz / fs);
    b1 = 2.0 * r * std::cos(2.0 * kPi * freq_hz / fs);
    b2 = -r * r;
  }
  double step(double x) {
    double y = x + b1 * y1 + b2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

inline void generate_speech(std::vector<double>& sig, double fs, Rng& rng) {
  const std::size_t n = sig.size();
  std::size_t pos = 0;
  Resonator res;
  while (pos < n) {
    double syl_s = rng.uniform(0.08, 0.22);
    double gap_s =
        rng.uniform() < 0.15 ? rng.uniform(0.25, 0.6) : rng.uniform(0.02, 0.08);
    double freq = rng.uniform(300.0, 2800.0);
    double amp = rng.uniform(0.4, 1.0);
    res.tune(freq, 0.3 * freq + 50.0, fs);
    std::size_t syl_n = static_cast<std::size_t>(syl_s * fs);
    for (std::size_t i = 0; i < syl_n && pos < n; ++i, ++pos) {
      double u = static_cast<double>(i) / syl_n;
      double env = std::pow(std::sin(kPi * u), 0.7);
      double white = rng.normal();
      // Narrowband resonance plus a broadband floor, like voiced speech
      // with consonant energy.
      sig[pos] = env * amp * (0.12 * res.step(white) + 0.35 * white);
    }
    pos += static_cast<std::size_t>(gap_s * fs);
  }
}

inline void generate_clap(std::vector<double>& sig, double fs, Rng& rng,
                          const SourceScript& script, double duration) {
  std::vector<double> starts;
  if (script.on_intervals.empty()) {
    starts.push_back(0.0);
  } else {
    for (const auto& iv : script.on_intervals) starts.push_back(iv.first);
  }
  (void)duration;
  for (double t0 : starts) {
    std::size_t begin = static_cast<std::size_t>(t0 * fs);
    std::size_t attack = static_cast<std::size_t>(0.003 * fs);
    std::size_t length = static_cast<std::size_t>(0.25 * fs);
    for (std::size_t i = 0; i < length && begin + i < sig.size(); ++i) {
      double t = static_cast<double>(i) / fs;
      double env = (i < attack ? static_cast<double>(i) / attack : 1.0) *
                   std::exp(-t / 0.04);
      sig[begin + i] += env * rng.normal();
    }
  }
}

}  // namespace detail

/// Renders the scene: per-sample fractional propagation delays from the
/// spherical-wave geometry, 1/distance amplitude decay, optional diffuse
/// exponential reverberation and white sensor noise. Deterministic for a
/// fixed seed.
inline RenderedScene render_scene(const SceneSpec& spec,
                                  const ArrayGeometry& geometry) {
  spec.validate();
  const double fs = geometry.sample_rate;
  const std::size_t n_total = static_cast<std::size_t>(spec.duration * fs);
  const int mic_count = geometry.mic_count();

  RenderedScene out;
  out.sample_rate = fs;
  out.channels.assign(mic_count, std::vector<double>(n_total, 0.0));

  for (std::size_t si = 0; si < spec.sources.size(); ++si) {
    const SourceScript& script = spec.sources[si];
    Rng rng(detail::mix_seed(spec.seed, si));

    // Emitted signal on the full timeline.
    std::vector<double> sig(n_total, 0.0);
    switch (script.kind) {
      case SignalKind::speech:
        detail::generate_speech(sig, fs, rng);
        break;
      case SignalKind::noise:
        for (auto& v : sig) v = rng.normal();
        break;
      case SignalKind::clap:
        detail::generate_clap(sig, fs, rng, script, spec.duration);
        break;
      case SignalKind::tone: {
        double phase = rng.uniform(0.0, 2.0 * kPi);
        double w = 2.0 * kPi * script.tone_hz / fs;
        for (std::size_t i = 0; i < n_total; ++i) {
          sig[i] = std::sin(w * i + phase);
        }
        break;
      }
    }

    // Gate with 5 ms raised-cosine edges, then normalize the active RMS.
    const std::size_t ramp = static_cast<std::size_t>(0.005 * fs);
    double energy = 0.0;
    std::size_t active_n = 0;
    for (std::size_t i = 0; i < n_total; ++i) {
      double t = static_cast<double>(i) / fs;
      double gate = 0.0;
      if (script.active_at(t)) {
        gate = 1.0;
        for (const auto& [t0, t1] : script.on_intervals) {
          if (t >= t0 && t < t1) {
            double into = (t - t0) * fs;
            double left = (t1 - t) * fs;
            if (into < ramp) gate = std::min(gate, 0.5 - 0.5 * std::cos(kPi * into / ramp));
            if (left < ramp) gate = std::min(gate, 0.5 - 0.5 * std::cos(kPi * left / ramp));
          }
        }
      }
      sig[i] *= gate;
      if (gate > 0.5) {
        energy += sig[i] * sig[i];
        ++active_n;
      }
    }
    if (active_n > 0 && energy > 0.0) {
      double gain = script.level / std::sqrt(energy / active_n);
      for (auto& v : sig) v *= gain;
    }

    // Propagate to each microphone.
    for (std::size_t i = 0; i < n_total; ++i) {
      double t = static_cast<double>(i) / fs;
      Vec3 pos = script.direction_at(t) * script.distance_at(t);
      for (int m = 0; m < mic_count; ++m) {
        double dist = (pos - geometry.mic_positions[m]).norm();
        double delay = fs * dist / geometry.speed_of_sound;
        out.channels[m][i] +=
            detail::sinc_read(sig, static_cast<double>(i) - delay) / dist;
      }
    }
  }

  if (spec.reverb) {
    const ReverbSpec& rv = *spec.reverb;
    double t_max = std::log(1000.0) / rv.decay_per_second;
    for (int m = 0; m < mic_count; ++m) {
      Rng rng(detail::mix_seed(spec.seed, 0x517ec0ULL + m));
      std::vector<double> dry = out.channels[m];
      double step = 1.0 / rv.density;
      for (double t = 0.0; t < t_max; t += step) {
        double tk = t + rng.uniform() * step;
        double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                     std::exp(-rv.decay_per_second * tk) * rv.wet_level;
        std::size_t off = static_cast<std::size_t>(tk * fs);
        if (off == 0 || off >= n_total) continue;
        for (std::size_t i = off; i < n_total; ++i) {
          out.channels[m][i] += amp * dry[i - off];
        }
      }
    }
  }

  if (spec.noise_level > 0.0) {
    for (int m = 0; m < mic_count; ++m) {
      Rng rng(detail::mix_seed(spec.seed, 0x90153eULL + m));
      for (auto& v : out.channels[m]) v += spec.noise_level * rng.normal();
    }
  }

  for (double t = 0.0; t <= spec.duration + 1e-9; t += spec.gt_interval) {
    double tt = std::min(t, spec.duration);
    for (std::size_t s = 0; s < spec.sources.size(); ++s) {
      out.ground_truth.push_back({tt, static_cast<int>(s),
                                  spec.sources[s].direction_at(tt),
                                  spec.sources[s].active_at(tt)});
    }
  }
  return out;
}

}  // namespace beamtrack
