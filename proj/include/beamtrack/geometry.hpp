#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "beamtrack/math.hpp"

namespace beamtrack {

/// Microphone array description: positions in meters in an array-centered
/// frame, plus the physical constants every delay computation depends on.
/// Immutable after construction; safe for concurrent reads.
struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  double speed_of_sound = 343.0;  // m/s
  double sample_rate = 48000.0;   // Hz

  ArrayGeometry() = default;
  ArrayGeometry(std::vector<Vec3> mics, double c = 343.0, double fs = 48000.0)
      : mic_positions(std::move(mics)), speed_of_sound(c), sample_rate(fs) {
    validate();
  }

  void validate() const {
    if (mic_positions.size() < 4) {
      throw std::invalid_argument(
          "geometry: at least 4 microphones are required for unambiguous 3D "
          "localization");
    }
    if (!(speed_of_sound > 0.0) || !(sample_rate > 0.0)) {
      throw std::invalid_argument(
          "geometry: speed_of_sound and sample_rate must be positive");
    }
    for (std::size_t i = 0; i < mic_positions.size(); ++i) {
      if (!mic_positions[i].finite()) {
        throw std::invalid_argument("geometry: non-finite microphone position");
      }
      for (std::size_t j = i + 1; j < mic_positions.size(); ++j) {
        if ((mic_positions[i] - mic_positions[j]).norm() < 1e-9) {
          throw std::invalid_argument("geometry: coincident microphones");
        }
      }
    }
  }

  int mic_count() const { return static_cast<int>(mic_positions.size()); }
  int pair_count() const { return mic_count() * (mic_count() - 1) / 2; }

  /// Index of pair (i, j), i < j, in the canonical enumeration
  /// (0,1), (0,2), ..., (0,M-1), (1,2), ...
  int pair_index(int i, int j) const {
    const int m = mic_count();
    return i * m - i * (i + 1) / 2 + (j - i - 1);
  }

  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(pair_count());
    for (int i = 0; i < mic_count(); ++i)
      for (int j = i + 1; j < mic_count(); ++j) out.emplace_back(i, j);
    return out;
  }

  double max_baseline() const {
    double b = 0.0;
    for (std::size_t i = 0; i < mic_positions.size(); ++i)
      for (std::size_t j = i + 1; j < mic_positions.size(); ++j)
        b = std::max(b, (mic_positions[i] - mic_positions[j]).norm());
    return b;
  }

  /// Largest possible inter-microphone delay in samples (ceiling).
  int max_delay_samples() const {
    return static_cast<int>(
        std::ceil(sample_rate * max_baseline() / speed_of_sound));
  }

  /// Keeps only the listed microphones (0-based), preserving order.
  ArrayGeometry subset(const std::vector<int>& mic_indices) const {
    std::vector<Vec3> mics;
    mics.reserve(mic_indices.size());
    for (int idx : mic_indices) {
      if (idx < 0 || idx >= mic_count()) {
        throw std::invalid_argument("geometry: microphone index out of range");
      }
      mics.push_back(mic_positions[idx]);
    }
    return ArrayGeometry(std::move(mics), speed_of_sound, sample_rate);
  }
};

/// Plane-wave delay between microphones i and j for a source in unit
/// direction `u`, in samples. Positive when microphone j hears the
/// wavefront after microphone i.
inline double far_field_tdoa(const ArrayGeometry& g, const Vec3& u, int i,
                             int j) {
  return g.sample_rate / g.speed_of_sound *
         (g.mic_positions[i] - g.mic_positions[j]).dot(u);
}

/// Spherical-wave delay for a source at distance `distance_m` along unit
/// direction `u`, in samples. Converges to far_field_tdoa as the distance
/// grows.
inline double near_field_tdoa(const ArrayGeometry& g, const Vec3& u,
                              double distance_m, int i, int j) {
  if (!(distance_m > 0.0)) {
    throw std::domain_error("near_field_tdoa: distance must be positive");
  }
  Vec3 s = u * distance_m;
  return g.sample_rate / g.speed_of_sound *
         ((s - g.mic_positions[j]).norm() - (s - g.mic_positions[i]).norm());
}

/// Round half away from zero; correlation buffers are indexed by integer lag.
inline int round_delay(double tau) {
  return static_cast<int>(std::llround(tau));
}

}  // namespace beamtrack
