#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/spectral.hpp"
#include "beamtrack/spherical_grid.hpp"
#include "beamtrack/tdoa_lookup.hpp"

namespace beamtrack {

/// Peaks extracted per update. Four are always reported; the confidence
/// value separates real sources from the (frequent) spurious ones.
inline constexpr int kPotentialSources = 4;

struct PotentialSource {
  Vec3 direction;
  double energy = 0.0;
  int rank = 0;
  double confidence = 0.0;
  int grid_vertex = -1;
  double distance_m = 0.0;         // from refinement; see distance_reliable
  bool distance_reliable = false;  // range from the local search is noisy
};

struct Observation {
  double timestamp = 0.0;
  std::array<PotentialSource, kPotentialSources> sources;
};

struct BeamformerConfig {
  double energy_threshold = 150.0;  // confidence knee; depends on mic count,
                                    // frame size and analysis window
  bool refine = true;
  int refine_ranks = 2;            // refine this many top peaks
  double coarse_radius_deg = 2.5;  // angular half-extent of the local grid
};

struct SearchResult {
  int best_vertex = 0;
  std::vector<double> energy;   // per grid vertex
  std::uint64_t additions = 0;  // correlation accumulations performed
};

/// Sums each direction's pairwise correlations at the precomputed delays and
/// returns the loudest direction. Ties break toward the lowest vertex index.
inline SearchResult direction_search(const CrossCorrelationSet& corr,
                                     const TdoaLookup& lookup) {
  SearchResult res;
  res.energy.assign(lookup.num_vertices, 0.0);
  const int pairs = lookup.num_pairs;
  const int L = corr.frame_length;
  double best = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < lookup.num_vertices; ++v) {
    const int* row = lookup.row(v);
    double e = 0.0;
    for (int p = 0; p < pairs; ++p) {
      int idx = row[p];
      if (idx < 0) idx += L;
      e += corr.values[p][idx];
    }
    res.additions += pairs;
    res.energy[v] = e;
    if (e > best) {
      best = e;
      res.best_vertex = v;
    }
  }
  return res;
}

struct RefinedDirection {
  Vec3 direction;
  double distance_m = 0.0;
  bool distance_reliable = false;
  double energy = 0.0;
};

/// Re-evaluates the beamformer on the 125-point near-field lattice around a
/// coarse direction. The returned range coordinate improves the direction
/// fit but is not trustworthy as a distance estimate.
inline RefinedDirection refine_direction(const CrossCorrelationSet& corr,
                                         const ArrayGeometry& geometry,
                                         const Vec3& coarse,
                                         double coarse_radius_deg = 2.5) {
  RefinedGrid grid = build_refined_grid(coarse, coarse_radius_deg);
  const auto pair_list = geometry.pairs();
  RefinedDirection best;
  best.direction = coarse;
  double best_e = -std::numeric_limits<double>::infinity();
  for (const auto& pt : grid.points) {
    double e = 0.0;
    int p = 0;
    for (const auto& [i, j] : pair_list) {
      int tau = round_delay(
          near_field_tdoa(geometry, pt.direction, pt.distance_m, i, j));
      e += corr.value(p, tau);
      ++p;
    }
    if (e > best_e) {
      best_e = e;
      best.direction = pt.direction;
      best.distance_m = pt.distance_m;
    }
  }
  best.energy = best_e;
  return best;
}

/// Empirical probability that a reported peak is a true source. The leading
/// peak is graded by its energy against the threshold; trailing peaks carry
/// fixed, rank-dependent confidences.
inline double confidence(double first_peak_energy, int rank,
                         double energy_threshold) {
  switch (rank) {
    case 0: {
      double nu = first_peak_energy / energy_threshold;
      if (nu <= 1.0) return 0.5 * nu * nu;
      return 1.0 - 0.5 / (nu * nu);
    }
    case 1:
      return 0.3;
    case 2:
      return 0.16;
    default:
      return 0.03;
  }
}

struct LocalizeResult {
  Observation observation;
  std::vector<double> first_energy_map;  // energy per vertex before removal
  std::uint64_t additions = 0;
};

/// Extracts kPotentialSources peaks by repeated search; after each find, the
/// winning lag of every pair is zeroed so the next search sees the residual.
/// Refinement, when enabled, runs on the correlation state at extraction
/// time (before the peak's own lags are cleared).
inline LocalizeResult localize_multiple(const CrossCorrelationSet& corr,
                                        const TdoaLookup& lookup,
                                        const SphericalGrid& grid,
                                        const ArrayGeometry& geometry,
                                        const BeamformerConfig& cfg = {}) {
  CrossCorrelationSet work = corr;
  LocalizeResult out;
  out.observation.timestamp = corr.timestamp;
  for (int q = 0; q < kPotentialSources; ++q) {
    SearchResult sr = direction_search(work, lookup);
    out.additions += sr.additions;
    if (q == 0) out.first_energy_map = sr.energy;

    PotentialSource ps;
    ps.rank = q;
    ps.grid_vertex = sr.best_vertex;
    ps.energy = sr.energy[sr.best_vertex];
    ps.direction = grid.vertices[sr.best_vertex];
    if (cfg.refine && q < cfg.refine_ranks) {
      RefinedDirection rd =
          refine_direction(work, geometry, ps.direction, cfg.coarse_radius_deg);
      ps.direction = rd.direction;
      ps.distance_m = rd.distance_m;
      ps.distance_reliable = rd.distance_reliable;
    }
    out.observation.sources[q] = ps;

    const int* row = lookup.row(sr.best_vertex);
    for (int p = 0; p < lookup.num_pairs; ++p) {
      work.set(p, row[p], 0.0);
    }
  }
  double e0 = out.observation.sources[0].energy;
  for (auto& ps : out.observation.sources) {
    ps.confidence = confidence(e0, ps.rank, cfg.energy_threshold);
  }
  return out;
}

}  // namespace beamtrack
