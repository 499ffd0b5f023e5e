#pragma once

#include <cstdlib>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/spherical_grid.hpp"

namespace beamtrack {

/// Precomputed integer delays (samples) for every grid vertex and microphone
/// pair, laid out vertex-major so one direction's delays are contiguous.
/// Pairs are stored once for i < j; the (j, i) delay is the negation.
struct TdoaLookup {
  int num_vertices = 0;
  int num_pairs = 0;
  int max_abs_delay = 0;
  std::vector<int> delays;  // [vertex * num_pairs + pair]

  int delay(int vertex, int pair) const {
    return delays[static_cast<std::size_t>(vertex) * num_pairs + pair];
  }
  const int* row(int vertex) const {
    return delays.data() + static_cast<std::size_t>(vertex) * num_pairs;
  }
};

inline TdoaLookup build_tdoa_lookup(const ArrayGeometry& g,
                                    const SphericalGrid& grid) {
  TdoaLookup lut;
  lut.num_vertices = grid.vertex_count();
  lut.num_pairs = g.pair_count();
  lut.delays.resize(static_cast<std::size_t>(lut.num_vertices) * lut.num_pairs);
  const auto pair_list = g.pairs();
  std::size_t idx = 0;
  for (int v = 0; v < lut.num_vertices; ++v) {
    for (const auto& [i, j] : pair_list) {
      int d = round_delay(far_field_tdoa(g, grid.vertices[v], i, j));
      lut.delays[idx++] = d;
      lut.max_abs_delay = std::max(lut.max_abs_delay, std::abs(d));
    }
  }
  return lut;
}

}  // namespace beamtrack
