#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "beamtrack/math.hpp"
#include "beamtrack/pipeline.hpp"

namespace beamtrack {

struct EvalOptions {
  double match_deg = 10.0;         // gate for a correct localization
  double reliable_fraction = 0.5;  // matched fraction that counts as tracked
};

struct PerSourceEval {
  int gt_id = 0;
  int active_updates = 0;
  int matched_updates = 0;
  double detection_rate = 0.0;
  double az_rms = 0.0;
  double el_rms = 0.0;
  double mean_abs_az_err = 0.0;
  int id_switches = 0;
};

struct EvalReport {
  bool empty = true;
  int active_updates = 0;
  int matched_updates = 0;
  double detection_rate = 0.0;
  double az_rms = 0.0;
  double el_rms = 0.0;
  int false_tracks = 0;
  int id_switches = 0;
  int reliably_tracked = 0;
  std::vector<PerSourceEval> per_source;
};

namespace detail {

struct BinEntry {
  int id;
  double az, el;
  Vec3 dir;
};

/// Exhaustive assignment on one update: maximize matches within the gate,
/// break ties by total angular cost. Falls back to greedy when the bin is
/// unexpectedly large.
inline std::vector<int> match_bin(const std::vector<BinEntry>& gt,
                                  const std::vector<BinEntry>& tr,
                                  double gate_deg) {
  const int ng = static_cast<int>(gt.size());
  const int nt = static_cast<int>(tr.size());
  std::vector<std::vector<double>> dist(ng, std::vector<double>(nt));
  for (int a = 0; a < ng; ++a) {
    for (int b = 0; b < nt; ++b) {
      dist[a][b] = angle_between_deg(gt[a].dir, tr[b].dir);
    }
  }
  std::vector<int> best(ng, -1);
  if (ng == 0 || nt == 0) return best;

  if (ng <= 6 && nt <= 8) {
    std::vector<int> cur(ng, -1);
    std::vector<char> used(nt, 0);
    int best_matches = -1;
    double best_cost = 0.0;
    auto rec = [&](auto&& self, int a, int matches, double cost) -> void {
      if (a == ng) {
        if (matches > best_matches ||
            (matches == best_matches && cost < best_cost)) {
          best_matches = matches;
          best_cost = cost;
          best = cur;
        }
        return;
      }
      cur[a] = -1;
      self(self, a + 1, matches, cost);
      for (int b = 0; b < nt; ++b) {
        if (used[b] || dist[a][b] > gate_deg) continue;
        used[b] = 1;
        cur[a] = b;
        self(self, a + 1, matches + 1, cost + dist[a][b]);
        cur[a] = -1;
        used[b] = 0;
      }
    };
    rec(rec, 0, 0, 0.0);
    return best;
  }

  // Greedy fallback: repeatedly take the globally closest pair.
  std::vector<char> gu(ng, 0), tu(nt, 0);
  while (true) {
    double bd = gate_deg;
    int ba = -1, bb = -1;
    for (int a = 0; a < ng; ++a) {
      if (gu[a]) continue;
      for (int b = 0; b < nt; ++b) {
        if (tu[b]) continue;
        if (dist[a][b] <= bd) {
          bd = dist[a][b];
          ba = a;
          bb = b;
        }
      }
    }
    if (ba < 0) break;
    best[ba] = bb;
    gu[ba] = 1;
    tu[bb] = 1;
  }
  return best;
}

}  // namespace detail

/// Compares a reported trajectory against scripted ground truth. Updates are
/// aligned to the nearest ground-truth timestamp, matched with an optimal
/// gated assignment, and identities follow each ground-truth source greedily
/// over time.
inline EvalReport evaluate_tracks(const std::vector<GroundTruthRecord>& gt,
                                  const std::vector<TrajectoryRecord>& tracks,
                                  const EvalOptions& opt = {}) {
  EvalReport rep;
  if (gt.empty()) return rep;

  std::vector<double> times;
  for (const auto& g : gt) times.push_back(g.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-4; }),
              times.end());
  double interval = 2048.0 / 48000.0;
  if (times.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) {
      gaps.push_back(times[i] - times[i - 1]);
    }
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    interval = gaps[gaps.size() / 2];
  }

  auto bin_of = [&](double t) -> int {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    int idx = static_cast<int>(it - times.begin());
    int cand = idx;
    if (idx > 0 &&
        (idx == static_cast<int>(times.size()) ||
         std::abs(times[idx - 1] - t) < std::abs(times[idx] - t))) {
      cand = idx - 1;
    }
    if (cand >= static_cast<int>(times.size())) return -1;
    if (std::abs(times[cand] - t) > 0.55 * interval) return -1;
    return cand;
  };

  std::vector<std::vector<detail::BinEntry>> gt_bins(times.size());
  std::vector<std::vector<detail::BinEntry>> tr_bins(times.size());
  for (const auto& g : gt) {
    if (!g.active) continue;
    int b = bin_of(g.t);
    if (b < 0) continue;
    gt_bins[b].push_back({g.source_id, g.azimuth_deg, g.elevation_deg,
                          direction_from_angles_deg(g.azimuth_deg,
                                                    g.elevation_deg)});
  }
  for (const auto& r : tracks) {
    int b = bin_of(r.t);
    if (b < 0) continue;
    auto& bin = tr_bins[b];
    bool replaced = false;
    for (auto& e : bin) {
      if (e.id == r.source_id) {  // keep the latest record for this id
        e = {r.source_id, r.azimuth_deg, r.elevation_deg,
             direction_from_angles_deg(r.azimuth_deg, r.elevation_deg)};
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      bin.push_back({r.source_id, r.azimuth_deg, r.elevation_deg,
                     direction_from_angles_deg(r.azimuth_deg,
                                               r.elevation_deg)});
    }
  }

  struct GtAcc {
    int active = 0;
    int matched = 0;
    double az_sq = 0.0, el_sq = 0.0, az_abs = 0.0;
    int switches = 0;
    int last_id = -1;
  };
  std::map<int, GtAcc> per_gt;
  std::map<int, std::pair<int, int>> per_track;  // id -> (present, matched)

  for (std::size_t b = 0; b < times.size(); ++b) {
    for (const auto& e : tr_bins[b]) {
      per_track[e.id].first += 1;
    }
    std::vector<int> match =
        detail::match_bin(gt_bins[b], tr_bins[b], opt.match_deg);
    for (std::size_t a = 0; a < gt_bins[b].size(); ++a) {
      GtAcc& acc = per_gt[gt_bins[b][a].id];
      acc.active += 1;
      int m = match[a];
      if (m < 0) continue;
      const auto& g = gt_bins[b][a];
      const auto& t = tr_bins[b][static_cast<std::size_t>(m)];
      acc.matched += 1;
      double daz = wrap_degrees(t.az - g.az);
      double del = t.el - g.el;
      acc.az_sq += daz * daz;
      acc.el_sq += del * del;
      acc.az_abs += std::abs(daz);
      if (acc.last_id >= 0 && acc.last_id != t.id) acc.switches += 1;
      acc.last_id = t.id;
      per_track[t.id].second += 1;
    }
  }

  double az_sq = 0.0, el_sq = 0.0;
  for (const auto& [id, acc] : per_gt) {
    PerSourceEval pse;
    pse.gt_id = id;
    pse.active_updates = acc.active;
    pse.matched_updates = acc.matched;
    pse.detection_rate =
        acc.active > 0 ? static_cast<double>(acc.matched) / acc.active : 0.0;
    pse.az_rms = acc.matched > 0 ? std::sqrt(acc.az_sq / acc.matched) : 0.0;
    pse.el_rms = acc.matched > 0 ? std::sqrt(acc.el_sq / acc.matched) : 0.0;
    pse.mean_abs_az_err = acc.matched > 0 ? acc.az_abs / acc.matched : 0.0;
    pse.id_switches = acc.switches;
    rep.per_source.push_back(pse);
    rep.active_updates += acc.active;
    rep.matched_updates += acc.matched;
    rep.id_switches += acc.switches;
    az_sq += acc.az_sq;
    el_sq += acc.el_sq;
    if (acc.active > 0 &&
        acc.matched >= opt.reliable_fraction * acc.active) {
      rep.reliably_tracked += 1;
    }
  }
  rep.detection_rate = rep.active_updates > 0
                           ? static_cast<double>(rep.matched_updates) /
                                 rep.active_updates
                           : 0.0;
  rep.az_rms =
      rep.matched_updates > 0 ? std::sqrt(az_sq / rep.matched_updates) : 0.0;
  rep.el_rms =
      rep.matched_updates > 0 ? std::sqrt(el_sq / rep.matched_updates) : 0.0;
  for (const auto& [id, pm] : per_track) {
    if (pm.first > 0 &&
        pm.second < opt.reliable_fraction * pm.first) {
      rep.false_tracks += 1;
    }
  }
  rep.empty = rep.active_updates == 0 && tracks.empty();
  return rep;
}

}  // namespace beamtrack
