#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "beamtrack/beamformer.hpp"
#include "beamtrack/math.hpp"
#include "beamtrack/rng.hpp"

namespace beamtrack {

/// Assignment targets for a beamformer peak.
inline constexpr int kAssignFalse = -2;
inline constexpr int kAssignNew = -1;

struct TrackerConfig {
  int particles_per_source = 1000;
  double obs_sigma = 0.05;    // direction measurement spread (chordal)
  double init_sigma = 0.05;   // particle spread around a new source
  double p_not_observed = 0.2;    // chance an existing, active source is missed
  double p_active_stay = 0.95;    // active source stays active
  double p_active_gain = 0.05;    // inactive source becomes active
  double p_new = 0.005;           // prior on a peak being a brand new source
  double p_false = 0.05;          // prior on a peak being spurious
  double new_source_threshold = 0.3;   // create when P(new) exceeds this
  double confirm_threshold = 0.98;     // existence level that locks a source in
  double observed_threshold = 0.5;     // T_obs: below this counts as unobserved
  double removal_horizon_s = 2.0;      // unobserved for this long -> dropped
  double duplicate_cone_deg = 10.0;    // no new source this close to a
                                       // confirmed one (reflection guard)
  double resample_fraction = 0.7;      // resample when N_eff < fraction * N
  int delay_updates = 0;               // delayed-estimation lag, in updates
  int max_sources = 16;                // assignment enumeration envelope
  double nominal_dt = 2048.0 / 48000.0;
  double frac_stationary = 0.3;
  double frac_const_velocity = 0.4;    // remainder is the accelerated class
  std::uint64_t seed = 1;
};

/// Excitation-damping dynamics; three parameter sets cover stationary,
/// constant-velocity and accelerated motion.
struct DynamicsParams {
  double damping;     // velocity decay rate (1/s)
  double excitation;  // stationary speed scale per axis
};

inline constexpr std::array<DynamicsParams, 3> kDynamicsClasses{{
    {2.0, 0.04},   // stationary
    {0.05, 0.2},   // constant velocity
    {0.5, 0.2},    // accelerated
}};

/// One prediction step. The velocity is damped and re-excited, the position
/// integrates the velocity and is pulled back onto the unit sphere, and the
/// velocity is re-projected onto the tangent plane.
inline void step_particle(Vec3& pos, Vec3& vel, const DynamicsParams& dyn,
                          double dt, const Vec3& noise) {
  double a = std::exp(-dyn.damping * dt);
  double b = dyn.excitation * std::sqrt(1.0 - a * a);
  vel = vel * a + noise * b;
  pos = (pos + vel * dt).normalized();
  vel = vel - pos * vel.dot(pos);
}

/// Density of observing direction `observed` for a particle at `particle`:
/// a Gaussian kernel on the chordal distance, normalized over the sphere so
/// it is commensurate with the uniform 1/(4 pi) used for false detections.
inline double observation_density(const Vec3& particle, const Vec3& observed,
                                  double sigma) {
  double s2 = sigma * sigma;
  double norm = 1.0 / (2.0 * kPi * s2 * (1.0 - std::exp(-2.0 / s2)));
  return norm * std::exp(-0.5 * (observed - particle).norm2() / s2);
}

/// Existence recursion: a source seen with probability `p_observed` this
/// update keeps existing; an unseen one decays, tempered by the prior chance
/// `p_not_observed` of missing a real source.
inline double existence_next(double existence, double p_observed,
                             double p_not_observed) {
  double denom = 1.0 - (1.0 - p_not_observed) * existence;
  double carry = denom > 1e-300 ? p_not_observed * existence / denom : 0.0;
  double e = p_observed + (1.0 - p_observed) * carry;
  return std::fmin(1.0, std::fmax(0.0, e));
}

/// First-order Markov propagation of the activity probability.
inline double activity_propagate(double activity, double stay, double gain) {
  return stay * activity + gain * (1.0 - activity);
}

/// Bayes fusion of the propagated activity with instantaneous evidence,
/// under equiprobable active/inactive states.
inline double activity_fuse(double prior, double instant) {
  double num = prior * instant;
  double den = num + (1.0 - prior) * (1.0 - instant);
  if (den < 1e-300) return prior;
  return num / den;
}

/// Instantaneous activity evidence from this update's assignment: observed
/// sources are certainly active; unobserved ones are active only with the
/// probability implied by the miss rate.
inline double instant_activity(double p_observed, double p_not_observed) {
  double unobserved = p_not_observed / (1.0 + p_not_observed);
  return p_observed + (1.0 - p_observed) * unobserved;
}

/// All injective peak-to-source assignments with their posteriors.
struct AssignmentSet {
  std::vector<std::vector<int>> maps;  // per hypothesis, one entry per peak
  std::vector<double> posterior;       // normalized
  int num_sources = 0;
  int num_peaks = 0;
};

/// Enumerates every assignment of peaks to {false, new, tracked source}
/// (injective on tracked sources) and scores it with the peak confidences,
/// the per-source observabilities and the particle-weighted likelihoods.
///
/// `source_likelihood[j][q]` must hold sum_i w_{j,i} p(O_q | x_{j,i}).
inline AssignmentSet enumerate_assignments(
    const std::vector<double>& peak_confidence,
    const std::vector<std::vector<double>>& source_likelihood,
    const std::vector<double>& observability, const TrackerConfig& cfg) {
  const int q_count = static_cast<int>(peak_confidence.size());
  const int m = static_cast<int>(observability.size());
  if (m > cfg.max_sources) {
    throw std::invalid_argument(
        "enumerate_assignments: tracked-source count exceeds the design "
        "envelope");
  }
  const double uniform_sphere = 1.0 / (4.0 * kPi);

  AssignmentSet out;
  out.num_sources = m;
  out.num_peaks = q_count;

  std::vector<int> current(q_count, kAssignFalse);
  double total = 0.0;

  // Depth-first over peaks; `used` marks sources already taken.
  std::vector<char> used(m, 0);
  auto recurse = [&](auto&& self, int q, double score) -> void {
    if (score <= 0.0) return;
    if (q == q_count) {
      out.maps.push_back(current);
      out.posterior.push_back(score);
      total += score;
      return;
    }
    const double pq = peak_confidence[q];
    current[q] = kAssignFalse;
    self(self, q + 1, score * uniform_sphere * (1.0 - pq) * cfg.p_false);
    current[q] = kAssignNew;
    self(self, q + 1, score * uniform_sphere * pq * cfg.p_new);
    for (int j = 0; j < m; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      current[q] = j;
      self(self, q + 1,
           score * source_likelihood[j][q] * pq * observability[j]);
      used[j] = 0;
    }
    current[q] = kAssignFalse;
  };
  recurse(recurse, 0, 1.0);

  if (total > 0.0) {
    for (auto& p : out.posterior) p /= total;
  } else if (!out.posterior.empty()) {
    double u = 1.0 / out.posterior.size();
    for (auto& p : out.posterior) p = u;
  }
  return out;
}

struct AssignmentMarginals {
  std::vector<std::vector<double>> source_given_peak;  // [q][j]
  std::vector<double> false_prob;                      // [q]
  std::vector<double> new_prob;                        // [q]
  std::vector<double> source_observed;                 // [j], sum over q
};

inline AssignmentMarginals assignment_marginals(const AssignmentSet& set) {
  AssignmentMarginals m;
  m.source_given_peak.assign(set.num_peaks,
                             std::vector<double>(set.num_sources, 0.0));
  m.false_prob.assign(set.num_peaks, 0.0);
  m.new_prob.assign(set.num_peaks, 0.0);
  m.source_observed.assign(set.num_sources, 0.0);
  for (std::size_t h = 0; h < set.maps.size(); ++h) {
    double p = set.posterior[h];
    for (int q = 0; q < set.num_peaks; ++q) {
      int tgt = set.maps[h][q];
      if (tgt == kAssignFalse) {
        m.false_prob[q] += p;
      } else if (tgt == kAssignNew) {
        m.new_prob[q] += p;
      } else {
        m.source_given_peak[q][tgt] += p;
      }
    }
  }
  for (int j = 0; j < set.num_sources; ++j) {
    for (int q = 0; q < set.num_peaks; ++q) {
      m.source_observed[j] += m.source_given_peak[q][j];
    }
  }
  return m;
}

/// Posterior particle weights: the instantaneous term mixes a uniform
/// floor (source unobserved) with the assignment-weighted likelihood
/// (source observed), then multiplies into the prior weights. Returns false
/// when everything underflowed and the weights were reset to uniform.
///
/// `matched[i]` must hold sum_q P(q -> this source) * p(O_q | x_i).
inline bool apply_weight_update(std::vector<double>& weights,
                                const std::vector<double>& matched,
                                double p_observed) {
  const int n = static_cast<int>(weights.size());
  if (p_observed <= 0.0) return true;  // uniform term cancels, no change
  double denom = 0.0;
  for (double v : matched) denom += v;
  if (denom <= 0.0) return true;  // no particle explains any peak

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double instant = (1.0 - p_observed) / n + p_observed * matched[i] / denom;
    weights[i] *= instant;
    total += weights[i];
  }
  if (total <= 0.0 || !std::isfinite(total)) {
    double u = 1.0 / n;
    for (auto& w : weights) w = u;
    return false;
  }
  for (auto& w : weights) w /= total;
  return true;
}

/// Weighted mean of unit vectors, renormalized; near-degenerate means (for
/// example equal antipodal clusters) fall back to the previous estimate.
inline Vec3 weighted_direction_mean(const std::vector<Vec3>& positions,
                                    const std::vector<double>& weights,
                                    const Vec3& fallback) {
  Vec3 mean{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < positions.size(); ++i) {
    mean += positions[i] * weights[i];
  }
  double norm = mean.norm();
  if (norm < 1e-6) return fallback;
  return mean / norm;
}

/// Effective sample size of a normalized weight vector.
inline double effective_sample_size(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) s += x * x;
  return s > 0.0 ? 1.0 / s : 0.0;
}

inline bool should_resample(const std::vector<double>& w, double fraction) {
  return effective_sample_size(w) <
         fraction * static_cast<double>(w.size());
}

/// Systematic resampling: one uniform draw, N evenly spaced selection
/// points. Returns ancestor indices.
inline std::vector<int> systematic_resample(const std::vector<double>& w,
                                            Rng& rng) {
  const int n = static_cast<int>(w.size());
  std::vector<int> ancestors(n);
  double u = rng.uniform() / n;
  double cumulative = w[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    double target = u + static_cast<double>(i) / n;
    while (cumulative < target && j + 1 < n) {
      ++j;
      cumulative += w[j];
    }
    ancestors[i] = j;
  }
  return ancestors;
}

struct TrackedSource {
  int id = -1;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> weights;
  std::vector<std::uint8_t> dyn_class;
  double existence = 0.0;      // P(source exists | everything so far)
  bool confirmed = false;      // existence reached the confirm threshold
  double activity = 0.5;       // P(source currently emitting)
  double observed_prob = 0.0;  // last update's assignment probability
  double unobserved_s = 0.0;   // time spent below the observed threshold
  int updates = 0;
  Vec3 estimate{1.0, 0.0, 0.0};
  // Recent particle-position snapshots, newest first, for delayed estimates.
  std::deque<std::vector<Vec3>> history;

  double particle_observed_prob() const { return observed_prob; }
};

/// Multi-source SIR particle filter driven by beamformer observations.
/// One logical state machine: updates are strictly ordered, and all
/// randomness comes from the seeded generator, so identical observation
/// streams reproduce identical trajectories.
class SourceTracker {
 public:
  explicit SourceTracker(const TrackerConfig& cfg = {})
      : cfg_(cfg), rng_(cfg.seed) {}

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<TrackedSource>& sources() const { return sources_; }
  int weight_resets() const { return weight_resets_; }
  double last_update_time() const { return last_time_; }

  void update(const Observation& obs) {
    double dt = cfg_.nominal_dt;
    if (has_time_ && obs.timestamp > last_time_) {
      dt = obs.timestamp - last_time_;
    }
    last_time_ = obs.timestamp;
    has_time_ = true;

    predict(dt);

    const int m = static_cast<int>(sources_.size());
    const int q_count = kPotentialSources;

    std::vector<double> peak_conf(q_count);
    for (int q = 0; q < q_count; ++q) {
      peak_conf[q] = obs.sources[q].confidence;
    }

    // Per-particle observation densities, reused by the weight update.
    std::vector<std::vector<std::array<double, kPotentialSources>>> dens(m);
    std::vector<std::vector<double>> source_lik(
        m, std::vector<double>(q_count, 0.0));
    for (int j = 0; j < m; ++j) {
      auto& src = sources_[j];
      const int n = static_cast<int>(src.positions.size());
      dens[j].resize(n);
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q < q_count; ++q) {
          double d = observation_density(src.positions[i],
                                         obs.sources[q].direction,
                                         cfg_.obs_sigma);
          dens[j][i][q] = d;
          source_lik[j][q] += src.weights[i] * d;
        }
      }
    }

    std::vector<double> act_prior(m);
    std::vector<double> observability(m);
    for (int j = 0; j < m; ++j) {
      act_prior[j] = activity_propagate(sources_[j].activity,
                                        cfg_.p_active_stay, cfg_.p_active_gain);
      observability[j] = sources_[j].existence * act_prior[j];
    }

    AssignmentSet assignments =
        enumerate_assignments(peak_conf, source_lik, observability, cfg_);
    AssignmentMarginals marg = assignment_marginals(assignments);

    for (int j = 0; j < m; ++j) {
      auto& src = sources_[j];
      double p_observed = marg.source_observed[j];

      update_weights(src, dens[j], marg, j, p_observed);

      if (!src.confirmed) {
        src.existence =
            existence_next(src.existence, p_observed, cfg_.p_not_observed);
        if (src.existence >= cfg_.confirm_threshold) {
          src.confirmed = true;
          src.existence = 1.0;
        }
      }
      src.activity = activity_fuse(
          act_prior[j], instant_activity(p_observed, cfg_.p_not_observed));

      src.estimate =
          weighted_direction_mean(src.positions, src.weights, src.estimate);
      push_history(src);

      if (p_observed < cfg_.observed_threshold) {
        src.unobserved_s += dt;
      } else {
        src.unobserved_s = 0.0;
      }
      src.observed_prob = p_observed;
      src.updates += 1;
    }

    remove_stale();
    add_new(obs, marg);
    resample_all();
  }

  /// Weighted mean of particle positions `delay` updates ago, using the
  /// current weights. Clamps to the oldest stored snapshot.
  Vec3 delayed_estimate(const TrackedSource& src, int delay,
                        bool* clamped = nullptr) const {
    if (src.history.empty()) {
      if (clamped) *clamped = true;
      return src.estimate;
    }
    int idx = delay;
    bool clip = false;
    if (idx >= static_cast<int>(src.history.size())) {
      idx = static_cast<int>(src.history.size()) - 1;
      clip = true;
    }
    if (clamped) *clamped = clip;
    const auto& snap = src.history[static_cast<std::size_t>(idx)];
    Vec3 mean{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < snap.size(); ++i) {
      mean += snap[i] * src.weights[i];
    }
    double norm = mean.norm();
    if (norm < 1e-6) return src.estimate;
    return mean / norm;
  }

 private:
  void predict(double dt) {
    for (auto& src : sources_) {
      for (std::size_t i = 0; i < src.positions.size(); ++i) {
        const auto& dyn = kDynamicsClasses[src.dyn_class[i]];
        step_particle(src.positions[i], src.velocities[i], dyn, dt,
                      rng_.normal3());
      }
    }
  }

  void update_weights(TrackedSource& src,
                      const std::vector<std::array<double, kPotentialSources>>&
                          dens,
                      const AssignmentMarginals& marg, int j,
                      double p_observed) {
    const int n = static_cast<int>(src.positions.size());
    std::vector<double> matched(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int q = 0; q < kPotentialSources; ++q) {
        s += marg.source_given_peak[q][j] * dens[i][q];
      }
      matched[i] = s;
    }
    if (!apply_weight_update(src.weights, matched, p_observed)) {
      ++weight_resets_;
      std::cerr << "beamtrack: weight underflow on source " << src.id
                << ", reset to uniform\n";
    }
  }

  void push_history(TrackedSource& src) {
    src.history.push_front(src.positions);
    std::size_t cap = static_cast<std::size_t>(std::max(cfg_.delay_updates, 0)) + 1;
    while (src.history.size() > cap) src.history.pop_back();
  }

  void remove_stale() {
    std::erase_if(sources_, [&](const TrackedSource& s) {
      return s.unobserved_s > cfg_.removal_horizon_s;
    });
  }

  void add_new(const Observation& obs, const AssignmentMarginals& marg) {
    for (int q = 0; q < kPotentialSources; ++q) {
      if (marg.new_prob[q] <= cfg_.new_source_threshold) continue;
      if (static_cast<int>(sources_.size()) >= cfg_.max_sources) return;
      const Vec3& dir = obs.sources[q].direction;
      bool duplicate = false;
      for (const auto& src : sources_) {
        if (src.confirmed &&
            angle_between_deg(src.estimate, dir) < cfg_.duplicate_cone_deg) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) continue;
      create_source(dir, marg.new_prob[q]);
    }
  }

  void create_source(const Vec3& direction, double initial_existence) {
    TrackedSource src;
    src.id = next_id_++;
    const int n = cfg_.particles_per_source;
    src.positions.resize(n);
    src.velocities.assign(n, Vec3{0.0, 0.0, 0.0});
    src.weights.assign(n, 1.0 / n);
    src.dyn_class.resize(n);
    for (int i = 0; i < n; ++i) {
      src.positions[i] =
          (direction + rng_.normal3() * cfg_.init_sigma).normalized();
      src.dyn_class[i] = class_for_index(i, n);
    }
    src.existence = initial_existence;
    src.activity = 0.5;
    src.estimate = direction;
    src.history.push_front(src.positions);
    sources_.push_back(std::move(src));
  }

  std::uint8_t class_for_index(int i, int n) const {
    double u = (i + 0.5) / n;
    if (u < cfg_.frac_stationary) return 0;
    if (u < cfg_.frac_stationary + cfg_.frac_const_velocity) return 1;
    return 2;
  }

  void resample_all() {
    for (auto& src : sources_) {
      if (!should_resample(src.weights, cfg_.resample_fraction)) continue;
      const int n = static_cast<int>(src.weights.size());
      std::vector<int> sel = systematic_resample(src.weights, rng_);
      std::vector<Vec3> pos(n), vel(n);
      for (int i = 0; i < n; ++i) {
        pos[i] = src.positions[sel[i]];
        vel[i] = src.velocities[sel[i]];
      }
      src.positions = std::move(pos);
      src.velocities = std::move(vel);
      for (auto& snap : src.history) {
        std::vector<Vec3> re(n);
        for (int i = 0; i < n; ++i) re[i] = snap[sel[i]];
        snap = std::move(re);
      }
      for (int i = 0; i < n; ++i) {
        src.weights[i] = 1.0 / n;
        src.dyn_class[i] = class_for_index(i, n);
      }
    }
  }

  TrackerConfig cfg_;
  Rng rng_;
  std::vector<TrackedSource> sources_;
  int next_id_ = 0;
  double last_time_ = 0.0;
  bool has_time_ = false;
  int weight_resets_ = 0;
};

}  // namespace beamtrack
