#pragma once

#include <algorithm>
#include <complex>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "beamtrack/fft.hpp"
#include "beamtrack/geometry.hpp"
#include "beamtrack/math.hpp"

namespace beamtrack {

struct StftConfig {
  int frame_length = 1024;   // L, power of two
  int hop = 512;             // 50% overlap
  double sample_rate = 48000.0;
  int frames_per_update = 4;

  void validate() const {
    if (frame_length <= 0 || (frame_length & (frame_length - 1)) != 0) {
      throw std::invalid_argument("stft: frame_length must be a power of two");
    }
    if (hop != frame_length / 2) {
      throw std::invalid_argument("stft: hop must equal frame_length / 2");
    }
    if (frames_per_update < 1) {
      throw std::invalid_argument("stft: frames_per_update must be >= 1");
    }
    if (!(sample_rate > 0.0)) {
      throw std::invalid_argument("stft: sample_rate must be positive");
    }
  }

  int bins() const { return frame_length / 2 + 1; }
  /// Seconds between emitted correlation sets.
  double update_period() const {
    return static_cast<double>(hop) * frames_per_update / sample_rate;
  }
};

struct FrontendConfig {
  StftConfig stft;

  double alpha_d = 0.1;    // SNR adaptation rate
  double gamma = 0.65;     // reverberation decay per frame
  double delta = 1.0;      // reverberation level
  double mag_floor = 1e-12;   // spectral magnitude floor before division
  double noise_floor = 1e-20; // lower bound on any noise power

  bool whiten = true;      // unit-magnitude cross-spectrum bins
  bool snr_weight = true;  // apply the per-bin SNR mask

  // Simplified minima-controlled noise tracking.
  double noise_smooth = 0.9;    // periodogram smoothing coefficient
  double noise_gate = 1.5;      // adapt while smoothed power <= gate * minimum
  double noise_window_s = 1.0;  // running-minimum window
  double noise_adapt = 0.95;    // noise recursion coefficient when adapting

  void validate() const {
    stft.validate();
    if (!(gamma >= 0.0 && gamma < 1.0)) {
      throw std::invalid_argument("frontend: gamma must be in [0, 1)");
    }
    if (delta < 0.0) {
      throw std::invalid_argument("frontend: delta must be >= 0");
    }
    if (!(alpha_d > 0.0 && alpha_d <= 1.0)) {
      throw std::invalid_argument("frontend: alpha_d must be in (0, 1]");
    }
  }
};

/// Whitened, SNR- and reverberation-weighted cross-correlations for all
/// microphone pairs over one update period. Values are circular in the lag
/// index; negative lags wrap. Immutable value type, cheap to hand across
/// threads.
struct CrossCorrelationSet {
  int mic_count = 0;
  int frame_length = 0;
  double timestamp = 0.0;     // seconds, end of the last frame in the update
  double frame_energy = 0.0;  // mean per-channel sample energy (diagnostic)
  std::vector<std::vector<double>> values;  // [pair][lag 0..L-1]

  int pair_count() const { return static_cast<int>(values.size()); }

  double value(int pair, int lag) const {
    int idx = lag % frame_length;
    if (idx < 0) idx += frame_length;
    return values[pair][idx];
  }
  void set(int pair, int lag, double v) {
    int idx = lag % frame_length;
    if (idx < 0) idx += frame_length;
    values[pair][idx] = v;
  }
};

/// A priori SNR to per-bin mask: 0 at zero SNR, 1/2 at unity, -> 1.
inline double snr_mask(double prior_snr) {
  return prior_snr / (prior_snr + 1.0);
}

/// Decision-directed a priori SNR: blends the previous frame's masked power
/// with the current instantaneous SNR at rate alpha_d.
inline double decision_directed_snr(double prev_mask, double prev_mag2,
                                    double mag2, double noise_power,
                                    double alpha_d) {
  return ((1.0 - alpha_d) * prev_mask * prev_mask * prev_mag2 +
          alpha_d * mag2) /
         noise_power;
}

/// Noise floor tracker: recursive periodogram smoothing plus a running
/// minimum; the noise recursion adapts only while the smoothed power stays
/// within `gate` times the tracked minimum, i.e. during low-energy periods.
class NoiseEstimator {
 public:
  NoiseEstimator(int bins, const FrontendConfig& cfg)
      : cfg_(cfg),
        smoothed_(bins, 0.0),
        noise_(bins, 0.0),
        current_min_(bins, 0.0) {
    int window_frames = std::max(
        1, static_cast<int>(cfg.noise_window_s * cfg.stft.sample_rate /
                            cfg.stft.hop));
    sub_len_ = std::max(1, window_frames / kSubWindows);
    minima_.assign(kSubWindows, std::vector<double>(bins, 0.0));
  }

  /// Consumes one frame's per-bin power and updates the noise estimate.
  void update(const std::vector<double>& psd) {
    const int bins = static_cast<int>(noise_.size());
    if (first_) {
      smoothed_ = psd;
      noise_ = psd;
      current_min_ = psd;
      for (auto& m : minima_) m = psd;
      first_ = false;
      return;
    }
    const double as = cfg_.noise_smooth;
    const double an = cfg_.noise_adapt;
    for (int k = 0; k < bins; ++k) {
      smoothed_[k] = as * smoothed_[k] + (1.0 - as) * psd[k];
      current_min_[k] = std::min(current_min_[k], smoothed_[k]);
      double floor = current_min_[k];
      for (const auto& m : minima_) floor = std::min(floor, m[k]);
      if (smoothed_[k] <= cfg_.noise_gate * floor) {
        noise_[k] = an * noise_[k] + (1.0 - an) * psd[k];
      }
    }
    if (++sub_count_ >= sub_len_) {
      minima_[sub_head_] = current_min_;
      sub_head_ = (sub_head_ + 1) % kSubWindows;
      current_min_ = smoothed_;
      sub_count_ = 0;
    }
  }

  const std::vector<double>& noise() const { return noise_; }

 private:
  static constexpr int kSubWindows = 8;
  FrontendConfig cfg_;
  std::vector<double> smoothed_;
  std::vector<double> noise_;
  std::vector<double> current_min_;
  std::vector<std::vector<double>> minima_;
  int sub_len_ = 1;
  int sub_count_ = 0;
  int sub_head_ = 0;
  bool first_ = true;
};

/// Per-channel spectral state: decision-directed a priori SNR mask plus the
/// exponential-decay reverberation term that inflates the effective noise
/// floor right after loud sounds.
class ChannelSpectralState {
 public:
  ChannelSpectralState(int bins, const FrontendConfig& cfg)
      : cfg_(cfg),
        noise_(bins, cfg),
        prev_weight_(bins, 0.0),
        prev_mag2_(bins, 0.0),
        reverb_(bins, 0.0),
        weight_(bins, 1.0) {}

  /// Runs the per-frame weighting chain on one spectrum. Afterwards
  /// weights() holds the per-bin mask for this frame.
  void process(const std::vector<std::complex<double>>& spectrum) {
    const int bins = static_cast<int>(prev_weight_.size());
    std::vector<double> psd(bins);
    for (int k = 0; k < bins; ++k) psd[k] = std::norm(spectrum[k]);
    noise_.update(psd);

    if (!cfg_.snr_weight) {
      std::fill(weight_.begin(), weight_.end(), 1.0);
      // Keep the reverberation state consistent even when masking is off.
      update_reverb(psd);
      return;
    }

    const auto& sigma2 = noise_.noise();
    for (int k = 0; k < bins; ++k) {
      double effective = sigma2[k] + reverb_[k];
      if (effective < cfg_.noise_floor) effective = cfg_.noise_floor;
      weight_[k] = snr_mask(decision_directed_snr(
          prev_weight_[k], prev_mag2_[k], psd[k], effective, cfg_.alpha_d));
    }
    update_reverb(psd);
  }

  const std::vector<double>& weights() const { return weight_; }
  const std::vector<double>& noise() const { return noise_.noise(); }
  const std::vector<double>& reverb() const { return reverb_; }

 private:
  void update_reverb(const std::vector<double>& psd) {
    const double gamma = cfg_.gamma;
    const double delta = cfg_.delta;
    for (std::size_t k = 0; k < reverb_.size(); ++k) {
      reverb_[k] = gamma * reverb_[k] +
                   (1.0 - gamma) * delta * weight_[k] * weight_[k] *
                       prev_mag2_[k];
      prev_weight_[k] = weight_[k];
      prev_mag2_[k] = psd[k];
    }
  }

  FrontendConfig cfg_;
  NoiseEstimator noise_;
  std::vector<double> prev_weight_;  // previous frame's mask
  std::vector<double> prev_mag2_;    // previous frame's |X|^2
  std::vector<double> reverb_;       // reverberation power estimate
  std::vector<double> weight_;       // current frame's mask
};

/// Streaming frontend: multichannel samples in, one CrossCorrelationSet out
/// per frames_per_update hops. Each channel's state is owned here and
/// mutated by the pushing thread only; emitted sets are immutable values.
class SpectralFrontend {
 public:
  SpectralFrontend(int channels, const FrontendConfig& cfg)
      : cfg_(cfg),
        channels_(channels),
        plan_(static_cast<std::size_t>(cfg.stft.frame_length)),
        window_(make_window(cfg.stft.frame_length)),
        buffers_(channels),
        spectra_(channels),
        weights_(channels) {
    cfg_.validate();
    if (channels < 2) {
      throw std::invalid_argument("frontend: need at least 2 channels");
    }
    for (int c = 0; c < channels; ++c) {
      states_.emplace_back(cfg.stft.bins(), cfg_);
    }
    const int pairs = channels * (channels - 1) / 2;
    acc_.assign(pairs,
                std::vector<std::complex<double>>(cfg.stft.bins(), 0.0));
  }

  int channels() const { return channels_; }
  const FrontendConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }

  /// Windowed one-sided spectrum of one frame (length L).
  std::vector<std::complex<double>> analyze_frame(
      const std::vector<double>& frame) const {
    if (static_cast<int>(frame.size()) != cfg_.stft.frame_length) {
      throw std::invalid_argument("analyze_frame: frame length mismatch");
    }
    std::vector<double> w(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) w[i] = frame[i] * window_[i];
    return real_spectrum(w.data(), w.size(), plan_);
  }

  /// Appends samples for all channels (equal lengths) and processes any
  /// complete frames. Completed correlation sets queue up for pop().
  void push(const std::vector<std::vector<double>>& chunk) {
    if (static_cast<int>(chunk.size()) != channels_) {
      throw std::invalid_argument("frontend: channel count mismatch");
    }
    const std::size_t n = chunk[0].size();
    for (const auto& ch : chunk) {
      if (ch.size() != n) {
        throw std::invalid_argument("frontend: ragged channel block");
      }
    }
    for (int c = 0; c < channels_; ++c) {
      buffers_[c].insert(buffers_[c].end(), chunk[c].begin(), chunk[c].end());
    }
    const std::size_t L = static_cast<std::size_t>(cfg_.stft.frame_length);
    const std::size_t hop = static_cast<std::size_t>(cfg_.stft.hop);
    while (buffers_[0].size() - read_pos_ >= L) {
      process_frame();
      read_pos_ += hop;
    }
    if (read_pos_ > 16 * L) {
      for (int c = 0; c < channels_; ++c) {
        buffers_[c].erase(buffers_[c].begin(),
                          buffers_[c].begin() + static_cast<long>(read_pos_));
      }
      read_pos_ = 0;
    }
  }

  bool pop(CrossCorrelationSet& out) {
    if (ready_.empty()) return false;
    out = std::move(ready_.front());
    ready_.pop_front();
    return true;
  }

  /// Raw circular cross-correlation of two one-sided spectra: equals the
  /// time-domain circular correlation sum_n x_i(n) x_j(n + tau). Used by the
  /// unweighted path and by equivalence checks against time-domain energies.
  static std::vector<double> plain_cross_correlation(
      const std::vector<std::complex<double>>& xi,
      const std::vector<std::complex<double>>& xj, const Fft& plan) {
    const std::size_t L = plan.size();
    std::vector<std::complex<double>> cross(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
      cross[k] = std::conj(xi[k]) * xj[k];
    }
    std::vector<double> r(L);
    half_spectrum_inverse(cross, r.data(), L, plan, 1.0 / static_cast<double>(L));
    return r;
  }

  /// Whitened, mask-weighted cross-correlation of one frame pair: each bin
  /// contributes a unit-modulus phasor scaled by the two masks.
  static std::vector<double> weighted_cross_correlation(
      const std::vector<std::complex<double>>& xi,
      const std::vector<std::complex<double>>& xj,
      const std::vector<double>& wi, const std::vector<double>& wj,
      const Fft& plan, double mag_floor = 1e-12) {
    const std::size_t L = plan.size();
    std::vector<std::complex<double>> cross(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
      double denom = std::max(std::abs(xi[k]), mag_floor) *
                     std::max(std::abs(xj[k]), mag_floor);
      cross[k] = wi[k] * wj[k] * std::conj(xi[k]) * xj[k] / denom;
    }
    std::vector<double> r(L);
    half_spectrum_inverse(cross, r.data(), L, plan, 1.0);
    return r;
  }

 private:
  static std::vector<double> make_window(int n) {
    // Periodic Hann: tapered, 50%-overlap partition of unity.
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    }
    return w;
  }

  void process_frame() {
    const int L = cfg_.stft.frame_length;
    const int bins = cfg_.stft.bins();
    std::vector<double> frame(L);
    for (int c = 0; c < channels_; ++c) {
      double energy = 0.0;
      for (int i = 0; i < L; ++i) {
        frame[i] = buffers_[c][read_pos_ + static_cast<std::size_t>(i)];
        energy += frame[i] * frame[i];
      }
      update_energy_ += energy / channels_;
      spectra_[c] = analyze_frame(frame);
      states_[c].process(spectra_[c]);
      weights_[c] = states_[c].weights();
    }
    samples_consumed_ += cfg_.stft.hop;

    int pair = 0;
    for (int i = 0; i < channels_; ++i) {
      for (int j = i + 1; j < channels_; ++j, ++pair) {
        auto& acc = acc_[pair];
        for (int k = 0; k < bins; ++k) {
          std::complex<double> cross = std::conj(spectra_[i][k]) * spectra_[j][k];
          if (cfg_.whiten) {
            double denom = std::max(std::abs(spectra_[i][k]), cfg_.mag_floor) *
                           std::max(std::abs(spectra_[j][k]), cfg_.mag_floor);
            cross /= denom;
          }
          if (cfg_.snr_weight) {
            cross *= weights_[i][k] * weights_[j][k];
          }
          acc[k] += cross;
        }
      }
    }

    if (++frames_accumulated_ >= cfg_.stft.frames_per_update) {
      emit_update();
    }
  }

  void emit_update() {
    const int L = cfg_.stft.frame_length;
    CrossCorrelationSet set;
    set.mic_count = channels_;
    set.frame_length = L;
    // End of the last frame in this update, in seconds.
    set.timestamp =
        static_cast<double>(samples_consumed_ + cfg_.stft.hop) /
        cfg_.stft.sample_rate;
    set.frame_energy = update_energy_ / cfg_.stft.frames_per_update;
    set.values.assign(acc_.size(), std::vector<double>(L, 0.0));
    // The whitened path keeps the dimensionless bin sum; the raw path is
    // scaled to the true circular correlation.
    const double scale = (cfg_.whiten ? 1.0 : 1.0 / static_cast<double>(L)) /
                         cfg_.stft.frames_per_update;
    for (std::size_t p = 0; p < acc_.size(); ++p) {
      half_spectrum_inverse(acc_[p], set.values[p].data(),
                            static_cast<std::size_t>(L), plan_, scale);
      std::fill(acc_[p].begin(), acc_[p].end(), std::complex<double>(0.0));
    }
    frames_accumulated_ = 0;
    update_energy_ = 0.0;
    ready_.push_back(std::move(set));
  }

  FrontendConfig cfg_;
  int channels_;
  Fft plan_;
  std::vector<double> window_;
  std::vector<std::vector<double>> buffers_;
  std::vector<ChannelSpectralState> states_;
  std::vector<std::vector<std::complex<double>>> spectra_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<std::complex<double>>> acc_;
  std::deque<CrossCorrelationSet> ready_;
  std::size_t read_pos_ = 0;
  int frames_accumulated_ = 0;
  long long samples_consumed_ = 0;
  double update_energy_ = 0.0;
};

}  // namespace beamtrack
