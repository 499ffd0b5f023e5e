#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <numeric>

#include "beamtrack/rng.hpp"
#include "beamtrack/spectral.hpp"

using namespace beamtrack;

namespace {

FrontendConfig small_config(int frame_length = 1024) {
  FrontendConfig cfg;
  cfg.stft.frame_length = frame_length;
  cfg.stft.hop = frame_length / 2;
  return cfg;
}

std::vector<double> random_frame(std::size_t n, Rng& rng, double amp = 1.0) {
  std::vector<double> x(n);
  for (auto& v : x) v = amp * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("stft config invariants") {
  StftConfig bad;
  bad.frame_length = 1000;  // not a power of two
  bad.hop = 500;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.frame_length = 1024;
  bad.hop = 256;  // not 50% overlap
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(StftConfig{}.update_period() ==
        Catch::Approx(2048.0 / 48000.0));
}

TEST_CASE("analyze_frame basics") {
  SpectralFrontend fe(2, small_config());
  const int L = 1024;

  SECTION("all-zero frame gives an all-zero spectrum") {
    auto spec = fe.analyze_frame(std::vector<double>(L, 0.0));
    for (const auto& b : spec) CHECK(std::abs(b) == 0.0);
  }

  SECTION("pure sinusoid concentrates at its bin") {
    const int k0 = 100;
    std::vector<double> x(L);
    for (int n = 0; n < L; ++n) x[n] = std::cos(2.0 * kPi * k0 * n / L);
    auto spec = fe.analyze_frame(x);
    double total = 0.0, near = 0.0;
    for (int k = 0; k <= L / 2; ++k) {
      double p = std::norm(spec[k]);
      total += p;
      if (std::abs(k - k0) <= 2) near += p;  // window mainlobe
    }
    CHECK(near / total > 0.99);
  }

  SECTION("Parseval holds for the windowed frame") {
    Rng rng(3);
    auto x = random_frame(L, rng);
    auto spec = fe.analyze_frame(x);
    double time_energy = 0.0;
    for (int n = 0; n < L; ++n) {
      double w = fe.window()[n] * x[n];
      time_energy += w * w;
    }
    double freq_energy = std::norm(spec[0]) + std::norm(spec[L / 2]);
    for (int k = 1; k < L / 2; ++k) freq_energy += 2.0 * std::norm(spec[k]);
    freq_energy /= L;
    CHECK(freq_energy == Catch::Approx(time_energy).epsilon(1e-9));
  }

  SECTION("frame length mismatch is rejected") {
    CHECK_THROWS_AS(fe.analyze_frame(std::vector<double>(L / 2, 0.0)),
                    std::invalid_argument);
  }
}

TEST_CASE("noise estimator") {
  FrontendConfig cfg = small_config();

  SECTION("constant power converges to that power") {
    NoiseEstimator est(4, cfg);
    std::vector<double> psd(4, 2.5);
    for (int f = 0; f < 300; ++f) est.update(psd);
    for (double v : est.noise()) {
      CHECK(v == Catch::Approx(2.5).epsilon(0.05));
    }
  }

  SECTION("zero input stays at zero") {
    NoiseEstimator est(4, cfg);
    std::vector<double> psd(4, 0.0);
    for (int f = 0; f < 50; ++f) est.update(psd);
    for (double v : est.noise()) CHECK(v <= 1e-20);
  }

  SECTION("a loud burst barely moves the floor") {
    // Two runs over the same noise draws, one with a 10x power burst in the
    // middle; the estimate must stay within 2x of the noise-only run.
    Rng rng_a(7), rng_b(7);
    NoiseEstimator base(8, cfg), burst(8, cfg);
    auto draw = [](Rng& r, double p) {
      // Periodogram of Gaussian noise: exponentially distributed bins.
      return -p * std::log(1.0 - r.uniform());
    };
    std::vector<double> psd(8);
    for (int f = 0; f < 400; ++f) {
      for (auto& v : psd) v = draw(rng_a, 1.0);
      base.update(psd);
    }
    for (int f = 0; f < 400; ++f) {
      bool in_burst = f >= 200 && f < 260;
      for (auto& v : psd) v = draw(rng_b, 1.0) + (in_burst ? 10.0 : 0.0);
      burst.update(psd);
    }
    double base_mean = std::accumulate(base.noise().begin(),
                                       base.noise().end(), 0.0) / 8.0;
    double burst_mean = std::accumulate(burst.noise().begin(),
                                        burst.noise().end(), 0.0) / 8.0;
    CHECK(burst_mean <= 2.0 * base_mean);
  }
}

TEST_CASE("snr mask and decision-directed estimate") {
  CHECK(snr_mask(1.0) == Catch::Approx(0.5));
  CHECK(snr_mask(0.0) == 0.0);
  // First frame: no history, |X|^2 equal to the noise power.
  double xi = decision_directed_snr(0.0, 0.0, 4.0, 4.0, 0.1);
  CHECK(xi == Catch::Approx(0.1));
  CHECK(snr_mask(xi) == Catch::Approx(1.0 / 11.0).epsilon(1e-12));

  // Monotone in the prior SNR and bounded in [0, 1].
  double prev = 0.0;
  for (double s = 0.0; s < 50.0; s += 0.5) {
    double m = snr_mask(s);
    CHECK(m >= prev);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    prev = m;
  }
}

TEST_CASE("first processed frame reproduces the cold-start mask") {
  // On the very first frame the noise estimate equals the frame power, so
  // the prior SNR collapses to alpha_d and the mask to alpha_d/(alpha_d+1).
  FrontendConfig cfg = small_config(256);
  ChannelSpectralState state(129, cfg);
  std::vector<std::complex<double>> spec(129, {2.0, 0.0});
  state.process(spec);
  for (double w : state.weights()) {
    CHECK(w == Catch::Approx(0.1 / 1.1).epsilon(1e-9));
  }
}

TEST_CASE("reverberation state") {
  FrontendConfig cfg = small_config(256);
  cfg.snr_weight = false;  // mask pinned to 1 so the recursion is exact

  SECTION("delta = 0 keeps the reverberation term at zero") {
    cfg.delta = 0.0;
    ChannelSpectralState state(4, cfg);
    std::vector<std::complex<double>> spec(4, {3.0, 0.0});
    for (int f = 0; f < 20; ++f) state.process(spec);
    for (double v : state.reverb()) CHECK(v == 0.0);
  }

  SECTION("first recursion step and geometric convergence") {
    cfg.delta = 0.8;
    cfg.gamma = 0.65;
    ChannelSpectralState state(4, cfg);
    std::vector<std::complex<double>> spec(4, {3.0, 0.0});
    const double p = 9.0;

    state.process(spec);  // no previous frame: reverb still zero
    for (double v : state.reverb()) CHECK(v == 0.0);

    state.process(spec);  // one step from zero
    for (double v : state.reverb()) {
      CHECK(v == Catch::Approx((1.0 - 0.65) * 0.8 * p).epsilon(1e-12));
    }

    for (int f = 0; f < 80; ++f) state.process(spec);
    for (double v : state.reverb()) {
      CHECK(v == Catch::Approx(0.8 * p).epsilon(1e-6));  // delta * p limit
    }
  }

  SECTION("decays toward zero after silence") {
    cfg.delta = 1.0;
    cfg.gamma = 0.65;
    ChannelSpectralState state(4, cfg);
    std::vector<std::complex<double>> loud(4, {3.0, 0.0});
    std::vector<std::complex<double>> quiet(4, {0.0, 0.0});
    for (int f = 0; f < 10; ++f) state.process(loud);
    double peak = state.reverb()[0];
    REQUIRE(peak > 0.0);
    // Ten decay time constants wipe out all but ~e^-10 of the peak.
    int frames = static_cast<int>(10.0 / (1.0 - cfg.gamma));
    for (int f = 0; f < frames; ++f) state.process(quiet);
    for (double v : state.reverb()) {
      CHECK(v >= 0.0);
      CHECK(v < 1e-4 * peak + 1e-12);
    }
  }
}

TEST_CASE("cross-correlation of one frame pair") {
  const std::size_t L = 512;
  Fft plan(L);
  Rng rng(21);
  std::vector<double> ones(L / 2 + 1, 1.0);

  SECTION("identical channels peak at zero lag with one weight per bin") {
    auto x = random_frame(L, rng);
    auto spec = real_spectrum(x.data(), L, plan);
    auto r = SpectralFrontend::weighted_cross_correlation(spec, spec, ones,
                                                          ones, plan);
    int argmax = 0;
    for (std::size_t t = 0; t < L; ++t) {
      if (r[t] > r[argmax]) argmax = static_cast<int>(t);
    }
    CHECK(argmax == 0);
    CHECK(r[0] == Catch::Approx(static_cast<double>(L)).epsilon(1e-9));
  }

  SECTION("circular shift moves the peak to the shift") {
    for (int shift : {1, 5, 37, -12}) {
      auto x = random_frame(L, rng);
      int wrapped = ((shift % static_cast<int>(L)) + static_cast<int>(L)) %
                    static_cast<int>(L);
      std::vector<double> y(L);
      for (std::size_t n = 0; n < L; ++n) {
        // y lags x by `shift`: y(n) = x(n - shift), circularly.
        y[n] = x[(n + L - static_cast<std::size_t>(wrapped)) % L];
      }
      auto xs = real_spectrum(x.data(), L, plan);
      auto ys = real_spectrum(y.data(), L, plan);
      auto r = SpectralFrontend::weighted_cross_correlation(xs, ys, ones,
                                                            ones, plan);
      int argmax = 0;
      for (std::size_t t = 0; t < L; ++t) {
        if (r[t] > r[argmax]) argmax = static_cast<int>(t);
      }
      CHECK(argmax == wrapped);
    }
  }

  SECTION("independent noise stays far below the self peak") {
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_frame(L, rng);
      auto y = random_frame(L, rng);
      auto xs = real_spectrum(x.data(), L, plan);
      auto ys = real_spectrum(y.data(), L, plan);
      auto r = SpectralFrontend::weighted_cross_correlation(xs, ys, ones,
                                                            ones, plan);
      double peak = 0.0;
      for (double v : r) peak = std::max(peak, std::abs(v));
      CHECK(peak <= 0.2 * static_cast<double>(L));
    }
  }

  SECTION("magnitude bound: |R| <= sum of bin weights") {
    auto x = random_frame(L, rng);
    auto y = random_frame(L, rng);
    auto xs = real_spectrum(x.data(), L, plan);
    auto ys = real_spectrum(y.data(), L, plan);
    std::vector<double> wi(L / 2 + 1), wj(L / 2 + 1);
    for (auto& v : wi) v = rng.uniform();
    for (auto& v : wj) v = rng.uniform();
    auto r = SpectralFrontend::weighted_cross_correlation(xs, ys, wi, wj,
                                                          plan);
    // Two-sided weight sum from the one-sided arrays.
    double bound = wi[0] * wj[0] + wi[L / 2] * wj[L / 2];
    for (std::size_t k = 1; k < L / 2; ++k) bound += 2.0 * wi[k] * wj[k];
    for (double v : r) CHECK(std::abs(v) <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("frequency-domain energy equals time-domain delay-and-sum energy") {
  // Whitening and weighting disabled, circular shifts: the constant term
  // plus twice the pairwise correlations must match the direct energy of
  // the shifted-and-summed signals.
  const std::size_t L = 256;
  const int mics = 4;
  Fft plan(L);
  Rng rng(1234);

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> x(mics);
    std::vector<std::vector<std::complex<double>>> spec(mics);
    for (int m = 0; m < mics; ++m) {
      x[m] = random_frame(L, rng);
      spec[m] = real_spectrum(x[m].data(), L, plan);
    }
    std::vector<int> tau(mics);
    for (int m = 0; m < mics; ++m) {
      tau[m] = static_cast<int>(rng.uniform(0.0, 40.0)) - 20;
    }

    double time_energy = 0.0;
    for (std::size_t n = 0; n < L; ++n) {
      double y = 0.0;
      for (int m = 0; m < mics; ++m) {
        int idx = (static_cast<int>(n) - tau[m]) % static_cast<int>(L);
        if (idx < 0) idx += static_cast<int>(L);
        y += x[m][static_cast<std::size_t>(idx)];
      }
      time_energy += y * y;
    }

    double constant = 0.0;  // sum of per-channel energies, shift-invariant
    for (int m = 0; m < mics; ++m) {
      for (double v : x[m]) constant += v * v;
    }
    double freq_energy = constant;
    for (int i = 0; i < mics; ++i) {
      for (int j = i + 1; j < mics; ++j) {
        auto r = SpectralFrontend::plain_cross_correlation(spec[i], spec[j],
                                                           plan);
        int lag = (tau[i] - tau[j]) % static_cast<int>(L);
        if (lag < 0) lag += static_cast<int>(L);
        freq_energy += 2.0 * r[static_cast<std::size_t>(lag)];
      }
    }
    CHECK(std::abs(freq_energy - time_energy) <=
          1e-6 * std::abs(time_energy));
  }
}

TEST_CASE("streaming frontend emits one set per four hops") {
  FrontendConfig cfg = small_config(256);
  SpectralFrontend fe(2, cfg);
  Rng rng(5);
  CrossCorrelationSet set;

  // Three frames' worth of samples: not enough for an update.
  std::vector<std::vector<double>> chunk(2);
  chunk[0] = random_frame(256 + 2 * 128, rng);
  chunk[1] = chunk[0];
  fe.push(chunk);
  CHECK_FALSE(fe.pop(set));

  // One more hop completes the fourth frame.
  chunk[0] = random_frame(128, rng);
  chunk[1] = chunk[0];
  fe.push(chunk);
  REQUIRE(fe.pop(set));
  CHECK(set.pair_count() == 1);
  CHECK(set.frame_length == 256);
  CHECK(set.timestamp == Catch::Approx((4 * 128 + 128) / 48000.0));

  // Identical channels: whitened correlation peaks at zero lag.
  double best = -1e9;
  int arg = -1;
  for (int t = 0; t < 256; ++t) {
    if (set.value(0, t) > best) {
      best = set.value(0, t);
      arg = t;
    }
  }
  CHECK(arg == 0);

  CHECK_FALSE(fe.pop(set));
  // Ragged or wrong-channel pushes are rejected.
  CHECK_THROWS_AS(fe.push({{0.0}}), std::invalid_argument);
}
