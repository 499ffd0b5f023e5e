#include <catch2/catch_amalgamated.hpp>

#include "beamtrack/simulator.hpp"
#include "beamtrack/spectral.hpp"

using namespace beamtrack;

namespace {

ArrayGeometry cube_geometry(double half = 0.08) {
  std::vector<Vec3> mics;
  mics.push_back({+half, +half, +half});
  mics.push_back({+half, -half, -half});
  mics.push_back({-half, +half, -half});
  mics.push_back({-half, -half, +half});
  mics.push_back({+half, +half, -half});
  mics.push_back({+half, -half, +half});
  mics.push_back({-half, +half, +half});
  mics.push_back({-half, -half, -half});
  return ArrayGeometry{std::move(mics)};
}

SourceScript static_source(SignalKind kind, double az, double el,
                           double dist) {
  SourceScript s;
  s.kind = kind;
  s.trajectory = {{0.0, direction_from_angles_deg(az, el), dist}};
  return s;
}

}  // namespace

TEST_CASE("empty scene with zero noise renders silence") {
  SceneSpec spec;
  spec.duration = 0.2;
  RenderedScene scene = render_scene(spec, cube_geometry());
  for (const auto& ch : scene.channels) {
    REQUIRE(ch.size() == static_cast<std::size_t>(0.2 * 48000));
    for (double v : ch) REQUIRE(v == 0.0);
  }
}

TEST_CASE("scene validation") {
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources.push_back(static_source(SignalKind::noise, 0.0, 0.0, 0.3));
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);  // too close

  spec.sources[0].trajectory[0].distance_m = 2.0;
  spec.sources[0].on_intervals = {{0.5, 1.5}};  // outside the duration
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec.sources[0].on_intervals = {{0.2, 0.8}};
  CHECK_NOTHROW(spec.validate());

  spec.duration = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("equidistant microphones receive identical signals") {
  // Source along +z of a 4-mic array whose first two mics are mirror
  // images; without noise their channels must agree to interpolation
  // accuracy.
  ArrayGeometry g({{0.08, 0.0, 0.0},
                   {-0.08, 0.0, 0.0},
                   {0.0, 0.08, 0.0},
                   {0.0, -0.05, 0.06}});
  SceneSpec spec;
  spec.duration = 0.3;
  spec.seed = 4;
  spec.sources.push_back(static_source(SignalKind::noise, 90.0, 0.0, 2.0));
  RenderedScene scene = render_scene(spec, g);
  // Mic 0 and mic 1 are both at distance sqrt(4 + 0.0064) from the source.
  for (std::size_t n = 0; n < scene.channels[0].size(); ++n) {
    REQUIRE(scene.channels[0][n] ==
            Catch::Approx(scene.channels[1][n]).margin(1e-9));
  }
}

TEST_CASE("rendered inter-channel delay matches the geometric delay") {
  ArrayGeometry g = cube_geometry();
  SceneSpec spec;
  spec.duration = 0.5;
  spec.seed = 11;
  spec.sources.push_back(static_source(SignalKind::noise, 30.0, 10.0, 3.0));
  RenderedScene scene = render_scene(spec, g);

  const std::size_t L = 4096;
  Fft plan(L);
  const std::size_t off = 8000;
  Vec3 dir = direction_from_angles_deg(30.0, 10.0);

  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {2, 5}, {3, 7}}) {
    auto xi = real_spectrum(scene.channels[i].data() + off, L, plan);
    auto xj = real_spectrum(scene.channels[j].data() + off, L, plan);
    auto r = SpectralFrontend::plain_cross_correlation(xi, xj, plan);
    int argmax = 0;
    for (std::size_t t = 0; t < L; ++t) {
      if (r[t] > r[argmax]) argmax = static_cast<int>(t);
    }
    int lag = argmax <= static_cast<int>(L) / 2 ? argmax
                                                : argmax - static_cast<int>(L);
    // Sub-sample peak via parabolic interpolation.
    double ym = r[(argmax + L - 1) % L], y0 = r[argmax],
           yp = r[(argmax + 1) % L];
    double frac = 0.5 * (ym - yp) / (ym - 2.0 * y0 + yp);
    double measured = lag + frac;
    double expected = near_field_tdoa(g, dir, 3.0, i, j);
    CHECK(measured == Catch::Approx(expected).margin(0.5));
  }
}

TEST_CASE("amplitude falls off as one over distance") {
  // Probed with a tone: the fractional-delay interpolator is flat to well
  // under 1% at low frequency, so the level ratio isolates the 1/d law.
  ArrayGeometry g = cube_geometry();
  auto rms_at = [&](double dist) {
    SceneSpec spec;
    spec.duration = 0.4;
    spec.seed = 21;  // same emitted signal for both distances
    spec.sources.push_back(static_source(SignalKind::tone, 45.0, 0.0, dist));
    RenderedScene scene = render_scene(spec, g);
    std::vector<double> rms(g.mic_count(), 0.0);
    const std::size_t skip = 2000;
    for (int m = 0; m < g.mic_count(); ++m) {
      double e = 0.0;
      for (std::size_t n = skip; n < scene.channels[m].size(); ++n) {
        e += scene.channels[m][n] * scene.channels[m][n];
      }
      rms[m] = std::sqrt(e / (scene.channels[m].size() - skip));
    }
    return rms;
  };
  auto near = rms_at(3.0);
  auto far = rms_at(6.0);
  Vec3 src3 = direction_from_angles_deg(45.0, 0.0) * 3.0;
  Vec3 src6 = direction_from_angles_deg(45.0, 0.0) * 6.0;
  for (int m = 0; m < g.mic_count(); ++m) {
    double expected = (src3 - g.mic_positions[m]).norm() /
                      (src6 - g.mic_positions[m]).norm();
    CHECK(far[m] / near[m] == Catch::Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("rendering is deterministic under a fixed seed") {
  SceneSpec spec;
  spec.duration = 0.25;
  spec.seed = 31;
  spec.noise_level = 0.05;
  spec.reverb = ReverbSpec{ReverbSpec::decay_from_rt60(0.35), 0.3, 400.0};
  spec.sources.push_back(static_source(SignalKind::speech, -120.0, 20.0, 2.0));
  ArrayGeometry g = cube_geometry();
  RenderedScene a = render_scene(spec, g);
  RenderedScene b = render_scene(spec, g);
  for (int m = 0; m < g.mic_count(); ++m) {
    REQUIRE(a.channels[m] == b.channels[m]);
  }
}

TEST_CASE("trajectory interpolation") {
  SourceScript s;
  s.kind = SignalKind::noise;
  s.trajectory = {{0.0, direction_from_angles_deg(0.0, 0.0), 2.0},
                  {1.0, direction_from_angles_deg(90.0, 0.0), 3.0}};
  s.on_intervals = {{0.0, 0.5}};

  SECTION("keypoints are reproduced exactly") {
    CHECK(angle_between_deg(s.direction_at(0.0),
                            direction_from_angles_deg(0, 0)) < 1e-12);
    CHECK(angle_between_deg(s.direction_at(1.0),
                            direction_from_angles_deg(90, 0)) < 1e-12);
    CHECK(s.distance_at(0.0) == 2.0);
    CHECK(s.distance_at(1.0) == 3.0);
  }
  SECTION("midway between 90-degree keypoints lies at 45 degrees") {
    Vec3 mid = s.direction_at(0.5);
    CHECK(std::abs(mid.norm() - 1.0) < 1e-12);
    CHECK(azimuth_deg(mid) == Catch::Approx(45.0).margin(1e-9));
    CHECK(s.distance_at(0.5) == Catch::Approx(2.5));
  }
  SECTION("activity gating follows the intervals") {
    CHECK(s.active_at(0.25));
    CHECK_FALSE(s.active_at(0.75));
  }
}

TEST_CASE("ground truth lookup") {
  SceneSpec spec;
  spec.duration = 1.0;
  spec.sources.push_back(static_source(SignalKind::noise, 10.0, 0.0, 2.0));
  spec.sources[0].on_intervals = {{0.0, 0.4}};

  auto gt = ground_truth_at(spec, 0.2);
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].active);
  CHECK(angle_between_deg(gt[0].direction,
                          direction_from_angles_deg(10, 0)) < 1e-12);
  CHECK_FALSE(ground_truth_at(spec, 0.6)[0].active);
  CHECK_THROWS_AS(ground_truth_at(spec, -0.1), std::domain_error);
  CHECK_THROWS_AS(ground_truth_at(spec, 1.5), std::domain_error);
}

TEST_CASE("rendered ground truth covers the duration at the update cadence") {
  SceneSpec spec;
  spec.duration = 0.5;
  spec.sources.push_back(static_source(SignalKind::noise, 0.0, 0.0, 2.0));
  RenderedScene scene = render_scene(spec, cube_geometry());
  REQUIRE_FALSE(scene.ground_truth.empty());
  CHECK(scene.ground_truth.front().t == 0.0);
  CHECK(scene.ground_truth.back().t <= 0.5);
  // One entry per source per tick.
  std::size_t ticks = scene.ground_truth.size() / spec.sources.size();
  CHECK(ticks >= 11);
}
