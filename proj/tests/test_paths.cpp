#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfg/paths.hpp"
#include "mfg/reference.hpp"
#include "mfg/rng.hpp"

using namespace mfg;

TEST_CASE("time grid arithmetic") {
  const TimeGrid g(0.0, 1.0, 4);
  CHECK(g.dt() == doctest::Approx(0.25));
  CHECK(g.nodes() == 5);
  CHECK(g.time(0) == doctest::Approx(0.0));
  CHECK(g.time(4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(TimeGrid(1.0, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("noise increments are the tagged counter draws") {
  const TimeGrid g(0.0, 1.0, 3);
  const auto noise = sample_noise(g, 2, 4, 99);
  const double root_dt = std::sqrt(g.dt());
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k < 3; ++k) {
      CHECK(noise.common(s, k) ==
            root_dt * normal01(99, Stream::common_noise, static_cast<std::uint32_t>(s),
                               static_cast<std::uint32_t>(k)));
      for (int j = 0; j < 4; ++j) {
        CHECK(noise.idio(s, k, j) ==
              root_dt * normal01(99, Stream::idio_noise, static_cast<std::uint32_t>(s),
                                 static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)));
      }
    }
  }
}

TEST_CASE("common increments ignore the particle count") {
  const TimeGrid g(0.0, 1.0, 5);
  const auto small = sample_noise(g, 3, 10, 7);
  const auto large = sample_noise(g, 3, 500, 7);
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 5; ++k) CHECK(small.common(s, k) == large.common(s, k));
  // And the idiosyncratic draws for shared particles agree too.
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 5; ++k)
      for (int j = 0; j < 10; ++j) CHECK(small.idio(s, k, j) == large.idio(s, k, j));
}

TEST_CASE("noise increments have the Brownian scale") {
  const TimeGrid g(0.0, 2.0, 8);
  const auto noise = sample_noise(g, 16, 400, 3);
  double s1 = 0, s2 = 0;
  const int n = 16 * 8 * 400;
  for (int s = 0; s < 16; ++s)
    for (int k = 0; k < 8; ++k)
      for (int j = 0; j < 400; ++j) {
        s1 += noise.idio(s, k, j);
        s2 += noise.idio(s, k, j) * noise.idio(s, k, j);
      }
  const double dt = g.dt();
  CHECK(std::abs(s1 / n) < 5.0 * std::sqrt(dt / n));
  CHECK(std::abs(s2 / n - dt) < 5.0 * dt * std::sqrt(2.0 / n));
}

TEST_CASE("initial samples follow the requested distribution") {
  const auto dirac = sample_initial(InitialDistribution::dirac(1.5), 2, 50, 11);
  for (double v : dirac) CHECK(v == 1.5);

  const auto gauss = sample_initial(InitialDistribution::gaussian(2.0, 0.5), 8, 2000, 11);
  double mean = 0;
  for (double v : gauss) mean += v;
  mean /= static_cast<double>(gauss.size());
  CHECK(std::abs(mean - 2.0) < 5.0 * 0.5 / std::sqrt(static_cast<double>(gauss.size())));

  const auto unif = sample_initial(InitialDistribution::uniform(-1.0, 1.0), 4, 500, 11);
  for (double v : unif) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("zero control reduces to a pure diffusion") {
  const TimeGrid g(0.0, 1.0, 10);
  const auto noise = sample_noise(g, 3, 20, 21);
  const auto init = sample_initial(InitialDistribution::gaussian(0.0, 1.0), 3, 20, 21);
  const auto control = ControlField::constant(g, FeatureBasis::standard(), 0.0);
  const double sigma = 0.7, sigma_tilde = 0.4;
  const auto paths = propagate(control, init, noise, sigma, sigma_tilde);

  for (int s = 0; s < 3; ++s) {
    for (int j = 0; j < 20; ++j) {
      double x = init[static_cast<std::size_t>(s) * 20 + j];
      CHECK(paths.states(s, 0)[j] == x);
      for (int k = 0; k < 10; ++k) {
        x += sigma * noise.idio(s, k, j) + sigma_tilde * noise.common(s, k);
        CHECK(paths.states(s, k + 1)[j] == doctest::Approx(x).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("constant drift moves the conditional mean linearly") {
  const TimeGrid g(0.0, 1.0, 20);
  const int nc = 6, np = 4000;
  const auto noise = sample_noise(g, nc, np, 31);
  const auto init = sample_initial(InitialDistribution::dirac(0.5), nc, np, 31);
  // alpha = 1 everywhere: dX = dt + sigma dW.
  const auto control = ControlField::constant(g, FeatureBasis::standard(), 1.0);
  const auto paths = propagate(control, init, noise, 0.3, 0.0);
  for (int s = 0; s < nc; ++s) {
    for (int k = 0; k <= 20; ++k) {
      const double expect = 0.5 + g.time(k);
      CHECK(paths.mean(s, k) == doctest::Approx(expect).epsilon(0.02));
    }
  }
}

TEST_CASE("mean-reverting feedback matches the recursion exactly") {
  // alpha = mbar - x pulls every particle toward the running conditional
  // mean; verify one step of the update by hand.
  const TimeGrid g(0.0, 0.5, 5);
  const int nc = 2, np = 8;
  const auto noise = sample_noise(g, nc, np, 41);
  const auto init = sample_initial(InitialDistribution::gaussian(1.0, 0.3), nc, np, 41);
  ControlField control(g, FeatureBasis::standard());
  for (int k = 0; k <= 5; ++k) {
    auto row = control.row(k);
    row[0] = 0.0;   // 1
    row[1] = -1.0;  // x
    row[2] = 1.0;   // mbar
  }
  const double sigma = 0.2, sigma_tilde = 0.1;
  const auto paths = propagate(control, init, noise, sigma, sigma_tilde);

  for (int s = 0; s < nc; ++s) {
    for (int k = 0; k < 5; ++k) {
      const double mbar = paths.mean(s, k);
      for (int j = 0; j < np; ++j) {
        const double x = paths.states(s, k)[j];
        const double alpha = -x + mbar;
        const double next =
            x + alpha * g.dt() + sigma * noise.idio(s, k, j) + sigma_tilde * noise.common(s, k);
        CHECK(paths.states(s, k + 1)[j] == doctest::Approx(next).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("parallel propagation matches the serial reference bitwise") {
  const TimeGrid g(0.0, 1.0, 12);
  const int nc = 5, np = 64;
  const auto noise = sample_noise(g, nc, np, 51);
  const auto init = sample_initial(InitialDistribution::gaussian(0.0, 1.0), nc, np, 51);
  ControlField control(g, FeatureBasis::extended());
  for (int k = 0; k <= 12; ++k) {
    auto row = control.row(k);
    row[0] = 0.1;
    row[1] = -0.8;
    row[3] = 0.2;  // mbar
    row[5] = 0.05;  // x * mbar
  }
  const auto par = propagate(control, init, noise, 0.5, 0.3);
  const auto ser = reference::propagate(control, init, noise, 0.5, 0.3);
  REQUIRE(par.x.size() == ser.x.size());
  for (std::size_t i = 0; i < par.x.size(); ++i) CHECK(par.x[i] == ser.x[i]);
  for (std::size_t i = 0; i < par.mbar.size(); ++i) {
    CHECK(par.mbar[i] == ser.mbar[i]);
    CHECK(par.m2[i] == ser.m2[i]);
  }
}

TEST_CASE("running moments agree with the stored states") {
  const TimeGrid g(0.0, 1.0, 6);
  const auto noise = sample_noise(g, 3, 30, 61);
  const auto init = sample_initial(InitialDistribution::uniform(-1.0, 1.0), 3, 30, 61);
  const auto control = ControlField::constant(g, FeatureBasis::standard(), 0.2);
  const auto paths = propagate(control, init, noise, 1.0, 0.5);
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k <= 6; ++k) {
      double m1 = 0, m2 = 0;
      for (double x : paths.states(s, k)) {
        m1 += x;
        m2 += x * x;
      }
      m1 /= 30.0;
      m2 /= 30.0;
      CHECK(paths.mean(s, k) == doctest::Approx(m1).epsilon(1e-12));
      CHECK(paths.second(s, k) == doctest::Approx(m2).epsilon(1e-12));
      const auto cloud = measure_at(paths, s, k);
      CHECK(cloud.mean() == doctest::Approx(m1).epsilon(1e-12));
    }
  }
}

TEST_CASE("propagation on a frozen flow uses the exogenous moments") {
  const TimeGrid g(0.0, 1.0, 8);
  const int nc = 2, np = 16;
  const auto noise = sample_noise(g, nc, np, 71);
  const auto init = sample_initial(InitialDistribution::dirac(0.0), nc, np, 71);

  // Population flow generated by zero control.
  const auto base = propagate(ControlField::constant(g, FeatureBasis::standard(), 0.0), init,
                              noise, 1.0, 0.5);
  const auto flow = conditional_flow(base);

  // Feedback alpha = -mbar reads the frozen mean, not the deviating cloud's.
  ControlField control(g, FeatureBasis::standard());
  for (int k = 0; k <= 8; ++k) control.row(k)[2] = 1.0;
  const auto dev = propagate_on_flow(control, init, noise, 1.0, 0.5, flow);
  for (int s = 0; s < nc; ++s) {
    for (int k = 0; k < 8; ++k) {
      for (int j = 0; j < np; ++j) {
        const double x = dev.states(s, k)[j];
        const double next = x + flow.mean(s, k) * g.dt() + 1.0 * noise.idio(s, k, j) +
                            0.5 * noise.common(s, k);
        CHECK(dev.states(s, k + 1)[j] == doctest::Approx(next).epsilon(1e-14));
      }
    }
  }

  // Mismatched scenario counts are rejected.
  const auto init4 = sample_initial(InitialDistribution::dirac(0.0), 4, np, 71);
  const auto noise4 = sample_noise(g, 4, np, 71);
  CHECK_THROWS_AS(propagate_on_flow(control, init4, noise4, 1.0, 0.5, flow),
                  std::invalid_argument);
}

TEST_CASE("conditional flow snapshots the ensemble") {
  const TimeGrid g(0.0, 1.0, 4);
  const auto noise = sample_noise(g, 2, 12, 81);
  const auto init = sample_initial(InitialDistribution::gaussian(0.0, 1.0), 2, 12, 81);
  const auto paths = propagate(ControlField::constant(g, FeatureBasis::standard(), 0.0), init,
                               noise, 1.0, 0.0);
  const auto flow = conditional_flow(paths);
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k <= 4; ++k) {
      CHECK(flow.mean(s, k) == paths.mean(s, k));
      CHECK(flow.second(s, k) == paths.second(s, k));
    }
    CHECK(flow.terminal[static_cast<std::size_t>(s)].mean() ==
          doctest::Approx(paths.mean(s, 4)).epsilon(1e-12));
  }
}

TEST_CASE("blend forms the damped convex combination row by row") {
  const TimeGrid g(0.0, 1.0, 2);
  auto a = ControlField::constant(g, FeatureBasis::standard(), 1.0);
  auto b = ControlField::constant(g, FeatureBasis::standard(), 3.0);
  b.row(1)[1] = 2.0;
  const auto mid = blend(a, b, 0.5);
  CHECK(mid.row(0)[0] == doctest::Approx(2.0));
  CHECK(mid.row(1)[1] == doctest::Approx(1.0));
  CHECK(blend(a, b, 0.0).row(0)[0] == doctest::Approx(1.0));
  CHECK(blend(a, b, 1.0).row(0)[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(blend(a, b, 1.5), std::invalid_argument);

  auto c = ControlField::constant(TimeGrid(0.0, 1.0, 3), FeatureBasis::standard(), 0.0);
  CHECK_THROWS_AS(blend(a, c, 0.5), std::invalid_argument);
}

TEST_CASE("constant field requires an intercept feature") {
  const TimeGrid g(0.0, 1.0, 2);
  const auto f = ControlField::constant(g, FeatureBasis::standard(), -0.7);
  CHECK(f.eval(1, 5.0, 2.0, 4.0) == doctest::Approx(-0.7));
  CHECK_THROWS_AS(ControlField::constant(g, FeatureBasis::parse({"x", "mbar"}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("diverging control is reported with the failing scenario") {
  const TimeGrid g(0.0, 1.0, 40);
  const auto noise = sample_noise(g, 2, 8, 91);
  const auto init = sample_initial(InitialDistribution::dirac(1.0), 2, 8, 91);
  // alpha = 1e10 x: the explicit step multiplies the state by 1 + 1e10 dt
  // every step and overflows well inside the horizon.
  ControlField control(g, FeatureBasis::standard());
  for (int k = 0; k <= 40; ++k) control.row(k)[1] = 1e10;
  CHECK_THROWS_WITH_AS(propagate(control, init, noise, 0.0, 0.0),
                       doctest::Contains("diverging control"), std::runtime_error);
}
