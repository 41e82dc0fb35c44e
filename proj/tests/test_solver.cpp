#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cdpforge/metrics.hpp"
#include "cdpforge/solver.hpp"
#include "oracles.hpp"

using namespace cdpforge;

namespace {

struct Instance {
  Signal truth;
  PatternSet patterns;
  MeasurementSet meas;
};

Instance make_instance(std::uint64_t seed, Shape shape, std::size_t count) {
  Rng rng(seed);
  Signal truth = Signal::ground_truth(oracle::uniform_plane(shape, rng));
  PatternSet patterns = random_patterns(count, shape, rng);
  MeasurementSet meas = measure(truth, patterns);
  return {std::move(truth), std::move(patterns), std::move(meas)};
}

double fd_rel_error(const Real2D& analytic, const Real2D& x0, const std::function<double(const Real2D&)>& f) {
  const auto numeric = oracle::central_difference({x0}, [&](const std::vector<Real2D>& p) { return f(p[0]); }, 1e-6);
  return oracle::rel_error({analytic}, numeric);
}

}  // namespace

TEST_CASE("residual loss examples") {
  const auto inst = make_instance(41, {8, 8}, 3);
  CHECK(residual_loss(inst.truth, inst.patterns, inst.meas) <= 1e-20);

  double expect = 0.0;
  for (const auto& y : inst.meas.amps) expect += oracle::norm(y) * oracle::norm(y);
  expect /= 3.0;
  CHECK(residual_loss(Signal::zeros({8, 8}), inst.patterns, inst.meas) ==
        doctest::Approx(expect).epsilon(1e-14));

  // Recompute at an arbitrary point from brute-force magnitudes.
  Rng rng(42);
  const auto x = oracle::uniform_plane({8, 8}, rng, -1.0, 1.0);
  const auto mags = oracle::magnitudes(x, inst.patterns.masks);
  double want = 0.0;
  for (int t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = inst.meas.amps[t][i] - mags[t][i];
      want += r * r;
    }
  }
  want /= 3.0;
  CHECK(std::abs(residual_loss(Signal(x), inst.patterns, inst.meas) - want) < 1e-10);
}

TEST_CASE("phase estimate examples") {
  for (const auto& p : phase_estimate(Signal::zeros({4, 4}), Real2D(4, 4, 0.5))) {
    CHECK(p == std::complex<double>(1.0, 0.0));
  }
  // Constant nonnegative image: only the DC entry is nonzero and it is real positive.
  for (const auto& p : phase_estimate(Signal(Real2D(4, 4, 0.7)), Real2D(4, 4, 0.5))) {
    CHECK(std::abs(p - std::complex<double>(1.0, 0.0)) < 1e-15);
  }
  const auto inst = make_instance(43, {8, 8}, 1);
  for (const auto& p : phase_estimate(inst.truth, inst.patterns.masks[0])) {
    CHECK(std::abs(std::abs(p) - 1.0) < 1e-12);
  }
}

TEST_CASE("altmin gradient: stationarity, origin formula, finite differences") {
  const auto inst = make_instance(44, {8, 8}, 2);
  const auto truth_phases = phase_estimates(inst.truth, inst.patterns);
  CHECK(oracle::norm(altmin_gradient(inst.truth, inst.patterns, truth_phases, inst.meas)) < 1e-10);

  const auto zero = Signal::zeros({8, 8});
  const auto g0 = altmin_gradient(zero, inst.patterns, phase_estimates(zero, inst.patterns), inst.meas);
  Real2D expect(8, 8, 0.0);
  for (int t = 0; t < 2; ++t) {
    const auto back = oracle::dft2(oracle::lift(inst.meas.amps[t]), true);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      expect[i] -= (2.0 / 2.0) * inst.patterns.masks[t][i] * back[i].real();
    }
  }
  CHECK(oracle::max_abs_diff(g0, expect) < 1e-12);

  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = oracle::uniform_plane({8, 8}, rng, -0.5, 1.5);
    const auto phases = phase_estimates(Signal(oracle::uniform_plane({8, 8}, rng)), inst.patterns);
    const auto g = altmin_gradient(Signal(x), inst.patterns, phases, inst.meas);
    const double err = fd_rel_error(g, x, [&](const Real2D& p) {
      return phase_split_loss(Signal(p), inst.patterns, phases, inst.meas);
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("solve_cdp trivial cases") {
  const auto inst = make_instance(46, {8, 8}, 4);
  SolverConfig cfg;
  cfg.iterations = 0;
  const auto none = solve_cdp(inst.meas, inst.patterns, cfg);
  for (double v : none.estimate.plane()) CHECK(v == 0.0);

  cfg.iterations = 25;
  MeasurementSet zero;
  for (int t = 0; t < 4; ++t) zero.amps.emplace_back(8, 8, 0.0);
  const auto from_zero = solve_cdp(zero, inst.patterns, cfg);
  for (double v : from_zero.estimate.plane()) CHECK(v == 0.0);
}

TEST_CASE("solve_cdp iterates x - alpha grad with default alpha = 4/T") {
  for (std::size_t count : {1, 3, 8}) {
    const auto inst = make_instance(60 + count, {8, 8}, count);
    SolverConfig cfg;
    cfg.iterations = 2;
    const double alpha = 4.0 / static_cast<double>(count);
    CHECK(altmin_step(cfg, count) == alpha);
    const auto two = solve_cdp(inst.meas, inst.patterns, cfg);

    Real2D x(8, 8, 0.0);
    for (int k = 0; k < 2; ++k) {
      const Signal cur(x);
      const auto g = altmin_gradient(cur, inst.patterns, phase_estimates(cur, inst.patterns), inst.meas);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= alpha * g[i];
    }
    CHECK(oracle::max_abs_diff(two.estimate.plane(), x) < 1e-12);
  }
}

TEST_CASE("solve_cdp recovers 8x8 images with 8 random masks") {
  // Zero-initialized AltMin occasionally stalls on a single draw, so this is
  // checked over a fixed set of instances rather than one.
  SolverConfig cfg;
  cfg.iterations = 200;
  std::vector<double> scores;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_instance(seed, {8, 8}, 8);
    scores.push_back(psnr(inst.truth, solve_cdp(inst.meas, inst.patterns, cfg).estimate));
  }
  const auto good = std::count_if(scores.begin(), scores.end(), [](double p) { return p >= 40.0; });
  CHECK(good >= 16);
  std::sort(scores.begin(), scores.end());
  CHECK(scores[10] >= 40.0);
}

TEST_CASE("solve_cdp fixed point, determinism and trace") {
  const auto inst = make_instance(48, {8, 8}, 4);
  const auto phases = phase_estimates(inst.truth, inst.patterns);
  const auto g = altmin_gradient(inst.truth, inst.patterns, phases, inst.meas);
  const double alpha = 4.0 / 4.0;
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(alpha * g[i]) < 1e-10);

  SolverConfig cfg;
  cfg.iterations = 30;
  cfg.record_trace = true;
  const auto a = solve_cdp(inst.meas, inst.patterns, cfg, &inst.truth);
  const auto b = solve_cdp(inst.meas, inst.patterns, cfg, &inst.truth);
  CHECK(a.estimate.plane() == b.estimate.plane());
  CHECK(a.trace.losses == b.trace.losses);
  REQUIRE(a.trace.losses.size() == 30);
  REQUIRE(a.trace.psnr.size() == 30);
  CHECK(a.trace.losses.back() == doctest::Approx(residual_loss(a.estimate, inst.patterns, inst.meas)).epsilon(1e-10));
  CHECK(a.trace.psnr.back() == doctest::Approx(psnr(inst.truth, a.estimate)).epsilon(1e-12));

  // Each recorded loss equals the residual of that iterate, recomputed by rerunning to that length.
  for (int k : {1, 7, 19}) {
    SolverConfig short_cfg = cfg;
    short_cfg.iterations = k;
    const auto r = solve_cdp(inst.meas, inst.patterns, short_cfg);
    CHECK(std::abs(a.trace.losses[k - 1] - residual_loss(r.estimate, inst.patterns, inst.meas)) < 1e-10);
  }
}

TEST_CASE("monotone descent over seeded instances") {
  int monotone = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = make_instance(1000 + trial, {8, 8}, 4);
    SolverConfig cfg;
    cfg.iterations = 50;
    cfg.record_trace = true;
    const auto r = solve_cdp(inst.meas, inst.patterns, cfg);
    const double initial = residual_loss(Signal::zeros({8, 8}), inst.patterns, inst.meas);
    CHECK(r.trace.losses.back() < initial);
    bool ok = r.trace.losses.front() <= initial;
    for (std::size_t k = 1; k < r.trace.losses.size(); ++k) {
      ok = ok && r.trace.losses[k] <= r.trace.losses[k - 1] * (1.0 + 1e-12);
    }
    monotone += ok ? 1 : 0;
  }
  CHECK(monotone >= 95);
}

TEST_CASE("solve_cdp reports divergence with the iteration") {
  const auto inst = make_instance(49, {8, 8}, 2);
  SolverConfig cfg;
  cfg.iterations = 2000;
  cfg.step_size = 50.0;
  try {
    solve_cdp(inst.meas, inst.patterns, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.iterations = -1;
  CHECK_THROWS(validate(cfg));
  cfg.iterations = 5;
  cfg.step_size = 0.0;
  CHECK_THROWS(validate(cfg));
  cfg.step_size = std::nullopt;
  CHECK_NOTHROW(validate(cfg));
  CHECK(altmin_step(cfg, 4) == 1.0);
  CHECK(altmin_step(cfg, 8) == 0.5);
  cfg.step_size = 0.25;
  CHECK(altmin_step(cfg, 8) == 0.25);
  CHECK(parse_algorithm("gs_exact") == Algorithm::gs_exact);
  CHECK_THROWS(parse_algorithm("fienup"));
}

TEST_CASE("exact GS step") {
  const auto inst = make_instance(50, {8, 8}, 3);
  const auto exact = gs_exact_step(phase_estimates(inst.truth, inst.patterns), inst.patterns, inst.meas);
  CHECK(oracle::max_abs_diff(exact.plane(), inst.truth.plane()) < 1e-10);

  SolverConfig cfg;
  cfg.iterations = 0;
  cfg.algorithm = Algorithm::gs_exact;
  const auto none = solve(inst.meas, inst.patterns, cfg);
  for (double v : none.estimate.plane()) CHECK(v == 0.0);

  PatternSet degenerate{{Real2D(8, 8, 0.0)}};
  MeasurementSet meas{{Real2D(8, 8, 1.0)}};
  CHECK_THROWS(gs_exact_step(phase_estimates(Signal::zeros({8, 8}), degenerate), degenerate, meas));
}

TEST_CASE("exact GS step dominates one gradient step") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = make_instance(2000 + trial, {8, 8}, 1 + trial % 4);
    const Signal x(oracle::uniform_plane({8, 8}, rng, -0.5, 1.5));
    const auto phases = phase_estimates(x, inst.patterns);
    const auto g = altmin_gradient(x, inst.patterns, phases, inst.meas);
    const double alpha = 4.0 / static_cast<double>(inst.patterns.count());
    Real2D stepped = x.plane();
    for (std::size_t i = 0; i < g.size(); ++i) stepped[i] -= alpha * g[i];
    const double after_gd = phase_split_loss(Signal(stepped), inst.patterns, phases, inst.meas);
    const double after_gs = phase_split_loss(gs_exact_step(phases, inst.patterns, inst.meas), inst.patterns, phases, inst.meas);
    CHECK(after_gs <= after_gd + 1e-12);
  }
}

TEST_CASE("wirtinger gradient") {
  const auto inst = make_instance(52, {8, 8}, 2);
  CHECK(oracle::norm(wirtinger_gradient(inst.truth, inst.patterns, inst.meas)) < 1e-8);
  for (double v : wirtinger_gradient(Signal::zeros({8, 8}), inst.patterns, inst.meas)) CHECK(v == 0.0);

  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = oracle::uniform_plane({8, 8}, rng, -0.5, 1.5);
    const auto g = wirtinger_gradient(Signal(x), inst.patterns, inst.meas);
    const double err = fd_rel_error(g, x, [&](const Real2D& p) {
      return intensity_loss(Signal(p), inst.patterns, inst.meas);
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("baseline solvers run through the dispatcher") {
  const auto inst = make_instance(54, {8, 8}, 8);
  SolverConfig cfg;
  cfg.iterations = 100;
  cfg.algorithm = Algorithm::gs_exact;
  const auto gs = solve(inst.meas, inst.patterns, cfg);
  CHECK(residual_loss(gs.estimate, inst.patterns, inst.meas) <
        residual_loss(Signal::zeros({8, 8}), inst.patterns, inst.meas));

  cfg.algorithm = Algorithm::wirtinger;
  cfg.seed = 3;
  const auto wf1 = solve(inst.meas, inst.patterns, cfg);
  const auto wf2 = solve(inst.meas, inst.patterns, cfg);
  CHECK(wf1.estimate.plane() == wf2.estimate.plane());
  CHECK(intensity_loss(wf1.estimate, inst.patterns, inst.meas) <
        intensity_loss(Signal::zeros({8, 8}), inst.patterns, inst.meas));
}
