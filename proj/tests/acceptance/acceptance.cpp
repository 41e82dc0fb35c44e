// Acceptance runner: one PASS/FAIL line per criterion.
//
//   cdpforge_acceptance [--criterion N] [--cache DIR] [--threads N]
//
// Criteria 4 and 5 reuse the patterns learned by criterion 2 when its cache
// file exists; otherwise they train them first (and the extra time is
// excluded from their own budget, since it belongs to criterion 2).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cdpforge/bench.hpp"
#include "cdpforge/data.hpp"
#include "cdpforge/learning.hpp"
#include "cdpforge/metrics.hpp"
#include "cdpforge/numerics.hpp"
#include "cdpforge/parallel.hpp"
#include "cdpforge/pattern_io.hpp"
#include "cdpforge/solver.hpp"
#include "../oracles.hpp"

using namespace cdpforge;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_cache = "acceptance_cache";
std::size_t g_threads = 0;

constexpr std::size_t kSide = 32;
constexpr std::size_t kTrain = 32;
constexpr std::size_t kTest = 100;
constexpr std::uint64_t kTrainSeed = 2024;
constexpr std::uint64_t kTestSeed = 7001;
constexpr std::uint64_t kRandomSeed = 31;
constexpr std::size_t kRandomTrials = 30;

std::vector<Signal> dataset(SynthKind kind, std::size_t count, std::uint64_t seed) {
  return signals_of(synth_dataset(kind, count, kSide, kSide, seed));
}

TrainConfig table_config() {
  TrainConfig cfg;  // defaults: lr 1e-2, Adam betas, full batch, init U(0,1)
  cfg.pattern_count = 4;
  cfg.epochs = 500;
  cfg.solver.iterations = 50;
  cfg.threads = g_threads;
  return cfg;
}

EvalOptions eval_options(int k) {
  EvalOptions opts;
  opts.solver.iterations = k;
  opts.threads = g_threads;
  return opts;
}

fs::path learned_cache() { return g_cache / "smooth_T4_K50_theta.json"; }

PatternSet learn(SynthKind kind) {
  const auto train_set = dataset(kind, kTrain, kTrainSeed);
  return train(train_set, table_config()).patterns;
}

// Patterns from criterion 2, trained here if that criterion has not run.
PatternSet learned_smooth(double& train_seconds) {
  train_seconds = 0.0;
  if (fs::exists(learned_cache())) return to_pattern_set(read_plane_stack(learned_cache()));
  const auto t0 = Clock::now();
  const auto train_set = dataset(SynthKind::random_smooth, kTrain, kTrainSeed);
  const auto r = train(train_set, table_config());
  fs::create_directories(g_cache);
  write_plane_stack(learned_cache(), to_stack(r.params));
  train_seconds = seconds_since(t0);
  return r.patterns;
}

// ---------------------------------------------------------------------------

struct Instance {
  std::vector<Signal> batch;
  PatternParams params;
};

Instance gradient_instance(std::uint64_t seed) {
  Rng rng(seed);
  Instance inst;
  for (int n = 0; n < 2; ++n) inst.batch.push_back(Signal::ground_truth(oracle::uniform_plane({8, 8}, rng)));
  for (int t = 0; t < 2; ++t) inst.params.thetas.push_back(oracle::uniform_plane({8, 8}, rng, -2.0, 2.0));
  return inst;
}

double fd_rel_error(const Real2D& analytic, const Real2D& at, const std::function<double(const Real2D&)>& f) {
  const auto numeric = oracle::central_difference(
      std::vector<Real2D>{at}, [&](const std::vector<Real2D>& p) { return f(p.front()); }, 1e-6);
  return oracle::rel_error({analytic}, numeric);
}

Outcome criterion1() {
  double worst_detached = 0.0, worst_full = 0.0, worst_altmin = 0.0, worst_wf = 0.0;
  int detached_ok = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto inst = gradient_instance(10'000 + i);
    TrainConfig cfg;
    cfg.pattern_count = 2;
    cfg.solver.iterations = 3;
    cfg.threads = 1;
    const auto numeric = oracle::central_difference(
        inst.params.thetas,
        [&](const std::vector<Real2D>& th) { return unrolled_loss(PatternParams{th}, inst.batch, cfg); }, 1e-5);

    cfg.grad_mode = GradMode::phase_detached;
    const double e_det = oracle::rel_error(pattern_gradient(inst.params, inst.batch, cfg), numeric);
    cfg.grad_mode = GradMode::full;
    const double e_full = oracle::rel_error(pattern_gradient(inst.params, inst.batch, cfg), numeric);
    worst_detached = std::max(worst_detached, e_det);
    worst_full = std::max(worst_full, e_full);
    if (e_det < 1e-5) ++detached_ok;

    // Solver gradients at a random point against their own losses.
    const auto patterns = patterns_from_params(inst.params);
    const auto meas = measure(inst.batch[0], patterns);
    Rng rng(20'000 + i);
    const auto x = oracle::uniform_plane({8, 8}, rng, -0.5, 1.5);
    const auto phases = phase_estimates(Signal(x), patterns);
    worst_altmin = std::max(worst_altmin, fd_rel_error(altmin_gradient(Signal(x), patterns, phases, meas), x,
                                                       [&](const Real2D& p) {
                                                         return phase_split_loss(Signal(p), patterns, phases, meas);
                                                       }));
    worst_wf = std::max(worst_wf, fd_rel_error(wirtinger_gradient(Signal(x), patterns, meas), x,
                                               [&](const Real2D& p) {
                                                 return intensity_loss(Signal(p), patterns, meas);
                                               }));
  }
  Outcome o;
  o.pass = detached_ok == 100 && worst_altmin < 1e-6 && worst_wf < 1e-6;
  o.detail = "phase_detached vs FD: " + std::to_string(detached_ok) + "/100 below 1e-5 (worst " +
             sci(worst_detached) + "); full-mode worst " + sci(worst_full) + "; altmin worst " +
             sci(worst_altmin) + "; wirtinger worst " + sci(worst_wf);
  return o;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  const auto train_set = dataset(SynthKind::random_smooth, kTrain, kTrainSeed);
  const auto test_set = dataset(SynthKind::random_smooth, kTest, kTestSeed);
  const auto r = train(train_set, table_config());
  fs::create_directories(g_cache);
  write_plane_stack(learned_cache(), to_stack(r.params));

  const auto opts = eval_options(50);
  const double learned = mean_psnr(evaluate(r.patterns, test_set, opts));
  const auto rnd = random_baseline(test_set, 4, kRandomTrials, opts, kRandomSeed);
  const double best = *std::max_element(rnd.trial_means.begin(), rnd.trial_means.end());
  const double elapsed = seconds_since(t0);

  Outcome o;
  o.pass = learned >= 50.0 && learned - best >= 20.0 && elapsed < 15 * 60;
  o.detail = "random_smooth 32x32, T=4, K=50, M=500: learned " + fmt(learned) + " dB, random best-of-30 " +
             fmt(best) + " dB, gap " + fmt(learned - best) + " dB (need >= 50 and >= 20); final train loss " +
             fmt(r.history.loss.back(), 3) + " vs initial " + fmt(r.history.loss.front(), 3) + "; " +
             fmt(elapsed, 0) + " s of 900";
  return o;
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  const auto test_set = dataset(SynthKind::random_smooth, kTest, kTestSeed);
  const auto opts = eval_options(50);
  auto best_of = [&](std::size_t count) {
    const auto rnd = random_baseline(test_set, count, kRandomTrials, opts, kRandomSeed);
    return *std::max_element(rnd.trial_means.begin(), rnd.trial_means.end());
  };
  const double t2 = best_of(2);
  const double t8 = best_of(8);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = t8 - t2 >= 10.0 && elapsed < 5 * 60;
  o.detail = "random best-of-30, K=50: T=2 " + fmt(t2) + " dB, T=8 " + fmt(t8) + " dB, gain " + fmt(t8 - t2) +
             " dB (need >= 10); " + fmt(elapsed, 0) + " s of 300";
  return o;
}

Outcome criterion4() {
  double train_seconds = 0.0;
  const auto patterns = learned_smooth(train_seconds);
  const auto t0 = Clock::now();
  const auto test_set = dataset(SynthKind::random_smooth, kTest, kTestSeed);
  const std::vector<int> ks{10, 50, 200};
  const auto report = sweep_k(patterns, test_set, ks, eval_options(50));
  std::vector<double> means;
  for (const auto& row : report.aggregates) means.push_back(row.mean);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = means.size() == 3 && means[1] - means[0] >= -0.5 && means[2] - means[1] >= -0.5 && elapsed < 5 * 60;
  o.detail = "learned T=4: K=10 " + fmt(means[0]) + " dB, K=50 " + fmt(means[1]) + " dB, K=200 " +
             fmt(means[2]) + " dB (steps >= -0.5); " + fmt(elapsed, 0) + " s of 300";
  if (train_seconds > 0) o.detail += " (+" + fmt(train_seconds, 0) + " s training, no cache)";
  return o;
}

Outcome criterion5() {
  double train_seconds = 0.0;
  const auto patterns = learned_smooth(train_seconds);
  const auto t0 = Clock::now();
  const auto test_set = dataset(SynthKind::random_smooth, kTest, kTestSeed);
  const std::vector<double> snrs{40, 30, 20, 10};
  auto opts = eval_options(50);
  opts.noise.seed = 99;
  const auto report = noise_sweep(patterns, test_set, NoiseKind::gaussian, snrs, opts);
  std::vector<double> means;
  for (const auto& row : report.aggregates) means.push_back(row.mean);
  bool monotone = means.size() == snrs.size();
  for (std::size_t i = 1; monotone && i < means.size(); ++i) monotone = means[i] <= means[i - 1] + 0.5;

  // Empirical SNR of the generated noise over 250 images x 4 planes x 32 x 32
  // = 1,024,000 entries.
  const auto pool = dataset(SynthKind::random_smooth, 250, kTestSeed + 1);
  MeasurementSet clean;
  for (const auto& x : pool) {
    for (auto& a : measure(x, patterns).amps) clean.amps.push_back(std::move(a));
  }
  double worst_snr_err = 0.0;
  std::string realized;
  for (double target : snrs) {
    const auto eta = draw_noise(clean, {NoiseKind::gaussian, target, 4242});
    double signal = 0.0, noise = 0.0;
    for (std::size_t t = 0; t < clean.count(); ++t) {
      for (std::size_t i = 0; i < clean.amps[t].size(); ++i) {
        signal += clean.amps[t][i] * clean.amps[t][i];
        noise += eta[t][i] * eta[t][i];
      }
    }
    const double snr = 10.0 * std::log10(signal / noise);
    worst_snr_err = std::max(worst_snr_err, std::abs(snr - target));
    realized += (realized.empty() ? "" : "/") + fmt(snr);
  }
  const double elapsed = seconds_since(t0);

  Outcome o;
  o.pass = monotone && worst_snr_err <= 0.5 && elapsed < 5 * 60;
  o.detail = "learned T=4, K=50, SNR 40/30/20/10 dB: PSNR " + fmt(means[0]) + "/" + fmt(means[1]) + "/" +
             fmt(means[2]) + "/" + fmt(means[3]) + " dB; realized SNR " + realized + " dB (worst error " +
             fmt(worst_snr_err, 3) + "); " + fmt(elapsed, 0) + " s of 300";
  if (train_seconds > 0) o.detail += " (+" + fmt(train_seconds, 0) + " s training, no cache)";
  return o;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  const auto blobs = learn(SynthKind::blobs);
  const auto bars = learn(SynthKind::bars);
  std::vector<NamedTestset> tests{{"blobs", dataset(SynthKind::blobs, kTest, kTestSeed)},
                                  {"bars", dataset(SynthKind::bars, kTest, kTestSeed)}};
  const auto report =
      cross_eval({{"blobs", blobs}, {"bars", bars}}, tests, eval_options(50), kRandomTrials, kRandomSeed);
  double blobs_on_bars = NAN, random_on_bars = NAN;
  std::string matrix;
  for (const auto& row : report.aggregates) {
    matrix += (matrix.empty() ? "" : ", ") + row.experiment + "/" + row.dataset + " " + fmt(row.mean);
    if (row.dataset != "bars") continue;
    if (row.experiment == "train=blobs") blobs_on_bars = row.mean;
    if (row.experiment == "train=random") random_on_bars = row.mean;
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = blobs_on_bars - random_on_bars >= 5.0 && elapsed < 15 * 60;
  o.detail = "blobs->bars " + fmt(blobs_on_bars) + " dB vs random best-of-30 " + fmt(random_on_bars) +
             " dB, gap " + fmt(blobs_on_bars - random_on_bars) + " dB (need >= 5) [" + matrix + "]; " +
             fmt(elapsed, 0) + " s of 900";
  return o;
}

Outcome criterion7() {
  const auto x = dataset(SynthKind::random_smooth, 1, kTestSeed).front();
  Rng rng(5);
  const auto patterns = random_patterns(4, {kSide, kSide}, rng);
  SolverConfig cfg;
  cfg.iterations = 50;
  std::vector<double> ms;
  for (int rep = 0; rep < 51; ++rep) {
    const auto t0 = Clock::now();
    const auto meas = measure(x, patterns);
    const auto r = solve_cdp(meas, patterns, cfg);
    ms.push_back(1e3 * seconds_since(t0));
    if (!std::isfinite(r.estimate.plane()[0])) ms.back() = INFINITY;
  }
  std::nth_element(ms.begin(), ms.begin() + 25, ms.end());
  const double median = ms[25];
  Outcome o;
  o.pass = median <= 50.0;
  o.detail = "32x32, T=4, K=50, one image: median " + fmt(median, 3) + " ms over 51 runs (need <= 50)";
  return o;
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // FFT: Parseval, adjoint, round trip.
  Rng rng(8);
  for (const Shape shape : {Shape{8, 8}, Shape{32, 32}, Shape{16, 64}, Shape{12, 20}, Shape{200, 200}}) {
    const auto a = oracle::complex_plane(shape, rng);
    const auto b = oracle::complex_plane(shape, rng);
    const auto fa = fft2u(a);
    const auto fb = fft2u(b);
    double na = 0, nfa = 0;
    std::complex<double> lhs = 0, rhs = 0;
    const auto ib = ifft2u(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      na += std::norm(a[i]);
      nfa += std::norm(fa[i]);
      lhs += fa[i] * std::conj(b[i]);
      rhs += a[i] * std::conj(ib[i]);
    }
    const std::string tag = " " + to_string(shape);
    check(std::abs(na - nfa) <= 1e-10 * na, "parseval" + tag);
    check(std::abs(lhs - rhs) <= 1e-10 * std::sqrt(na * nfa), "adjoint" + tag);
    check(oracle::max_abs_diff(ifft2u(fa), a) <= 1e-10, "round trip" + tag);
    (void)fb;
  }

  // Stationarity at the ground truth, GS dominance.
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng r(800 + i);
    const Signal truth = Signal::ground_truth(oracle::uniform_plane({8, 8}, r));
    const auto patterns = random_patterns(1 + i % 4, {8, 8}, r);
    const auto meas = measure(truth, patterns);
    const auto truth_phases = phase_estimates(truth, patterns);
    check(oracle::norm(altmin_gradient(truth, patterns, truth_phases, meas)) < 1e-10, "altmin stationarity");
    check(oracle::norm(wirtinger_gradient(truth, patterns, meas)) < 1e-8, "wirtinger stationarity");

    const Signal x(oracle::uniform_plane({8, 8}, r, -0.5, 1.5));
    const auto phases = phase_estimates(x, patterns);
    const auto g = altmin_gradient(x, patterns, phases, meas);
    const double alpha = 4.0 / static_cast<double>(patterns.count());
    Real2D stepped = x.plane();
    for (std::size_t j = 0; j < g.size(); ++j) stepped[j] -= alpha * g[j];
    const double gd = phase_split_loss(Signal(stepped), patterns, phases, meas);
    const double gs = phase_split_loss(gs_exact_step(phases, patterns, meas), patterns, phases, meas);
    check(gs <= gd + 1e-12, "gs dominance");
  }

  // Determinism of solve_cdp and of the noise model.
  {
    const auto x = dataset(SynthKind::random_smooth, 1, 3).front();
    Rng r(9);
    const auto patterns = random_patterns(4, {kSide, kSide}, r);
    const NoiseSpec spec{NoiseKind::gaussian, 20.0, 17};
    const auto m1 = add_noise(x, patterns, spec);
    const auto m2 = add_noise(x, patterns, spec);
    bool same = true;
    for (std::size_t t = 0; t < m1.count(); ++t) same = same && m1.amps[t] == m2.amps[t];
    check(same, "noise determinism");
    const NoiseSpec poisson{NoiseKind::poisson, 20.0, 17};
    const auto p1 = add_noise(x, patterns, poisson);
    const auto p2 = add_noise(x, patterns, poisson);
    same = true;
    for (std::size_t t = 0; t < p1.count(); ++t) same = same && p1.amps[t] == p2.amps[t];
    check(same, "poisson determinism");

    SolverConfig cfg;
    cfg.iterations = 50;
    check(solve_cdp(m1, patterns, cfg).estimate.plane() == solve_cdp(m1, patterns, cfg).estimate.plane(),
          "solve_cdp determinism");
  }

  // Training: bitwise identical for every thread count.
  {
    const auto data = signals_of(synth_dataset(SynthKind::blobs, 8, 16, 16, 4));
    TrainConfig cfg;
    cfg.pattern_count = 2;
    cfg.epochs = 6;
    cfg.batch_size = 3;
    cfg.solver.iterations = 8;
    std::vector<TrainResult> runs;
    for (std::size_t threads : {1, 2, 3, 8}) {
      cfg.threads = threads;
      runs.push_back(train(data, cfg));
    }
    for (std::size_t k = 1; k < runs.size(); ++k) {
      bool same = runs[k].history.loss == runs[0].history.loss;
      for (std::size_t t = 0; t < 2; ++t) same = same && runs[k].params.thetas[t] == runs[0].params.thetas[t];
      check(same, "train reproducibility");
    }
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = failed.empty() && elapsed < 120.0;
  o.detail = failed.empty() ? "all invariants hold" : "failed: " + failed.front() +
                                                          (failed.size() > 1 ? " (+" + std::to_string(failed.size() - 1) + " more)" : "");
  o.detail += "; " + fmt(elapsed, 1) + " s of 120";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (arg == "--cache" && i + 1 < argc) {
      g_cache = argv[++i];
    } else if (arg == "--threads" && i + 1 < argc) {
      g_threads = static_cast<std::size_t>(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: cdpforge_acceptance [--criterion N] [--cache DIR] [--threads N]\n";
      return 2;
    }
  }
  if (only < 0 || only > 8) {
    std::cerr << "criterion must be 1..8\n";
    return 2;
  }

  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  bool all = true;
  for (int n = 1; n <= 8; ++n) {
    if (only != 0 && n != only) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << " [" << fmt(seconds_since(t0), 1)
              << " s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
