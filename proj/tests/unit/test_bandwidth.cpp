#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "../support/oracles.hpp"
#include "quantband/bandwidth.hpp"
#include "quantband/error.hpp"
#include "quantband/parallel.hpp"

using namespace quantband;

namespace {

PrimarySample dgp(std::size_t n, std::uint64_t seed, bool quadratic, double error_sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> w(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = nd(rng);
    y[i] = (quadratic ? x * x : x) + nd(rng);
    w[i] = x + error_sd * nd(rng);
  }
  return PrimarySample(std::move(w), std::move(y));
}

double sample_var(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  const double ratio = std::pow(hi / lo, 1.0 / static_cast<double>(count - 1));
  g[0] = lo;
  for (std::size_t i = 1; i < count; ++i) g[i] = g[i - 1] * ratio;
  return g;
}

// int phi_K(t)^2 / max(|phi_U(t/b)|, floor)^2 dt for an empirical error law.
double empirical_energy(std::span<const double> aux, double b) {
  const double floor = 1.0 / std::sqrt(static_cast<double>(aux.size()));
  const auto f = [&](long double t) {
    long double re = 0.0L, im = 0.0L;
    for (double u : aux) {
      re += std::cos(t / b * u);
      im += std::sin(t / b * u);
    }
    re /= aux.size();
    im /= aux.size();
    const long double mag = std::max(std::sqrt(re * re + im * im), static_cast<long double>(floor));
    const long double k = std::pow(1.0L - t * t, 3);
    return k * k / (mag * mag);
  };
  return static_cast<double>(
      boost::math::quadrature::gauss_kronrod<long double, 61>::integrate(f, -1.0L, 1.0L, 15, 1e-14L));
}

constexpr double kKappa = 6.0;  // -phi_K''(0)

double weight_objective_oracle(std::span<const double> aux, double b, std::size_t n, double sigma_x) {
  return empirical_energy(aux, b) / (2.0 * std::numbers::pi * n * b) +
         kKappa * kKappa * std::pow(b, 4) / 4.0 * 3.0 / (8.0 * std::sqrt(std::numbers::pi) * std::pow(sigma_x, 5));
}

double weight_b_oracle(std::span<const double> aux, const PrimarySample& s) {
  const double sigma_x = std::sqrt(std::max(sample_var(s.w()) - sample_var(aux), 1e-6));
  const auto grid = geometric_grid(0.05 * sigma_x, 5.0 * sigma_x, 64);
  double best = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (double b : grid) {
    const double v = weight_objective_oracle(aux, b, s.n(), sigma_x);
    if (v < best_val) {
      best_val = v;
      best = b;
    }
  }
  return best;
}

double brute_argmin(std::span<const double> w, const PrimarySample& s, double tau) {
  double best = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (double theta : candidate_thetas(s)) {
    const double v = std::abs(objective(theta, w, s.y(), tau));
    if (v < best_val) {
      best_val = v;
      best = theta;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("check loss") {
  CHECK(check_loss(0.5, 2.0) == 1.0);
  CHECK(check_loss(0.5, -2.0) == 1.0);
  CHECK(check_loss(0.25, -4.0) == 3.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5), t(0.01, 0.99);
  for (int i = 0; i < 100; ++i) CHECK(check_loss(t(rng), u(rng)) >= 0.0);
}

TEST_CASE("tuning validation and grids") {
  CHECK_NOTHROW(TuningParams{}.validate());
  TuningParams p;
  p.folds = 1;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.zeta = 1.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.rho = 0.5;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.h_grid = {0.1, -0.2};
  CHECK_THROWS_AS(p.validate(), InputError);
  const auto g = log_grid(0.1, 10.0, 3);
  CHECK(g[1] == doctest::Approx(1.0));
  const PrimarySample s = dgp(100, 2, false, 0.3);
  const auto hg = default_h_grid(s);
  REQUIRE(hg.size() == 32);
  const double scale = std::sqrt(sample_var(s.w())) * std::pow(100.0, -1.0 / 9.0);
  CHECK(hg.front() == doctest::Approx(0.05 * scale));
  CHECK(hg.back() == doctest::Approx(2.0 * scale));
  CHECK(argmin_finite(std::vector<double>{NAN, 3.0, 1.0, 1.0}) == 2);
  CHECK_THROWS_AS(argmin_finite(std::vector<double>{NAN, INFINITY}), NoFiniteCandidate);
}

TEST_CASE("weighting bandwidth equals a brute-force grid scan") {
  const PrimarySample s = dgp(200, 3, false, 0.4);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 0.4);
  std::vector<double> aux(200);
  for (double& a : aux) a = nd(rng);
  CHECK(weight_bandwidth_b(aux, s) == doctest::Approx(weight_b_oracle(aux, s)).epsilon(1e-12));

  const std::vector<double> zeros(200, 0.0);
  const double b0 = weight_bandwidth_b(zeros, s);
  CHECK(b0 == doctest::Approx(weight_b_oracle(zeros, s)).epsilon(1e-12));
  CHECK(b0 == doctest::Approx(weight_bandwidth_b(s, ErrorModel::none())).epsilon(1e-12));

  std::vector<double> doubled = aux;
  for (double& a : doubled) a *= 2.0;
  // Hold the signal-scale proxy fixed so only the deconvolution penalty moves.
  const double sigma_x = signal_sd_proxy(s, ErrorModel::empirical(aux));
  const auto grid = log_grid(0.05 * sigma_x, 5.0 * sigma_x, 64);
  std::vector<double> v1, v2;
  for (double b : grid) {
    v1.push_back(weight_bandwidth_objective(ErrorModel::empirical(aux), b, 200, sigma_x));
    v2.push_back(weight_bandwidth_objective(ErrorModel::empirical(doubled), b, 200, sigma_x));
  }
  CHECK(grid[argmin_finite(v2)] > grid[argmin_finite(v1)]);
  CHECK(weight_bandwidth_b(doubled, s) > weight_bandwidth_b(aux, s));
}

TEST_CASE("folds partition the sample") {
  Rng rng = make_stream(1, stream_tag::kFolds);
  const auto folds = make_folds(23, 5, rng);
  REQUIRE(folds.size() == 5);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    CHECK((f.size() == 4 || f.size() == 5));
    for (std::size_t i : f) ++seen[i];
  }
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("leave-one-out CV equals a direct implementation") {
  const PrimarySample s = dgp(30, 5, false, 0.3);
  const ErrorModel m = ErrorModel::gaussian(0.3);
  CvSetup setup;
  setup.tau0 = 0.4;
  setup.x_lo = *std::min_element(s.w().begin(), s.w().end());
  setup.x_hi = *std::max_element(s.w().begin(), s.w().end());
  setup.x_points = 64;
  setup.b = 0.6;
  for (std::size_t i = 0; i < 30; ++i) setup.folds.push_back({i});

  for (double h : {0.35, 0.6, 1.1}) {
    double direct = 0.0;
    const double dx = (setup.x_hi - setup.x_lo) / 63.0;
    for (std::size_t out = 0; out < 30; ++out) {
      std::vector<double> tw, ty;
      for (std::size_t r = 0; r < 30; ++r) {
        if (r == out) continue;
        tw.push_back(s.w()[r]);
        ty.push_back(s.y()[r]);
      }
      const PrimarySample train(tw, ty);
      for (std::size_t g = 0; g < 64; ++g) {
        const double x = g == 63 ? setup.x_hi : setup.x_lo + dx * static_cast<double>(g);
        std::vector<double> weights(29);
        for (std::size_t r = 0; r < 29; ++r) weights[r] = deconv_kernel(m, h, x - tw[r]);
        const double theta = brute_argmin(weights, train, setup.tau0);
        const double trap = (g == 0 || g == 63) ? 0.5 * dx : dx;
        direct += trap * check_loss(setup.tau0, s.y()[out] - theta) * deconv_kernel(m, setup.b, x - s.w()[out]);
      }
    }
    direct /= 30.0;
    CAPTURE(h);
    CHECK(cv_criterion(s, m, h, setup) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("CV pilot on a realistic dataset") {
  const PrimarySample s = dgp(150, 6, false, std::sqrt(0.25));
  const ErrorModel m = ErrorModel::gaussian(0.5);
  TuningParams params;
  params.seed = 17;
  const CvSetup setup = default_cv_setup(s, m, params, 0.25);
  const auto grid = default_h_grid(s);
  const auto curve = cv_curve(s, m, grid, setup);
  std::size_t finite = 0;
  for (double v : curve) {
    if (std::isfinite(v)) {
      ++finite;
      CHECK(v > 0.0);
    }
  }
  CHECK(finite > grid.size() / 2);
  const double h = cv_pilot(s, m, params, 0.25);
  CHECK(std::find(grid.begin(), grid.end(), h) != grid.end());
  CHECK(h == grid[argmin_finite(curve)]);
  set_num_threads(3);
  CHECK(cv_pilot(s, m, params, 0.25) == h);
  set_num_threads(1);
}

TEST_CASE("undersmoothing index rule") {
  std::vector<double> constant(21, 0.2);
  CHECK(undersmooth_index(constant, 3.0) == 1);
  std::vector<double> diffs(21, 0.1);
  diffs[7] = 0.31;
  diffs[4] = 1.0;
  CHECK(undersmooth_index(diffs, 3.0) == 7);
  diffs[20] = 0.2;
  CHECK(undersmooth_index(diffs, 3.0) == 4);
  CHECK(undersmooth_bandwidth(1, 20, 250, 1.0) == doctest::Approx(1.0 / std::log(250.0)));
  CHECK(undersmooth_bandwidth(10, 20, 250, 2.0) == doctest::Approx(1.0));
  CHECK(undersmooth_bandwidth(3, 20, 20, 1.3) == doctest::Approx(1.3 / std::log(20.0)));
}

TEST_CASE("undersmoothing matches a direct scan") {
  const PrimarySample s = dgp(200, 7, true, 0.4);
  const ErrorModel m = ErrorModel::gaussian(0.4);
  const EvalGrid grid = EvalGrid::equispaced(-0.8, 0.8, 11, 0.2, 0.3, 3);
  TuningParams params;
  const double h_opt = 0.3;
  const UndersmoothResult r = undersmooth(s, m, h_opt, params, grid);

  std::vector<double> sup(21, 0.0);
  QuantileGridFit prev = fit_grid(s, m, 1.0 / 20.0 * 1.3 * h_opt, grid);
  for (std::size_t l = 2; l <= 20; ++l) {
    QuantileGridFit cur = fit_grid(s, m, static_cast<double>(l) / 20.0 * 1.3 * h_opt, grid);
    for (std::size_t c = 0; c < grid.cells(); ++c) {
      if (cur.valid[c] && prev.valid[c]) {
        sup[l] = std::max(sup[l], std::abs(cur.theta_hat.flat()[c] - prev.theta_hat.flat()[c]));
      }
    }
    prev = std::move(cur);
  }
  std::size_t k = 1;
  for (std::size_t cand = 2; cand <= 20; ++cand) {
    if (sup[cand] > 3.0 * sup[20]) k = cand;
  }
  CHECK(r.k == k);
  for (std::size_t l = 2; l <= 20; ++l) CHECK(r.sup_diffs[l] == sup[l]);
  const double expected = std::max(static_cast<double>(k) / 20.0, 1.0 / std::log(200.0)) * 1.3 * h_opt;
  CHECK(r.h == doctest::Approx(expected).epsilon(1e-15));
  CHECK(r.h <= 1.3 * h_opt);
  CHECK(r.h >= 1.3 * h_opt / std::log(200.0) * (1 - 1e-15));
}

TEST_CASE("AMISE plug-ins on a hand dataset") {
  const PrimarySample s({0.5, 1.7, 2.2, 3.9, 4.1, 5.6}, {1.0, 0.4, 2.5, 2.9, 4.4, 3.8});
  const AmisePlugins p = amise_plugins(s, 0.3);
  CHECK(p.sigma_w2 == doctest::Approx(3.472).epsilon(1e-13));
  CHECK(p.sigma_y2 == doctest::Approx(2.424).epsilon(1e-13));
  CHECK(p.sigma_wy == doctest::Approx(2.462).epsilon(1e-13));
  CHECK(p.sigma_x == doctest::Approx(1.781010948871455).epsilon(1e-13));
  CHECK(p.rho == doctest::Approx(0.8878817953210159).epsilon(1e-13));
  CHECK_FALSE(p.rho_clamped);
  CHECK_THROWS_AS(amise_plugins(s, 3.5), NegativeSignalVariance);
  const PrimarySample line({0, 1, 2, 3}, {0, 2, 4, 6});
  const AmisePlugins q = amise_plugins(line, 0.1);
  CHECK(q.rho == 0.99);
  CHECK(q.rho_clamped);
}

TEST_CASE("AMISE objective matches the displayed formula") {
  const KernelMoments km = kernel_moments();
  AmisePlugins p{};
  p.sigma_x = 0.9;
  p.sigma_y = 1.3;
  p.rho = 0.4;
  const double energy = 1.7, hw = 0.3, hy = 0.45;
  const std::size_t n = 250;
  const double pi = std::numbers::pi;
  const double c = std::pow(1 - 0.16, 2.5);
  const double expected = 1.0 / (2 * pi * n * hy * hw) * km.l2norm * energy +
                          3 * 36.0 / (64 * pi * c * std::pow(0.9, 5) * 1.3) * std::pow(hw, 4) +
                          3 * 36.0 / (64 * pi * c * std::pow(1.3, 5) * 0.9) * std::pow(hy, 4) +
                          (1 + 2 * 0.16) * 36.0 / (32 * pi * c * std::pow(0.9, 3) * std::pow(1.3, 3)) * hw * hw * hy * hy;
  CHECK(amise_objective(p, km, n, energy, hw, hy) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("AMISE search returns the grid minimum") {
  const PrimarySample s = dgp(250, 8, false, std::sqrt(0.25));
  const ErrorModel m = ErrorModel::gaussian(0.5);
  const AmiseResult r = amise_search(s, m, kernel_moments());
  CHECK(r.evaluated.size() == 32 * 32 + 8);
  for (const auto& e : r.evaluated) CHECK(r.value <= e[2]);

  const AmisePlugins p = amise_plugins(s, 0.25);
  const double shrink = std::pow(250.0, -1.0 / 6.0);
  const auto gw = geometric_grid(0.05 * p.sigma_x * shrink, 2.0 * p.sigma_x * shrink, 32);
  const auto gy = geometric_grid(0.05 * p.sigma_y * shrink, 2.0 * p.sigma_y * shrink, 32);
  double best = std::numeric_limits<double>::infinity();
  for (double hw : gw) {
    const double energy = inverse_charfn_energy(m, hw);
    for (double hy : gy) best = std::min(best, amise_objective(p, kernel_moments(), 250, energy, hw, hy));
  }
  CHECK(r.value <= best);
  CHECK(r.value >= best * (1 - 0.05));
  CHECK(r.h_w > 0.0);
  CHECK(r.h_y > 0.0);

  // No error: the energy term is int phi_K^2 for every h_W.
  const AmiseResult clean = amise_search(s, ErrorModel::none(), kernel_moments());
  const auto [hw0, hy0] = amise_hw_hy(s, std::vector<double>(250, 0.0), kernel_moments());
  CHECK(hw0 == doctest::Approx(clean.h_w).epsilon(1e-12));
  CHECK(hy0 == doctest::Approx(clean.h_y).epsilon(1e-12));
}

TEST_CASE("SIMEX combination rule") {
  CHECK(simex_combine(0.2, 0.3) == doctest::Approx(0.45));
  CHECK(simex_combine(0.5, 0.5) == 0.5);
}

TEST_CASE("SIMEX weight is a Gaussian KDE") {
  const std::vector<double> w{0.0, 1.0, 3.0};
  const SimexWeight kde(w);
  const double sd = std::sqrt(sample_var(w));
  const double bw = 1.06 * sd * std::pow(3.0, -0.2);
  double direct = 0.0;
  for (double wi : w) direct += std::exp(-0.5 * std::pow((1.2 - wi) / bw, 2)) / (bw * std::sqrt(2 * std::numbers::pi));
  CHECK(kde(1.2) == doctest::Approx(direct / 3.0).epsilon(1e-14));
}

TEST_CASE("SIMEX with one replicate equals a direct recomputation") {
  const PrimarySample s = dgp(40, 9, false, 0.3);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd(0.0, 0.3);
  std::vector<double> aux(40);
  for (double& a : aux) a = nd(rng);
  const ErrorModel m = ErrorModel::empirical(aux);
  TuningParams params;
  params.simex_reps = 1;
  params.seed = 33;
  params.h_grid = {0.25, 0.4, 0.6, 0.9};
  const double tau0 = 0.5;

  const SimexReplicate rep = draw_simex_replicate(s, aux, params.folds, params.seed, 0);
  const SimexWeight weight(s.w());
  const auto direct_cv = [&](double h, const std::vector<double>& train_w, std::span<const double> eval_w) {
    double total = 0.0;
    for (const auto& fold : rep.folds) {
      std::vector<double> tw, ty;
      for (std::size_t r = 0; r < 40; ++r) {
        if (std::find(fold.begin(), fold.end(), r) != fold.end()) continue;
        tw.push_back(train_w[r]);
        ty.push_back(s.y()[r]);
      }
      const PrimarySample train(tw, ty);
      for (std::size_t i : fold) {
        std::vector<double> weights(tw.size());
        for (std::size_t r = 0; r < tw.size(); ++r) weights[r] = deconv_kernel(m, h, eval_w[i] - tw[r]);
        total += check_loss(tau0, s.y()[i] - brute_argmin(weights, train, tau0)) * weight(eval_w[i]);
      }
    }
    return total;
  };

  const SimexCurves curves = simex_curves(s, m, aux, params, tau0);
  std::vector<double> star, star2;
  for (double h : params.h_grid) {
    star.push_back(direct_cv(h, rep.w_star, s.w()));
    star2.push_back(direct_cv(h, rep.w_star2, rep.w_star));
  }
  for (std::size_t g = 0; g < params.h_grid.size(); ++g) {
    CHECK(curves.cv_star[g] == doctest::Approx(star[g]).epsilon(1e-9));
    CHECK(curves.cv_star2[g] == doctest::Approx(star2[g]).epsilon(1e-9));
  }
  const double expected = simex_combine(params.h_grid[argmin_finite(star)], params.h_grid[argmin_finite(star2)]);
  const double h = simex_pilot(s, aux, m, params, tau0);
  CHECK(h == doctest::Approx(expected).epsilon(1e-15));
  CHECK(simex_pilot(s, aux, m, params, tau0) == h);
}

TEST_CASE("full bandwidth plan") {
  const PrimarySample s = dgp(200, 11, false, std::sqrt(0.25));
  const ErrorModel m = ErrorModel::gaussian(0.5);
  const EvalGrid grid = EvalGrid::equispaced(-0.8, 0.8, 11, 0.2, 0.3, 3);
  TuningParams params;
  params.seed = 5;
  const BandwidthPlan plan = select_bandwidths(s, m, params, grid);
  CHECK(plan.provenance == PilotKind::kCv);
  CHECK(plan.h > 0.0);
  CHECK(plan.h <= params.zeta * plan.h_opt);
  CHECK(plan.h >= params.zeta * plan.h_opt / std::log(200.0) * (1 - 1e-15));
  CHECK(plan.h_w > 0.0);
  CHECK(plan.h_y > 0.0);
  CHECK(plan.b > 0.0);
  CHECK(plan.h_opt == cv_pilot(s, m, params, 0.25));
  const BandwidthPlan again = select_bandwidths(s, m, params, grid);
  CHECK(again.h == plan.h);
  CHECK(again.h_w == plan.h_w);

  PlanRequest manual;
  manual.h = 0.3;
  manual.h_w = 0.4;
  manual.h_y = 0.5;
  const BandwidthPlan fixed = select_bandwidths(s, m, params, grid, manual);
  CHECK(fixed.provenance == PilotKind::kManual);
  CHECK(fixed.h == 0.3);
  CHECK(fixed.h_w == 0.4);
  CHECK(fixed.h_y == 0.5);
  CHECK(std::string(pilot_name(PilotKind::kSimex)) == "simex");
}
