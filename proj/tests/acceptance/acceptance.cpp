// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
//
// usage: acceptance <path-to-quantband-cli> [work-dir]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../support/oracles.hpp"
#include "quantband/deconv.hpp"
#include "quantband/parallel.hpp"
#include "quantband/quantile.hpp"
#include "quantband/sim.hpp"

using namespace quantband;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240501;

struct Outcome {
  bool ran = false;
  bool pass = false;
  std::string detail;
};

Outcome outcomes[10];

void report(int id, bool pass, const std::string& detail) {
  outcomes[id] = {true, pass, detail};
  std::printf("  [%d] %s\n", id, pass ? "ok" : "not met");
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct StudyCheck {
  StudyRow row;
  std::size_t size_order_violations = 0;
  std::size_t cell_violations = 0;
  std::size_t reps = 0;
};

StudyCheck run_cell(const SimConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimReport report = run_study(cfg);
  StudyCheck out;
  out.row = report.rows.front();
  for (const auto& rec : report.replications) {
    if (!rec.ok) continue;
    ++out.reps;
    const LevelRecord& level = rec.levels.front();
    if (level.size_pointwise > level.size_uniform) ++out.size_order_violations;
    out.cell_violations += level.pointwise_violations;
  }
  std::printf("  %s/%s n=%zu tau=[%g,%g] reps=%zu failures=%zu invalid cells=%zu ecp=%.3f size=%.3f "
              "pointwise ecp=%.3f size=%.3f (%.0f s)\n",
              dgp_name(cfg.dgp), error_law_name(cfg.error), cfg.n, cfg.tau_lo, cfg.tau_hi,
              out.row.reps_completed, out.row.failures, out.row.invalid_cells_total, out.row.ecp_uniform,
              out.row.size_uniform, out.row.ecp_pointwise, out.row.size_pointwise, seconds_since(t0));
  return out;
}

SimConfig table_cell(Dgp dgp, ErrorLaw law, double ratio, double tau_lo, double tau_hi) {
  SimConfig cfg;
  cfg.dgp = dgp;
  cfg.error = law;
  cfg.ratio = ratio;
  cfg.n = 250;
  cfg.m = 0;
  cfg.reps = 200;
  cfg.boot = BootstrapConfig{200, {0.10}, 0};
  cfg.x_lo = -0.8;
  cfg.x_hi = 0.8;
  cfg.tau_lo = tau_lo;
  cfg.tau_hi = tau_hi;
  cfg.nx = 41;
  cfg.ntau = 6;
  cfg.master_seed = kSeed;
  return cfg;
}

void coverage_criteria() {
  const StudyCheck c1 = run_cell(table_cell(Dgp::kLinear, ErrorLaw::kLaplace, 0.25, 0.2, 0.3));
  report(1,
         c1.row.ecp_uniform >= 0.90 && c1.row.ecp_uniform <= 1.00 && c1.row.size_uniform >= 1.50 &&
             c1.row.size_uniform <= 2.15,
         "ECP " + fmt("%.3f", c1.row.ecp_uniform) + " in [0.90, 1.00], size " +
             fmt("%.3f", c1.row.size_uniform) + " in [1.50, 2.15] (target 0.976 / 1.804)");

  const StudyCheck c2 = run_cell(table_cell(Dgp::kSine, ErrorLaw::kGaussian, 0.2, 0.45, 0.55));
  report(2,
         c2.row.ecp_uniform >= 0.86 && c2.row.ecp_uniform <= 1.00 && c2.row.size_uniform >= 0.95 &&
             c2.row.size_uniform <= 1.40,
         "ECP " + fmt("%.3f", c2.row.ecp_uniform) + " in [0.86, 1.00], size " +
             fmt("%.3f", c2.row.size_uniform) + " in [0.95, 1.40] (target 0.940 / 1.153)");

  const std::size_t size_bad = c1.size_order_violations + c2.size_order_violations;
  const std::size_t cell_bad = c1.cell_violations + c2.cell_violations;
  const bool ecp_ok = c1.row.ecp_pointwise <= c1.row.ecp_uniform && c2.row.ecp_pointwise <= c2.row.ecp_uniform;
  report(3, size_bad == 0 && cell_bad == 0 && ecp_ok,
         std::to_string(size_bad) + " size-order and " + std::to_string(cell_bad) +
             " critical-value violations over " + std::to_string(c1.reps + c2.reps) +
             " replications; pointwise ECP " + fmt("%.3f", c1.row.ecp_pointwise) + " <= " +
             fmt("%.3f", c1.row.ecp_uniform) + ", " + fmt("%.3f", c2.row.ecp_pointwise) + " <= " +
             fmt("%.3f", c2.row.ecp_uniform));
}

void laplace_oracle() {
  std::mt19937_64 rng(kSeed + 4);
  std::uniform_real_distribution<double> dx(-3.0, 3.0), dh(0.1, 1.5), db(0.05, 1.0);
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double x = dx(rng), h = dh(rng), b = db(rng);
    const double expected = oracle::laplace_kernel(x, h, b);
    const double value = deconv_kernel(ErrorModel::laplace(b), h, x);
    const double rel = std::abs(value - expected) / std::max(std::abs(expected), 1e-3);
    worst = std::max(worst, rel);
    if (rel > 1e-6) ++bad;
  }
  report(4, bad == 0, std::to_string(bad) + "/200 triples off by more than 1e-6 relative (worst " + fmt("%.2e", worst) + ")");
}

void real_valuedness() {
  std::mt19937_64 rng(kSeed + 5);
  std::uniform_int_distribution<int> msize(10, 400);
  std::uniform_real_distribution<double> scale(0.05, 0.8), dh(0.1, 1.5), dx(-3.0, 3.0);
  std::bernoulli_distribution laplace(0.5);
  int bad = 0;
  double worst = 0.0;
  for (int model = 0; model < 100; ++model) {
    const int m = msize(rng);
    const double s = scale(rng);
    const bool lap = laplace(rng);
    std::normal_distribution<double> nd(0.0, s);
    std::exponential_distribution<double> ed(1.0 / s);
    std::vector<double> aux(static_cast<std::size_t>(m));
    for (double& u : aux) u = lap ? (laplace(rng) ? ed(rng) : -ed(rng)) : nd(rng);
    const ErrorModel em = ErrorModel::empirical(aux);
    const double h = dh(rng);
    for (int p = 0; p < 50; ++p) {
      const KernelValue v = deconv_kernel_value(em, h, dx(rng), gauss_legendre(kDefaultQuadratureOrder), Clamp::kSkip);
      const double rel = std::abs(v.imag) / std::max(1.0, std::abs(v.real));
      worst = std::max(worst, rel);
      if (!(rel <= 1e-8)) ++bad;
    }
  }
  report(5, bad == 0, std::to_string(bad) + "/5000 unclamped evaluations with imaginary residual above 1e-8 relative (worst " + fmt("%.2e", worst) + ")");
}

double brute_force_argmin(const std::vector<double>& w, const std::vector<double>& y, double tau) {
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = y.size();
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double theta = k + 1 < n ? (sorted[k] + sorted[k + 1]) / 2.0 : sorted[n - 1];
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += w[i] * (y[i] - theta < 0.0 ? tau - 1.0 : tau);
    const double v = std::abs(sum / static_cast<double>(n));
    if (v < best_val || (v == best_val && theta < best)) {
      best_val = v;
      best = theta;
    }
  }
  return best;
}

void argmin_oracle() {
  std::mt19937_64 rng(kSeed + 6);
  std::uniform_int_distribution<int> size(2, 40), small(0, 4);
  std::uniform_real_distribution<double> tau_d(0.01, 0.99), wd(-1.0, 2.0);
  std::normal_distribution<double> nd;
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = trial % 3 == 0 ? static_cast<double>(small(rng)) : nd(rng);
      w[i] = trial % 2 ? wd(rng) : static_cast<double>(small(rng));
    }
    if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w[0] = 1.0;
    const double tau = tau_d(rng);
    const double fast = fit_point(w, PrimarySample(std::vector<double>(n, 0.0), y), tau);
    if (fast != brute_force_argmin(w, y, tau)) ++bad;
  }
  report(6, bad == 0, std::to_string(bad) + "/500 instances differ from the exhaustive argmin");
}

void unbiasedness() {
  std::mt19937_64 rng(kSeed + 7);
  std::uniform_real_distribution<double> dx(-1.0, 1.0), dh(0.2, 1.0);
  const double b = std::sqrt(0.125);
  const ErrorModel model = ErrorModel::laplace(b);
  std::exponential_distribution<double> ed(1.0 / b);
  std::bernoulli_distribution coin(0.5);
  int outside = 0;
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const double x = dx(rng), x0 = dx(rng), h = dh(rng);
    const DeconvKernel kernel(model, h);
    const std::size_t draws = 200000;
    std::vector<double> pts(draws);
    for (double& p : pts) {
      const double u = ed(rng);
      p = x - x0 - (coin(rng) ? u : -u);
    }
    double sum = 0.0, sum2 = 0.0;
    for (double p : pts) {
      const double k = kernel(p);
      sum += k;
      sum2 += k * k;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum2 / draws - mean * mean) / (draws - 1));
    const double target = static_cast<double>(oracle::base_kernel((x - x0) / h)) / h;
    const double z = std::abs(mean - target) / se;
    worst = std::max(worst, z);
    if (z > 3.0) ++outside;
  }
  report(7, outside <= 1, std::to_string(outside) + "/20 configurations outside 3 standard errors (largest " + fmt("%.2f", worst) + " SE)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(const std::string& cli, const fs::path& work) {
  fs::create_directories(work);
  const fs::path config = work / "determinism.json";
  {
    std::ofstream out(config);
    out << R"({"dgp":"linear","error":"laplace","ratio":0.25,"n":250,"reps":20,)"
        << R"("boot":{"B":50,"alpha":[0.10]},"x_region":[-0.8,0.8],"tau_region":[0.2,0.3],)"
        << R"("nx":41,"ntau":6,"master_seed":)" << kSeed << "}";
  }
  std::string outputs[2];
  int codes[2];
  const int threads[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const fs::path csv = work / ("determinism_t" + std::to_string(threads[i]) + ".csv");
    const std::string cmd = cli + " simulate " + config.string() + " --out " + csv.string() +
                            " --threads " + std::to_string(threads[i]) + " > " + (work / "simulate.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    outputs[i] = slurp(csv);
  }
  const bool same = codes[0] == 0 && codes[1] == 0 && !outputs[0].empty() && outputs[0] == outputs[1];
  report(8, same, "simulate with --threads 1 and --threads 8: " + std::string(same ? "byte-identical" : "outputs differ") +
                      " (" + std::to_string(outputs[0].size()) + " bytes)");
}

void moments() {
  const double step = 0.01;
  const int half = 20000;
  double mass = 0.0, first = 0.0, energy = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double x = i * step;
    const double w = (i == -half || i == half) ? 0.5 : 1.0;
    const double k = base_kernel(x);
    mass += w * k;
    first += w * x * k;
    energy += w * k * k;
  }
  mass *= step;
  first *= step;
  energy *= step;
  const KernelMoments km = kernel_moments();
  const bool ok = std::abs(mass - 1.0) <= 1e-6 && std::abs(first) <= 1e-9 &&
                  std::abs(km.kappa21 - 6.0) <= 1e-6 && std::abs(km.l2norm - 0.108536) <= 1e-5 &&
                  std::abs(energy - 0.108536) <= 1e-5;
  report(9, ok,
         "int K = " + fmt("%.9f", mass) + ", int xK = " + fmt("%.1e", first) + ", kappa = " + fmt("%.9f", km.kappa21) +
             ", int K^2 = " + fmt("%.7f", km.l2norm) + " (direct " + fmt("%.7f", energy) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <quantband-cli> [work-dir]\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "quantband_acceptance";
  if (const char* env = std::getenv("QUANTBAND_THREADS"); env == nullptr) {
    set_num_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  }

  laplace_oracle();
  real_valuedness();
  argmin_oracle();
  unbiasedness();
  moments();
  determinism(cli, work);
  coverage_criteria();

  int failures = 0;
  for (int id = 1; id <= 9; ++id) {
    const Outcome& o = outcomes[id];
    const bool pass = o.ran && o.pass;
    failures += pass ? 0 : 1;
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", o.ran ? o.detail.c_str() : "not run");
  }
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures ? 1 : 0;
}
