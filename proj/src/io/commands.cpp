#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "quantband/error.hpp"
#include "quantband/io.hpp"
#include "quantband/variance.hpp"

namespace quantband::io {
namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

std::string header_comment(const json& config) {
  return "quantband " + version() + " config=" + config.dump();
}

EvalGrid request_grid(const FitRequest& r, const PrimarySample& sample) {
  const auto [wmin, wmax] = std::minmax_element(sample.w().begin(), sample.w().end());
  const double x_lo = r.x_lo.value_or(*wmin);
  const double x_hi = r.x_hi.value_or(*wmax);
  const std::size_t ntau = r.tau_lo == r.tau_hi ? 1 : r.ntau;
  return EvalGrid::equispaced(x_lo, x_hi, r.nx, r.tau_lo, r.tau_hi, ntau);
}

PlanRequest plan_request(const FitRequest& r, const Ingested& data) {
  PlanRequest p;
  p.pilot = r.pilot;
  p.aux = data.aux;
  p.h = r.h;
  p.h_w = r.h_w;
  p.h_y = r.h_y;
  return p;
}

TuningParams request_tuning(const FitRequest& r) {
  TuningParams t = r.tuning;
  t.seed = r.seed;
  return t;
}

std::string alpha_tag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

}  // namespace

void FitRequest::validate() const {
  const int sources = (aux_path ? 1 : 0) + (repeated ? 1 : 0) + (error_model ? 1 : 0);
  if (sources != 1) {
    throw InputError("exactly one error source is required: --aux, --repeated or --error-model");
  }
  if (log_shift && !std::isfinite(*log_shift)) throw InputError("log shift must be finite");
  if (alpha.empty()) throw InputError("at least one alpha is required");
  if (!(tau_lo > 0.0 && tau_hi < 1.0 && tau_lo <= tau_hi)) {
    throw InputError("tau region must satisfy 0 < lo <= hi < 1");
  }
  if (x_lo.has_value() != x_hi.has_value()) throw InputError("x region needs both ends");
  if (x_lo && !(*x_lo < *x_hi)) throw InputError("x region needs lo < hi");
  if (nx < 2) throw InputError("nx must be >= 2");
  if (tau_lo != tau_hi && ntau < 2) throw InputError("ntau must be >= 2 for a tau interval");
  if (pilot == PilotKind::kSimex && error_model) {
    throw InputError("the SIMEX pilot needs an auxiliary error sample");
  }
  tuning.validate();
}

Ingested ingest(const FitRequest& request) {
  request.validate();
  auto in = open_input(request.data_path);
  PrimaryData data = read_primary(in, request.repeated, request.log_shift);
  std::vector<double> aux = std::move(data.aux);
  if (request.aux_path) {
    auto aux_in = open_input(*request.aux_path);
    aux = read_aux(aux_in);
  }
  PrimarySample sample(std::move(data.w), std::move(data.y));
  if (request.error_model) {
    return {std::move(sample), parse_error_model(*request.error_model), {}};
  }
  if (aux.size() < 2) throw EmptyData("the auxiliary error sample needs at least two values");
  ErrorModel model = ErrorModel::empirical(aux);
  return {std::move(sample), std::move(model), std::move(aux)};
}

std::vector<std::string> fit_command(const FitRequest& request) {
  const Ingested data = ingest(request);
  const EvalGrid grid = request_grid(request, data.sample);
  const BandwidthPlan plan =
      select_bandwidths(data.sample, data.model, request_tuning(request), grid, plan_request(request, data));

  const DeconvKernel kernel(data.model, plan.h);
  QuantileGridFit fit = fit_grid(data.sample, kernel, grid);
  const SigmaSummary sigma = sigma_hat(data.sample, data.model, fit, VarianceConfig{plan.h_w, plan.h_y});

  BootstrapConfig boot;
  boot.replicates = request.replicates;
  boot.alpha = request.alpha;
  boot.seed = request.seed;
  const BootTensor tensor = bootstrap_thetas(fit, data.sample, boot);
  const UniformBand band = build_bands(fit, tensor, boot);

  const json config = request_to_json(request);
  const std::filesystem::path dir(request.out_dir);
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  json levels = json::array();
  for (const BandLevel& level : band.levels) {
    const auto path = dir / ("bands_alpha_" + alpha_tag(level.alpha) + ".csv");
    auto out = open_output(path);
    write_band_csv(out, band_rows(fit, level), header_comment(config));
    written.push_back(path.string());
    levels.push_back({{"alpha", level.alpha}, {"c1", level.c1}, {"c2", level.c2}, {"file", path.filename().string()}});
  }

  for (double tau : request.svg_tau) {
    const auto taus = grid.tau();
    std::size_t best = 0;
    for (std::size_t k = 1; k < taus.size(); ++k) {
      if (std::abs(taus[k] - tau) < std::abs(taus[best] - tau)) best = k;
    }
    const auto path = dir / ("band_tau_" + alpha_tag(taus[best]) + ".svg");
    auto out = open_output(path);
    write_band_svg(out, fit, band.levels.front(), best);
    written.push_back(path.string());
  }

  const json summary = {
      {"version", version()},
      {"config", config},
      {"error_model", data.model.describe()},
      {"n", data.sample.n()},
      {"grid",
       {{"x", {grid.x().front(), grid.x().back()}},
        {"nx", grid.nx()},
        {"tau", {grid.tau().front(), grid.tau().back()}},
        {"ntau", grid.ntau()}}},
      {"seed", request.seed},
      {"bandwidth", plan_to_json(plan)},
      {"critical_values", levels},
      {"clamped_nodes", kernel.clamped_nodes()},
      {"invalid_cells", fit.invalid_cells()},
      {"density_floor_hits", sigma.density_floor_hits},
      {"sigma_floor_hits", sigma.sigma_floor_hits}};
  const auto path = dir / "summary.json";
  auto out = open_output(path);
  out << summary.dump(2) << '\n';
  written.push_back(path.string());
  return written;
}

json bandwidth_command(const FitRequest& request) {
  const Ingested data = ingest(request);
  const EvalGrid grid = request_grid(request, data.sample);
  const BandwidthPlan plan =
      select_bandwidths(data.sample, data.model, request_tuning(request), grid, plan_request(request, data));
  json j = plan_to_json(plan);
  j["version"] = version();
  j["config"] = request_to_json(request);
  j["error_model"] = data.model.describe();
  return j;
}

SimReport simulate_command(const std::string& config_path, const std::string& out_csv,
                           std::optional<std::uint64_t> seed) {
  auto in = open_input(config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", e.what());
  }
  SimConfig cfg = sim_config_from_json(j);
  if (seed) cfg.master_seed = *seed;
  const SimReport report = run_study(cfg);

  const json resolved = sim_config_to_json(cfg);
  {
    auto out = open_output(out_csv);
    out << "# " << header_comment(resolved) << '\n';
    write_study_csv(report, out);
  }
  {
    json side = {{"version", version()}, {"config", resolved}};
    json failures = json::array();
    for (const auto& rec : report.replications) {
      if (!rec.ok) failures.push_back({{"rep", rec.rep}, {"error", rec.failure}});
    }
    side["failures"] = failures;
    auto out = open_output(out_csv + ".json");
    out << side.dump(2) << '\n';
  }
  return report;
}

void kernel_dump_command(std::string_view model_spec, double h, std::span<const double> xs,
                         std::ostream& out) {
  const ErrorModel model = parse_error_model(model_spec);
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("h must be positive");
  const json config = {{"model", model.describe()}, {"h", h}};
  out << "# " << header_comment(config) << '\n';
  out << "x,k_value,imag_residual\n";
  for (double x : xs) {
    const KernelValue v = deconv_kernel_value(model, h, x, gauss_legendre(kDefaultQuadratureOrder));
    if (!std::isfinite(v.real) || !std::isfinite(v.imag)) {
      throw NonFiniteResult("kernel value is not finite at x = " + format_double(x));
    }
    out << format_double(x) << ',' << format_double(v.real) << ',' << format_double(v.imag) << '\n';
  }
}

}  // namespace quantband::io
