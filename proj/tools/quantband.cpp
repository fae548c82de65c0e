#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quantband/error.hpp"
#include "quantband/io.hpp"
#include "quantband/parallel.hpp"

namespace {

using quantband::io::FitRequest;

int default_threads() {
  if (const char* env = std::getenv("QUANTBAND_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

void add_data_options(CLI::App& cmd, FitRequest& r, std::optional<std::string>& aux,
                      std::optional<double>& log_shift, std::optional<std::string>& model) {
  cmd.add_option("data", r.data_path, "CSV with columns y,w (or y,w1,w2 with --repeated)")
      ->required();
  cmd.add_option("--aux", aux, "CSV with a single column u of error draws");
  cmd.add_flag("--repeated", r.repeated, "Two replicate columns w1,w2 per row");
  cmd.add_option("--log-shift", log_shift, "Replace each w column by log(w + shift)")
      ->expected(0, 1)
      ->default_str("5");
  cmd.add_option("--error-model", model, "Known error law: laplace:<b>, gaussian:<sd> or none");
  cmd.add_option("--tau", r.tau_lo, "Quantile level (or lower end with --tau-hi)");
  cmd.add_option("--tau-hi", r.tau_hi, "Upper end of the quantile range");
  cmd.add_option("--x-lo", r.x_lo, "Lower end of the x region (default min W)");
  cmd.add_option("--x-hi", r.x_hi, "Upper end of the x region (default max W)");
  cmd.add_option("--nx", r.nx, "Grid points in x")->capture_default_str();
  cmd.add_option("--ntau", r.ntau, "Grid points in tau")->capture_default_str();
  cmd.add_option("--pilot", r.pilot, "Pilot bandwidth: cv or simex")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, quantband::PilotKind>{{"cv", quantband::PilotKind::kCv},
                                                      {"simex", quantband::PilotKind::kSimex}}));
  cmd.add_option("--h", r.h, "Estimation bandwidth (skips the pilot and undersmoothing)");
  cmd.add_option("--h-w", r.h_w, "Density bandwidth in x");
  cmd.add_option("--h-y", r.h_y, "Density bandwidth in y");
  cmd.add_option("--folds", r.tuning.folds, "Cross-validation folds")->capture_default_str();
  cmd.add_option("--zeta", r.tuning.zeta, "Oversmoothing factor")->capture_default_str();
  cmd.add_option("--levels", r.tuning.levels, "Undersmoothing levels L")->capture_default_str();
  cmd.add_option("--rho", r.tuning.rho, "Undersmoothing threshold")->capture_default_str();
  cmd.add_option("--simex-reps", r.tuning.simex_reps, "SIMEX resamples")->capture_default_str();
}

void finish_request(FitRequest& r, const std::optional<std::string>& aux,
                    const std::optional<double>& log_shift, const CLI::Option* log_opt,
                    const std::optional<std::string>& model, bool tau_hi_given) {
  r.aux_path = aux;
  r.error_model = model;
  if (log_opt->count() > 0) r.log_shift = log_shift.value_or(5.0);
  if (!tau_hi_given) r.tau_hi = r.tau_lo;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uniform confidence bands for quantile regression with measurement error"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", quantband::io::version());

  int threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default QUANTBAND_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  FitRequest fit_req;
  std::optional<std::string> fit_aux, fit_model;
  std::optional<double> fit_log;
  auto* fit = app.add_subcommand("fit", "Estimate quantile curves and uniform bands");
  add_data_options(*fit, fit_req, fit_aux, fit_log, fit_model);
  fit->add_option("--alpha", fit_req.alpha, "Significance levels")->capture_default_str();
  fit->add_option("--boot", fit_req.replicates, "Bootstrap replicates B")->capture_default_str();
  fit->add_option("--seed", fit_req.seed, "Random seed")->capture_default_str();
  fit->add_option("--out", fit_req.out_dir, "Output directory")->capture_default_str();
  fit->add_option("--svg-tau", fit_req.svg_tau, "Tau slices to plot as SVG");
  fit->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  const CLI::Option* fit_log_opt = fit->get_option("--log-shift");
  const CLI::Option* fit_tau_hi = fit->get_option("--tau-hi");

  FitRequest bw_req;
  std::optional<std::string> bw_aux, bw_model;
  std::optional<double> bw_log;
  auto* bw = app.add_subcommand("bandwidth", "Print the selected bandwidths as JSON");
  add_data_options(*bw, bw_req, bw_aux, bw_log, bw_model);
  bw->add_option("--seed", bw_req.seed, "Random seed")->capture_default_str();
  bw->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  const CLI::Option* bw_log_opt = bw->get_option("--log-shift");
  const CLI::Option* bw_tau_hi = bw->get_option("--tau-hi");

  std::string sim_config;
  std::string sim_out = "study.csv";
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "Run a coverage study from a JSON config");
  sim->add_option("config", sim_config, "JSON study configuration")->required();
  sim->add_option("--out", sim_out, "Study CSV path")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Override the config's master_seed");
  sim->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string dump_model;
  double dump_h = 0.0;
  std::vector<double> dump_x;
  auto* dump = app.add_subcommand("kernel-dump", "Tabulate the deconvolution kernel");
  dump->add_option("--model", dump_model, "laplace:<b>, gaussian:<sd> or none")->required();
  dump->add_option("--h", dump_h, "Bandwidth")->required();
  dump->add_option("--x", dump_x, "Evaluation points")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    quantband::set_num_threads(threads);
    if (*fit) {
      finish_request(fit_req, fit_aux, fit_log, fit_log_opt, fit_model, fit_tau_hi->count() > 0);
      for (const auto& path : quantband::io::fit_command(fit_req)) std::cout << path << '\n';
    } else if (*bw) {
      finish_request(bw_req, bw_aux, bw_log, bw_log_opt, bw_model, bw_tau_hi->count() > 0);
      std::cout << quantband::io::bandwidth_command(bw_req).dump(2) << '\n';
    } else if (*sim) {
      const auto report = quantband::io::simulate_command(sim_config, sim_out, sim_seed);
      quantband::write_study_csv(report, std::cout);
    } else if (*dump) {
      quantband::io::kernel_dump_command(dump_model, dump_h, dump_x, std::cout);
    }
  } catch (const quantband::InputError& e) {
    std::cerr << "quantband: " << e.what() << '\n';
    return 2;
  } catch (const quantband::NumericalError& e) {
    std::cerr << "quantband: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "quantband: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
