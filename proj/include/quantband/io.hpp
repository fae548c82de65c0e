#pragma once

// File formats and the command implementations behind the CLI.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quantband/bands.hpp"
#include "quantband/bandwidth.hpp"
#include "quantband/deconv.hpp"
#include "quantband/quantile.hpp"
#include "quantband/sim.hpp"

namespace quantband::io {

std::string version();

// %.17g, enough to round-trip any double.
std::string format_double(double v);

// --- CSV ingestion ---------------------------------------------------------------

struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row
};

// Comma-separated numbers under a header line. Lines starting with '#' and
// blank lines are skipped. Non-numeric or non-finite fields raise ParseError.
NumericTable read_numeric_csv(std::istream& in);

struct PrimaryData {
  std::vector<double> w;
  std::vector<double> y;
  std::vector<double> aux;  // repeated mode: (w1 - w2) / 2 per row
};

// Header `y,w`, or `y,w1,w2` when repeated. With log_shift, each w column is
// replaced by log(w + shift) before averaging.
PrimaryData read_primary(std::istream& in, bool repeated, std::optional<double> log_shift);

// Header `u`.
std::vector<double> read_aux(std::istream& in);

// "laplace:<b>", "gaussian:<sd>" or "none".
ErrorModel parse_error_model(std::string_view spec);

struct FitRequest {
  std::string data_path;
  std::optional<std::string> aux_path;
  bool repeated = false;
  std::optional<double> log_shift;
  std::optional<std::string> error_model;
  std::vector<double> alpha{0.10, 0.05};
  double tau_lo = 0.5, tau_hi = 0.5;
  std::optional<double> x_lo, x_hi;  // default [min W, max W]
  std::size_t nx = 41;
  std::size_t ntau = 11;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  PilotKind pilot = PilotKind::kCv;
  std::optional<double> h, h_w, h_y;
  TuningParams tuning;
  std::string out_dir = ".";
  std::vector<double> svg_tau;  // tau slices to plot

  void validate() const;
};

struct Ingested {
  PrimarySample sample;
  ErrorModel model;
  std::vector<double> aux;  // empty for a known error law
};

Ingested ingest(const FitRequest& request);

// --- outputs ----------------------------------------------------------------------------

struct BandRow {
  double x, tau, theta_hat, sigma_hat, lo_two, hi_two, lo_left, hi_right, pt_lo, pt_hi;
  friend bool operator==(const BandRow&, const BandRow&) = default;
};

std::vector<BandRow> band_rows(const QuantileGridFit& fit, const BandLevel& level);
void write_band_csv(std::ostream& out, std::span<const BandRow> rows, const std::string& comment);
std::vector<BandRow> read_band_csv(std::istream& in);

// theta_hat against x at one tau with the two-sided band shaded.
void write_band_svg(std::ostream& out, const QuantileGridFit& fit, const BandLevel& level,
                    std::size_t tau_index);

nlohmann::json plan_to_json(const BandwidthPlan& plan);
nlohmann::json request_to_json(const FitRequest& request);

// Throws ConfigError naming the offending field.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& cfg);

// --- commands ----------------------------------------------------------------------------

// Writes bands_alpha_<a>.csv per alpha, summary.json and band_tau_<t>.svg per
// requested slice into request.out_dir. Returns the written paths.
std::vector<std::string> fit_command(const FitRequest& request);

nlohmann::json bandwidth_command(const FitRequest& request);

// Runs the study described by the JSON file and writes out_csv plus
// out_csv + ".json" with the resolved configuration.
SimReport simulate_command(const std::string& config_path, const std::string& out_csv,
                           std::optional<std::uint64_t> seed);

// Columns x,k_value,imag_residual.
void kernel_dump_command(std::string_view model_spec, double h, std::span<const double> xs,
                         std::ostream& out);

}  // namespace quantband::io
