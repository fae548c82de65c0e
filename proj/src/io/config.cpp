#include <cmath>
#include <charconv>
#include <tuple>

#include "quantband/error.hpp"
#include "quantband/io.hpp"

namespace quantband::io {
namespace {

using nlohmann::json;

double parse_number(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw InputError("bad " + what + ": '" + std::string(text) + "'");
  }
  return v;
}

template <class T>
T get_field(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "wrong type");
  }
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_field<double>(j, path);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path, "must be positive");
  return v;
}

std::size_t get_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(path, "must be an integer");
  const auto v = j.get<long long>();
  if (v < 0) throw ConfigError(path, "must be non-negative");
  return static_cast<std::size_t>(v);
}

std::pair<double, double> get_range(const json& j, const std::string& path) {
  if (j.is_number()) {
    const double v = j.get<double>();
    return {v, v};
  }
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(path, "expected a number or [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

void read_tuning(const json& j, TuningParams& t) {
  if (!j.is_object()) throw ConfigError("tuning", "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = "tuning." + key;
    if (key == "folds") {
      t.folds = get_count(value, path);
      if (t.folds < 2) throw ConfigError(path, "must be >= 2");
    } else if (key == "zeta") {
      t.zeta = get_field<double>(value, path);
      if (!(t.zeta > 1.0)) throw ConfigError(path, "must be > 1");
    } else if (key == "levels") {
      t.levels = get_count(value, path);
      if (t.levels < 2) throw ConfigError(path, "must be >= 2");
    } else if (key == "rho") {
      t.rho = get_field<double>(value, path);
      if (!(t.rho > 1.0)) throw ConfigError(path, "must be > 1");
    } else if (key == "simex_reps") {
      t.simex_reps = get_count(value, path);
      if (t.simex_reps < 1) throw ConfigError(path, "must be >= 1");
    } else if (key == "h_grid") {
      t.h_grid = get_field<std::vector<double>>(value, path);
      for (double h : t.h_grid) {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError(path, "entries must be positive");
      }
    } else {
      throw ConfigError(path, "unknown field");
    }
  }
}

void read_boot(const json& j, BootstrapConfig& b) {
  if (!j.is_object()) throw ConfigError("boot", "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = "boot." + key;
    if (key == "replicates" || key == "B") {
      b.replicates = get_count(value, path);
      if (b.replicates < 1) throw ConfigError(path, "must be >= 1");
    } else if (key == "alpha") {
      b.alpha = value.is_number() ? std::vector<double>{value.get<double>()}
                                  : get_field<std::vector<double>>(value, path);
      if (b.alpha.empty()) throw ConfigError(path, "needs at least one level");
      for (double a : b.alpha) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError(path, "levels must lie in (0, 1)");
      }
    } else {
      throw ConfigError(path, "unknown field");
    }
  }
}

}  // namespace

ErrorModel parse_error_model(std::string_view spec) {
  if (spec == "none") return ErrorModel::none();
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw InputError("error model must be laplace:<b>, gaussian:<sd> or none");
  }
  const std::string_view name = spec.substr(0, colon);
  const double value = parse_number(spec.substr(colon + 1), "error model parameter");
  if (!(value > 0.0)) throw InputError("error model parameter must be positive");
  if (name == "laplace") return ErrorModel::laplace(value);
  if (name == "gaussian") return ErrorModel::gaussian(value);
  throw InputError("unknown error model '" + std::string(name) + "'");
}

json plan_to_json(const BandwidthPlan& plan) {
  return {{"h", plan.h},
          {"h_opt", plan.h_opt},
          {"h_w", plan.h_w},
          {"h_y", plan.h_y},
          {"b", plan.b},
          {"pilot", pilot_name(plan.provenance)},
          {"k", plan.k},
          {"levels", plan.levels},
          {"h_grid", plan.h_grid}};
}

json request_to_json(const FitRequest& r) {
  json j = {{"data", r.data_path},
            {"repeated", r.repeated},
            {"alpha", r.alpha},
            {"tau", {r.tau_lo, r.tau_hi}},
            {"nx", r.nx},
            {"ntau", r.ntau},
            {"replicates", r.replicates},
            {"seed", r.seed},
            {"pilot", pilot_name(r.pilot)},
            {"tuning",
             {{"folds", r.tuning.folds},
              {"zeta", r.tuning.zeta},
              {"levels", r.tuning.levels},
              {"rho", r.tuning.rho},
              {"simex_reps", r.tuning.simex_reps},
              {"h_grid", r.tuning.h_grid}}},
            {"svg_tau", r.svg_tau}};
  j["aux"] = r.aux_path ? json(*r.aux_path) : json(nullptr);
  j["log_shift"] = r.log_shift ? json(*r.log_shift) : json(nullptr);
  j["error_model"] = r.error_model ? json(*r.error_model) : json(nullptr);
  j["x"] = (r.x_lo && r.x_hi) ? json({*r.x_lo, *r.x_hi}) : json(nullptr);
  j["h"] = r.h ? json(*r.h) : json(nullptr);
  j["h_w"] = r.h_w ? json(*r.h_w) : json(nullptr);
  j["h_y"] = r.h_y ? json(*r.h_y) : json(nullptr);
  return j;
}

SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  SimConfig cfg;
  bool ratio_set = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "dgp") {
      const auto name = get_field<std::string>(value, key);
      if (name == "linear" || name == "dgp1") {
        cfg.dgp = Dgp::kLinear;
      } else if (name == "quadratic" || name == "dgp2") {
        cfg.dgp = Dgp::kQuadratic;
      } else if (name == "sine" || name == "dgp3") {
        cfg.dgp = Dgp::kSine;
      } else {
        throw ConfigError(key, "unknown dgp '" + name + "'");
      }
    } else if (key == "error") {
      const auto name = get_field<std::string>(value, key);
      if (name == "laplace") {
        cfg.error = ErrorLaw::kLaplace;
      } else if (name == "gaussian" || name == "normal") {
        cfg.error = ErrorLaw::kGaussian;
      } else {
        throw ConfigError(key, "unknown error law '" + name + "'");
      }
    } else if (key == "ratio") {
      cfg.ratio = get_positive(value, key);
      ratio_set = true;
    } else if (key == "n") {
      cfg.n = get_count(value, key);
    } else if (key == "m") {
      cfg.m = get_count(value, key);
    } else if (key == "reps") {
      cfg.reps = get_count(value, key);
    } else if (key == "boot") {
      read_boot(value, cfg.boot);
    } else if (key == "tuning") {
      read_tuning(value, cfg.tuning);
    } else if (key == "x_region") {
      std::tie(cfg.x_lo, cfg.x_hi) = get_range(value, key);
    } else if (key == "tau_region") {
      std::tie(cfg.tau_lo, cfg.tau_hi) = get_range(value, key);
    } else if (key == "nx") {
      cfg.nx = get_count(value, key);
    } else if (key == "ntau") {
      cfg.ntau = get_count(value, key);
    } else if (key == "master_seed" || key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw ConfigError(key, "must be an integer");
      }
      cfg.master_seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  if (!ratio_set) cfg.ratio = cfg.error == ErrorLaw::kLaplace ? 0.25 : 0.2;
  cfg.validate();
  return cfg;
}

json sim_config_to_json(const SimConfig& c) {
  return {{"dgp", dgp_name(c.dgp)},
          {"error", error_law_name(c.error)},
          {"ratio", c.ratio},
          {"n", c.n},
          {"m", c.aux_size()},
          {"reps", c.reps},
          {"boot", {{"replicates", c.boot.replicates}, {"alpha", c.boot.alpha}}},
          {"tuning",
           {{"folds", c.tuning.folds},
            {"zeta", c.tuning.zeta},
            {"levels", c.tuning.levels},
            {"rho", c.tuning.rho},
            {"simex_reps", c.tuning.simex_reps},
            {"h_grid", c.tuning.h_grid}}},
          {"x_region", {c.x_lo, c.x_hi}},
          {"tau_region", {c.tau_lo, c.tau_hi}},
          {"nx", c.nx},
          {"ntau", c.ntau},
          {"master_seed", c.master_seed}};
}

}  // namespace quantband::io
