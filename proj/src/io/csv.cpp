#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

#include "quantband/error.hpp"
#include "quantband/io.hpp"

namespace quantband::io {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_field(std::string_view field, std::size_t line, std::size_t column) {
  if (field.empty()) throw ParseError(line, column, "empty field");
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, column, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, column, "non-finite value");
  return value;
}

std::size_t column_of(const NumericTable& table, const std::string& name) {
  const auto count = std::count(table.header.begin(), table.header.end(), name);
  if (count == 0) throw SchemaError("missing column '" + name + "'");
  if (count > 1) throw SchemaError("ambiguous column '" + name + "'");
  return static_cast<std::size_t>(
      std::find(table.header.begin(), table.header.end(), name) - table.header.begin());
}

}  // namespace

std::string version() { return "0.1.0"; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

NumericTable read_numeric_csv(std::istream& in) {
  NumericTable table;
  std::string raw;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split(text);
    if (!have_header) {
      for (auto f : fields) table.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(line, std::min(fields.size(), table.header.size()) + 1,
                       "expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_field(fields[c], line, c + 1);
    table.rows.push_back(std::move(row));
    table.lines.push_back(line);
  }
  if (!have_header) throw EmptyData("no header line");
  if (table.rows.empty()) throw EmptyData("no data rows");
  return table;
}

PrimaryData read_primary(std::istream& in, bool repeated, std::optional<double> log_shift) {
  const NumericTable table = read_numeric_csv(in);
  const std::size_t cy = column_of(table, "y");
  PrimaryData out;
  if (!repeated) {
    const std::size_t cw = column_of(table, "w");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      double w = table.rows[r][cw];
      if (log_shift) {
        if (!(w + *log_shift > 0.0)) throw ParseError(table.lines[r], cw + 1, "w + shift <= 0");
        w = std::log(w + *log_shift);
      }
      out.y.push_back(table.rows[r][cy]);
      out.w.push_back(w);
    }
    return out;
  }
  const std::size_t c1 = column_of(table, "w1");
  const std::size_t c2 = column_of(table, "w2");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double w1 = table.rows[r][c1];
    double w2 = table.rows[r][c2];
    if (log_shift) {
      if (!(w1 + *log_shift > 0.0)) throw ParseError(table.lines[r], c1 + 1, "w1 + shift <= 0");
      if (!(w2 + *log_shift > 0.0)) throw ParseError(table.lines[r], c2 + 1, "w2 + shift <= 0");
      w1 = std::log(w1 + *log_shift);
      w2 = std::log(w2 + *log_shift);
    }
    out.y.push_back(table.rows[r][cy]);
    out.w.push_back(0.5 * (w1 + w2));
    out.aux.push_back(0.5 * (w1 - w2));
  }
  return out;
}

std::vector<double> read_aux(std::istream& in) {
  const NumericTable table = read_numeric_csv(in);
  const std::size_t cu = column_of(table, "u");
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back(row[cu]);
  return out;
}

std::vector<BandRow> band_rows(const QuantileGridFit& fit, const BandLevel& level) {
  std::vector<BandRow> rows;
  rows.reserve(fit.grid.cells());
  for (std::size_t j = 0; j < fit.grid.nx(); ++j) {
    for (std::size_t k = 0; k < fit.grid.ntau(); ++k) {
      rows.push_back({fit.grid.x()[j], fit.grid.tau()[k], fit.theta_hat(j, k),
                      fit.sigma_hat(j, k), level.lower_two(j, k), level.upper_two(j, k),
                      level.lower_left(j, k), level.upper_right(j, k), level.pointwise_lower(j, k),
                      level.pointwise_upper(j, k)});
    }
  }
  return rows;
}

void write_band_csv(std::ostream& out, std::span<const BandRow> rows, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "x,tau,theta_hat,sigma_hat,lo_two,hi_two,lo_left,hi_right,pt_lo,pt_hi\n";
  for (const BandRow& r : rows) {
    const double v[] = {r.x,      r.tau,    r.theta_hat, r.sigma_hat, r.lo_two,
                        r.hi_two, r.lo_left, r.hi_right, r.pt_lo,     r.pt_hi};
    for (std::size_t c = 0; c < std::size(v); ++c) {
      if (c) out << ',';
      out << format_double(v[c]);
    }
    out << '\n';
  }
}

std::vector<BandRow> read_band_csv(std::istream& in) {
  // Invalid cells are written as nan, which read_numeric_csv rejects.
  std::string raw;
  std::size_t line = 0;
  bool have_header = false;
  std::vector<BandRow> rows;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split(text);
    if (!have_header) {
      static const char* const kNames[] = {"x",      "tau",     "theta_hat", "sigma_hat", "lo_two",
                                           "hi_two", "lo_left", "hi_right",  "pt_lo",     "pt_hi"};
      if (fields.size() != std::size(kNames)) throw SchemaError("unexpected band header");
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] != kNames[c]) throw SchemaError("unexpected band column '" + std::string(fields[c]) + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 10) throw ParseError(line, fields.size() + 1, "expected 10 fields");
    double v[10];
    for (std::size_t c = 0; c < 10; ++c) {
      if (fields[c] == "nan" || fields[c] == "-nan") {
        v[c] = std::nan("");
        continue;
      }
      const std::string s(fields[c]);
      char* end = nullptr;
      v[c] = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size()) throw ParseError(line, c + 1, "not a number");
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
  }
  if (!have_header) throw EmptyData("no band header");
  return rows;
}

}  // namespace quantband::io
