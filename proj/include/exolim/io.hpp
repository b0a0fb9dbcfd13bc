#pragma once

// CSV and JSON emitters. Every file carries the resolved configuration and
// seed. Numbers are written in shortest round-trip form so identical
// results give identical bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "exolim/diamagnetism.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/limits.hpp"
#include "exolim/lockin.hpp"
#include "exolim/series.hpp"
#include "exolim/systematics.hpp"

namespace exolim {

inline constexpr std::string_view kToolName = "exotic-limits";
inline constexpr std::string_view kToolVersion = "1.0.0";

inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  if (r.ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, r.ptr);
}

struct Provenance {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed{0};
  nlohmann::json parameters = nlohmann::json::object();  // command options

  nlohmann::json to_json() const {
    return {{"tool", kToolName},  {"version", kToolVersion}, {"command", command},
            {"seed", seed},       {"parameters", parameters}, {"config", config}};
  }
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(const std::vector<double>& values) {
    std::vector<std::string> row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_double(v));
    rows.push_back(std::move(row));
  }
};

/// The first line is "# provenance: <json>"; then the header and rows.
inline void write_csv(std::ostream& out, const CsvTable& t, const Provenance& p) {
  out << "# provenance: " << p.to_json().dump() << '\n';
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw std::logic_error("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void write_json(std::ostream& out, nlohmann::json body, const Provenance& p) {
  body["provenance"] = p.to_json();
  out << body.dump(2) << '\n';
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

inline void write_csv(const std::string& path, const CsvTable& t, const Provenance& p) {
  auto out = detail::open_output(path);
  write_csv(out, t, p);
}

inline void write_json(const std::string& path, const nlohmann::json& body, const Provenance& p) {
  auto out = detail::open_output(path);
  write_json(out, body, p);
}

inline CsvTable series_table(const FieldTimeSeries& s) {
  CsvTable t{{"t_s", "B_T", "mc_err_T"}, {}};
  for (std::size_t j = 0; j < s.size(); ++j) t.add({s.time(j), s.values[j], s.errors[j]});
  return t;
}

/// Row n = 0 holds the mean (in a_T) and zero sine/cosine terms are omitted.
inline CsvTable harmonics_table(const HarmonicCoefficients& c) {
  CsvTable t{{"n", "a_T", "a_err_T", "b_T", "b_err_T"}, {}};
  t.add({0.0, c.dc, c.dc_error, 0.0, 0.0});
  for (int n = 1; n <= c.n_max; ++n) {
    t.add({static_cast<double>(n), c.sine(n), c.sine_error(n), c.cosine(n), c.cosine_error(n)});
  }
  return t;
}

inline nlohmann::json harmonics_json(const HarmonicCoefficients& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 1; n <= c.n_max; ++n) {
    rows.push_back({{"n", n},
                    {"a_T", c.sine(n)},
                    {"a_err_T", c.sine_error(n)},
                    {"b_T", c.cosine(n)},
                    {"b_err_T", c.cosine_error(n)}});
  }
  return {{"modulation_frequency_hz", c.modulation_frequency}, {"mean_T", c.dc}, {"mean_err_T", c.dc_error},
          {"harmonics", rows}};
}

inline nlohmann::json budget_json(const SystematicBudget& b) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : b.entries) {
    rows.push_back({{"name", e.name},
                    {"kind", to_string(e.kind)},
                    {"value", e.value},
                    {"sigma", e.sigma},
                    {"dg_lower", e.lower},
                    {"dg_upper", e.upper},
                    {"noise_limited", e.noise_limited}});
  }
  return {{"kind", to_string(b.kind)},
          {"lambda_m", b.range},
          {"measured_field_T", b.measured_field},
          {"kernel_constant_T", b.kernel_constant},
          {"g_hat", b.coupling_estimate},
          {"rows", rows},
          {"final_lower", b.total_lower},
          {"final_upper", b.total_upper},
          {"final_symmetric", b.total_symmetric}};
}

inline CsvTable curve_table(const ExclusionCurve& c) {
  CsvTable t{{"lambda_m", "mass_eV", "bound", "g_hat", "sigma_stat", "syst_lo", "syst_hi", "CL", "status"}, {}};
  for (const auto& p : c.points) {
    std::vector<std::string> row;
    for (double v : {p.range, p.mass, p.bound, p.g_hat, p.sigma_stat, p.syst_lower, p.syst_upper, c.convention.level}) {
      row.push_back(format_double(v));
    }
    row.push_back(p.ok() ? "ok" : "error: " + p.error);
    for (char& ch : row.back()) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline nlohmann::json limit_metadata(InteractionKind kind, const ConfidenceConvention& cl) {
  return {{"kind", to_string(kind)}, {"CL", cl.level}, {"cl_convention", to_string(cl.sidedness)}, {"z", cl.z()}};
}

inline CsvTable map_table(const DiamagMap& m) {
  CsvTable t{{"x_m", "y_m", "Bpar_T"}, {}};
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    for (std::size_t j = 0; j < m.y.size(); ++j) t.add({m.x[i], m.y[j], m.at(i, j)});
  }
  return t;
}

inline nlohmann::json diamag_summary_json(const DiamagExtent& e, const MisalignmentScan& s) {
  return {{"avg_min", e.min},
          {"avg_max", e.max},
          {"avg_mean", e.mean},
          {"p2p", e.peak_to_peak},
          {"first_sine", e.first_sine},
          {"first_cosine", e.first_cosine},
          {"p2p_misaligned_max", s.max_peak_to_peak},
          {"first_sine_misaligned_max", s.max_first_sine},
          {"first_cosine_misaligned_max", s.max_first_cosine},
          {"mean_shift_misaligned_max", s.max_mean_shift},
          {"unit", "T"}};
}

inline nlohmann::json channel_json(const ChannelSummary& c) {
  return {{"mean", c.fit.mean},
          {"stderr", c.fit.standard_error},
          {"sigma", c.fit.sigma},
          {"count", c.fit.count},
          {"histogram_mean", c.histogram_fit.mean},
          {"histogram_sigma", c.histogram_fit.sigma},
          {"histogram_stderr", c.histogram_fit.standard_error}};
}

inline nlohmann::json measurement_json(const MeasurementResult& m) {
  return {{"B_AV", channel_json(m.av)},
          {"B_SP", channel_json(m.sp)},
          {"block_count", m.block_count},
          {"periods_per_block", m.periods_per_block},
          {"block_time_s", m.block_time},
          {"expected_block_sigma_T", m.expected_block_sigma},
          {"unit", "T"}};
}

inline CsvTable histogram_table(const MeasurementResult& m) {
  const auto& ha = m.av.histogram;
  const auto& hs = m.sp.histogram;
  CsvTable t{{"channel", "bin_center_T", "count"}, {}};
  for (std::size_t i = 0; i < ha.counts.size(); ++i) {
    t.rows.push_back({"B_AV", format_double(ha.bin_center(i)), std::to_string(ha.counts[i])});
  }
  for (std::size_t i = 0; i < hs.counts.size(); ++i) {
    t.rows.push_back({"B_SP", format_double(hs.bin_center(i)), std::to_string(hs.counts[i])});
  }
  return t;
}

inline CsvTable blocks_table(const MeasurementResult& m) {
  CsvTable t{{"block", "B_AV_T", "B_SP_T"}, {}};
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    t.add({static_cast<double>(i), m.blocks[i].b_av, m.blocks[i].b_sp});
  }
  return t;
}

}  // namespace exolim
