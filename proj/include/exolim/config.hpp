#pragma once

// Flat JSON run configuration. Physical quantities are strings with a unit
// suffix ("9.3um", "1.953kHz", "-32deg") or bare numbers in SI. Missing keys
// keep their defaults, unknown keys are rejected, and every error names the
// offending key.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "exolim/constants.hpp"
#include "exolim/diamagnetism.hpp"
#include "exolim/geometry.hpp"
#include "exolim/integrator.hpp"
#include "exolim/kernels.hpp"
#include "exolim/limits.hpp"
#include "exolim/lockin.hpp"
#include "exolim/systematics.hpp"

namespace exolim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Dimension { none, length, angle, frequency, field, time, asd, calibration, slope, density };

namespace detail {

struct UnitEntry {
  std::string_view symbol;
  Dimension dimension;
  double scale;
};

inline constexpr UnitEntry kUnits[] = {
    {"m", Dimension::length, 1.0},          {"mm", Dimension::length, 1e-3},
    {"um", Dimension::length, 1e-6},        {"nm", Dimension::length, 1e-9},
    {"rad", Dimension::angle, 1.0},         {"deg", Dimension::angle, std::numbers::pi / 180.0},
    {"Hz", Dimension::frequency, 1.0},      {"kHz", Dimension::frequency, 1e3},
    {"MHz", Dimension::frequency, 1e6},     {"T", Dimension::field, 1.0},
    {"mT", Dimension::field, 1e-3},         {"uT", Dimension::field, 1e-6},
    {"nT", Dimension::field, 1e-9},         {"pT", Dimension::field, 1e-12},
    {"G", Dimension::field, 1e-4},          {"s", Dimension::time, 1.0},
    {"ms", Dimension::time, 1e-3},          {"min", Dimension::time, 60.0},
    {"h", Dimension::time, 3600.0},         {"T/rtHz", Dimension::asd, 1.0},
    {"nT/rtHz", Dimension::asd, 1e-9},      {"pT/rtHz", Dimension::asd, 1e-12},
    {"V/T", Dimension::calibration, 1.0},   {"V/Hz", Dimension::slope, 1.0},
    {"V/MHz", Dimension::slope, 1e-6},      {"/m3", Dimension::density, 1.0},
    {"/cm3", Dimension::density, 1e6},
};

inline std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::none: return "dimensionless";
    case Dimension::length: return "length";
    case Dimension::angle: return "angle";
    case Dimension::frequency: return "frequency";
    case Dimension::field: return "magnetic field";
    case Dimension::time: return "time";
    case Dimension::asd: return "noise density";
    case Dimension::calibration: return "calibration constant";
    case Dimension::slope: return "slope";
    case Dimension::density: return "number density";
  }
  return "dimensionless";
}

}  // namespace detail

/// Parses "<number><unit>" into SI. A bare number is taken as SI already.
inline double parse_quantity(std::string_view text, Dimension dim) {
  const std::string s(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + s + "' is not a number with a unit");
  }
  std::string unit = s.substr(used);
  while (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
  if (!std::isfinite(value)) throw std::invalid_argument("'" + s + "' is not finite");
  if (unit.empty()) return value;
  for (const auto& u : detail::kUnits) {
    if (u.symbol == unit) {
      if (u.dimension != dim) {
        throw std::invalid_argument("unit '" + unit + "' is not a " + std::string(detail::dimension_name(dim)));
      }
      return value * u.scale;
    }
  }
  throw std::invalid_argument("unknown unit '" + unit + "'");
}

/// Measured channel means and standard errors.
struct MeasurementConfig {
  ChannelMeasurement av{0.1e-12, 1.4e-12, 0};
  ChannelMeasurement sp{-1.3e-12, 1.4e-12, 0};
};

struct RunConfig {
  ExperimentGeometry geometry{};
  PhysicalConstants constants{};
  MCConfig mc{};
  int n_max{3};
  LockInChain chain{};
  double calibration_slope{0.816e-6};  // V/Hz
  bool calibration_from_slope{false};
  NoiseModel noise{};
  BiasField bias{};
  DiamagOptions diamag{};
  double misalignment_limit{10e-6};
  int misalignment_grid{5};
  int map_nodes{41};
  MeasurementConfig measurement{};
  double budget_range_av{330e-6};
  double budget_range_sp{30e-6};
  std::uint64_t sensitivity_pair_count{1u << 18};
  int sensitivity_time_samples{16};
  std::vector<SystematicParameter> budget_rows{default_systematic_parameters()};
  ConfidenceConvention confidence{};
  double lambda_min{5e-6};
  double lambda_max{5e-4};
  int points_per_decade{40};
  std::uint64_t seed{20220521};

  /// Block count of the default measurement (duration / block time).
  std::uint64_t measurement_blocks() const {
    const int periods = std::max(1, static_cast<int>(std::lround(noise.block_time * chain.reference_frequency)));
    return static_cast<std::uint64_t>(std::floor(noise.duration * chain.reference_frequency / periods));
  }

  BudgetContext budget_context(InteractionKind kind, unsigned threads) const {
    BudgetContext ctx;
    ctx.kind = kind;
    ctx.range = kind == InteractionKind::av ? budget_range_av : budget_range_sp;
    ctx.geometry = geometry;
    ctx.measured_field = kind == InteractionKind::av ? measurement.av.mean : measurement.sp.mean;
    ctx.mc = mc;
    ctx.mc.threads = threads;
    ctx.sensitivity_mc = mc;
    ctx.sensitivity_mc.pair_count = sensitivity_pair_count;
    ctx.sensitivity_mc.time_samples = sensitivity_time_samples;
    ctx.sensitivity_mc.threads = threads;
    ctx.chain = chain;
    ctx.bias = bias;
    ctx.diamag = diamag;
    ctx.diamag.threads = threads;
    ctx.misalignment_limit = misalignment_limit;
    ctx.misalignment_grid = misalignment_grid;
    ctx.seed = seed;
    ctx.threads = threads;
    return ctx;
  }

  ChannelMeasurement channel(InteractionKind kind) const {
    ChannelMeasurement m = kind == InteractionKind::av ? measurement.av : measurement.sp;
    if (m.samples == 0) m.samples = measurement_blocks();
    return m;
  }
};

/// One seed drives every random stream of a run.
inline void set_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.mc.seed = seed;
  c.noise.seed = seed;
  c.diamag.seed = seed;
}

namespace detail {

class KeyReader {
 public:
  explicit KeyReader(const nlohmann::json& j, std::string prefix = "") : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(where("") + "expected a JSON object");
  }

  template <typename F>
  void with(const std::string& key, F&& f) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      f(j_.at(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where(key) + e.what());
    }
  }

  void quantity(const std::string& key, Dimension dim, double& out, bool positive = false, bool non_negative = false) {
    with(key, [&](const nlohmann::json& v) {
      double x = 0.0;
      if (v.is_number()) {
        x = v.get<double>();
      } else if (v.is_string()) {
        x = parse_quantity(v.get<std::string>(), dim);
      } else {
        throw std::invalid_argument("expected a number or a string with a unit");
      }
      if (!std::isfinite(x)) throw std::invalid_argument("must be finite");
      if (positive && !(x > 0.0)) throw std::invalid_argument("must be positive (got " + v.dump() + ")");
      if (non_negative && !(x >= 0.0)) throw std::invalid_argument("must be non-negative (got " + v.dump() + ")");
      out = x;
    });
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, long long min_value) {
    with(key, [&](const nlohmann::json& v) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      const auto x = v.get<long long>();
      if (x < min_value) throw std::invalid_argument("must be at least " + std::to_string(min_value));
      out = static_cast<Int>(x);
    });
  }

  template <typename Parse, typename T>
  void choice(const std::string& key, T& out, Parse&& parse) {
    with(key, [&](const nlohmann::json& v) {
      if (!v.is_string()) throw std::invalid_argument("expected a string");
      out = parse(v.get<std::string>());
    });
  }

  void boolean(const std::string& key, bool& out) {
    with(key, [&](const nlohmann::json& v) {
      if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
      out = v.get<bool>();
    });
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError(where(it.key()) + "unknown key");
      }
    }
  }

  std::string where(const std::string& key) const {
    return "config key '" + prefix_ + key + "': ";
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

inline Dimension target_dimension(KernelTarget t) {
  return t == KernelTarget::nv_angle ? Dimension::angle : Dimension::length;
}

inline SystematicParameter parse_budget_row(const nlohmann::json& j, std::size_t index) {
  KeyReader r(j, "budget_rows[" + std::to_string(index) + "].");
  SystematicParameter p;
  r.with("name", [&](const nlohmann::json& v) { p.name = v.get<std::string>(); });
  if (p.name.empty()) throw ConfigError(r.where("name") + "required");
  r.choice("kind", p.kind, parse_systematic_kind);
  r.choice("target", p.target, parse_kernel_target);
  r.choice("source", p.offset_source, parse_offset_source);
  Dimension dim = Dimension::none;
  switch (p.kind) {
    case SystematicKind::kernel: dim = target_dimension(p.target); break;
    case SystematicKind::field_offset: dim = Dimension::field; break;
    case SystematicKind::phase: dim = Dimension::angle; break;
    case SystematicKind::calibration: dim = Dimension::calibration; break;
  }
  r.quantity("mean", dim, p.mean);
  r.quantity("sigma", dim, p.sigma, false, true);
  r.integer("samples", p.sample_count, 1000);
  r.reject_unknown();
  return p;
}

}  // namespace detail

/// Builds a RunConfig from parsed JSON (an empty object gives the defaults).
inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.is_null()) return c;
  detail::KeyReader r(j);
  auto& g = c.geometry;
  r.quantity("radius", Dimension::length, g.sphere.radius, true);
  r.quantity("nucleon_density", Dimension::density, g.sphere.nucleon_density, true);
  r.quantity("susceptibility", Dimension::none, g.sphere.susceptibility);
  r.quantity("offset_x", Dimension::length, g.sphere.offset_x);
  r.quantity("offset_y", Dimension::length, g.sphere.offset_y);
  r.quantity("d0", Dimension::length, g.kinematics.min_gap, true);
  r.quantity("amplitude", Dimension::length, g.kinematics.amplitude, false, true);
  r.quantity("frequency", Dimension::frequency, g.kinematics.frequency, true);
  r.quantity("slab_x", Dimension::length, g.slab.extent_x, true);
  r.quantity("slab_y", Dimension::length, g.slab.extent_y, true);
  r.quantity("thickness", Dimension::length, g.slab.thickness, true);
  r.quantity("theta", Dimension::angle, g.slab.nv_polar_angle, false, true);

  auto& k = c.constants;
  r.quantity("hbar", Dimension::none, k.hbar, true);
  r.quantity("speed_of_light", Dimension::none, k.speed_of_light, true);
  r.quantity("electron_mass", Dimension::none, k.electron_mass, true);
  r.quantity("gamma_e", Dimension::none, k.gamma_e, true);
  r.quantity("mu0", Dimension::none, k.mu0, true);
  r.quantity("elementary_charge", Dimension::none, k.elementary_charge, true);

  r.integer("pair_count", c.mc.pair_count, 1);
  r.integer("time_samples", c.mc.time_samples, 4);
  r.integer("batches", c.mc.batches, 1);
  r.choice("scheme", c.mc.scheme, parse_integration_scheme);
  r.choice("kernel_mode", c.mc.kernel_mode, [](std::string_view s) {
    if (s == "projected") return KernelMode::projected;
    if (s == "full_vector") return KernelMode::full_vector;
    throw std::invalid_argument("expected projected|full_vector");
  });
  r.with("oracle_nodes", [&](const nlohmann::json& v) {
    const auto n = v.get<std::vector<int>>();
    if (n.size() != 6) throw std::invalid_argument("expected [radial, polar, azimuthal, x, y, z]");
    for (int x : n) {
      if (x < 1) throw std::invalid_argument("node counts must be positive");
    }
    c.mc.oracle_grid = {n[0], n[1], n[2], n[3], n[4], n[5]};
  });
  r.quantity("oracle_tolerance", Dimension::none, c.mc.oracle_tolerance, true);
  r.integer("n_max", c.n_max, 1);

  r.quantity("calibration_constant", Dimension::calibration, c.chain.calibration_constant, true);
  r.quantity("calibration_slope", Dimension::slope, c.calibration_slope, true);
  r.boolean("calibration_from_slope", c.calibration_from_slope);
  r.quantity("phase_delay", Dimension::angle, c.chain.phase_delay);
  r.choice("channel_convention", c.chain.convention, parse_channel_convention);

  r.quantity("asd", Dimension::asd, c.noise.amplitude_spectral_density, false, true);
  r.quantity("duration", Dimension::time, c.noise.duration, true);
  r.quantity("block_time", Dimension::time, c.noise.block_time, true);
  r.choice("synthesis_mode", c.noise.mode, parse_synthesis_mode);
  r.integer("samples_per_period", c.noise.samples_per_period, 4);
  r.integer("recorded_blocks", c.noise.recorded_blocks, 0);
  r.integer("histogram_bins", c.noise.histogram_bins, 1);

  r.quantity("bias_field", Dimension::field, c.bias.magnitude, false, true);
  r.choice("diamag_method", c.diamag.method, parse_diamag_method);
  r.with("diamag_slab_nodes", [&](const nlohmann::json& v) {
    const auto n = v.get<std::vector<int>>();
    if (n.size() != 3 || n[0] < 1 || n[1] < 1 || n[2] < 1) throw std::invalid_argument("expected three positive counts");
    c.diamag.slab_x_nodes = n[0];
    c.diamag.slab_y_nodes = n[1];
    c.diamag.slab_z_nodes = n[2];
  });
  r.quantity("misalignment_limit", Dimension::length, c.misalignment_limit, false, true);
  r.integer("misalignment_grid", c.misalignment_grid, 1);
  r.integer("map_nodes", c.map_nodes, 1);

  r.quantity("b_av", Dimension::field, c.measurement.av.mean);
  r.quantity("b_av_error", Dimension::field, c.measurement.av.standard_error, false, true);
  r.quantity("b_sp", Dimension::field, c.measurement.sp.mean);
  r.quantity("b_sp_error", Dimension::field, c.measurement.sp.standard_error, false, true);
  r.integer("measurement_blocks", c.measurement.av.samples, 1);
  c.measurement.sp.samples = c.measurement.av.samples;

  r.quantity("budget_lambda_av", Dimension::length, c.budget_range_av, true);
  r.quantity("budget_lambda_sp", Dimension::length, c.budget_range_sp, true);
  r.integer("sensitivity_pair_count", c.sensitivity_pair_count, 1);
  r.integer("sensitivity_time_samples", c.sensitivity_time_samples, 4);
  r.with("budget_rows", [&](const nlohmann::json& v) {
    if (!v.is_array() || v.empty()) throw std::invalid_argument("expected a non-empty array of rows");
    c.budget_rows.clear();
    for (std::size_t i = 0; i < v.size(); ++i) c.budget_rows.push_back(detail::parse_budget_row(v[i], i));
  });

  r.quantity("confidence_level", Dimension::none, c.confidence.level);
  r.choice("cl_convention", c.confidence.sidedness, parse_sidedness);
  r.quantity("lambda_min", Dimension::length, c.lambda_min, true);
  r.quantity("lambda_max", Dimension::length, c.lambda_max, true);
  r.integer("points_per_decade", c.points_per_decade, 1);
  r.integer("seed", c.seed, 0);
  r.reject_unknown();

  // Cross-field checks, still reported against a key.
  const auto check = [&](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(r.where(key) + what);
  };
  check(std::abs(g.sphere.susceptibility) < 1.0, "susceptibility", "|chi| must be below 1");
  check(g.slab.nv_polar_angle <= std::numbers::pi / 2.0, "theta", "must lie in [0, 90 deg]");
  check(c.chain.phase_delay > -std::numbers::pi && c.chain.phase_delay <= std::numbers::pi, "phase_delay",
        "must lie in (-180, 180] deg");
  check(c.confidence.level > 0.5 && c.confidence.level < 1.0, "confidence_level", "must lie in (0.5, 1)");
  check(c.lambda_max > c.lambda_min, "lambda_max", "must exceed lambda_min");
  check(c.mc.time_samples > 2 * c.n_max, "time_samples", "must exceed 2 * n_max");
  if (c.calibration_from_slope) c.chain.calibration_constant = slope_to_calibration(c.calibration_slope, c.constants.gamma_e);
  c.chain.reference_frequency = g.kinematics.frequency;
  c.mc.constants = c.constants;
  set_seed(c, c.seed);
  validate(c.geometry);
  return c;
}

/// Reads a config file; an empty file gives the defaults.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return config_from_json(nlohmann::json::object());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// Fully resolved configuration in SI units, as embedded in every output.
inline nlohmann::json to_json(const RunConfig& c) {
  const auto& g = c.geometry;
  nlohmann::json j;
  j["radius_m"] = g.sphere.radius;
  j["nucleon_density_m3"] = g.sphere.nucleon_density;
  j["susceptibility"] = g.sphere.susceptibility;
  j["offset_x_m"] = g.sphere.offset_x;
  j["offset_y_m"] = g.sphere.offset_y;
  j["d0_m"] = g.kinematics.min_gap;
  j["amplitude_m"] = g.kinematics.amplitude;
  j["frequency_hz"] = g.kinematics.frequency;
  j["slab_x_m"] = g.slab.extent_x;
  j["slab_y_m"] = g.slab.extent_y;
  j["thickness_m"] = g.slab.thickness;
  j["theta_rad"] = g.slab.nv_polar_angle;
  j["hbar"] = c.constants.hbar;
  j["speed_of_light"] = c.constants.speed_of_light;
  j["electron_mass"] = c.constants.electron_mass;
  j["gamma_e"] = c.constants.gamma_e;
  j["mu0"] = c.constants.mu0;
  j["elementary_charge"] = c.constants.elementary_charge;
  j["pair_count"] = c.mc.pair_count;
  j["time_samples"] = c.mc.time_samples;
  j["batches"] = c.mc.batches;
  j["scheme"] = to_string(c.mc.scheme);
  j["kernel_mode"] = c.mc.kernel_mode == KernelMode::projected ? "projected" : "full_vector";
  const auto& q = c.mc.oracle_grid;
  j["oracle_nodes"] = {q.radial, q.polar, q.azimuthal, q.x, q.y, q.z};
  j["oracle_tolerance"] = c.mc.oracle_tolerance;
  j["n_max"] = c.n_max;
  j["calibration_constant_v_per_t"] = c.chain.calibration_constant;
  j["calibration_slope_v_per_hz"] = c.calibration_slope;
  j["calibration_from_slope"] = c.calibration_from_slope;
  j["phase_delay_rad"] = c.chain.phase_delay;
  j["channel_convention"] = to_string(c.chain.convention);
  j["asd_t_per_rthz"] = c.noise.amplitude_spectral_density;
  j["duration_s"] = c.noise.duration;
  j["block_time_s"] = c.noise.block_time;
  j["synthesis_mode"] = to_string(c.noise.mode);
  j["samples_per_period"] = c.noise.samples_per_period;
  j["recorded_blocks"] = c.noise.recorded_blocks;
  j["histogram_bins"] = c.noise.histogram_bins;
  j["bias_field_t"] = c.bias.magnitude;
  j["diamag_method"] = to_string(c.diamag.method);
  j["diamag_slab_nodes"] = {c.diamag.slab_x_nodes, c.diamag.slab_y_nodes, c.diamag.slab_z_nodes};
  j["misalignment_limit_m"] = c.misalignment_limit;
  j["misalignment_grid"] = c.misalignment_grid;
  j["map_nodes"] = c.map_nodes;
  j["b_av_t"] = c.measurement.av.mean;
  j["b_av_error_t"] = c.measurement.av.standard_error;
  j["b_sp_t"] = c.measurement.sp.mean;
  j["b_sp_error_t"] = c.measurement.sp.standard_error;
  j["measurement_blocks"] = c.channel(InteractionKind::av).samples;
  j["budget_lambda_av_m"] = c.budget_range_av;
  j["budget_lambda_sp_m"] = c.budget_range_sp;
  j["sensitivity_pair_count"] = c.sensitivity_pair_count;
  j["sensitivity_time_samples"] = c.sensitivity_time_samples;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : c.budget_rows) {
    nlohmann::json row{{"name", p.name}, {"kind", to_string(p.kind)}, {"mean", p.mean}, {"sigma", p.sigma},
                       {"samples", p.sample_count}};
    if (p.kind == SystematicKind::kernel) row["target"] = to_string(p.target);
    if (p.kind == SystematicKind::field_offset) row["source"] = to_string(p.offset_source);
    rows.push_back(row);
  }
  j["budget_rows"] = rows;
  j["confidence_level"] = c.confidence.level;
  j["cl_convention"] = to_string(c.confidence.sidedness);
  j["lambda_min_m"] = c.lambda_min;
  j["lambda_max_m"] = c.lambda_max;
  j["points_per_decade"] = c.points_per_decade;
  j["seed"] = c.seed;
  return j;
}

}  // namespace exolim
