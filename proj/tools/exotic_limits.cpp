#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "exolim/exolim.hpp"

namespace {

using namespace exolim;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads{1};
  std::string format{"csv"};
};

/// Scalars of a (possibly nested) JSON object as "key,value" lines.
void flatten(const nlohmann::json& j, const std::string& prefix, CsvTable& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "provenance") continue;
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
  } else if (j.is_number_float()) {
    out.rows.push_back({prefix, format_double(j.get<double>())});
  } else {
    out.rows.push_back({prefix, j.is_string() ? j.get<std::string>() : j.dump()});
  }
}

nlohmann::json table_to_json(const CsvTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(r[i], &used);
        if (used == r[i].size()) {
          row[t.header[i]] = v;
          continue;
        }
      } catch (const std::exception&) {
      }
      row[t.header[i]] = r[i];
    }
    rows.push_back(row);
  }
  return {{"columns", t.header}, {"rows", rows}};
}

void emit_table(const CsvTable& t, const std::string& out, const GlobalOptions& g, const Provenance& p) {
  if (!out.empty()) {
    write_csv(out, t, p);
  } else if (g.format == "json") {
    write_json(std::cout, table_to_json(t), p);
  } else {
    write_csv(std::cout, t, p);
  }
}

void emit_json(const nlohmann::json& body, const std::string& out, const GlobalOptions& g, const Provenance& p) {
  if (!out.empty()) {
    write_json(out, body, p);
  } else if (g.format == "json") {
    write_json(std::cout, body, p);
  } else {
    CsvTable t{{"key", "value"}, {}};
    flatten(body, "", t);
    write_csv(std::cout, t, p);
  }
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(g.config_path);
  if (g.seed) set_seed(cfg, *g.seed);
  return cfg;
}

Provenance provenance(const std::string& command, const RunConfig& cfg, nlohmann::json parameters) {
  return {command, to_json(cfg), cfg.seed, std::move(parameters)};
}

void require_positive(double x, const std::string& flag) {
  if (!(x > 0.0)) throw ConfigError("option " + flag + ": must be positive");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exotic spin-dependent interaction fields, systematics and exclusion limits"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "flat JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed for every random stream");
  app.add_option("--threads", g.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));

  std::string kind_text = "av";
  std::string out;
  double lambda = 0.0;
  double coupling = kReferenceCoupling;

  auto* kernel = app.add_subcommand("kernel", "kernel constant K(lambda) of the first harmonic");
  std::vector<double> lambdas;
  kernel->add_option("--kind", kind_text)->check(CLI::IsMember({"av", "sp"}));
  kernel->add_option("--lambda", lambdas, "force range(s) in m")->required();
  kernel->add_option("--out", out);

  auto* fields = app.add_subcommand("fields", "sensor-averaged field over one modulation period");
  fields->add_option("--kind", kind_text)->check(CLI::IsMember({"av", "sp"}));
  fields->add_option("--lambda", lambda, "force range in m")->default_val(1e-4);
  fields->add_option("--g", coupling, "coupling product")->default_val(kReferenceCoupling);
  fields->add_option("--out", out);

  auto* harmonics = app.add_subcommand("harmonics", "Fourier coefficients of the field time series");
  int n_max = 0;
  harmonics->add_option("--kind", kind_text)->check(CLI::IsMember({"av", "sp"}));
  harmonics->add_option("--lambda", lambda, "force range in m")->default_val(1e-4);
  harmonics->add_option("--g", coupling, "coupling product")->default_val(kReferenceCoupling);
  harmonics->add_option("--nmax", n_max, "highest harmonic (default from config)");
  harmonics->add_option("--out", out);

  auto* diamag = app.add_subcommand("diamag", "diamagnetic background map and summary");
  std::string summary;
  double phase_time = 0.0;
  int nodes = 0;
  diamag->add_option("--out", out, "map CSV (x_m, y_m, Bpar_T)");
  diamag->add_option("--summary", summary, "summary JSON (stdout if omitted)");
  diamag->add_option("--time", phase_time, "time within the period for the map, s");
  diamag->add_option("--nodes", nodes, "map nodes per axis (default from config)");

  auto* budget = app.add_subcommand("budget", "systematic error budget");
  budget->add_option("--kind", kind_text)->check(CLI::IsMember({"av", "sp"}));
  budget->add_option("--lambda", lambda, "force range in m (default from config)");
  budget->add_option("--out", out);

  auto* limits = app.add_subcommand("limits", "exclusion curve over a force-range grid");
  double lmin = 0.0;
  double lmax = 0.0;
  int per_decade = 0;
  std::string cl_convention;
  limits->add_option("--kind", kind_text)->check(CLI::IsMember({"av", "sp"}));
  limits->add_option("--lmin", lmin, "smallest lambda in m (default from config)");
  limits->add_option("--lmax", lmax, "largest lambda in m (default from config)");
  limits->add_option("--per-decade", per_decade, "grid points per decade (default from config)");
  limits->add_option("--cl-convention", cl_convention)->check(CLI::IsMember({"two_sided", "one_sided"}));
  limits->add_option("--out", out);

  auto* simulate = app.add_subcommand("simulate", "synthetic lock-in measurement");
  double hours = 0.0;
  double g_av = 0.0;
  double g_sp = 0.0;
  std::size_t record = 0;
  std::string blocks_out;
  lambda = 0.0;
  simulate->add_option("--hours", hours, "run length in hours (default from config)");
  simulate->add_option("--g-av", g_av, "injected AV coupling");
  simulate->add_option("--g-sp", g_sp, "injected SP coupling");
  simulate->add_option("--lambda", lambda, "force range of the injected signal, m (default 1e-4)");
  simulate->add_option("--out", out, "histogram CSV");
  simulate->add_option("--blocks", blocks_out, "per-block output CSV");
  simulate->add_option("--record", record, "number of blocks kept for --blocks")->default_val(1000);
  simulate->add_option("--summary", summary, "summary JSON (stdout if omitted)");

  auto* reproduce = app.add_subcommand("reproduce-paper", "run the full reproduction and report every check");
  std::string outdir = "reproduce_out";
  reproduce->add_option("--outdir", outdir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    RunConfig cfg = resolve_config(g);
    const InteractionKind kind = parse_interaction_kind(kind_text);
    MCConfig mc = cfg.mc;
    mc.threads = g.threads;

    if (*kernel) {
      CsvTable t{{"kind", "lambda_m", "K_T", "K_err_T", "rel_err"}, {}};
      for (double l : lambdas) require_positive(l, "--lambda");
      for (double l : lambdas) {
        const auto k = kernel_constant(kind, l, cfg.geometry, mc);
        t.rows.push_back({std::string(to_string(kind)), format_double(l), format_double(k.value),
                          format_double(k.error), format_double(k.relative_error())});
      }
      emit_table(t, out, g, provenance("kernel", cfg, {{"kind", kind_text}, {"lambda_m", lambdas}}));
    } else if (*fields || *harmonics) {
      require_positive(lambda, "--lambda");
      const auto series = field_time_series({kind, coupling, lambda}, cfg.geometry, mc);
      const nlohmann::json params{{"kind", kind_text}, {"lambda_m", lambda}, {"g", coupling}};
      if (*fields) {
        emit_table(series_table(series), out, g, provenance("fields", cfg, params));
      } else {
        if (n_max < 0) throw ConfigError("option --nmax: must be positive");
        const int n = n_max > 0 ? n_max : cfg.n_max;
        auto p = params;
        p["n_max"] = n;
        emit_table(harmonics_table(fourier_coefficients(series, n)), out, g, provenance("harmonics", cfg, p));
      }
    } else if (*diamag) {
      const int n = nodes > 0 ? nodes : cfg.map_nodes;
      DiamagOptions opt = cfg.diamag;
      opt.threads = g.threads;
      const auto scan = misalignment_scan(cfg.geometry, cfg.bias, cfg.misalignment_limit, cfg.misalignment_grid, opt);
      const auto extent = diamag_vibration_extent(cfg.geometry, cfg.bias, opt);
      const auto prov = provenance("diamag", cfg, {{"time_s", phase_time}, {"nodes", n}});
      if (!out.empty()) write_csv(out, map_table(diamag_map(cfg.geometry, cfg.bias, phase_time, n, n, opt)), prov);
      emit_json(diamag_summary_json(extent, scan), summary, g, prov);
    } else if (*budget) {
      auto ctx = cfg.budget_context(kind, g.threads);
      if (lambda != 0.0) {
        require_positive(lambda, "--lambda");
        ctx.range = lambda;
      }
      const auto b = build_budget(cfg.budget_rows, ctx);
      emit_json(budget_json(b), out, g, provenance("budget", cfg, {{"kind", kind_text}, {"lambda_m", ctx.range}}));
    } else if (*limits) {
      if (lmin != 0.0) cfg.lambda_min = lmin;
      if (lmax != 0.0) cfg.lambda_max = lmax;
      if (per_decade != 0) cfg.points_per_decade = per_decade;
      if (!cl_convention.empty()) cfg.confidence.sidedness = parse_sidedness(cl_convention);
      require_positive(cfg.lambda_min, "--lmin");
      if (!(cfg.lambda_max > cfg.lambda_min)) throw ConfigError("option --lmax: must exceed --lmin");
      if (cfg.points_per_decade < 1) throw ConfigError("option --per-decade: must be positive");
      const auto grid = log_grid(cfg.lambda_min, cfg.lambda_max, cfg.points_per_decade);
      const auto curve = exclusion_curve(kind, grid, cfg.channel(kind), cfg.budget_rows,
                                         cfg.budget_context(kind, g.threads), cfg.confidence);
      auto params = limit_metadata(kind, cfg.confidence);
      params["lambda_min_m"] = cfg.lambda_min;
      params["lambda_max_m"] = cfg.lambda_max;
      params["points_per_decade"] = cfg.points_per_decade;
      emit_table(curve_table(curve), out, g, provenance("limits", cfg, params));
      for (const auto& p : curve.points) {
        if (!p.ok()) return kExitCheckFailure;
      }
    } else if (*simulate) {
      NoiseModel noise = cfg.noise;
      if (hours != 0.0) {
        require_positive(hours, "--hours");
        noise.duration = hours * 3600.0;
      }
      if (!blocks_out.empty()) noise.recorded_blocks = record;
      const double range = lambda != 0.0 ? lambda : 1e-4;
      require_positive(range, "--lambda");
      std::vector<CouplingHypothesis> hyp;
      if (g_av != 0.0) hyp.push_back({InteractionKind::av, g_av, range});
      if (g_sp != 0.0) hyp.push_back({InteractionKind::sp, g_sp, range});
      const auto m = synthesize_run(hyp, cfg.geometry, cfg.chain, noise, mc, g.threads);
      const auto prov = provenance(
          "simulate", cfg,
          {{"duration_s", noise.duration}, {"g_av", g_av}, {"g_sp", g_sp}, {"lambda_m", range}, {"record", noise.recorded_blocks}});
      if (!out.empty()) write_csv(out, histogram_table(m), prov);
      if (!blocks_out.empty()) write_csv(blocks_out, blocks_table(m), prov);
      emit_json(measurement_json(m), summary, g, prov);
    } else if (*reproduce) {
      const auto rep = reproduce_paper(cfg, outdir, g.threads);
      for (const auto& c : rep.checks) {
        std::printf("%-22s %-24s reference %-10s computed %-12s tol %-10s %s\n", c.id.c_str(),
                    std::string(to_string(c.status)).c_str(), format_double(c.reference).c_str(),
                    format_double(c.computed).c_str(), format_double(c.tolerance).c_str(), c.unit.c_str());
      }
      std::printf("%zu of %zu checks failed; outputs in %s\n", rep.failures(), rep.checks.size(), outdir.c_str());
      return rep.all_passed() ? kExitOk : kExitCheckFailure;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
}
