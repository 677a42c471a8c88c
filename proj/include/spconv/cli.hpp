#pragma once

#include <CLI11.hpp>

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spconv/convergence.hpp"
#include "spconv/data_model.hpp"
#include "spconv/error.hpp"
#include "spconv/esda.hpp"
#include "spconv/io.hpp"
#include "spconv/report.hpp"
#include "spconv/weights.hpp"

namespace spconv::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kValidation = 3,
  kDegenerate = 4,
  kEstimation = 5,
};

struct RunConfig {
  std::string panel_path;
  std::string covariates_path;
  std::string sector = "all";
  std::optional<int> t0;
  std::optional<int> tT;
  double cutoff_km = kDefaultCutoffKm;
  bool inverse_distance = false;
  double alpha = 0.05;
  std::size_t permutations = kDefaultPermutations;
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
  std::vector<std::string> formats = {"json", "csv"};

  // esda
  std::string variable = "growth";
  bool standardize = false;

  // converge
  std::vector<std::string> covariates;
  bool joint = false;
  std::string spatial = "auto";
  std::string rate_mode = "literal";
  bool sigma = false;

  [[nodiscard]] bool wants(std::string_view format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
  }
};

/// Stage names appear in every error message; the stage kind picks the
/// exit code for errors that are not I/O.
enum class StageKind { Data, Esda, Estimation };

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, StageKind kind, const Error& e)
      : std::runtime_error(e.what()), stage_(std::move(stage)), kind_(kind), code_(e.code()) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }
  [[nodiscard]] int exit_code() const {
    if (code_ == ErrorCode::Io) return kIo;
    if (kind_ == StageKind::Esda && code_ == ErrorCode::DegenerateVariance) return kDegenerate;
    if (kind_ == StageKind::Estimation) return kEstimation;
    return kValidation;
  }

 private:
  std::string stage_;
  StageKind kind_;
  ErrorCode code_;
};

template <typename F>
auto stage(const std::string& name, StageKind kind, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw StageError(name, kind, e);
  }
}

namespace detail {

inline std::string file_tag(const std::string& sector) {
  std::string out;
  for (char c : sector) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

inline std::vector<std::string> sectors_of(const PanelDataset& panel, const std::string& sector) {
  if (sector != "all") {
    panel.require_sector(sector);
    return {sector};
  }
  return {panel.sectors().begin(), panel.sectors().end()};
}

inline std::pair<int, int> years(const RunConfig& cfg) {
  if (!cfg.t0 || !cfg.tT) fail(ErrorCode::InvalidConfig, "--t0 and --tT are required");
  return {*cfg.t0, *cfg.tT};
}

inline void require_seed(const RunConfig& cfg) {
  if (cfg.permutations > 0 && !cfg.seed)
    fail(ErrorCode::InvalidConfig, "--seed is required when --perms > 0");
}

inline void validate(const RunConfig& cfg) {
  if (cfg.panel_path.empty()) fail(ErrorCode::InvalidConfig, "--panel is required");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail(ErrorCode::InvalidConfig, "--alpha must lie in (0,1)");
  if (!(cfg.cutoff_km > 0.0)) fail(ErrorCode::NonPositiveCutoff, "--cutoff-km must be positive");
  for (const auto& f : cfg.formats)
    if (f != "json" && f != "csv") fail(ErrorCode::InvalidConfig, "unknown format '" + f + "'");
}

inline PanelDataset load(const RunConfig& cfg) {
  auto panel = stage("load-panel", StageKind::Data, [&] { return load_panel(cfg.panel_path); });
  if (!cfg.covariates_path.empty())
    panel = stage("load-covariates", StageKind::Data,
                  [&] { return load_covariates(panel, cfg.covariates_path); });
  return panel;
}

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

inline SpatialWeights sector_weights(const PanelDataset& panel, const std::string& sector,
                                     const RunConfig& cfg, std::ostream& err) {
  return stage("weights", StageKind::Data, [&] {
    auto w = row_standardize(distance_band_weights(panel.sector_regions(sector), cfg.cutoff_km,
                                                   cfg.inverse_distance));
    const auto islands = w.islands();
    if (!islands.empty())
      err << "warning: sector '" << sector << "': " << islands.size() << " islands at cutoff "
          << cfg.cutoff_km << " km\n";
    return w;
  });
}

}  // namespace detail

inline int cmd_weights(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  stage("config", StageKind::Data, [&] { detail::validate(cfg); });
  const auto panel = detail::load(cfg);
  const auto w = stage("weights", StageKind::Data, [&] {
    return row_standardize(distance_band_weights(panel.regions(), cfg.cutoff_km, cfg.inverse_distance));
  });
  const auto rep = connectivity_report(w);
  stage("write", StageKind::Data, [&] {
    const auto dir = detail::output_dir(cfg);
    write_weights(w, dir / "weights.csv", dir / "weights.json");
    Json conn;
    conn["n"] = w.size();
    conn["components"] = rep.components;
    conn["islands"] = rep.islands;
    Json counts = Json::object();
    for (std::size_t i = 0; i < rep.neighbor_counts.size(); ++i) counts[w.region_ids()[i]] = rep.neighbor_counts[i];
    conn["neighbor_counts"] = counts;
    Json dups = Json::array();
    for (const auto& [a, b] : w.duplicate_locations())
      dups.push_back({w.region_ids()[static_cast<std::size_t>(a)], w.region_ids()[static_cast<std::size_t>(b)]});
    conn["duplicate_locations"] = dups;
    atomic_write(dir / "connectivity.json", conn.dump(2) + "\n");
  });
  if (!rep.islands.empty()) {
    err << "warning: " << rep.islands.size() << " islands at cutoff " << cfg.cutoff_km << " km:";
    for (const auto& id : rep.islands) err << ' ' << id;
    err << '\n';
  }
  if (!w.duplicate_locations().empty())
    err << "warning: " << w.duplicate_locations().size() << " region pairs share coordinates\n";
  out << "weights: " << w.size() << " regions, " << rep.components << " components, "
      << rep.islands.size() << " islands\n";
  return kOk;
}

inline int cmd_esda(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  stage("config", StageKind::Data, [&] {
    detail::validate(cfg);
    detail::require_seed(cfg);
  });
  const auto panel = detail::load(cfg);
  const auto sectors = stage("config", StageKind::Data, [&] { return detail::sectors_of(panel, cfg.sector); });
  const auto dir = stage("write", StageKind::Data, [&] { return detail::output_dir(cfg); });
  const std::uint64_t seed = cfg.seed.value_or(0);
  for (const auto& sector : sectors) {
    const auto w = detail::sector_weights(panel, sector, cfg, err);
    const auto [x, ids] = stage("variable", StageKind::Data, [&] {
      if (cfg.variable == "growth" || cfg.variable == "initial") {
        const auto [t0, tT] = detail::years(cfg);
        auto cs = build_cross_section(panel, sector, t0, tT);
        return std::make_pair(Eigen::VectorXd(cfg.variable == "growth" ? cs.growth : cs.log_initial), cs.region_ids);
      }
      if (cfg.variable.rfind("level@", 0) == 0) {
        int year = 0;
        const std::string ys = cfg.variable.substr(6);
        auto [p, ec] = std::from_chars(ys.data(), ys.data() + ys.size(), year);
        if (ec != std::errc{} || p != ys.data() + ys.size())
          fail(ErrorCode::InvalidConfig, "bad year in variable '" + cfg.variable + "'");
        const auto regions = panel.sector_regions(sector);
        Eigen::VectorXd v(static_cast<Eigen::Index>(regions.size()));
        std::vector<std::string> rids;
        for (std::size_t i = 0; i < regions.size(); ++i) {
          const auto val = panel.productivity(regions[i].region_id, sector, year);
          if (!val) fail(ErrorCode::MissingYear, "sector '" + sector + "' has no year " + std::to_string(year));
          v(static_cast<Eigen::Index>(i)) = *val;
          rids.push_back(regions[i].region_id);
        }
        return std::make_pair(v, rids);
      }
      fail(ErrorCode::InvalidConfig, "unknown variable '" + cfg.variable + "' (growth, initial, level@YEAR)");
    });
    const auto global = stage("esda", StageKind::Esda, [&] { return moran_global(x, w, cfg.permutations, seed); });
    const auto local = stage("esda", StageKind::Esda, [&] { return moran_local(x, w, cfg.permutations, seed, cfg.alpha); });
    const auto scatter = stage("esda", StageKind::Esda, [&] { return moran_scatter(x, w, cfg.standardize); });
    const auto classes = lisa_classify(local, cfg.alpha);
    stage("write", StageKind::Data, [&] {
      const auto tag = detail::file_tag(sector);
      if (cfg.wants("json")) {
        Json j;
        j["sector"] = sector;
        j["variable"] = cfg.variable;
        j["cutoff_km"] = cfg.cutoff_km;
        j["moran_global"] = to_json(global);
        j["scatter_slope"] = scatter.slope;
        j["alpha"] = cfg.alpha;
        atomic_write(dir / ("moran_" + tag + ".json"), j.dump(2) + "\n");
      }
      if (cfg.wants("csv")) {
        std::string sc = "region_id,z,lag,quadrant\n";
        for (std::size_t i = 0; i < ids.size(); ++i)
          sc += csv::escape(ids[i]) + "," + format_double(scatter.points[i].z) + "," +
                format_double(scatter.points[i].lag) + "," + std::string(to_string(scatter.points[i].quadrant)) + "\n";
        atomic_write(dir / ("scatter_" + tag + ".csv"), sc);
        atomic_write(dir / ("lisa_" + tag + ".csv"), lisa_csv(ids, scatter, local, classes));
      }
    });
    out << sector << ": I = " << global.I << ", E[I] = " << global.expected << ", p = " << global.p_perm << "\n";
  }
  return kOk;
}

inline int cmd_sigma(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  stage("config", StageKind::Data, [&] { detail::validate(cfg); });
  const auto panel = detail::load(cfg);
  const auto sectors = stage("config", StageKind::Data, [&] { return detail::sectors_of(panel, cfg.sector); });
  std::vector<SigmaSeries> series;
  for (const auto& s : sectors)
    series.push_back(stage("sigma", StageKind::Data, [&] { return sigma_convergence(panel, s); }));
  stage("write", StageKind::Data, [&] {
    const auto dir = detail::output_dir(cfg);
    atomic_write(dir / "sigma.csv", sigma_csv(series));
    if (cfg.wants("json")) {
      Json j = Json::array();
      for (const auto& s : series) {
        Json pts = Json::array();
        for (const auto& p : s.points) pts.push_back({{"year", p.year}, {"cv", p.cv}});
        j.push_back({{"sector", s.sector}, {"points", pts}});
      }
      atomic_write(dir / "sigma.json", j.dump(2) + "\n");
    }
  });
  out << "sigma: " << series.size() << " sectors\n";
  return kOk;
}

inline int cmd_converge(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  PipelineOptions opt;
  stage("config", StageKind::Data, [&] {
    detail::validate(cfg);
    detail::require_seed(cfg);
    if (cfg.spatial == "auto") opt.mode = SpatialMode::Auto;
    else if (cfg.spatial == "ols") opt.mode = SpatialMode::Ols;
    else if (cfg.spatial == "lag") opt.mode = SpatialMode::Lag;
    else if (cfg.spatial == "error") opt.mode = SpatialMode::Error;
    else fail(ErrorCode::InvalidConfig, "unknown spatial mode '" + cfg.spatial + "'");
    if (cfg.rate_mode == "literal") opt.rate_mode = RateMode::Literal;
    else if (cfg.rate_mode == "annualized") opt.rate_mode = RateMode::Annualized;
    else fail(ErrorCode::InvalidConfig, "unknown rate mode '" + cfg.rate_mode + "'");
    opt.alpha = cfg.alpha;
    opt.permutations = cfg.permutations;
    opt.seed = cfg.seed.value_or(0);
  });
  const auto panel = detail::load(cfg);
  const auto sectors = stage("config", StageKind::Data, [&] { return detail::sectors_of(panel, cfg.sector); });
  const auto [t0, tT] = stage("config", StageKind::Data, [&] { return detail::years(cfg); });
  const auto dir = stage("write", StageKind::Data, [&] { return detail::output_dir(cfg); });
  const auto sets = conditioning_sets(cfg.covariates, cfg.joint);
  std::vector<SigmaSeries> sigma;
  for (const auto& sector : sectors) {
    const auto w = detail::sector_weights(panel, sector, cfg, err);
    std::vector<ConvergenceReport> reports;
    for (const auto& cond : sets) {
      stage("cross-section", StageKind::Data,
            [&] { attach_covariates(build_cross_section(panel, sector, t0, tT), panel, cond); });
      reports.push_back(stage("estimate", StageKind::Estimation,
                              [&] { return run_convergence_pipeline(panel, sector, t0, tT, cond, w, opt); }));
    }
    if (cfg.sigma) sigma.push_back(stage("sigma", StageKind::Data, [&] { return sigma_convergence(panel, sector); }));
    stage("write", StageKind::Data, [&] {
      const auto tag = detail::file_tag(sector);
      if (cfg.wants("json")) {
        Json j = Json::array();
        for (const auto& r : reports) j.push_back(to_json(r));
        atomic_write(dir / ("report_" + tag + ".json"), j.dump(2) + "\n");
      }
      if (cfg.wants("csv")) atomic_write(dir / ("report_" + tag + ".csv"), reports_csv(reports));
    });
    for (const auto& r : reports) {
      out << sector;
      for (const auto& c : r.conditioning) out << " +" << c;
      out << ": " << to_string(r.specification) << ", slope " << r.slope();
      if (r.rate.rate) out << ", rate " << *r.rate.rate;
      if (r.rate.divergence) out << ", divergence";
      out << "\n";
    }
  }
  if (cfg.sigma) stage("write", StageKind::Data, [&] { atomic_write(dir / "sigma.csv", sigma_csv(sigma)); });
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Spatial convergence analysis of regional productivity", "spconv"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.fallthrough();
  app.require_subcommand(0, 1);
  bool version = false, schema = false;
  app.add_flag("--version", version, "Print version information as JSON");
  app.add_flag("--schema", schema, "Print the JSON schema of convergence reports");
  app.add_option("--panel", cfg.panel_path, "Long-format panel CSV");
  app.add_option("--covariates", cfg.covariates_path, "Wide covariate CSV (region_id + shares)");
  app.add_option("--sector", cfg.sector, "Sector label or 'all'")->capture_default_str();
  app.add_option("--t0", cfg.t0, "Initial year");
  app.add_option("--tT", cfg.tT, "Final year");
  app.add_option("--cutoff-km", cfg.cutoff_km, "Distance band cutoff in km")->capture_default_str();
  app.add_flag("--inverse-distance", cfg.inverse_distance, "Weight neighbors by 1/d before row standardization");
  app.add_option("--alpha", cfg.alpha, "Significance level")->capture_default_str();
  app.add_option("--perms", cfg.permutations, "Permutation draws")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed (required when --perms > 0)");
  app.add_option("--out", cfg.output_dir, "Output directory")->capture_default_str();
  app.add_option("--format", cfg.formats, "Output formats: json, csv")->delimiter(',')->capture_default_str();

  auto* weights = app.add_subcommand("weights", "Build distance-band weights and report connectivity");
  auto* esda = app.add_subcommand("esda", "Global/local Moran statistics, scatter and LISA data");
  esda->add_option("--variable", cfg.variable, "growth, initial or level@YEAR")->capture_default_str();
  esda->add_flag("--standardize", cfg.standardize, "Variance-standardize the scatter variable");
  auto* converge = app.add_subcommand("converge", "Beta-convergence estimation with specification search");
  converge->add_option("--covariate", cfg.covariates, "Conditioning covariate (repeatable)");
  converge->add_flag("--joint", cfg.joint, "Enter all covariates in one regression");
  converge->add_option("--spatial", cfg.spatial, "auto, ols, lag or error")->capture_default_str();
  converge->add_option("--rate-mode", cfg.rate_mode, "literal or annualized")->capture_default_str();
  converge->add_flag("--sigma", cfg.sigma, "Also write the sigma-convergence grid");
  auto* sigma = app.add_subcommand("sigma", "Coefficient-of-variation series per sector and year");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (version) {
    out << Json{{"name", "spconv"}, {"version", kVersion}, {"report_schema", kReportSchemaVersion}}.dump() << "\n";
    return kOk;
  }
  if (schema) {
    out << report_schema().dump(2) << "\n";
    return kOk;
  }
  try {
    if (*weights) return cmd_weights(cfg, out, err);
    if (*esda) return cmd_esda(cfg, out, err);
    if (*converge) return cmd_converge(cfg, out, err);
    if (*sigma) return cmd_sigma(cfg, out, err);
  } catch (const StageError& e) {
    err << "spconv: stage '" << e.stage() << "': " << e.what() << "\n";
    return e.exit_code();
  }
  err << app.help();
  return kUsage;
}

}  // namespace spconv::cli
