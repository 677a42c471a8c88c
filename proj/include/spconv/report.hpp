#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spconv/convergence.hpp"
#include "spconv/csv.hpp"
#include "spconv/econometrics.hpp"
#include "spconv/esda.hpp"
#include "spconv/io.hpp"

namespace spconv {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kReportSchemaVersion = "1";

namespace detail {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(); }

inline Json coefficient_rows(const std::vector<std::string>& names, const Eigen::VectorXd& est,
                             const Eigen::VectorXd& se, const Eigen::VectorXd& stat,
                             const Eigen::VectorXd& p) {
  Json rows = Json::array();
  for (Eigen::Index j = 0; j < est.size(); ++j)
    rows.push_back({{"name", names[static_cast<std::size_t>(j)]},
                    {"estimate", number(est(j))},
                    {"std_error", number(se(j))},
                    {"stat", number(stat(j))},
                    {"p_value", number(p(j))}});
  return rows;
}

inline Json cell(double estimate, double stat, double p) {
  return {{"estimate", number(estimate)}, {"stat", number(stat)}, {"p_value", number(p)}};
}

inline Json test_cell(double statistic, double p) {
  return {{"statistic", number(statistic)}, {"p_value", number(p)}};
}

}  // namespace detail

inline Json to_json(const TestStat& t) {
  return {{"statistic", detail::number(t.statistic)}, {"df", t.df}, {"p_value", detail::number(t.p_value)}};
}

inline Json to_json(const OlsFit& f) {
  return {{"coefficients", detail::coefficient_rows(f.names, f.coefficients, f.std_errors, f.t_stats, f.p_values)},
          {"stat_kind", "t"},
          {"sigma2", detail::number(f.sigma2)},
          {"sigma2_ml", detail::number(f.sigma2_ml)},
          {"r2", detail::number(f.r2)},
          {"r2_adjusted", detail::number(f.r2_adjusted)},
          {"log_likelihood", detail::number(f.log_likelihood)},
          {"n", f.n},
          {"k", f.k}};
}

inline Json to_json(const DiagnosticsReport& d) {
  return {{"jb", to_json(d.jb)},
          {"bp", to_json(d.bp)},
          {"kb", to_json(d.kb)},
          {"moran_residual",
           {{"I", detail::number(d.moran.I)},
            {"expected", detail::number(d.moran.expected)},
            {"variance", detail::number(d.moran.variance)},
            {"z", detail::number(d.moran.z)},
            {"p_value", detail::number(d.moran.p_value)}}},
          {"lm_lag", to_json(d.lm_lag)},
          {"lm_lag_robust", to_json(d.lm_lag_robust)},
          {"lm_error", to_json(d.lm_error)},
          {"lm_error_robust", to_json(d.lm_error_robust)}};
}

inline Json to_json(const SpatialMlFit& f) {
  return {{"model", to_string(f.model)},
          {"spatial_coefficient",
           {{"name", f.model == SpatialModel::Lag ? "rho" : "lambda"},
            {"estimate", detail::number(f.spatial_coefficient)},
            {"std_error", detail::number(f.spatial_std_error)},
            {"stat", detail::number(f.spatial_z)},
            {"p_value", detail::number(f.spatial_p)}}},
          {"coefficients", detail::coefficient_rows(f.names, f.coefficients, f.std_errors, f.z_stats, f.p_values)},
          {"stat_kind", "z"},
          {"sigma2", detail::number(f.sigma2)},
          {"log_likelihood", detail::number(f.log_likelihood)},
          {"bp_residual", to_json(f.bp_residual)},
          {"pseudo_r2", detail::number(f.pseudo_r2)},
          {"pseudo_r2_definition", "squared correlation of fitted and observed"},
          {"search_interval", {detail::number(f.bounds.first), detail::number(f.bounds.second)}},
          {"n", f.n},
          {"k", f.k}};
}

inline Json to_json(const MoranGlobalResult& m) {
  return {{"I", detail::number(m.I)},
          {"expected", detail::number(m.expected)},
          {"perm_mean", detail::number(m.perm_mean)},
          {"perm_sd", detail::number(m.perm_sd)},
          {"z_perm", detail::number(m.z_perm)},
          {"p_perm", detail::number(m.p_perm)},
          {"n", m.n},
          {"permutations", m.permutations},
          {"seed", m.seed}};
}

inline Json to_json(const StrategyTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"rule", s.rule},
                     {"test", s.test},
                     {"statistic", detail::number(s.statistic)},
                     {"p_value", detail::number(s.p_value)},
                     {"decision", s.decision}});
  return {{"steps", steps}, {"terminal_rule", t.terminal_rule()}};
}

inline Json to_json(const ConvergenceRate& r) {
  return {{"slope", detail::number(r.slope)},
          {"divergence", r.divergence},
          {"b", r.b ? detail::number(*r.b) : Json()},
          {"rate", r.rate ? detail::number(*r.rate) : Json()},
          {"mode", to_string(r.mode)}};
}

/// One row shaped like the published convergence tables. Estimates come
/// from the selected model; JB, KB, M'I and the LM columns come from the OLS
/// specification stage; BP and adj-R² follow the selected model (pseudo-R²
/// for ML fits).
inline Json table_row(const ConvergenceReport& r) {
  Json row;
  const bool ml = r.ml.has_value();
  const auto& est = ml ? r.ml->coefficients : r.ols.coefficients;
  const auto& stat = ml ? r.ml->z_stats : r.ols.t_stats;
  const auto& p = ml ? r.ml->p_values : r.ols.p_values;
  row["Con."] = detail::cell(est(0), stat(0), p(0));
  row["Coef. b"] = detail::cell(est(1), stat(1), p(1));
  Json extra = Json::array();
  for (Eigen::Index j = 2; j < est.size(); ++j) extra.push_back(detail::cell(est(j), stat(j), p(j)));
  row["Coef. 2"] = extra.empty() ? Json() : extra[0];
  if (extra.size() > 1) row["Coef. 2+"] = extra;
  row["Spatial coef."] = ml ? detail::cell(r.ml->spatial_coefficient, r.ml->spatial_z, r.ml->spatial_p) : Json();
  const auto& d = r.diagnostics;
  row["JB"] = detail::test_cell(d.jb.statistic, d.jb.p_value);
  row["BP"] = ml ? detail::test_cell(r.ml->bp_residual.statistic, r.ml->bp_residual.p_value)
                 : detail::test_cell(d.bp.statistic, d.bp.p_value);
  row["KB"] = detail::test_cell(d.kb.statistic, d.kb.p_value);
  row["M'I"] = detail::test_cell(d.moran.I, d.moran.p_value);
  row["LM_i"] = detail::test_cell(d.lm_lag.statistic, d.lm_lag.p_value);
  row["LMR_i"] = detail::test_cell(d.lm_lag_robust.statistic, d.lm_lag_robust.p_value);
  row["LM_e"] = detail::test_cell(d.lm_error.statistic, d.lm_error.p_value);
  row["LMR_e"] = detail::test_cell(d.lm_error_robust.statistic, d.lm_error_robust.p_value);
  row["adj-R²"] = detail::number(ml ? r.ml->pseudo_r2 : r.ols.r2_adjusted);
  row["N.O."] = r.ols.n;
  return row;
}

inline Json to_json(const ConvergenceReport& r) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["sector"] = r.sector;
  j["conditioning"] = r.conditioning;
  j["t0"] = r.t0;
  j["tT"] = r.tT;
  j["spatial_mode"] = to_string(r.mode);
  j["alpha"] = r.alpha;
  j["specification"] = to_string(r.specification);
  j["strategy_trace"] = r.trace ? to_json(*r.trace) : Json();
  j["table"] = table_row(r);
  j["ols"] = to_json(r.ols);
  j["diagnostics"] = to_json(r.diagnostics);
  j["residual_moran_permutation"] = r.residual_moran_perm ? to_json(*r.residual_moran_perm) : Json();
  j["ml"] = r.ml ? to_json(*r.ml) : Json();
  j["convergence"] = to_json(r.rate);
  return j;
}

inline const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols = {
      "sector", "conditioning", "specification", "Con.", "Con. stat", "Coef. b", "Coef. b stat",
      "Coef. 2", "Coef. 2 stat", "Spatial coef.", "Spatial coef. stat", "JB", "BP", "KB", "M'I",
      "LM_i", "LMR_i", "LM_e", "LMR_e", "adj-R²", "N.O.", "rate", "divergence"};
  return cols;
}

/// CSV with the same columns as the JSON table block, one line per report.
inline std::string reports_csv(const std::vector<ConvergenceReport>& reports) {
  std::string out;
  for (std::size_t c = 0; c < table_columns().size(); ++c)
    out += (c ? "," : "") + csv::escape(table_columns()[c]);
  out += "\n";
  const auto num = [](const Json& v) -> std::string {
    return v.is_number() ? format_double(v.get<double>()) : "";
  };
  for (const auto& r : reports) {
    const Json t = table_row(r);
    std::string cond;
    for (std::size_t i = 0; i < r.conditioning.size(); ++i) cond += (i ? "+" : "") + r.conditioning[i];
    std::vector<std::string> cells = {r.sector, cond, std::string(to_string(r.specification))};
    for (const char* key : {"Con.", "Coef. b", "Coef. 2", "Spatial coef."}) {
      const Json& c = t[key];
      cells.push_back(c.is_null() ? "" : num(c["estimate"]));
      cells.push_back(c.is_null() ? "" : num(c["stat"]));
    }
    for (const char* key : {"JB", "BP", "KB", "M'I", "LM_i", "LMR_i", "LM_e", "LMR_e"})
      cells.push_back(num(t[key]["statistic"]));
    cells.push_back(num(t["adj-R²"]));
    cells.push_back(std::to_string(r.ols.n));
    cells.push_back(r.rate.rate ? format_double(*r.rate.rate) : "");
    cells.push_back(r.rate.divergence ? "true" : "false");
    for (std::size_t c = 0; c < cells.size(); ++c) out += (c ? "," : "") + csv::escape(cells[c]);
    out += "\n";
  }
  return out;
}

/// Sector × year grid of coefficients of variation.
inline std::string sigma_csv(const std::vector<SigmaSeries>& series) {
  std::set<int> years;
  for (const auto& s : series)
    for (const auto& p : s.points) years.insert(p.year);
  std::string out = "sector";
  for (int y : years) out += "," + std::to_string(y);
  out += "\n";
  for (const auto& s : series) {
    std::map<int, double> by_year;
    for (const auto& p : s.points) by_year[p.year] = p.cv;
    out += csv::escape(s.sector);
    for (int y : years) {
      auto it = by_year.find(y);
      out += "," + (it == by_year.end() ? std::string() : format_double(it->second));
    }
    out += "\n";
  }
  return out;
}

/// JSON Schema of the convergence report document.
inline Json report_schema() {
  const Json num_or_null = {{"type", {"number", "null"}}};
  const Json test = {{"type", "object"},
                     {"required", {"statistic", "df", "p_value"}},
                     {"properties", {{"statistic", num_or_null}, {"df", {{"type", "integer"}}}, {"p_value", num_or_null}}}};
  const Json coef = {{"type", "object"},
                     {"required", {"name", "estimate", "std_error", "stat", "p_value"}}};
  const Json cell = {{"type", {"object", "null"}}, {"properties", {{"estimate", num_or_null}, {"stat", num_or_null}, {"p_value", num_or_null}}}};
  const Json tcell = {{"type", "object"}, {"properties", {{"statistic", num_or_null}, {"p_value", num_or_null}}}};
  Json table_props;
  for (const char* k : {"Con.", "Coef. b", "Coef. 2", "Spatial coef."}) table_props[k] = cell;
  for (const char* k : {"JB", "BP", "KB", "M'I", "LM_i", "LMR_i", "LM_e", "LMR_e"}) table_props[k] = tcell;
  table_props["adj-R²"] = num_or_null;
  table_props["N.O."] = {{"type", "integer"}};
  Json required_table = Json::array();
  for (const auto& [k, v] : table_props.items()) required_table.push_back(k);
  return {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "spconv convergence report"},
      {"type", "object"},
      {"required", {"schema_version", "sector", "conditioning", "t0", "tT", "spatial_mode", "alpha",
                    "specification", "strategy_trace", "table", "ols", "diagnostics",
                    "residual_moran_permutation", "ml", "convergence"}},
      {"properties",
       {{"schema_version", {{"const", kReportSchemaVersion}}},
        {"sector", {{"type", "string"}}},
        {"conditioning", {{"type", "array"}, {"items", {{"type", "string"}}}}},
        {"t0", {{"type", "integer"}}},
        {"tT", {{"type", "integer"}}},
        {"spatial_mode", {{"enum", {"auto", "ols", "lag", "error"}}}},
        {"alpha", {{"type", "number"}}},
        {"specification", {{"enum", {"OLS", "SPATIAL_LAG", "SPATIAL_ERROR"}}}},
        {"strategy_trace",
         {{"type", {"object", "null"}},
          {"properties",
           {{"terminal_rule", {{"enum", {3, 4, 5, 6}}}},
            {"steps", {{"type", "array"}, {"items", {{"type", "object"}, {"required", {"rule", "test", "statistic", "p_value", "decision"}}}}}}}}}},
        {"table", {{"type", "object"}, {"required", required_table}, {"properties", table_props}}},
        {"ols", {{"type", "object"}, {"properties", {{"coefficients", {{"type", "array"}, {"items", coef}}}}}}},
        {"diagnostics",
         {{"type", "object"},
          {"required", {"jb", "bp", "kb", "moran_residual", "lm_lag", "lm_lag_robust", "lm_error", "lm_error_robust"}},
          {"properties", {{"jb", test}, {"bp", test}, {"kb", test}, {"lm_lag", test}, {"lm_lag_robust", test}, {"lm_error", test}, {"lm_error_robust", test}}}}},
        {"residual_moran_permutation", {{"type", {"object", "null"}}}},
        {"ml", {{"type", {"object", "null"}}, {"properties", {{"model", {{"enum", {"LAG", "ERROR"}}}}, {"coefficients", {{"type", "array"}, {"items", coef}}}}}}},
        {"convergence",
         {{"type", "object"},
          {"required", {"slope", "divergence", "b", "rate", "mode"}},
          {"properties", {{"divergence", {{"type", "boolean"}}}, {"mode", {{"enum", {"literal", "annualized"}}}}}}}}}}};
}

}  // namespace spconv
