#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spconv/data_model.hpp"
#include "spconv/econometrics.hpp"
#include "spconv/error.hpp"
#include "spconv/esda.hpp"
#include "spconv/weights.hpp"

namespace spconv {

// Sigma convergence

struct SigmaPoint {
  int year = 0;
  double cv = 0.0;
};

struct SigmaSeries {
  std::string sector;
  std::vector<SigmaPoint> points;
};

/// Coefficient of variation of productivity across regions (population
/// standard deviation over mean), one value per panel year.
inline SigmaSeries sigma_convergence(const PanelDataset& panel, const std::string& sector) {
  const auto regions = panel.sector_regions(sector);
  if (regions.size() < 2)
    fail(ErrorCode::TooFewRegions, "sector '" + sector + "' has fewer than 2 regions");
  SigmaSeries out;
  out.sector = sector;
  for (int year : panel.years(sector)) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(regions.size()));
    for (std::size_t i = 0; i < regions.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = *panel.productivity(regions[i].region_id, sector, year);
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().mean());
    out.points.push_back({year, sd / mean});
  }
  return out;
}

// Beta convergence

/// beta = -ln(1 - b) / T, the speed implied by b = 1 - exp(-beta T).
inline double convergence_rate(double b, double span_years) {
  if (!(b < 1.0))
    fail(ErrorCode::InvalidCoefficient, "convergence coefficient " + std::to_string(b) + " must be < 1");
  if (!(span_years > 0.0))
    fail(ErrorCode::InvalidCoefficient, "time span must be positive, got " + std::to_string(span_years));
  return -std::log1p(-b) / span_years;
}

/// How the fitted slope on log initial productivity maps to b.
/// Literal: b = -slope. Annualized: b = -T slope, undoing the 1/T already
/// applied to the dependent variable, so beta = -ln(1 + T slope) / T.
enum class RateMode { Literal, Annualized };

constexpr std::string_view to_string(RateMode m) {
  return m == RateMode::Literal ? "literal" : "annualized";
}

struct ConvergenceRate {
  double slope = 0.0;
  bool divergence = false;
  std::optional<double> b;
  std::optional<double> rate;
  RateMode mode = RateMode::Literal;
};

/// Slopes >= 0 are flagged as divergence and carry no rate.
inline ConvergenceRate rate_from_slope(double slope, int span_years, RateMode mode = RateMode::Literal) {
  ConvergenceRate r;
  r.slope = slope;
  r.mode = mode;
  if (!(slope < 0.0)) {
    r.divergence = true;
    return r;
  }
  r.b = mode == RateMode::Literal ? -slope : -slope * span_years;
  r.rate = convergence_rate(*r.b, span_years);
  return r;
}

enum class Conditioning { None, Covariates };
enum class SpatialChoice { None, Lag, Error };

/// Response, design [1, ln P0, X...] and the estimator the caller intends
/// to dispatch to.
struct ModelData {
  Eigen::VectorXd y;
  Eigen::MatrixXd design;
  std::vector<std::string> names;
  SpatialChoice spatial = SpatialChoice::None;
};

inline ModelData assemble_model(const CrossSection& cs, Conditioning conditioning,
                                SpatialChoice spatial) {
  if (conditioning == Conditioning::Covariates && (!cs.covariates || cs.covariates->cols() == 0))
    fail(ErrorCode::MissingCovariates, "conditional model requested but no covariates attached");
  const Eigen::Index n = cs.size();
  const Eigen::Index extra = conditioning == Conditioning::Covariates ? cs.covariates->cols() : 0;
  ModelData m;
  m.y = cs.growth;
  m.design.resize(n, 2 + extra);
  m.design.col(0).setOnes();
  m.design.col(1) = cs.log_initial;
  m.names = {"constant", "log_initial"};
  if (extra > 0) {
    m.design.rightCols(extra) = *cs.covariates;
    m.names.insert(m.names.end(), cs.covariate_names.begin(), cs.covariate_names.end());
  }
  m.spatial = spatial;
  return m;
}

/// Dispatches a spatial ML estimator; the weights are mandatory here.
inline SpatialMlFit estimate_spatial(const ModelData& m, const SpatialWeights* weights) {
  if (m.spatial == SpatialChoice::None)
    fail(ErrorCode::InvalidConfig, "model was assembled without a spatial component");
  if (weights == nullptr)
    fail(ErrorCode::MissingWeights, std::string("spatial ") +
                                        (m.spatial == SpatialChoice::Lag ? "lag" : "error") +
                                        " model requires a weights matrix");
  return m.spatial == SpatialChoice::Lag ? ml_spatial_lag(m.y, m.design, *weights, m.names)
                                         : ml_spatial_error(m.y, m.design, *weights, m.names);
}

// Specification search

enum class Specification { Ols, SpatialLag, SpatialError };

constexpr std::string_view to_string(Specification s) {
  switch (s) {
    case Specification::Ols: return "OLS";
    case Specification::SpatialLag: return "SPATIAL_LAG";
    case Specification::SpatialError: return "SPATIAL_ERROR";
  }
  return "?";
}

struct StrategyStep {
  int rule = 0;
  std::string test;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::string decision;
};

struct StrategyTrace {
  std::vector<StrategyStep> steps;
  [[nodiscard]] int terminal_rule() const { return steps.empty() ? 0 : steps.back().rule; }
};

struct SpecificationDecision {
  Specification specification = Specification::Ols;
  StrategyTrace trace;
};

/// Classic OLS-first specification search driven by the robust LM tests.
/// A test is significant iff p <= alpha. When both are significant the
/// smaller robust p-value wins; an exact tie goes to the larger statistic,
/// then to the lag model.
inline SpecificationDecision florax_select(const OlsFit& fit, const DiagnosticsReport& report,
                                           double alpha) {
  SpecificationDecision d;
  auto& steps = d.trace.steps;
  steps.push_back({1, "OLS", fit.r2_adjusted, std::numeric_limits<double>::quiet_NaN(),
                   "estimated initial model by OLS"});
  const auto& lag = report.lm_lag_robust;
  const auto& err = report.lm_error_robust;
  const bool lag_sig = lag.p_value <= alpha;
  const bool err_sig = err.p_value <= alpha;
  steps.push_back({2, "LMR_lag", lag.statistic, lag.p_value, lag_sig ? "significant" : "not significant"});
  steps.push_back({2, "LMR_error", err.statistic, err.p_value, err_sig ? "significant" : "not significant"});

  if (!lag_sig && !err_sig) {
    d.specification = Specification::Ols;
    steps.push_back({3, "decision", std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), "neither robust LM significant: keep OLS"});
  } else if (lag_sig && err_sig) {
    bool choose_lag = lag.p_value < err.p_value;
    if (lag.p_value == err.p_value) choose_lag = lag.statistic >= err.statistic;
    d.specification = choose_lag ? Specification::SpatialLag : Specification::SpatialError;
    steps.push_back({4, "decision", std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(),
                     choose_lag ? "both significant, LMR_lag more significant: spatial lag"
                                : "both significant, LMR_error more significant: spatial error"});
  } else if (lag_sig) {
    d.specification = Specification::SpatialLag;
    steps.push_back({5, "decision", std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), "only LMR_lag significant: spatial lag"});
  } else {
    d.specification = Specification::SpatialError;
    steps.push_back({6, "decision", std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), "only LMR_error significant: spatial error"});
  }
  return d;
}

// Pipeline

enum class SpatialMode { Auto, Ols, Lag, Error };

constexpr std::string_view to_string(SpatialMode m) {
  switch (m) {
    case SpatialMode::Auto: return "auto";
    case SpatialMode::Ols: return "ols";
    case SpatialMode::Lag: return "lag";
    case SpatialMode::Error: return "error";
  }
  return "?";
}

struct PipelineOptions {
  double alpha = 0.05;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  SpatialMode mode = SpatialMode::Auto;
  RateMode rate_mode = RateMode::Literal;
};

struct ConvergenceReport {
  std::string sector;
  std::vector<std::string> conditioning;
  int t0 = 0;
  int tT = 0;
  SpatialMode mode = SpatialMode::Auto;
  double alpha = 0.05;
  Specification specification = Specification::Ols;
  std::optional<StrategyTrace> trace;
  OlsFit ols;
  DiagnosticsReport diagnostics;
  std::optional<MoranGlobalResult> residual_moran_perm;
  std::optional<SpatialMlFit> ml;
  ConvergenceRate rate;

  /// Slope on ln P0 from the selected model.
  [[nodiscard]] double slope() const { return ml ? ml->coefficients(1) : ols.coefficients(1); }
};

/// Cross-section, OLS, diagnostics, specification choice, optional ML
/// re-estimation and the implied convergence rate for one sector and one
/// set of conditioning covariates. `weights` must follow the sector's
/// region order and be row-standardized.
inline ConvergenceReport run_convergence_pipeline(const PanelDataset& panel, const std::string& sector,
                                                  int t0, int tT,
                                                  const std::vector<std::string>& conditioning,
                                                  const SpatialWeights& weights,
                                                  const PipelineOptions& options = {}) {
  auto cs = build_cross_section(panel, sector, t0, tT);
  cs = attach_covariates(std::move(cs), panel, conditioning);
  weights.require_order(cs.region_ids);

  ConvergenceReport r;
  r.sector = sector;
  r.conditioning = conditioning;
  r.t0 = t0;
  r.tT = tT;
  r.mode = options.mode;
  r.alpha = options.alpha;

  auto model = assemble_model(cs, conditioning.empty() ? Conditioning::None : Conditioning::Covariates,
                              SpatialChoice::None);
  r.ols = ols(model.y, model.design, model.names);
  r.diagnostics = diagnostics(r.ols, model.design, weights);
  if (options.permutations > 0)
    r.residual_moran_perm = moran_global(r.ols.residuals, weights, options.permutations, options.seed);

  switch (options.mode) {
    case SpatialMode::Auto: {
      auto decision = florax_select(r.ols, r.diagnostics, options.alpha);
      r.specification = decision.specification;
      r.trace = std::move(decision.trace);
      break;
    }
    case SpatialMode::Ols: r.specification = Specification::Ols; break;
    case SpatialMode::Lag: r.specification = Specification::SpatialLag; break;
    case SpatialMode::Error: r.specification = Specification::SpatialError; break;
  }
  if (r.specification != Specification::Ols) {
    model.spatial = r.specification == Specification::SpatialLag ? SpatialChoice::Lag : SpatialChoice::Error;
    r.ml = estimate_spatial(model, &weights);
  }
  r.rate = rate_from_slope(r.slope(), cs.span(), options.rate_mode);
  return r;
}

/// Conditioning sets for a batch: the absolute model when `covariates` is
/// empty, one single-covariate model per name by default, or one joint model.
inline std::vector<std::vector<std::string>> conditioning_sets(const std::vector<std::string>& covariates,
                                                               bool joint) {
  if (covariates.empty()) return {{}};
  if (joint) return {covariates};
  std::vector<std::vector<std::string>> out;
  for (const auto& c : covariates) out.push_back({c});
  return out;
}

}  // namespace spconv
