#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spconv/error.hpp"
#include "spconv/weights.hpp"

namespace spconv {

// Distribution tails

inline double chi2_upper(double statistic, double df) {
  if (!(statistic > 0.0)) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), statistic));
}

inline double normal_two_sided(double z) {
  if (!std::isfinite(z)) return std::isnan(z) ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(z)));
}

inline double t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return std::isnan(t) ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
}

struct TestStat {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

inline TestStat chi2_test(double statistic, int df) {
  return {statistic, df, chi2_upper(statistic, df)};
}

// Ordinary least squares

struct OlsFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;  // intercept, b on log initial, then covariates
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inverse;
  double ssr = 0.0;
  double sigma2 = 0.0;     // SSR / (n - k), used for t statistics
  double sigma2_ml = 0.0;  // SSR / n, used by likelihoods and LM statistics
  double r2 = 0.0;
  double r2_adjusted = 0.0;
  double log_likelihood = 0.0;
  Eigen::Index n = 0;
  Eigen::Index k = 0;

  [[nodiscard]] Eigen::VectorXd y() const { return fitted + residuals; }
};

namespace detail {

inline std::vector<std::string> default_names(Eigen::Index k) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < k; ++j)
    names.push_back(j == 0 ? "constant" : j == 1 ? "log_initial" : "x" + std::to_string(j - 1));
  return names;
}

/// Pivoted QR of the design with rank and size guards.
inline Eigen::ColPivHouseholderQR<Eigen::MatrixXd> design_qr(const Eigen::MatrixXd& x) {
  if (x.rows() <= x.cols())
    fail(ErrorCode::TooFewObservations, std::to_string(x.rows()) + " observations for " +
                                            std::to_string(x.cols()) + " parameters");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols())
    fail(ErrorCode::RankDeficient, "design matrix has rank " + std::to_string(qr.rank()) + " < " +
                                       std::to_string(x.cols()));
  return qr;
}

/// (X'X)^{-1} = P R^{-1} R^{-T} P' from the pivoted QR.
inline Eigen::MatrixXd xtx_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const Eigen::Index k = qr.cols();
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const auto& p = qr.colsPermutation();
  return p * (r_inv * r_inv.transpose()) * p.transpose();
}

inline double squared_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = da.squaredNorm() * db.squaredNorm();
  return denom > 0.0 ? std::pow(da.dot(db), 2) / denom : std::numeric_limits<double>::quiet_NaN();
}

inline void check_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  if (y.size() != x.rows())
    fail(ErrorCode::DimensionMismatch, "response has " + std::to_string(y.size()) +
                                           " rows, design has " + std::to_string(x.rows()));
}

}  // namespace detail

inline OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                  std::vector<std::string> names = {}) {
  detail::check_rows(y, x);
  const auto qr = detail::design_qr(x);
  OlsFit f;
  f.n = x.rows();
  f.k = x.cols();
  f.names = names.empty() ? detail::default_names(f.k) : std::move(names);
  if (static_cast<Eigen::Index>(f.names.size()) != f.k)
    fail(ErrorCode::DimensionMismatch, "coefficient names do not match design columns");
  f.coefficients = qr.solve(y);
  f.fitted = x * f.coefficients;
  f.residuals = y - f.fitted;
  f.ssr = f.residuals.squaredNorm();
  // Residuals at rounding level relative to y are an exact fit.
  if (f.ssr <= std::pow(64.0 * std::numeric_limits<double>::epsilon(), 2) * y.squaredNorm()) {
    f.fitted = y;
    f.residuals.setZero();
    f.ssr = 0.0;
  }
  const auto n = static_cast<double>(f.n);
  const auto dof = static_cast<double>(f.n - f.k);
  f.sigma2 = f.ssr / dof;
  f.sigma2_ml = f.ssr / n;
  f.xtx_inverse = detail::xtx_inverse(qr);
  f.std_errors = (f.xtx_inverse.diagonal() * f.sigma2).cwiseSqrt();
  f.t_stats.resize(f.k);
  f.p_values.resize(f.k);
  for (Eigen::Index j = 0; j < f.k; ++j) {
    f.t_stats(j) = f.coefficients(j) / f.std_errors(j);
    f.p_values(j) = t_two_sided(f.t_stats(j), dof);
  }
  const double sst = (y.array() - y.mean()).matrix().squaredNorm();
  f.r2 = sst > 0.0 ? 1.0 - f.ssr / sst : std::numeric_limits<double>::quiet_NaN();
  f.r2_adjusted = 1.0 - (1.0 - f.r2) * (n - 1.0) / dof;
  f.log_likelihood = f.ssr > 0.0
                         ? -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(f.sigma2_ml) + 1.0)
                         : std::numeric_limits<double>::infinity();
  return f;
}

// Residual diagnostics

/// JB = n/6 (S^2 + (K-3)^2/4) with moment-based skewness S and kurtosis K; chi2(2).
inline TestStat jarque_bera(const Eigen::VectorXd& e) {
  const auto n = static_cast<double>(e.size());
  const Eigen::ArrayXd d = e.array() - e.mean();
  const double m2 = d.square().sum() / n;
  if (!(m2 > 0.0)) fail(ErrorCode::DegenerateVariance, "residuals have zero variance");
  const double m3 = d.cube().sum() / n;
  const double m4 = d.square().square().sum() / n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  return chi2_test(n / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0), 2);
}

namespace detail {
/// f' Z (Z'Z)^{-1} Z' f, the explained sum of squares of f regressed on Z.
inline double explained_ss(const Eigen::VectorXd& f, const Eigen::MatrixXd& z) {
  const auto qr = design_qr(z);
  return (z * qr.solve(f)).squaredNorm();
}
}  // namespace detail

/// Breusch-Pagan LM form: half the explained sum of squares of
/// e_i^2 / sigma^2 - 1 regressed on `z` (which carries the constant); chi2(k-1).
inline TestStat breusch_pagan(const Eigen::VectorXd& e, const Eigen::MatrixXd& z) {
  const double s2 = e.squaredNorm() / static_cast<double>(e.size());
  if (!(s2 > 0.0)) fail(ErrorCode::DegenerateVariance, "residuals have zero variance");
  const Eigen::VectorXd f = (e.array().square() / s2 - 1.0).matrix();
  const Eigen::VectorXd fc = f.array() - f.mean();
  return chi2_test(0.5 * detail::explained_ss(fc, z), static_cast<int>(z.cols() - 1));
}

/// Koenker-Bassett: the studentized Breusch-Pagan, n R^2 of the squared
/// residuals on `z`; chi2(k-1).
inline TestStat koenker_bassett(const Eigen::VectorXd& e, const Eigen::MatrixXd& z) {
  const auto n = static_cast<double>(e.size());
  const Eigen::VectorXd u = e.array().square() - e.squaredNorm() / n;
  const Eigen::VectorXd uc = u.array() - u.mean();
  const double v = uc.squaredNorm() / n;
  if (!(v > 0.0)) fail(ErrorCode::DegenerateVariance, "squared residuals are constant");
  return chi2_test(detail::explained_ss(uc, z) / v, static_cast<int>(z.cols() - 1));
}

struct MoranResidual {
  double I = 0.0;
  double expected = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct DiagnosticsReport {
  TestStat jb;
  TestStat bp;
  TestStat kb;
  MoranResidual moran;
  TestStat lm_lag;
  TestStat lm_lag_robust;
  TestStat lm_error;
  TestStat lm_error_robust;
};

/// Full battery for an OLS fit against row-standardized weights. sigma^2 is
/// the ML variance e'e/n throughout; T = tr(W'W + WW) and
/// D = (WXb)' M (WXb) / sigma^2 + T with M the annihilator of X.
inline DiagnosticsReport diagnostics(const OlsFit& fit, const Eigen::MatrixXd& x,
                                     const SpatialWeights& w) {
  if (x.rows() != fit.n || x.cols() != fit.k || w.size() != fit.n)
    fail(ErrorCode::DimensionMismatch, "fit, design and weights disagree on dimensions");
  w.require_row_standardized();
  const Eigen::MatrixXd& wm = w.matrix();
  const Eigen::VectorXd& e = fit.residuals;
  const Eigen::VectorXd y = fit.y();
  const auto n = static_cast<double>(fit.n);
  const auto k = static_cast<double>(fit.k);
  const double ee = e.squaredNorm();
  if (!(ee > 0.0)) fail(ErrorCode::DegenerateVariance, "exact fit: residuals are identically zero");
  const double s = w.total_weight();
  if (!(s > 0.0)) fail(ErrorCode::EmptyWeights, "weights sum to zero; every region is an island");

  DiagnosticsReport r;
  r.jb = jarque_bera(e);
  r.bp = breusch_pagan(e, x);
  r.kb = koenker_bassett(e, x);

  const Eigen::VectorXd we = wm * e;
  const Eigen::VectorXd wy = wm * y;

  // Residual Moran's I with its exact moments under normal errors.
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(fit.n, fit.n) - x * fit.xtx_inverse * x.transpose();
  const Eigen::MatrixXd mw = m * wm;
  const double tr_mw = mw.trace();
  const double tr_mwmwt = (mw * m * wm.transpose()).trace();
  const double tr_mw2 = (mw * mw).trace();
  const double scale = n / s;
  r.moran.I = scale * e.dot(we) / ee;
  r.moran.expected = scale * tr_mw / (n - k);
  r.moran.variance = scale * scale * (tr_mwmwt + tr_mw2 + tr_mw * tr_mw) / ((n - k) * (n - k + 2.0)) -
                     r.moran.expected * r.moran.expected;
  r.moran.z = (r.moran.I - r.moran.expected) / std::sqrt(r.moran.variance);
  r.moran.p_value = normal_two_sided(r.moran.z);

  const double s2 = ee / n;
  const double t = (wm.cwiseProduct(wm)).sum() + (wm.cwiseProduct(wm.transpose())).sum();
  const Eigen::VectorXd wxb = wm * fit.fitted;
  const Eigen::VectorXd mwxb = m * wxb;
  const double d = wxb.dot(mwxb) / s2 + t;
  const double score_error = e.dot(we) / s2;
  const double score_lag = e.dot(wy) / s2;

  r.lm_error = chi2_test(score_error * score_error / t, 1);
  r.lm_lag = chi2_test(score_lag * score_lag / d, 1);
  r.lm_lag_robust = chi2_test(std::pow(score_lag - score_error, 2) / (d - t), 1);
  r.lm_error_robust = chi2_test(std::pow(score_error - t / d * score_lag, 2) / (t * (1.0 - t / d)), 1);
  return r;
}

// Maximum likelihood spatial models

enum class SpatialModel { Lag, Error };

constexpr std::string_view to_string(SpatialModel m) {
  return m == SpatialModel::Lag ? "LAG" : "ERROR";
}

/// ln|I - a W| from a single eigendecomposition of W, plus the open interval
/// (1/omega_min, 1/omega_max) on which I - aW stays nonsingular.
class LogDeterminant {
 public:
  explicit LogDeterminant(const Eigen::MatrixXd& w) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(w, false);
    if (solver.info() != Eigen::Success)
      fail(ErrorCode::NonConvergence, "eigendecomposition of the weights matrix failed");
    eigenvalues_ = solver.eigenvalues();
    double lo = 0.0, hi = 0.0;
    for (const auto& ev : eigenvalues_) {
      if (std::abs(ev.imag()) > 1e-10) continue;
      lo = std::min(lo, ev.real());
      hi = std::max(hi, ev.real());
    }
    omega_min_ = lo;
    omega_max_ = hi;
  }

  [[nodiscard]] double operator()(double a) const {
    double total = 0.0;
    for (const auto& ev : eigenvalues_) total += std::log(std::abs(1.0 - a * ev));
    return total;
  }

  [[nodiscard]] double omega_min() const { return omega_min_; }
  [[nodiscard]] double omega_max() const { return omega_max_; }

  /// Search interval shrunk by `margin` at both ends. Falls back to -1 (or
  /// +1) when W has no negative (or positive) real eigenvalue.
  [[nodiscard]] std::pair<double, double> bounds(double margin = 1e-6) const {
    const double lo = omega_min_ < -1e-12 ? 1.0 / omega_min_ : -1.0;
    const double hi = omega_max_ > 1e-12 ? 1.0 / omega_max_ : 1.0;
    return {lo + margin, hi - margin};
  }

 private:
  Eigen::VectorXcd eigenvalues_;
  double omega_min_ = 0.0;
  double omega_max_ = 0.0;
};

struct SpatialMlFit {
  SpatialModel model = SpatialModel::Lag;
  std::vector<std::string> names;
  double spatial_coefficient = 0.0;  // rho (lag) or lambda (error)
  double spatial_std_error = 0.0;
  double spatial_z = 0.0;
  double spatial_p = 1.0;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z_stats;
  Eigen::VectorXd p_values;
  Eigen::VectorXd residuals;  // innovations xi
  Eigen::VectorXd fitted;     // y - xi
  double sigma2 = 0.0;        // xi'xi / n
  double log_likelihood = 0.0;
  TestStat bp_residual;
  double pseudo_r2 = 0.0;  // squared correlation of fitted and observed
  std::pair<double, double> bounds{0.0, 0.0};
  Eigen::Index n = 0;
  Eigen::Index k = 0;
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double concentrated_ll(double n, double sigma2, double logdet) {
  return -0.5 * n * (kLog2Pi + 1.0) - 0.5 * n * std::log(sigma2) + logdet;
}

/// Maximizes `ll` over [lo, hi]: a coarse grid locates the basin, Brent's
/// method polishes within the neighboring grid cells.
template <typename F>
double maximize_scalar(F ll, double lo, double hi) {
  constexpr int kGrid = 200;
  double best = lo, best_value = -std::numeric_limits<double>::infinity();
  int best_index = 0;
  for (int g = 0; g <= kGrid; ++g) {
    const double a = lo + (hi - lo) * g / kGrid;
    const double v = ll(a);
    if (v > best_value) {
      best_value = v;
      best = a;
      best_index = g;
    }
  }
  if (!std::isfinite(best_value))
    fail(ErrorCode::NonConvergence, "concentrated likelihood is not finite on the search interval");
  const double a = lo + (hi - lo) * std::max(0, best_index - 1) / kGrid;
  const double b = lo + (hi - lo) * std::min(kGrid, best_index + 1) / kGrid;
  std::uintmax_t iterations = 500;
  const auto [arg, neg] = boost::math::tools::brent_find_minima(
      [&](double v) { return -ll(v); }, a, b, std::numeric_limits<double>::digits / 2, iterations);
  if (iterations >= 500) fail(ErrorCode::NonConvergence, "line search exhausted its iteration budget");
  return -neg >= best_value ? arg : best;
}

inline Eigen::MatrixXd invert_information(const Eigen::MatrixXd& info) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible()) fail(ErrorCode::NonConvergence, "information matrix is singular");
  return lu.inverse();
}

inline void check_spatial_inputs(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                 const SpatialWeights& w) {
  check_rows(y, x);
  if (w.size() != y.size())
    fail(ErrorCode::DimensionMismatch, "weights cover " + std::to_string(w.size()) +
                                           " regions, data has " + std::to_string(y.size()));
  w.require_row_standardized();
}

/// Standard errors from the inverse information matrix ordered
/// (beta, spatial, sigma^2). With an all-zero W the spatial parameter is not
/// identified; its row is dropped and its statistics are NaN.
inline void fill_inference(SpatialMlFit& f, const Eigen::MatrixXd& info) {
  const Eigen::Index k = f.k;
  Eigen::VectorXd variances(k + 1);
  if (info(k, k) > 0.0) {
    const Eigen::MatrixXd cov = invert_information(info);
    variances << cov.diagonal().head(k), cov(k, k);
  } else {
    Eigen::MatrixXd reduced(k + 1, k + 1);
    reduced.topLeftCorner(k, k) = info.topLeftCorner(k, k);
    reduced.block(0, k, k, 1) = info.block(0, k + 1, k, 1);
    reduced.block(k, 0, 1, k) = info.block(k + 1, 0, 1, k);
    reduced(k, k) = info(k + 1, k + 1);
    const Eigen::MatrixXd cov = invert_information(reduced);
    variances << cov.diagonal().head(k), std::numeric_limits<double>::quiet_NaN();
  }
  f.std_errors = variances.head(k).cwiseSqrt();
  f.z_stats = f.coefficients.cwiseQuotient(f.std_errors);
  f.p_values.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) f.p_values(j) = normal_two_sided(f.z_stats(j));
  f.spatial_std_error = std::sqrt(variances(k));
  f.spatial_z = f.spatial_coefficient / f.spatial_std_error;
  f.spatial_p = normal_two_sided(f.spatial_z);
}

}  // namespace detail

/// Concentrated log-likelihood of the spatial lag model at rho.
inline double lag_log_likelihood(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                 const SpatialWeights& w, double rho) {
  const auto qr = detail::design_qr(x);
  const Eigen::VectorXd filtered = y - rho * (w.matrix() * y);
  const Eigen::VectorXd e = filtered - x * qr.solve(filtered);
  const double n = static_cast<double>(y.size());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(y.size(), y.size()) - rho * w.matrix();
  return detail::concentrated_ll(n, e.squaredNorm() / n, std::log(std::abs(a.determinant())));
}

/// Spatial lag fit y = rho W y + X beta + xi with rho held at `rho`;
/// inference from the analytical information matrix of (beta, rho, sigma^2).
inline SpatialMlFit ml_spatial_lag_at(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                      const SpatialWeights& w, double rho,
                                      std::vector<std::string> names = {}) {
  detail::check_spatial_inputs(y, x, w);
  const auto qr = detail::design_qr(x);
  const Eigen::MatrixXd& wm = w.matrix();
  const Eigen::Index n = x.rows(), k = x.cols();
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd wy = wm * y;

  SpatialMlFit f;
  f.model = SpatialModel::Lag;
  f.n = n;
  f.k = k;
  f.names = names.empty() ? detail::default_names(k) : std::move(names);
  f.spatial_coefficient = rho;
  const Eigen::VectorXd filtered = y - rho * wy;
  f.coefficients = qr.solve(filtered);
  f.residuals = filtered - x * f.coefficients;
  f.fitted = y - f.residuals;
  f.sigma2 = f.residuals.squaredNorm() / nd;
  if (!(f.sigma2 > 0.0)) fail(ErrorCode::DegenerateVariance, "exact fit: residuals are identically zero");

  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * wm;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd wa = wm * lu.inverse();
  f.log_likelihood = detail::concentrated_ll(nd, f.sigma2, std::log(std::abs(lu.determinant())));

  const double s2 = f.sigma2;
  const Eigen::VectorXd waxb = wa * (x * f.coefficients);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k + 2, k + 2);
  info.topLeftCorner(k, k) = x.transpose() * x / s2;
  info.block(0, k, k, 1) = x.transpose() * waxb / s2;
  info.block(k, 0, 1, k) = info.block(0, k, k, 1).transpose();
  info(k, k) = (wa * wa).trace() + (wa.transpose() * wa).trace() + waxb.squaredNorm() / s2;
  info(k, k + 1) = info(k + 1, k) = wa.trace() / s2;
  info(k + 1, k + 1) = nd / (2.0 * s2 * s2);
  detail::fill_inference(f, info);

  f.bp_residual = breusch_pagan(f.residuals, x);
  f.pseudo_r2 = detail::squared_correlation(y, f.fitted);
  return f;
}

/// Spatial error fit y = X beta + u, u = lambda W u + xi, with lambda held
/// at `lambda`.
inline SpatialMlFit ml_spatial_error_at(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                        const SpatialWeights& w, double lambda,
                                        std::vector<std::string> names = {}) {
  detail::check_spatial_inputs(y, x, w);
  detail::design_qr(x);
  const Eigen::MatrixXd& wm = w.matrix();
  const Eigen::Index n = x.rows(), k = x.cols();
  const double nd = static_cast<double>(n);
  const Eigen::MatrixXd xf = x - lambda * (wm * x);
  const Eigen::VectorXd yf = y - lambda * (wm * y);
  const auto qr = detail::design_qr(xf);

  SpatialMlFit f;
  f.model = SpatialModel::Error;
  f.n = n;
  f.k = k;
  f.names = names.empty() ? detail::default_names(k) : std::move(names);
  f.spatial_coefficient = lambda;
  f.coefficients = qr.solve(yf);
  f.residuals = yf - xf * f.coefficients;
  f.fitted = y - f.residuals;
  f.sigma2 = f.residuals.squaredNorm() / nd;
  if (!(f.sigma2 > 0.0)) fail(ErrorCode::DegenerateVariance, "exact fit: residuals are identically zero");

  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) - lambda * wm;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
  const Eigen::MatrixXd wb = wm * lu.inverse();
  f.log_likelihood = detail::concentrated_ll(nd, f.sigma2, std::log(std::abs(lu.determinant())));

  const double s2 = f.sigma2;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k + 2, k + 2);
  info.topLeftCorner(k, k) = xf.transpose() * xf / s2;
  info(k, k) = (wb * wb).trace() + (wb.transpose() * wb).trace();
  info(k, k + 1) = info(k + 1, k) = wb.trace() / s2;
  info(k + 1, k + 1) = nd / (2.0 * s2 * s2);
  detail::fill_inference(f, info);

  f.bp_residual = breusch_pagan(f.residuals, x);
  f.pseudo_r2 = detail::squared_correlation(y, f.fitted);
  return f;
}

/// Concentrated log-likelihood of the spatial error model at lambda.
inline double error_log_likelihood(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                   const SpatialWeights& w, double lambda) {
  const Eigen::MatrixXd xf = x - lambda * (w.matrix() * x);
  const Eigen::VectorXd yf = y - lambda * (w.matrix() * y);
  const auto qr = detail::design_qr(xf);
  const Eigen::VectorXd e = yf - xf * qr.solve(yf);
  const double n = static_cast<double>(y.size());
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(y.size(), y.size()) - lambda * w.matrix();
  return detail::concentrated_ll(n, e.squaredNorm() / n, std::log(std::abs(b.determinant())));
}

/// ML spatial lag model. The concentrated likelihood
/// -n/2 ln sigma^2(rho) + ln|I - rho W| is maximized over
/// (1/omega_min + 1e-6, 1/omega_max - 1e-6); sigma^2(rho) is a quadratic in
/// rho built from two OLS residual vectors, so each evaluation is O(n).
inline SpatialMlFit ml_spatial_lag(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                   const SpatialWeights& w, std::vector<std::string> names = {}) {
  detail::check_spatial_inputs(y, x, w);
  if (!(w.total_weight() > 0.0)) return ml_spatial_lag_at(y, x, w, 0.0, std::move(names));
  const auto qr = detail::design_qr(x);
  const Eigen::VectorXd wy = w.matrix() * y;
  const Eigen::VectorXd e0 = y - x * qr.solve(y);
  const Eigen::VectorXd el = wy - x * qr.solve(wy);
  const double a0 = e0.squaredNorm(), a1 = e0.dot(el), a2 = el.squaredNorm();
  const double n = static_cast<double>(y.size());
  const LogDeterminant logdet(w.matrix());
  const auto [lo, hi] = logdet.bounds();
  const double rho = detail::maximize_scalar(
      [&](double r) {
        return detail::concentrated_ll(n, (a0 - 2.0 * r * a1 + r * r * a2) / n, logdet(r));
      },
      lo, hi);
  auto fit = ml_spatial_lag_at(y, x, w, rho, std::move(names));
  fit.bounds = {lo, hi};
  return fit;
}

/// ML spatial error model: maximizes -n/2 ln sigma^2(lambda) + ln|I - lambda W|
/// with sigma^2(lambda) from regressing (I - lambda W) y on (I - lambda W) X.
inline SpatialMlFit ml_spatial_error(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                     const SpatialWeights& w, std::vector<std::string> names = {}) {
  detail::check_spatial_inputs(y, x, w);
  if (!(w.total_weight() > 0.0)) return ml_spatial_error_at(y, x, w, 0.0, std::move(names));
  detail::design_qr(x);
  const Eigen::MatrixXd wx = w.matrix() * x;
  const Eigen::VectorXd wy = w.matrix() * y;
  const double n = static_cast<double>(y.size());
  const LogDeterminant logdet(w.matrix());
  const auto [lo, hi] = logdet.bounds();
  const double lambda = detail::maximize_scalar(
      [&](double l) {
        const Eigen::MatrixXd xf = x - l * wx;
        const Eigen::VectorXd yf = y - l * wy;
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xf);
        if (qr.rank() < xf.cols()) return -std::numeric_limits<double>::infinity();
        const double ssr = (yf - xf * qr.solve(yf)).squaredNorm();
        return detail::concentrated_ll(n, ssr / n, logdet(l));
      },
      lo, hi);
  auto fit = ml_spatial_error_at(y, x, w, lambda, std::move(names));
  fit.bounds = {lo, hi};
  return fit;
}

}  // namespace spconv
