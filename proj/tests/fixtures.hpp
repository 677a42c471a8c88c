#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spconv/spconv.hpp"

namespace fixtures {

using spconv::RegionRecord;
using spconv::SpatialWeights;

inline std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("r" + std::to_string(i));
  return out;
}

/// 4-region path 1-2-3-4, row-standardized.
inline SpatialWeights line4() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 3; ++i) w(i, i + 1) = w(i + 1, i) = 1.0;
  return spconv::row_standardize(SpatialWeights::from_matrix(w, ids(4)));
}

inline std::vector<RegionRecord> random_regions(std::size_t n, double side_km, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, side_km);
  std::vector<RegionRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"r" + std::to_string(i), "Region " + std::to_string(i), u(rng), u(rng)});
  return out;
}

/// Row-standardized distance band on uniform points; average degree about
/// pi cutoff^2 n / side^2.
inline SpatialWeights random_band(std::size_t n, double side_km, double cutoff_km, std::mt19937_64& rng) {
  return spconv::row_standardize(spconv::distance_band_weights(random_regions(n, side_km, rng), cutoff_km));
}

/// Arbitrary nonnegative weights with zero diagonal and some zero entries.
inline SpatialWeights random_weights(std::size_t n, std::mt19937_64& rng, bool standardize) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (i != j && u(rng) < 0.4) w(i, j) = u(rng) * 3.0;
  auto out = SpatialWeights::from_matrix(w, ids(n));
  return standardize ? spconv::row_standardize(out) : out;
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

/// [1, x1, ..., x_{k-1}] with standard normal regressors.
inline Eigen::MatrixXd design(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  Eigen::MatrixXd x(n, k);
  x.col(0).setOnes();
  for (Eigen::Index j = 1; j < k; ++j) x.col(j) = normal_vector(n, rng);
  return x;
}

/// y = (I - rho W)^{-1} (X beta + eps)
inline Eigen::VectorXd lag_dgp(const SpatialWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                               double rho, std::mt19937_64& rng, double sd = 1.0) {
  const auto n = x.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * w.matrix();
  return a.partialPivLu().solve(x * beta + normal_vector(n, rng, sd));
}

/// y = X beta + (I - lambda W)^{-1} eps
inline Eigen::VectorXd error_dgp(const SpatialWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                 double lambda, std::mt19937_64& rng, double sd = 1.0) {
  const auto n = x.rows();
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) - lambda * w.matrix();
  return x * beta + b.partialPivLu().solve(normal_vector(n, rng, sd));
}

// ---------------------------------------------------------------------------
// Oracles on plain std::vector with explicit loops.

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Vec to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

/// Moran's I straight from its definition.
inline double moran_bruteforce(const Vec& x, const Mat& w) {
  const std::size_t n = x.size();
  double u = 0.0;
  for (double v : x) u += v;
  u /= static_cast<double>(n);
  double s = 0.0, num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (x[i] - u) * (x[i] - u);
    for (std::size_t j = 0; j < n; ++j) {
      s += w[i][j];
      num += w[i][j] * (x[i] - u) * (x[j] - u);
    }
  }
  return static_cast<double>(n) / s * num / den;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat multiply(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Vec multiply(const Mat& a, const Vec& v) {
  Vec out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += a[i][j] * v[j];
  return out;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Mat inverse(Mat a) {
  const std::size_t n = a.size();
  Mat inv(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(inv[c], inv[p]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

/// (X'X)^{-1} X'y
inline Vec normal_equations(const Mat& x, const Vec& y) {
  const Mat xt = transpose(x);
  return multiply(inverse(multiply(xt, x)), multiply(xt, y));
}

struct DiagnosticsOracle {
  double jb, bp, kb, moran_i, lm_lag, lm_error, rlm_lag, rlm_error;
};

/// Transcription of the textbook score-test formulas on raw loops:
/// JB = n/6 (S^2 + (K-3)^2/4); BP = f'Z(Z'Z)^{-1}Z'f / 2 with f = e^2/s2 - 1;
/// KB = n R^2 of e^2 on Z; LM_err = (e'We/s2)^2 / T; LM_lag = (e'Wy/s2)^2 / D
/// and the robust forms with T = tr(W'W + WW), D = (WXb)'M(WXb)/s2 + T.
inline DiagnosticsOracle diagnostics_oracle(const Vec& y, const Mat& x, const Mat& w) {
  const std::size_t n = y.size();
  const double nd = static_cast<double>(n);
  const Vec b = normal_equations(x, y);
  const Vec xb = multiply(x, b);
  Vec e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = y[i] - xb[i];
  const double s2 = dot(e, e) / nd;

  DiagnosticsOracle o{};
  double mean = 0.0;
  for (double v : e) mean += v / nd;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : e) {
    const double d = v - mean;
    m2 += d * d / nd;
    m3 += d * d * d / nd;
    m4 += d * d * d * d / nd;
  }
  const double skew = m3 / std::pow(m2, 1.5), kurt = m4 / (m2 * m2);
  o.jb = nd / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);

  Vec f(n), e2(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = e[i] * e[i] / s2 - 1.0;
    e2[i] = e[i] * e[i];
  }
  const Mat xt = transpose(x);
  const Mat xtx_inv = inverse(multiply(xt, x));
  const Vec xtf = multiply(xt, f);
  o.bp = 0.5 * dot(xtf, multiply(xtx_inv, xtf));
  const Vec g = normal_equations(x, e2);
  const Vec e2hat = multiply(x, g);
  double e2mean = 0.0;
  for (double v : e2) e2mean += v / nd;
  double sst = 0, ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sst += (e2[i] - e2mean) * (e2[i] - e2mean);
    ssr += (e2[i] - e2hat[i]) * (e2[i] - e2hat[i]);
  }
  o.kb = nd * (1.0 - ssr / sst);

  double s = 0.0;
  for (const auto& row : w)
    for (double v : row) s += v;
  const Vec we = multiply(w, e), wy = multiply(w, y);
  o.moran_i = nd / s * dot(e, we) / dot(e, e);

  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t += w[j][i] * w[j][i] + w[i][j] * w[j][i];
  Mat m(n, Vec(n));
  const Mat h = multiply(multiply(x, xtx_inv), xt);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = (i == j ? 1.0 : 0.0) - h[i][j];
  const Vec wxb = multiply(w, xb);
  const double d = dot(wxb, multiply(m, wxb)) / s2 + t;
  const double se = dot(e, we) / s2, sl = dot(e, wy) / s2;
  o.lm_error = se * se / t;
  o.lm_lag = sl * sl / d;
  o.rlm_lag = (sl - se) * (sl - se) / (d - t);
  o.rlm_error = (se - t / d * sl) * (se - t / d * sl) / (t * (1.0 - t / d));
  return o;
}

// ---------------------------------------------------------------------------
// Synthetic panels.

/// CSV text of a long-format panel. Per sector the annual growth vector is
/// g = (I - rho W)^{-1} (a + slope ln P_0 + noise) with W the row-standardized
/// distance band at `cutoff_km`, and ln P_t interpolates linearly to
/// ln P_0 + T g.
struct PanelSpec {
  std::size_t n = 28;
  int t0 = 1995;
  int tT = 2002;
  double side_km = 400.0;
  double cutoff_km = 97.0;
  double intercept = 0.2;
  double slope = -0.05;
  double noise = 0.01;
  double rho = 0.0;
  std::vector<std::string> sectors = {"industry"};
};

inline std::string synthetic_panel_csv(const PanelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto regions = random_regions(spec.n, spec.side_km, rng);
  const auto n = static_cast<Eigen::Index>(spec.n);
  std::normal_distribution<double> noise(0.0, spec.noise);
  std::normal_distribution<double> level(std::log(20.0), 0.3);
  Eigen::MatrixXd filter = Eigen::MatrixXd::Identity(n, n);
  if (spec.rho != 0.0)
    filter -= spec.rho * spconv::row_standardize(spconv::distance_band_weights(regions, spec.cutoff_km)).matrix();
  const auto lu = filter.partialPivLu();
  std::ostringstream out;
  out.precision(17);
  out << "region_id,region_name,x_km,y_km,sector,year,productivity\n";
  const double t = spec.tT - spec.t0;
  for (const auto& sector : spec.sectors) {
    Eigen::VectorXd lp0(n), rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      lp0(i) = level(rng);
      rhs(i) = spec.intercept + spec.slope * lp0(i) + noise(rng);
    }
    const Eigen::VectorXd growth = lu.solve(rhs);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = regions[static_cast<std::size_t>(i)];
      for (int y = spec.t0; y <= spec.tT; ++y)
        out << r.region_id << ",\"" << r.name << "\"," << r.x_km << "," << r.y_km << "," << sector << "," << y
            << "," << std::exp(lp0(i) + (y - spec.t0) / t * t * growth(i)) << "\n";
    }
  }
  return out.str();
}

/// Wide covariate table with shares in [0, 1] for regions r0..r{n-1}.
inline std::string synthetic_covariates_csv(std::size_t n, const std::vector<std::string>& names,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> share(0.05, 0.6);
  std::ostringstream out;
  out.precision(17);
  out << "region_id";
  for (const auto& c : names) out << "," << c;
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << "r" << i;
    for (std::size_t c = 0; c < names.size(); ++c) out << "," << share(rng);
    out << "\n";
  }
  return out.str();
}

inline spconv::PanelDataset synthetic_panel(const PanelSpec& spec, std::uint64_t seed) {
  std::istringstream in(synthetic_panel_csv(spec, seed));
  return spconv::read_panel(in, "synthetic");
}

}  // namespace fixtures
