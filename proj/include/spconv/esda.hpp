#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spconv/csv.hpp"
#include "spconv/error.hpp"
#include "spconv/io.hpp"
#include "spconv/random.hpp"
#include "spconv/weights.hpp"

namespace spconv {

inline constexpr std::size_t kDefaultPermutations = 9999;

struct MoranGlobalResult {
  double I = 0.0;
  double expected = 0.0;  // -1/(n-1)
  double perm_mean = std::numeric_limits<double>::quiet_NaN();
  double perm_sd = std::numeric_limits<double>::quiet_NaN();
  double z_perm = std::numeric_limits<double>::quiet_NaN();
  double p_perm = 1.0;  // two-sided, (count + 1) / (permutations + 1)
  std::size_t n = 0;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

enum class Quadrant { HH, LL, HL, LH, Island };
enum class LisaClass { HH, LL, HL, LH, NotSignificant, Island };

constexpr std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::HH: return "HH";
    case Quadrant::LL: return "LL";
    case Quadrant::HL: return "HL";
    case Quadrant::LH: return "LH";
    case Quadrant::Island: return "ISLAND";
  }
  return "?";
}

constexpr std::string_view to_string(LisaClass c) {
  switch (c) {
    case LisaClass::HH: return "HH";
    case LisaClass::LL: return "LL";
    case LisaClass::HL: return "HL";
    case LisaClass::LH: return "LH";
    case LisaClass::NotSignificant: return "NOT_SIGNIFICANT";
    case LisaClass::Island: return "ISLAND";
  }
  return "?";
}

struct LocalIndicator {
  double I = 0.0;
  double p = 1.0;
  double z = 0.0;    // x_i - mean
  double lag = 0.0;  // (W z)_i
  Quadrant quadrant = Quadrant::Island;
  bool significant = false;
};

struct MoranLocalResult {
  std::vector<LocalIndicator> regions;
  double alpha = 0.05;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

struct ScatterPoint {
  double z = 0.0;
  double lag = 0.0;
  Quadrant quadrant = Quadrant::Island;
};

struct ScatterData {
  std::vector<ScatterPoint> points;
  double slope = 0.0;
  bool standardized = false;
};

namespace detail {

/// Mean deviations of x; throws DegenerateVariance when x is constant.
inline Eigen::VectorXd centered(const Eigen::VectorXd& x) {
  if (x.size() == 0 || x.maxCoeff() == x.minCoeff())
    fail(ErrorCode::DegenerateVariance, "variable is constant across regions");
  Eigen::VectorXd z = x.array() - x.mean();
  if (!(z.squaredNorm() > 0.0)) fail(ErrorCode::DegenerateVariance, "variable has zero variance");
  return z;
}

inline void check_moran_inputs(const Eigen::VectorXd& x, const SpatialWeights& w) {
  if (x.size() != w.size())
    fail(ErrorCode::DimensionMismatch, "variable of length " + std::to_string(x.size()) +
                                           " against " + std::to_string(w.size()) + " regions");
  if (x.size() < 3) fail(ErrorCode::TooFewRegions, "Moran's I needs at least 3 regions");
}

/// sum_i z_i sum_j w_ij z_j over the neighbor lists.
inline double cross_product(const SpatialWeights& w, const Eigen::VectorXd& z) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double lag = 0.0;
    for (const auto& [j, wij] : w.neighbors(i)) lag += wij * z(j);
    total += z(i) * lag;
  }
  return total;
}

inline Quadrant quadrant_of(double z, double lag, bool island) {
  if (island) return Quadrant::Island;
  const bool high = z > 0.0;
  const bool high_lag = lag > 0.0;
  if (high) return high_lag ? Quadrant::HH : Quadrant::HL;
  return high_lag ? Quadrant::LH : Quadrant::LL;
}

}  // namespace detail

/// Global Moran's I with two-sided conditional-randomization inference: the
/// observed values are reshuffled over locations once per draw, each draw
/// using its own substream of `seed`.
inline MoranGlobalResult moran_global(const Eigen::VectorXd& x, const SpatialWeights& w,
                                      std::size_t permutations = kDefaultPermutations,
                                      std::uint64_t seed = 0) {
  detail::check_moran_inputs(x, w);
  const Eigen::VectorXd z = detail::centered(x);
  const double s = w.total_weight();
  if (!(s > 0.0)) fail(ErrorCode::EmptyWeights, "weights sum to zero; every region is an island");
  const auto n = static_cast<double>(x.size());
  const double m2 = z.squaredNorm();
  const double scale = n / s / m2;

  MoranGlobalResult r;
  r.n = static_cast<std::size_t>(x.size());
  r.expected = -1.0 / (n - 1.0);
  r.I = scale * detail::cross_product(w, z);
  r.permutations = permutations;
  r.seed = seed;
  if (permutations == 0) return r;

  const double observed = std::abs(r.I - r.expected);
  std::size_t extreme = 0;
  double sum = 0.0, sum_sq = 0.0;
  Eigen::VectorXd shuffled(z.size());
  for (std::size_t d = 0; d < permutations; ++d) {
    auto engine = substream(seed, "moran-global", d);
    shuffled = z;
    std::shuffle(shuffled.begin(), shuffled.end(), engine);
    const double stat = scale * detail::cross_product(w, shuffled);
    sum += stat;
    sum_sq += stat * stat;
    if (std::abs(stat - r.expected) >= observed) ++extreme;
  }
  const auto draws = static_cast<double>(permutations);
  r.perm_mean = sum / draws;
  if (permutations > 1) {
    r.perm_sd = std::sqrt(std::max(0.0, (sum_sq - draws * r.perm_mean * r.perm_mean) / (draws - 1.0)));
    r.z_perm = r.perm_sd > 0.0 ? (r.I - r.perm_mean) / r.perm_sd : 0.0;
  }
  r.p_perm = static_cast<double>(extreme + 1) / (draws + 1.0);
  return r;
}

/// Local Moran I_i = z_i / sum_k z_k^2 * sum_j w_ij z_j. Inference holds x_i
/// at its location and draws its neighbors' values without replacement from
/// the remaining n-1 observations; two-sided around the exact conditional
/// mean -z_i^2 w_i. / ((n-1) sum_k z_k^2).
inline MoranLocalResult moran_local(const Eigen::VectorXd& x, const SpatialWeights& w,
                                    std::size_t permutations = kDefaultPermutations,
                                    std::uint64_t seed = 0, double alpha = 0.05) {
  detail::check_moran_inputs(x, w);
  const Eigen::VectorXd z = detail::centered(x);
  const double m2 = z.squaredNorm();
  const Eigen::Index n = z.size();

  MoranLocalResult r;
  r.alpha = alpha;
  r.permutations = permutations;
  r.seed = seed;
  r.regions.resize(static_cast<std::size_t>(n));

  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& out = r.regions[static_cast<std::size_t>(i)];
    const auto& nb = w.neighbors(i);
    double lag = 0.0, row_sum = 0.0;
    for (const auto& [j, wij] : nb) {
      lag += wij * z(j);
      row_sum += wij;
    }
    out.z = z(i);
    out.lag = lag;
    out.I = z(i) / m2 * lag;
    out.quadrant = detail::quadrant_of(z(i), lag, nb.empty());
    if (nb.empty() || permutations == 0) continue;

    const double expected = -z(i) * z(i) * row_sum / (static_cast<double>(n - 1) * m2);
    const double observed = std::abs(out.I - expected);
    std::size_t extreme = 0;
    for (std::size_t d = 0; d < permutations; ++d) {
      auto engine = substream(seed, "moran-local", static_cast<std::uint64_t>(i), d);
      std::size_t k = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) pool[k++] = j;
      double draw_lag = 0.0;
      for (std::size_t t = 0; t < nb.size(); ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
        std::swap(pool[t], pool[pick(engine)]);
        draw_lag += nb[t].weight * z(pool[t]);
      }
      const double stat = z(i) / m2 * draw_lag;
      if (std::abs(stat - expected) >= observed) ++extreme;
    }
    out.p = static_cast<double>(extreme + 1) / (static_cast<double>(permutations) + 1.0);
    out.significant = out.p <= alpha;
  }
  return r;
}

/// Moran scatterplot data: (z_i, (Wz)_i) and the least-squares slope through
/// the origin, which equals global I for row-standardized W.
inline ScatterData moran_scatter(const Eigen::VectorXd& x, const SpatialWeights& w,
                                 bool standardize = false) {
  if (x.size() != w.size())
    fail(ErrorCode::DimensionMismatch, "variable of length " + std::to_string(x.size()) +
                                           " against " + std::to_string(w.size()) + " regions");
  w.require_row_standardized();
  Eigen::VectorXd z = detail::centered(x);
  if (standardize) z /= std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
  const Eigen::VectorXd lag = spatial_lag(w, z);
  ScatterData out;
  out.standardized = standardize;
  out.slope = z.dot(lag) / z.squaredNorm();
  for (Eigen::Index i = 0; i < z.size(); ++i)
    out.points.push_back({z(i), lag(i), detail::quadrant_of(z(i), lag(i), w.is_island(i))});
  return out;
}

inline std::vector<LisaClass> lisa_classify(const MoranLocalResult& local, double alpha) {
  std::vector<LisaClass> out;
  out.reserve(local.regions.size());
  for (const auto& r : local.regions) {
    if (r.quadrant == Quadrant::Island) {
      out.push_back(LisaClass::Island);
    } else if (!(r.p <= alpha)) {
      out.push_back(LisaClass::NotSignificant);
    } else {
      switch (r.quadrant) {
        case Quadrant::HH: out.push_back(LisaClass::HH); break;
        case Quadrant::LL: out.push_back(LisaClass::LL); break;
        case Quadrant::HL: out.push_back(LisaClass::HL); break;
        case Quadrant::LH: out.push_back(LisaClass::LH); break;
        case Quadrant::Island: out.push_back(LisaClass::Island); break;
      }
    }
  }
  return out;
}

/// Columns: region_id,z,lag,quadrant,I_i,p_i,class.
inline std::string lisa_csv(const std::vector<std::string>& region_ids, const ScatterData& scatter,
                            const MoranLocalResult& local, const std::vector<LisaClass>& classes) {
  const std::size_t n = region_ids.size();
  if (scatter.points.size() != n || local.regions.size() != n || classes.size() != n)
    fail(ErrorCode::DimensionMismatch, "LISA export inputs disagree on region count");
  std::string out = "region_id,z,lag,quadrant,I_i,p_i,class\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = scatter.points[i];
    const auto& l = local.regions[i];
    out += csv::escape(region_ids[i]) + "," + format_double(p.z) + "," + format_double(p.lag) + "," +
           std::string(to_string(p.quadrant)) + "," + format_double(l.I) + "," + format_double(l.p) +
           "," + std::string(to_string(classes[i])) + "\n";
  }
  return out;
}

}  // namespace spconv
