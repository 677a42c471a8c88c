#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spconv/csv.hpp"
#include "spconv/data_model.hpp"
#include "spconv/error.hpp"
#include "spconv/io.hpp"

#include <json.hpp>

namespace spconv {

inline constexpr double kDefaultCutoffKm = 97.0;

class SpatialWeights;

SpatialWeights distance_band_weights(const std::vector<RegionRecord>& regions,
                                     double cutoff_km = kDefaultCutoffKm,
                                     bool inverse_distance = false);

/// Dense n×n spatial weights with a zero diagonal and nonnegative finite
/// entries. Rows with no positive entry are islands; their spatial lag is 0.
class SpatialWeights {
 public:
  struct Neighbor {
    Eigen::Index index;
    double weight;
  };

  SpatialWeights() = default;

  static SpatialWeights from_matrix(Eigen::MatrixXd w, std::vector<std::string> region_ids,
                                    bool row_standardized = false,
                                    std::optional<double> cutoff_km = std::nullopt) {
    const Eigen::Index n = w.rows();
    if (w.cols() != n)
      fail(ErrorCode::DimensionMismatch, "weights matrix must be square");
    if (static_cast<Eigen::Index>(region_ids.size()) != n)
      fail(ErrorCode::DimensionMismatch, "weights matrix has " + std::to_string(n) +
                                             " rows but " + std::to_string(region_ids.size()) +
                                             " region ids");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i, i) != 0.0)
        fail(ErrorCode::InvalidWeights, "nonzero diagonal at region '" + region_ids[static_cast<std::size_t>(i)] + "'");
      for (Eigen::Index j = 0; j < n; ++j)
        if (!std::isfinite(w(i, j)) || w(i, j) < 0.0)
          fail(ErrorCode::InvalidWeights, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                              ") is negative or not finite");
    }
    if (row_standardized)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = w.row(i).sum();
        if (s != 0.0 && std::abs(s - 1.0) > 1e-12)
          fail(ErrorCode::NotRowStandardized, "row " + std::to_string(i) + " sums to " + std::to_string(s));
      }
    SpatialWeights out;
    out.w_ = std::move(w);
    out.ids_ = std::move(region_ids);
    out.row_standardized_ = row_standardized;
    out.cutoff_km_ = cutoff_km;
    out.index_neighbors();
    return out;
  }

  [[nodiscard]] Eigen::Index size() const { return w_.rows(); }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return w_; }
  [[nodiscard]] const std::vector<std::string>& region_ids() const { return ids_; }
  [[nodiscard]] bool row_standardized() const { return row_standardized_; }
  [[nodiscard]] std::optional<double> cutoff_km() const { return cutoff_km_; }
  [[nodiscard]] const std::vector<Neighbor>& neighbors(Eigen::Index i) const {
    return neighbors_[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] bool is_island(Eigen::Index i) const { return neighbors(i).empty(); }
  [[nodiscard]] double total_weight() const { return w_.sum(); }

  [[nodiscard]] std::vector<Eigen::Index> islands() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < size(); ++i)
      if (is_island(i)) out.push_back(i);
    return out;
  }

  /// Pairs of distinct regions sharing identical coordinates (distance 0,
  /// never neighbors under a distance band).
  [[nodiscard]] const std::vector<std::pair<Eigen::Index, Eigen::Index>>& duplicate_locations() const {
    return duplicates_;
  }

  /// Throws RegionOrderMismatch unless `ids` equals this matrix's index order.
  void require_order(const std::vector<std::string>& ids) const {
    if (ids.size() != ids_.size())
      fail(ErrorCode::DimensionMismatch, "weights cover " + std::to_string(ids_.size()) +
                                             " regions, data has " + std::to_string(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] != ids_[i])
        fail(ErrorCode::RegionOrderMismatch, "position " + std::to_string(i) + ": weights '" +
                                                 ids_[i] + "' vs data '" + ids[i] + "'");
  }

  void require_row_standardized() const {
    if (!row_standardized_) fail(ErrorCode::NotRowStandardized, "weights must be row-standardized");
  }

 private:
  friend SpatialWeights distance_band_weights(const std::vector<RegionRecord>&, double, bool);

  void index_neighbors() {
    neighbors_.assign(static_cast<std::size_t>(size()), {});
    for (Eigen::Index i = 0; i < size(); ++i)
      for (Eigen::Index j = 0; j < size(); ++j)
        if (w_(i, j) > 0.0) neighbors_[static_cast<std::size_t>(i)].push_back({j, w_(i, j)});
  }

  Eigen::MatrixXd w_;
  std::vector<std::string> ids_;
  bool row_standardized_ = false;
  std::optional<double> cutoff_km_;
  std::vector<std::vector<Neighbor>> neighbors_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> duplicates_;
};

/// w_ij = 1 (or 1/d_ij with `inverse_distance`) when 0 < d_ij <= cutoff_km,
/// d the Euclidean distance between projected km coordinates.
inline SpatialWeights distance_band_weights(const std::vector<RegionRecord>& regions,
                                            double cutoff_km, bool inverse_distance) {
  if (!(cutoff_km > 0.0) || !std::isfinite(cutoff_km))
    fail(ErrorCode::NonPositiveCutoff, "cutoff must be positive, got " + std::to_string(cutoff_km));
  if (regions.size() < 2) fail(ErrorCode::TooFewRegions, "distance band weights need at least 2 regions");
  const auto n = static_cast<Eigen::Index>(regions.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::string> ids;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> dups;
  for (const auto& r : regions) ids.push_back(r.region_id);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = regions[static_cast<std::size_t>(i)];
      const auto& b = regions[static_cast<std::size_t>(j)];
      const double d = std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
      if (d == 0.0) dups.emplace_back(i, j);
      if (d > 0.0 && d <= cutoff_km) w(i, j) = w(j, i) = inverse_distance ? 1.0 / d : 1.0;
    }
  auto out = SpatialWeights::from_matrix(std::move(w), std::move(ids), false, cutoff_km);
  out.duplicates_ = std::move(dups);
  return out;
}

inline SpatialWeights row_standardize(const SpatialWeights& weights) {
  if (weights.row_standardized()) return weights;
  Eigen::MatrixXd w = weights.matrix();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double s = w.row(i).sum();
    if (s > 0.0) w.row(i) /= s;
  }
  return SpatialWeights::from_matrix(std::move(w), weights.region_ids(), true, weights.cutoff_km());
}

struct ConnectivityReport {
  std::vector<std::size_t> neighbor_counts;
  std::vector<std::string> islands;
  std::size_t components = 0;
};

/// Neighbor counts, islands and connected components of the undirected graph
/// with an edge wherever w_ij > 0 or w_ji > 0.
inline ConnectivityReport connectivity_report(const SpatialWeights& weights) {
  const auto n = static_cast<std::size_t>(weights.size());
  ConnectivityReport rep;
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = weights.neighbors(static_cast<Eigen::Index>(i));
    rep.neighbor_counts.push_back(nb.size());
    if (nb.empty()) rep.islands.push_back(weights.region_ids()[i]);
    for (const auto& [j, w] : nb) {
      adj[i].push_back(static_cast<std::size_t>(j));
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++rep.components;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto u : adj[v])
        if (!seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
    }
  }
  return rep;
}

inline Eigen::VectorXd spatial_lag(const SpatialWeights& weights, const Eigen::VectorXd& x) {
  if (x.size() != weights.size())
    fail(ErrorCode::DimensionMismatch, "vector of length " + std::to_string(x.size()) +
                                           " against " + std::to_string(weights.size()) + " regions");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (const auto& [j, w] : weights.neighbors(i)) out(i) += w * x(j);
  return out;
}

/// Edge list `region_i,region_j,weight` (one line per positive entry, row
/// major) plus a JSON sidecar holding n, cutoff_km, row_standardized, islands
/// and the region order.
inline void write_weights(const SpatialWeights& weights, const std::filesystem::path& edges_csv,
                          const std::filesystem::path& sidecar_json) {
  std::string edges = "region_i,region_j,weight\n";
  const auto& ids = weights.region_ids();
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    for (const auto& [j, w] : weights.neighbors(i))
      edges += csv::escape(ids[static_cast<std::size_t>(i)]) + "," +
               csv::escape(ids[static_cast<std::size_t>(j)]) + "," + format_double(w) + "\n";
  nlohmann::ordered_json meta;
  meta["n"] = weights.size();
  meta["cutoff_km"] = weights.cutoff_km() ? nlohmann::ordered_json(*weights.cutoff_km()) : nlohmann::ordered_json();
  meta["row_standardized"] = weights.row_standardized();
  auto islands = nlohmann::ordered_json::array();
  for (auto i : weights.islands()) islands.push_back(ids[static_cast<std::size_t>(i)]);
  meta["islands"] = islands;
  meta["region_ids"] = ids;
  atomic_write(edges_csv, edges);
  atomic_write(sidecar_json, meta.dump(2) + "\n");
}

inline SpatialWeights read_weights(const std::filesystem::path& edges_csv,
                                   const std::filesystem::path& sidecar_json) {
  nlohmann::json meta;
  {
    auto in = open_input(sidecar_json);
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, sidecar_json.string() + ": " + e.what());
    }
  }
  std::vector<std::string> ids;
  bool row_std = false;
  std::optional<double> cutoff;
  try {
    ids = meta.at("region_ids").get<std::vector<std::string>>();
    row_std = meta.at("row_standardized").get<bool>();
    if (!meta.at("cutoff_km").is_null()) cutoff = meta.at("cutoff_km").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, sidecar_json.string() + ": " + e.what());
  }
  std::map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  auto in = open_input(edges_csv);
  const auto t = csv::read(in, edges_csv.string());
  const auto ci = t.column("region_i"), cj = t.column("region_j"), cw = t.column("weight");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto a = index.find(t.rows[r][ci]);
    auto b = index.find(t.rows[r][cj]);
    if (a == index.end()) fail(ErrorCode::ParseError, t.where(r, ci) + ": unknown region '" + t.rows[r][ci] + "'");
    if (b == index.end()) fail(ErrorCode::ParseError, t.where(r, cj) + ": unknown region '" + t.rows[r][cj] + "'");
    w(a->second, b->second) = t.number(r, cw);
  }
  return SpatialWeights::from_matrix(std::move(w), std::move(ids), row_std, cutoff);
}

}  // namespace spconv
