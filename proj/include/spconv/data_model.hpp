#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "spconv/csv.hpp"
#include "spconv/error.hpp"

namespace spconv {

struct RegionRecord {
  std::string region_id;
  std::string name;
  double x_km = 0.0;
  double y_km = 0.0;
};

/// Column names of the long-format panel file.
struct PanelSchema {
  std::string region_id = "region_id";
  std::string region_name = "region_name";
  std::string x_km = "x_km";
  std::string y_km = "y_km";
  std::string sector = "sector";
  std::string year = "year";
  std::string productivity = "productivity";
};

/// Regional productivity panel (product per worker, taken as given) plus
/// per-region covariate shares. Immutable once created; `create` enforces
/// positivity, share bounds, unique regions and a rectangular year set per
/// sector.
class PanelDataset {
 public:
  using ObservationKey = std::tuple<std::string, std::string, int>;  // region, sector, year
  using CovariateKey = std::pair<std::string, std::string>;          // region, covariate

  PanelDataset() = default;

  static PanelDataset create(std::vector<RegionRecord> regions,
                             std::map<ObservationKey, double> observations,
                             std::map<CovariateKey, double> covariates = {}) {
    PanelDataset p;
    std::set<std::string> ids;
    for (const auto& r : regions) {
      if (!ids.insert(r.region_id).second)
        fail(ErrorCode::DuplicateRegion, "region '" + r.region_id + "' listed twice");
      if (!std::isfinite(r.x_km) || !std::isfinite(r.y_km))
        fail(ErrorCode::ParseError, "region '" + r.region_id + "' has non-finite coordinates");
    }
    std::map<std::string, std::map<std::string, std::set<int>>> years;  // sector -> region -> years
    for (const auto& [key, value] : observations) {
      const auto& [region, sector, year] = key;
      if (!ids.count(region))
        fail(ErrorCode::ParseError, "observation for unknown region '" + region + "'");
      if (!(value > 0.0) || !std::isfinite(value))
        fail(ErrorCode::NonPositiveProductivity, "region '" + region + "', sector '" + sector +
                                                     "', year " + std::to_string(year) + ": " +
                                                     std::to_string(value));
      years[sector][region].insert(year);
      p.sectors_.insert(sector);
    }
    for (const auto& [sector, by_region] : years) {
      const auto& reference = by_region.begin()->second;
      for (const auto& [region, ys] : by_region)
        if (ys != reference)
          fail(ErrorCode::RaggedPanel, "sector '" + sector + "': region '" + region +
                                           "' has a different year set than region '" +
                                           by_region.begin()->first + "'");
    }
    std::set<std::string> names;
    for (const auto& [key, value] : covariates) {
      if (!ids.count(key.first))
        fail(ErrorCode::InvalidCovariate, "covariate for unknown region '" + key.first + "'");
      if (!(value >= 0.0 && value <= 1.0))
        fail(ErrorCode::InvalidCovariate, "region '" + key.first + "', covariate '" + key.second +
                                              "': share " + std::to_string(value) +
                                              " outside [0,1]");
      names.insert(key.second);
    }
    p.regions_ = std::move(regions);
    p.observations_ = std::move(observations);
    p.covariates_ = std::move(covariates);
    p.covariate_names_.assign(names.begin(), names.end());
    return p;
  }

  [[nodiscard]] const std::vector<RegionRecord>& regions() const { return regions_; }
  [[nodiscard]] const std::set<std::string>& sectors() const { return sectors_; }
  [[nodiscard]] const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  [[nodiscard]] std::size_t observation_count() const { return observations_.size(); }

  [[nodiscard]] bool has_sector(const std::string& sector) const { return sectors_.count(sector) > 0; }

  [[nodiscard]] std::optional<double> productivity(const std::string& region,
                                                   const std::string& sector, int year) const {
    auto it = observations_.find({region, sector, year});
    if (it == observations_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::optional<double> covariate(const std::string& region,
                                                const std::string& name) const {
    auto it = covariates_.find({region, name});
    if (it == covariates_.end()) return std::nullopt;
    return it->second;
  }

  /// Regions observed in `sector`, in panel order.
  [[nodiscard]] std::vector<RegionRecord> sector_regions(const std::string& sector) const {
    require_sector(sector);
    std::set<std::string> present;
    for (const auto& [key, value] : observations_)
      if (std::get<1>(key) == sector) present.insert(std::get<0>(key));
    std::vector<RegionRecord> out;
    for (const auto& r : regions_)
      if (present.count(r.region_id)) out.push_back(r);
    return out;
  }

  [[nodiscard]] std::vector<int> years(const std::string& sector) const {
    require_sector(sector);
    std::set<int> ys;
    for (const auto& [key, value] : observations_)
      if (std::get<1>(key) == sector) ys.insert(std::get<2>(key));
    return {ys.begin(), ys.end()};
  }

  void require_sector(const std::string& sector) const {
    if (!has_sector(sector)) fail(ErrorCode::UnknownSector, "sector '" + sector + "' not in panel");
  }

  /// Same panel with its covariate table replaced.
  [[nodiscard]] PanelDataset with_covariates(std::map<CovariateKey, double> covariates) const {
    return create(regions_, observations_, std::move(covariates));
  }

 private:
  std::vector<RegionRecord> regions_;
  std::set<std::string> sectors_;
  std::map<ObservationKey, double> observations_;
  std::map<CovariateKey, double> covariates_;
  std::vector<std::string> covariate_names_;
};

inline PanelDataset read_panel(std::istream& in, const std::string& source,
                               const PanelSchema& schema = {}) {
  const csv::Table t = csv::read(in, source);
  const std::size_t c_id = t.column(schema.region_id);
  const std::size_t c_name = t.column(schema.region_name);
  const std::size_t c_x = t.column(schema.x_km);
  const std::size_t c_y = t.column(schema.y_km);
  const std::size_t c_sector = t.column(schema.sector);
  const std::size_t c_year = t.column(schema.year);
  const std::size_t c_value = t.column(schema.productivity);

  std::vector<RegionRecord> regions;
  std::map<std::string, std::size_t> index;
  std::map<PanelDataset::ObservationKey, double> obs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    RegionRecord rec{row[c_id], row[c_name], t.number(r, c_x), t.number(r, c_y)};
    if (rec.region_id.empty()) fail(ErrorCode::ParseError, t.where(r, c_id) + ": empty region id");
    auto [it, inserted] = index.emplace(rec.region_id, regions.size());
    if (inserted) {
      regions.push_back(rec);
    } else {
      const auto& prev = regions[it->second];
      if (prev.x_km != rec.x_km || prev.y_km != rec.y_km || prev.name != rec.name)
        fail(ErrorCode::ParseError,
             source + " row " + std::to_string(r + 2) + ": region '" + rec.region_id +
                 "' repeats with different name or coordinates");
    }
    const int year = t.integer(r, c_year);
    const double value = t.number(r, c_value);
    if (!(value > 0.0))
      fail(ErrorCode::NonPositiveProductivity, "region '" + rec.region_id + "', sector '" +
                                                   row[c_sector] + "', year " +
                                                   std::to_string(year) + " (" +
                                                   t.where(r, c_value) + "): " + row[c_value]);
    if (!obs.emplace(PanelDataset::ObservationKey{rec.region_id, row[c_sector], year}, value).second)
      fail(ErrorCode::ParseError, source + " row " + std::to_string(r + 2) +
                                      ": duplicate observation for region '" + rec.region_id +
                                      "', sector '" + row[c_sector] + "', year " +
                                      std::to_string(year));
  }
  return PanelDataset::create(std::move(regions), std::move(obs));
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return in;
}

inline PanelDataset load_panel(const std::filesystem::path& path, const PanelSchema& schema = {}) {
  auto in = open_input(path);
  return read_panel(in, path.string(), schema);
}

/// Wide covariate table: `region_id` then one column per covariate share.
inline PanelDataset read_covariates(const PanelDataset& panel, std::istream& in,
                                    const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const std::size_t c_id = t.column("region_id");
  std::map<PanelDataset::CovariateKey, double> cov;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == c_id) continue;
      const double v = t.number(r, c);
      if (!(v >= 0.0 && v <= 1.0))
        fail(ErrorCode::InvalidCovariate, t.where(r, c) + ": share " + t.rows[r][c] +
                                              " outside [0,1]");
      cov[{t.rows[r][c_id], t.header[c]}] = v;
    }
  return panel.with_covariates(std::move(cov));
}

inline PanelDataset load_covariates(const PanelDataset& panel, const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_covariates(panel, in, path.string());
}

/// One row per region: annualized log growth of productivity between t0 and
/// tT, log initial productivity, and optional conditioning covariates. The
/// order of `region_ids` is the index order of every vector and matrix here.
struct CrossSection {
  std::string sector;
  std::vector<std::string> region_ids;
  Eigen::VectorXd growth;
  Eigen::VectorXd log_initial;
  std::optional<Eigen::MatrixXd> covariates;
  std::vector<std::string> covariate_names;
  int t0 = 0;
  int tT = 0;

  [[nodiscard]] int span() const { return tT - t0; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(region_ids.size()); }
};

inline CrossSection build_cross_section(const PanelDataset& panel, const std::string& sector,
                                        int t0, int tT) {
  panel.require_sector(sector);
  if (tT <= t0)
    fail(ErrorCode::MissingYear, "final year " + std::to_string(tT) + " must follow initial year " +
                                     std::to_string(t0));
  const auto regions = panel.sector_regions(sector);
  CrossSection cs;
  cs.sector = sector;
  cs.t0 = t0;
  cs.tT = tT;
  const auto n = static_cast<Eigen::Index>(regions.size());
  cs.growth.resize(n);
  cs.log_initial.resize(n);
  const double span = static_cast<double>(tT - t0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& id = regions[static_cast<std::size_t>(i)].region_id;
    const auto p0 = panel.productivity(id, sector, t0);
    const auto pT = panel.productivity(id, sector, tT);
    if (!p0) fail(ErrorCode::MissingYear, "sector '" + sector + "', region '" + id + "': no year " + std::to_string(t0));
    if (!pT) fail(ErrorCode::MissingYear, "sector '" + sector + "', region '" + id + "': no year " + std::to_string(tT));
    cs.region_ids.push_back(id);
    cs.log_initial(i) = std::log(*p0);
    cs.growth(i) = std::log(*pT / *p0) / span;
  }
  return cs;
}

inline CrossSection attach_covariates(CrossSection cs, const PanelDataset& panel,
                                      const std::vector<std::string>& names) {
  if (names.empty()) return cs;
  Eigen::MatrixXd x(cs.size(), static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < cs.size(); ++i)
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto& id = cs.region_ids[static_cast<std::size_t>(i)];
      const auto v = panel.covariate(id, names[c]);
      if (!v) fail(ErrorCode::MissingCovariate, "region '" + id + "' lacks covariate '" + names[c] + "'");
      x(i, static_cast<Eigen::Index>(c)) = *v;
    }
  if (cs.covariates) {
    Eigen::MatrixXd joined(cs.size(), cs.covariates->cols() + x.cols());
    joined << *cs.covariates, x;
    cs.covariates = std::move(joined);
  } else {
    cs.covariates = std::move(x);
  }
  cs.covariate_names.insert(cs.covariate_names.end(), names.begin(), names.end());
  return cs;
}

}  // namespace spconv
