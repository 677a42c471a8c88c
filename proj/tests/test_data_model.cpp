#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "spconv/data_model.hpp"

using namespace spconv;

namespace {

PanelDataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_panel(in, "test.csv");
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no spconv::Error thrown";
  return ErrorCode::Io;
}

const char* kTwoRegions =
    "region_id,region_name,x_km,y_km,sector,year,productivity\n"
    "A,Alpha,0,0,agri,1995,100\n"
    "A,Alpha,0,0,agri,2002,200\n"
    "B,\"Beta, South\",50,0,agri,1995,100\n"
    "B,\"Beta, South\",50,0,agri,2002,100\n";

}  // namespace

TEST(LoadPanel, MinimalValidInput) {
  const auto p = parse(kTwoRegions);
  EXPECT_EQ(p.observation_count(), 4u);
  ASSERT_EQ(p.regions().size(), 2u);
  EXPECT_EQ(p.regions()[1].name, "Beta, South");
  EXPECT_EQ(p.sectors().size(), 1u);
  EXPECT_EQ(p.years("agri"), (std::vector<int>{1995, 2002}));
}

TEST(LoadPanel, RejectsZeroProductivity) {
  const std::string text =
      "region_id,region_name,x_km,y_km,sector,year,productivity\n"
      "A,Alpha,0,0,agri,1995,0\n";
  EXPECT_EQ(code_of([&] { parse(text); }), ErrorCode::NonPositiveProductivity);
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1995"), std::string::npos);
  }
}

TEST(LoadPanel, RejectsRaggedYears) {
  const std::string text =
      "region_id,region_name,x_km,y_km,sector,year,productivity\n"
      "A,Alpha,0,0,agri,1995,1\n"
      "A,Alpha,0,0,agri,2002,2\n"
      "B,Beta,5,0,agri,1995,1\n";
  EXPECT_EQ(code_of([&] { parse(text); }), ErrorCode::RaggedPanel);
}

TEST(LoadPanel, MissingColumnIsNamed) {
  const std::string text = "region_id,region_name,y_km,sector,year,productivity\nA,Alpha,0,agri,1995,1\n";
  try {
    parse(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    EXPECT_NE(std::string(e.what()).find("x_km"), std::string::npos);
  }
}

TEST(LoadPanel, CommaDecimalRejectedWithLocation) {
  const std::string text =
      "region_id,region_name,x_km,y_km,sector,year,productivity\n"
      "A,Alpha,0,0,agri,1995,\"12,5\"\n";
  try {
    parse(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("productivity"), std::string::npos);
  }
}

TEST(LoadPanel, InconsistentCoordinatesRejected) {
  const std::string text =
      "region_id,region_name,x_km,y_km,sector,year,productivity\n"
      "A,Alpha,0,0,agri,1995,1\n"
      "A,Alpha,1,0,agri,2002,1\n";
  EXPECT_EQ(code_of([&] { parse(text); }), ErrorCode::ParseError);
}

TEST(LoadPanel, MissingFileIsIo) {
  EXPECT_EQ(code_of([] { load_panel("/nonexistent/panel.csv"); }), ErrorCode::Io);
}

TEST(CrossSection, NoChangeGivesZeroGrowth) {
  const auto cs = build_cross_section(parse(kTwoRegions), "agri", 1995, 2002);
  EXPECT_EQ(cs.span(), 7);
  EXPECT_DOUBLE_EQ(cs.growth(1), 0.0);
}

TEST(CrossSection, DoublingOverSevenYears) {
  const auto cs = build_cross_section(parse(kTwoRegions), "agri", 1995, 2002);
  // ln(2)/7 by hand: 0.693147.../7
  EXPECT_NEAR(cs.growth(0), 0.09902, 5e-6);
  EXPECT_DOUBLE_EQ(cs.growth(0), std::log(2.0) / 7.0);
  EXPECT_DOUBLE_EQ(cs.log_initial(0), std::log(100.0));
}

TEST(CrossSection, Errors) {
  const auto p = parse(kTwoRegions);
  EXPECT_EQ(code_of([&] { build_cross_section(p, "agri", 1995, 2003); }), ErrorCode::MissingYear);
  EXPECT_EQ(code_of([&] { build_cross_section(p, "mining", 1995, 2002); }), ErrorCode::UnknownSector);
}

TEST(CrossSection, ReconstructsFinalProductivity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto panel = fixtures::synthetic_panel({.n = 15}, seed);
    const auto cs = build_cross_section(panel, "industry", 1995, 2002);
    for (Eigen::Index i = 0; i < cs.size(); ++i) {
      const auto& id = cs.region_ids[static_cast<std::size_t>(i)];
      const double p0 = *panel.productivity(id, "industry", 1995);
      const double pT = *panel.productivity(id, "industry", 2002);
      EXPECT_NEAR(p0 * std::exp(cs.span() * cs.growth(i)) / pT, 1.0, 1e-12);
    }
  }
}

TEST(CrossSection, RegionOrderStable) {
  const auto panel = fixtures::synthetic_panel({.n = 12}, 3);
  EXPECT_EQ(build_cross_section(panel, "industry", 1995, 2002).region_ids,
            build_cross_section(panel, "industry", 1995, 2002).region_ids);
}

TEST(CrossSection, GrowthScaleInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int rep = 0; rep < 10; ++rep) {
    const auto text = fixtures::synthetic_panel_csv({.n = 10}, 100 + rep);
    const double c = scale(rng);
    std::istringstream in(text);
    const auto base = read_panel(in, "base");
    std::map<PanelDataset::ObservationKey, double> obs;
    for (const auto& r : base.regions())
      for (int y : base.years("industry")) obs[{r.region_id, "industry", y}] = c * *base.productivity(r.region_id, "industry", y);
    const auto scaled = PanelDataset::create(base.regions(), obs);
    const auto a = build_cross_section(base, "industry", 1995, 2002);
    const auto b = build_cross_section(scaled, "industry", 1995, 2002);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a.growth(i), b.growth(i), 1e-14);
      EXPECT_NEAR(b.log_initial(i) - a.log_initial(i), std::log(c), 1e-12);
    }
  }
}

TEST(Covariates, EmptyListIsIdentity) {
  const auto p = parse(kTwoRegions);
  const auto cs = attach_covariates(build_cross_section(p, "agri", 1995, 2002), p, {});
  EXPECT_FALSE(cs.covariates.has_value());
}

TEST(Covariates, ShapeAndOrder) {
  const auto base = fixtures::synthetic_panel({.n = 28}, 5);
  std::string text = "region_id,primary,secondary,higher\n";
  for (std::size_t i = 0; i < 28; ++i)
    text += "r" + std::to_string(i) + ",0.5,0.3," + std::to_string(0.01 * static_cast<double>(i)) + "\n";
  std::istringstream in(text);
  const auto panel = read_covariates(base, in, "cov.csv");
  const auto cs = attach_covariates(build_cross_section(panel, "industry", 1995, 2002), panel, {"higher"});
  ASSERT_TRUE(cs.covariates);
  EXPECT_EQ(cs.covariates->rows(), 28);
  EXPECT_EQ(cs.covariates->cols(), 1);
  EXPECT_DOUBLE_EQ((*cs.covariates)(27, 0), 0.27);
  EXPECT_TRUE((cs.covariates->array() >= 0.0).all() && (cs.covariates->array() <= 1.0).all());
  const auto two = attach_covariates(build_cross_section(panel, "industry", 1995, 2002), panel, {"secondary", "primary"});
  EXPECT_DOUBLE_EQ((*two.covariates)(0, 0), 0.3);
  EXPECT_DOUBLE_EQ((*two.covariates)(0, 1), 0.5);
}

TEST(Covariates, MissingForOneRegion) {
  const auto p = parse(kTwoRegions);
  std::istringstream in("region_id,primary,secondary\nA,0.5,0.2\n");
  const auto with = read_covariates(p, in, "cov.csv");
  EXPECT_EQ(code_of([&] { attach_covariates(build_cross_section(with, "agri", 1995, 2002), with, {"primary", "secondary"}); }),
            ErrorCode::MissingCovariate);
}

TEST(Covariates, ShareOutsideUnitIntervalRejected) {
  const auto p = parse(kTwoRegions);
  std::istringstream in("region_id,primary\nA,1.5\nB,0.2\n");
  EXPECT_EQ(code_of([&] { read_covariates(p, in, "cov.csv"); }), ErrorCode::InvalidCovariate);
}
