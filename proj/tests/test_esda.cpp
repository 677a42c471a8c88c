#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "spconv/esda.hpp"

using namespace spconv;

namespace {

/// Two disjoint 5-cliques, row-standardized.
SpatialWeights two_cliques() {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(10, 10);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) m(5 * b + i, 5 * b + j) = 1.0;
  return row_standardize(SpatialWeights::from_matrix(m, fixtures::ids(10)));
}

}  // namespace

TEST(MoranGlobal, ConstantVariableIsDegenerate) {
  try {
    moran_global(Eigen::Vector4d::Constant(3.0), fixtures::line4(), 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVariance);
  }
}

TEST(MoranGlobal, EmptyWeights) {
  const auto w = SpatialWeights::from_matrix(Eigen::MatrixXd::Zero(3, 3), fixtures::ids(3));
  try {
    moran_global(Eigen::Vector3d(1, 2, 3), w, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyWeights);
  }
}

TEST(MoranGlobal, ExpectedValue) {
  std::mt19937_64 rng(1);
  const auto w = fixtures::random_weights(28, rng, true);
  const auto r = moran_global(fixtures::normal_vector(28, rng), w, 0, 0);
  EXPECT_EQ(r.expected, -1.0 / 27.0);
  EXPECT_NEAR(r.expected, -0.03704, 5e-6);
}

TEST(MoranGlobal, LineGraphAlternating) {
  const auto r = moran_global(Eigen::Vector4d(1, -1, 1, -1), fixtures::line4(), 99, 3);
  EXPECT_DOUBLE_EQ(r.I, -1.0);
}

TEST(MoranGlobal, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 4 + rng() % 20;
    const auto w = fixtures::random_weights(n, rng, rep % 2 == 0);
    const auto x = fixtures::normal_vector(static_cast<Eigen::Index>(n), rng);
    if (w.total_weight() == 0.0) continue;
    EXPECT_NEAR(moran_global(x, w, 0, 0).I, fixtures::moran_bruteforce(fixtures::to_vec(x), fixtures::to_mat(w.matrix())), 1e-10);
  }
}

TEST(MoranGlobal, AffineInvariance) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const auto w = fixtures::random_weights(15, rng, true);
    const auto x = fixtures::normal_vector(15, rng);
    const double a = rep % 2 ? -3.7 : 0.25, b = 12.5;
    const Eigen::VectorXd y = (a * x.array() + b).matrix();
    EXPECT_NEAR(moran_global(x, w, 0, 0).I, moran_global(y, w, 0, 0).I, 1e-12);
  }
}

TEST(MoranGlobal, PermutationDeterminismAndRange) {
  std::mt19937_64 rng(4);
  const auto w = fixtures::random_band(28, 400.0, 120.0, rng);
  const auto x = fixtures::normal_vector(28, rng);
  const auto a = moran_global(x, w, 499, 42);
  const auto b = moran_global(x, w, 499, 42);
  EXPECT_EQ(a.p_perm, b.p_perm);
  EXPECT_EQ(a.z_perm, b.z_perm);
  EXPECT_GT(a.p_perm, 0.0);
  EXPECT_LE(a.p_perm, 1.0);
  EXPECT_NE(moran_global(x, w, 499, 43).perm_mean, a.perm_mean);
}

TEST(MoranGlobal, StrongClusteringIsSignificant) {
  Eigen::VectorXd x(10);
  x << 5, 5.1, 4.9, 5, 5.2, -5, -5.1, -4.9, -5, -5.2;
  const auto r = moran_global(x, two_cliques(), 999, 9);
  EXPECT_GT(r.I, 0.5);
  // Exact permutation p is 2/252: only the two block-separating splits are as extreme.
  EXPECT_LT(r.p_perm, 0.05);
}

TEST(MoranLocal, LineGraphFirstRegion) {
  const auto r = moran_local(Eigen::Vector4d(1, -1, 1, -1), fixtures::line4(), 0, 0);
  EXPECT_DOUBLE_EQ(r.regions[0].I, -0.25);
  EXPECT_EQ(r.regions[0].quadrant, Quadrant::HL);
}

TEST(MoranLocal, IslandHasZeroIndicator) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = 1.0;
  const auto w = row_standardize(SpatialWeights::from_matrix(m, fixtures::ids(4)));
  const auto r = moran_local(Eigen::Vector4d(1, 2, 3, 4), w, 99, 1);
  EXPECT_EQ(r.regions[3].I, 0.0);
  EXPECT_EQ(r.regions[3].quadrant, Quadrant::Island);
  EXPECT_EQ(lisa_classify(r, 0.05)[3], LisaClass::Island);
}

TEST(MoranLocal, SumMatchesGlobal) {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 4 + rng() % 25;
    const auto w = fixtures::random_weights(n, rng, rep % 3 != 0);
    if (w.total_weight() == 0.0) continue;
    const auto x = fixtures::normal_vector(static_cast<Eigen::Index>(n), rng);
    const auto local = moran_local(x, w, 0, 0);
    double sum = 0.0;
    for (const auto& r : local.regions) sum += r.I;
    EXPECT_NEAR(sum * static_cast<double>(n) / w.total_weight(), moran_global(x, w, 0, 0).I, 1e-10);
  }
}

TEST(MoranLocal, Deterministic) {
  std::mt19937_64 rng(6);
  const auto w = fixtures::random_band(28, 400.0, 120.0, rng);
  const auto x = fixtures::normal_vector(28, rng);
  const auto a = moran_local(x, w, 199, 5);
  const auto b = moran_local(x, w, 199, 5);
  for (std::size_t i = 0; i < a.regions.size(); ++i) EXPECT_EQ(a.regions[i].p, b.regions[i].p);
}

TEST(MoranLocal, ConstantIsDegenerate) {
  EXPECT_THROW(moran_local(Eigen::Vector4d::Constant(1.0), fixtures::line4(), 9, 1), Error);
}

TEST(MoranScatter, SlopeEqualsGlobalI) {
  const auto s = moran_scatter(Eigen::Vector4d(1, -1, 1, -1), fixtures::line4());
  EXPECT_DOUBLE_EQ(s.slope, -1.0);
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 30; ++rep) {
    const auto w = fixtures::random_weights(20, rng, true);
    const auto x = fixtures::normal_vector(20, rng);
    const double i = moran_global(x, w, 0, 0).I;
    EXPECT_NEAR(moran_scatter(x, w).slope, i * w.total_weight() / 20.0, 1e-10);
    EXPECT_NEAR(moran_scatter(x, w, true).slope, moran_scatter(x, w).slope, 1e-10);
  }
}

TEST(MoranScatter, SlopeEqualsIWithoutIslands) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto w = fixtures::random_band(25, 300.0, 150.0, rng);
    if (!w.islands().empty()) continue;
    const auto x = fixtures::normal_vector(25, rng);
    EXPECT_NEAR(w.total_weight(), 25.0, 1e-12);
    EXPECT_NEAR(moran_scatter(x, w).slope, moran_global(x, w, 0, 0).I, 1e-10);
  }
}

TEST(MoranScatter, Quadrants) {
  const auto s = moran_scatter(Eigen::Vector4d(3, 2, -2, -3), fixtures::line4());
  EXPECT_EQ(s.points[0].quadrant, Quadrant::HH);
  EXPECT_EQ(s.points[3].quadrant, Quadrant::LL);
}

TEST(MoranScatter, Errors) {
  EXPECT_THROW(moran_scatter(Eigen::Vector4d::Constant(2.0), fixtures::line4()), Error);
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3);
  try {
    moran_scatter(Eigen::Vector3d(1, 2, 3), SpatialWeights::from_matrix(m, fixtures::ids(3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotRowStandardized);
  }
}

TEST(Lisa, ClassDefinition) {
  MoranLocalResult local;
  local.regions.push_back({0.5, 0.01, 1.0, 1.0, Quadrant::HH, true});
  local.regions.push_back({0.5, 0.20, 1.0, 1.0, Quadrant::HH, false});
  local.regions.push_back({-0.5, 0.05, -1.0, 1.0, Quadrant::LH, true});
  const auto c = lisa_classify(local, 0.05);
  EXPECT_EQ(c[0], LisaClass::HH);
  EXPECT_EQ(c[1], LisaClass::NotSignificant);
  EXPECT_EQ(c[2], LisaClass::LH);
}

TEST(Lisa, TwoCliquesFormTwoClusters) {
  Eigen::VectorXd x(10);
  x << 10, 10, 10, 10, 10, -10, -10, -10, -10, -10;
  const auto local = moran_local(x, two_cliques(), 999, 2024);
  // Exact conditional p of drawing all four same-block neighbors: 1/C(9,4) = 1/126.
  const auto classes = lisa_classify(local, 0.05);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(classes[static_cast<std::size_t>(i)], LisaClass::HH) << "region " << i;
    EXPECT_EQ(classes[static_cast<std::size_t>(i + 5)], LisaClass::LL) << "region " << i + 5;
    EXPECT_NEAR(local.regions[static_cast<std::size_t>(i)].p, 1.0 / 126.0, 0.006);
  }
}

TEST(Lisa, CsvExport) {
  const Eigen::Vector4d x(3, 2, -2, -3);
  const auto w = fixtures::line4();
  const auto local = moran_local(x, w, 9, 1);
  const auto text = lisa_csv(w.region_ids(), moran_scatter(x, w), local, lisa_classify(local, 0.05));
  EXPECT_EQ(text.substr(0, text.find('\n')), "region_id,z,lag,quadrant,I_i,p_i,class");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
