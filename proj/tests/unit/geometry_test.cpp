// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#include <gtest/gtest.h>

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <random>

#include "midibpe/geometry.hpp"
#include "support/oracles.hpp"

namespace midibpe {
namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

Eigen::MatrixXd random_rotation(std::mt19937_64& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, d, d));
  return qr.householderQ();
}

// +-e_i for every axis: the centered covariance is a multiple of the identity.
Eigen::MatrixXd axis_cross(Eigen::Index d) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    m(2 * i, i) = 1.0;
    m(2 * i + 1, i) = -1.0;
  }
  return m;
}

// Noise-free isotropic points on a random k-dimensional subspace of R^d.
Eigen::MatrixXd rank_k(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k, Eigen::Index d) {
  return gaussian(rng, n, k) * random_rotation(rng, d).topRows(k);
}

TEST(Spectrum, MatchesGramEigenvalueOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd m = gaussian(rng, 10, 4);
    const Eigen::MatrixXd gram = m.transpose() * m;
    std::vector<double> rowmajor;
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) rowmajor.push_back(gram(i, j));
    }
    const auto ev = testing::jacobi_eigenvalues(rowmajor, 4);
    const auto spectrum = singular_spectrum(m);
    ASSERT_EQ(spectrum.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      const double expected = std::sqrt(ev[i] / ev[0]);
      EXPECT_NEAR(spectrum[i], expected, 1e-9 * expected) << "trial " << trial << " index " << i;
    }
  }
}

TEST(Spectrum, OrthonormalRowsGiveAllOnes) {
  std::mt19937_64 rng(22);
  for (const Eigen::MatrixXd& m : {Eigen::MatrixXd(Eigen::MatrixXd::Identity(6, 6)), random_rotation(rng, 6)}) {
    for (double s : singular_spectrum(m)) EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Spectrum, RankOne) {
  Eigen::VectorXd u(5), v(3);
  u << 1, 2, 3, 4, 5;
  v << 1, -1, 2;
  const auto s = singular_spectrum(Eigen::MatrixXd(u * v.transpose()));
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_NEAR(s[1], 0.0, 1e-12);
  EXPECT_NEAR(s[2], 0.0, 1e-12);
}

TEST(Spectrum, DescendingInUnitInterval) {
  std::mt19937_64 rng(23);
  const auto s = singular_spectrum(gaussian(rng, 40, 12));
  EXPECT_DOUBLE_EQ(s.front(), 1.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    EXPECT_LE(s[i], s[i - 1]);
    EXPECT_GT(s[i], 0.0);
  }
}

TEST(Spectrum, Errors) {
  EXPECT_THROW(singular_spectrum(Eigen::MatrixXd::Zero(3, 3)), DataError);
  EXPECT_THROW(singular_spectrum(Eigen::MatrixXd::Ones(1, 3)), PreconditionError);
}

TEST(IsoScore, UniformVarianceIsOne) {
  for (Eigen::Index d : {2, 5, 16}) EXPECT_NEAR(isoscore(axis_cross(d)), 1.0, 1e-9) << "d=" << d;
}

TEST(IsoScore, SingleDirectionIsZero) {
  std::mt19937_64 rng(24);
  const Eigen::MatrixXd dir = gaussian(rng, 1, 16);
  const Eigen::MatrixXd pts = gaussian(rng, 200, 1) * dir;
  EXPECT_NEAR(isoscore(pts), 0.0, 1e-9);
}

TEST(IsoScore, IsotropicSamplesScoreHigh) {
  std::mt19937_64 rng(25);
  EXPECT_GE(isoscore(gaussian(rng, 10000, 16)), 0.95);
}

TEST(IsoScore, RotationAndScaleInvariant) {
  std::mt19937_64 rng(26);
  Eigen::MatrixXd pts = gaussian(rng, 500, 8);
  pts.col(0) *= 4.0;
  pts.col(3) *= 0.3;
  const double base = isoscore(pts);
  EXPECT_NEAR(isoscore(Eigen::MatrixXd(pts * random_rotation(rng, 8))), base, 1e-6);
  EXPECT_NEAR(isoscore(Eigen::MatrixXd(pts * 7.5)), base, 1e-9);
}

TEST(IsoScore, NonDecreasingFromRankOneToIsotropic) {
  std::mt19937_64 rng(27);
  const Eigen::MatrixXd z = gaussian(rng, 5000, 16);
  double previous = -1.0;
  for (double spread : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Eigen::MatrixXd pts = z;
    pts.rightCols(15) *= spread;
    const double s = isoscore(pts);
    EXPECT_GE(s, previous) << "spread " << spread;
    previous = s;
  }
}

TEST(IsoScore, Errors) {
  EXPECT_THROW(isoscore(Eigen::MatrixXd::Ones(1, 4)), PreconditionError);
  EXPECT_THROW(isoscore(Eigen::MatrixXd::Ones(4, 1)), PreconditionError);
  EXPECT_THROW(isoscore(Eigen::MatrixXd::Ones(4, 4)), DataError);
}

TEST(IntrinsicDim, RecoversSubspaceRank) {
  std::mt19937_64 rng(28);
  for (Eigen::Index k = 1; k <= 8; ++k) EXPECT_EQ(pca_intrinsic_dim(rank_k(rng, 400, k, 16)), k);
}

TEST(IntrinsicDim, IsotropicCloudUsesAllDimensions) {
  std::mt19937_64 rng(29);
  EXPECT_EQ(pca_intrinsic_dim(gaussian(rng, 2000, 8)), 8);
}

TEST(IntrinsicDim, ThresholdAndErrors) {
  Eigen::MatrixXd pts = axis_cross(4);
  pts.col(3) *= 0.1;  // variance ratio 0.01
  EXPECT_EQ(pca_intrinsic_dim(pts, 0.05), 3);
  EXPECT_EQ(pca_intrinsic_dim(pts, 0.005), 4);
  EXPECT_THROW(pca_intrinsic_dim(Eigen::MatrixXd::Ones(5, 3)), DataError);
}

TEST(Invariance, AllStatisticsUnderRotation) {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd pts = rank_k(rng, 300, 1 + trial % 6, 10) + 0.01 * gaussian(rng, 300, 10);
    const Eigen::MatrixXd rotated = pts * random_rotation(rng, 10);
    EXPECT_NEAR(isoscore(rotated), isoscore(pts), 1e-6);
    EXPECT_EQ(pca_intrinsic_dim(rotated), pca_intrinsic_dim(pts));
    const auto a = singular_spectrum(pts);
    const auto b = singular_spectrum(rotated);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  }
}

TEST(Emb1, IdentityLayout) {
  const EmbeddingMatrix m(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
  const auto bytes = save_embeddings(m);
  ASSERT_EQ(bytes.size(), 12u + 16u);
  EXPECT_EQ((std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 16)),
            (std::vector<std::uint8_t>{'E', 'M', 'B', '1', 2, 0, 0, 0, 2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F}));
  EXPECT_EQ(load_embeddings(bytes), m);
}

TEST(Emb1, LargeRoundTripIsBitExact) {
  std::mt19937_64 rng(31);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> values(1000 * 512);
  for (float& f : values) f = n(rng);
  const EmbeddingMatrix m(1000, 512, values);
  const auto bytes = save_embeddings(m);
  EXPECT_EQ(bytes.size(), 12u + 4u * values.size());
  EXPECT_EQ(load_embeddings(bytes), m);
}

TEST(Emb1, StructuredErrors) {
  const auto good = save_embeddings(EmbeddingMatrix(2, 2, {1.0f, 2.0f, 3.0f, 4.0f}));
  auto bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_THROW(load_embeddings(bad_magic), ParseError);
  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(load_embeddings(truncated), ParseError);
  auto header_only = std::vector<std::uint8_t>(good.begin(), good.begin() + 6);
  EXPECT_THROW(load_embeddings(header_only), ParseError);
  auto nan = good;
  const auto bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int i = 0; i < 4; ++i) nan[12 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bits >> (8 * i));
  EXPECT_THROW(load_embeddings(nan), ParseError);
}

TEST(Emb1, EigenConversionRoundTrip) {
  std::mt19937_64 rng(32);
  const Eigen::MatrixXd m = gaussian(rng, 7, 3).cast<float>().cast<double>();
  EXPECT_EQ(EmbeddingMatrix::from_eigen(m).to_eigen(), m);
}

}  // namespace
}  // namespace midibpe
