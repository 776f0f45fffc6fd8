// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "doa/label_codec.hpp"

namespace doa {
namespace {

const OutputSpace k180{180.0, 5.0};

double sum(const LabelDistribution& d) { return std::accumulate(d.values.begin(), d.values.end(), 0.0); }

TEST(OutputSpace, Geometry) {
  EXPECT_EQ(k180.num_cells(), 36u);
  EXPECT_EQ(k180.num_classes(), 37u);
  EXPECT_FALSE(k180.circular());
  const OutputSpace c(360.0, 3.0);
  EXPECT_TRUE(c.circular());
  EXPECT_EQ(c.num_classes(), 121u);
  EXPECT_EQ(OutputSpace(360.0, 2.0).num_classes(), 181u);
}

TEST(OutputSpace, RejectsNonDivisorsAndBadWidths) {
  EXPECT_THROW(OutputSpace(180.0, 7.0), DomainError);
  EXPECT_THROW(OutputSpace(180.0, 0.0), DomainError);
  EXPECT_THROW(OutputSpace(180.0, -5.0), DomainError);
  EXPECT_THROW(OutputSpace(180.0, 360.0), DomainError);
}

TEST(OneHot, NearestClass) {
  EXPECT_EQ(peak_class(encode_one_hot(k180, 92.4)), 18u);
  EXPECT_EQ(peak_class(encode_one_hot(k180, 92.6)), 19u);
  const auto z = encode_one_hot(k180, 0.0);
  EXPECT_EQ(z[0], 1.0);
  EXPECT_EQ(sum(z), 1.0);
  EXPECT_EQ(peak_class(encode_one_hot(k180, 180.0)), 36u);
}

TEST(OneHot, HalfRoundsUp) { EXPECT_EQ(peak_class(encode_one_hot(k180, 2.5)), 1u); }

TEST(Encoders, RejectOutOfRange) {
  EXPECT_THROW(encode_one_hot(k180, -0.1), DomainError);
  EXPECT_THROW(encode_uld(k180, 180.1), DomainError);
  EXPECT_THROW(encode_glc(k180, 90.0, 0.0), DomainError);
  EXPECT_THROW(encode_sld(k180, 90.0, -1.0), DomainError);
}

TEST(Uld, AdjacentPair) {
  const auto y = encode_uld(k180, 92.4);
  EXPECT_NEAR(y[18], 0.52, 1e-12);
  EXPECT_NEAR(y[19], 0.48, 1e-12);
  EXPECT_NEAR(sum(y), 1.0, 1e-15);
  EXPECT_EQ(encode_uld(k180, 90.0)[18], 1.0);
  const auto half = encode_uld(k180, 2.5);
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  const auto end = encode_uld(k180, 180.0);
  EXPECT_EQ(end[36], 1.0);
}

TEST(Uld, AtMostTwoAdjacentNonzeros) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int t = 0; t < 2000; ++t) {
    const auto y = encode_uld(k180, u(rng));
    std::vector<std::size_t> nz;
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_GE(y[i], 0.0);
      ASSERT_LE(y[i], 1.0);
      if (y[i] != 0.0) nz.push_back(i);
    }
    ASSERT_GE(nz.size(), 1u);
    ASSERT_LE(nz.size(), 2u);
    if (nz.size() == 2) ASSERT_EQ(nz[1], nz[0] + 1);
    ASSERT_NEAR(sum(y), 1.0, 1e-9);
  }
}

TEST(Uld, ClassMeanIsThePosition) {
  std::mt19937_64 rng(12);
  for (const OutputSpace s : {k180, OutputSpace(360.0, 7.5)}) {
    std::uniform_real_distribution<double> u(0.0, s.range_deg());
    for (int t = 0; t < 10000; ++t) {
      const double p = u(rng);
      const auto y = encode_uld(s, p);
      double mean = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) mean += y[i] * static_cast<double>(i) * s.cell_deg();
      ASSERT_NEAR(mean, p, 1e-9);
    }
  }
}

TEST(Uld, AgreesWithOneHotPeak) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int t = 0; t < 5000; ++t) {
    const double p = u(rng);
    const Position pos = Position::make(k180, p);
    const auto oh = peak_class(encode_one_hot(k180, p));
    if (pos.decimal_part() < 0.5) {
      ASSERT_EQ(peak_class(encode_uld(k180, p)), oh);
    } else if (pos.decimal_part() > 0.5) {
      ASSERT_EQ(oh, static_cast<std::size_t>(pos.integer_part() + 1));
    }
  }
}

TEST(Glc, GaussianKernel) {
  const auto g = encode_glc(k180, 90.0, 8.0);
  EXPECT_EQ(g[18], 1.0);
  EXPECT_NEAR(g[17], std::exp(-25.0 / 128.0), 1e-15);
  EXPECT_NEAR(g[17], 0.8225775623986646, 1e-12);
  EXPECT_DOUBLE_EQ(g[16], g[20]);
  EXPECT_GT(sum(g), 1.0);
  const auto off = encode_glc(k180, 92.4, 8.0);
  for (double v : off.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Sld, NormalizedGaussian) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int t = 0; t < 200; ++t) EXPECT_NEAR(sum(encode_sld(k180, u(rng), 8.0)), 1.0, 1e-12);
  const auto s = encode_sld(k180, 90.0, 8.0);
  const auto g = encode_glc(k180, 90.0, 8.0);
  EXPECT_EQ(peak_class(s), 18u);
  EXPECT_NEAR(s[17] / s[18], g[17] / g[18], 1e-12);
}

TEST(Peak, TiesGoLow) {
  EXPECT_EQ(peak_class(std::vector<double>(5, 0.2)), 0u);
  EXPECT_EQ(peak_class(encode_uld(k180, 92.4)), 18u);
  EXPECT_THROW(peak_class(std::vector<double>{}), DomainError);
}

TEST(Decode, Top1) {
  EXPECT_EQ(decode_top1(k180, encode_one_hot(k180, 90.0).view()).p_hat, 90.0);
  EXPECT_EQ(decode_top1(k180, encode_uld(k180, 92.4).view()).p_hat, 90.0);
  EXPECT_EQ(decode_top1(k180, encode_uld(k180, 92.6).view()).p_hat, 95.0);
}

TEST(Decode, Wad2) {
  EXPECT_NEAR(decode_wad2(k180, encode_uld(k180, 92.4).view()).p_hat, 92.4, 1e-12);
  EXPECT_EQ(decode_wad2(k180, encode_one_hot(k180, 90.0).view()).p_hat, 90.0);
  std::vector<double> edge(37, 0.0);
  edge[0] = 0.7;
  EXPECT_EQ(decode_wad2(k180, edge).p_hat, 0.0);
  edge.assign(37, 0.0);
  edge[36] = 0.9;
  EXPECT_EQ(decode_wad2(k180, edge).p_hat, 180.0);
}

TEST(Decode, Wad2NeighbourTieGoesRight) {
  std::vector<double> d(37, 0.0);
  d[10] = 0.5;
  d[9] = 0.25;
  d[11] = 0.25;
  EXPECT_NEAR(decode_wad2(k180, d).p_hat, (0.5 * 10 + 0.25 * 11) * 5.0 / 0.75, 1e-12);
}

TEST(Decode, Wad3) {
  EXPECT_NEAR(decode_wad3(k180, encode_uld(k180, 92.4).view()).p_hat, 92.4, 1e-12);
  EXPECT_EQ(decode_wad3(k180, encode_one_hot(k180, 90.0).view()).p_hat, 90.0);
  std::vector<double> d(37, 0.0);
  d[17] = 0.1;
  d[18] = 0.8;
  d[19] = 0.1;
  EXPECT_NEAR(decode_wad3(k180, d).p_hat, 90.0, 1e-12);
}

TEST(Decode, Wad3EqualsTop1OnSymmetricPeaks) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  std::uniform_int_distribution<int> k(1, 35);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> d(37);
    for (double& v : d) v = u(rng) * 0.1;
    const int c = k(rng);
    const double side = u(rng);
    d[c] = 0.5;
    d[c - 1] = d[c + 1] = side;
    ASSERT_NEAR(decode_wad3(k180, d).p_hat, decode_top1(k180, d).p_hat, 1e-9);
  }
}

TEST(Decode, DegenerateAndLengthErrors) {
  const std::vector<double> zeros(37, 0.0);
  EXPECT_THROW(decode_wad2(k180, zeros), DegenerateInputError);
  EXPECT_THROW(decode_wad3(k180, zeros), DegenerateInputError);
  EXPECT_THROW(decode_top1(k180, std::vector<double>(36, 0.1)), DomainError);
}

TEST(Decode, UldRoundTripIsExact) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int t = 0; t < 100000; ++t) {
    const double p = u(rng);
    const auto y = encode_uld(k180, p);
    ASSERT_NEAR(decode_wad2(k180, y.view()).p_hat, p, 1e-9);
    ASSERT_NEAR(decode_wad3(k180, y.view()).p_hat, p, 1e-9);
  }
}

TEST(Wasserstein, PointMasses) {
  for (std::size_t i : {0u, 3u, 36u}) {
    for (std::size_t j : {0u, 7u, 36u}) {
      std::vector<double> a(37, 0.0), b(37, 0.0);
      a[i] = 1.0;
      b[j] = 1.0;
      EXPECT_EQ(wasserstein_1d(a, b), std::abs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  const auto x = encode_sld(k180, 33.0, 8.0);
  EXPECT_EQ(wasserstein_1d(x, x), 0.0);
  EXPECT_NEAR(wasserstein_1d(encode_uld(k180, 92.4), encode_one_hot(k180, 0.0)), 18.48, 1e-12);
}

TEST(Wasserstein, RejectsMassMismatch) {
  EXPECT_THROW(wasserstein_1d(encode_glc(k180, 90.0, 8.0), encode_one_hot(k180, 0.0)), DomainError);
  EXPECT_THROW(wasserstein_1d(std::vector<double>(3, 1.0 / 3), std::vector<double>(4, 0.25)), DomainError);
}

TEST(QuantizationLimit, Values) {
  const std::vector<double> one{92.4};
  EXPECT_NEAR(quantization_error_limit(one, k180), 2.4, 1e-12);
  const std::vector<double> centres{0.0, 45.0, 90.0, 180.0};
  EXPECT_EQ(quantization_error_limit(centres, k180), 0.0);
  EXPECT_THROW(quantization_error_limit(std::vector<double>{}, k180), DomainError);
}

TEST(QuantizationLimit, UniformPositionsGiveQuarterCell) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  std::vector<double> p(1'000'000);
  for (double& x : p) x = u(rng);
  EXPECT_NEAR(quantization_error_limit(p, k180), 1.25, 0.005);
}

}  // namespace
}  // namespace doa
