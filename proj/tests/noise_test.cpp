#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "ssrk/noise.hpp"

namespace {

using ssrk::IncrementPair;

// Sample mean and its standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
MeanSe mean_se(const std::vector<IncrementPair>& xs, F f) {
  const double n = static_cast<double>(xs.size());
  double s = 0.0, s2 = 0.0;
  for (const auto& x : xs) {
    const double v = f(x);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1.0))};
}

void expect_moments(const std::vector<IncrementPair>& xs, double h) {
  const auto I = mean_se(xs, [](const auto& p) { return p.I; });
  const auto I0 = mean_se(xs, [](const auto& p) { return p.I0; });
  const auto II = mean_se(xs, [](const auto& p) { return p.I * p.I; });
  const auto JJ = mean_se(xs, [](const auto& p) { return p.I0 * p.I0; });
  const auto IJ = mean_se(xs, [](const auto& p) { return p.I * p.I0; });
  EXPECT_LT(std::abs(I.mean), 3 * I.se);
  EXPECT_LT(std::abs(I0.mean), 3 * I0.se);
  EXPECT_LT(std::abs(II.mean - h), 3 * II.se) << II.mean;
  EXPECT_LT(std::abs(JJ.mean - h * h * h / 3), 3 * JJ.se) << JJ.mean;
  EXPECT_LT(std::abs(IJ.mean - h * h / 2), 3 * IJ.se) << IJ.mean;
}

TEST(Increments, FromNormalsFormula) {
  const double h = 0.04;
  const auto p = ssrk::increment_from_normals(h, 1.5, -0.5);
  EXPECT_DOUBLE_EQ(p.I, 0.2 * 1.5);
  EXPECT_DOUBLE_EQ(p.I0, 0.5 * 0.008 * (1.5 - 0.5 / std::sqrt(3.0)));
}

TEST(Increments, SampledMomentsAtOneMillion) {
  const double h = 0.01;
  const auto path = ssrk::sample_path(1, h, 1000000, 12345);
  expect_moments(path.data(), h);
}

TEST(Increments, AggregatedMomentsAtOneMillion) {
  const double hf = 0.001;
  const std::size_t K = 8;
  const auto path = ssrk::sample_path(1, hf, 1000000 * K, 999);
  const auto coarse = ssrk::coarsen(path, K);
  ASSERT_EQ(coarse.n_fine(), 1000000u);
  EXPECT_DOUBLE_EQ(coarse.h_fine(), hf * K);
  expect_moments(coarse.data(), hf * K);
}

TEST(Increments, ChannelsAreUncorrelated) {
  const auto path = ssrk::sample_path(2, 1.0, 200000, 5);
  std::vector<IncrementPair> cross(path.n_fine());
  for (std::size_t k = 0; k < path.n_fine(); ++k)
    cross[k] = {path.pair(0, k).I * path.pair(1, k).I, path.pair(0, k).I0 * path.pair(1, k).I};
  const auto a = mean_se(cross, [](const auto& p) { return p.I; });
  const auto b = mean_se(cross, [](const auto& p) { return p.I0; });
  EXPECT_LT(std::abs(a.mean), 3 * a.se);
  EXPECT_LT(std::abs(b.mean), 3 * b.se);
}

TEST(Aggregation, SingleStepIsIdentity) {
  const auto path = ssrk::sample_path(1, 0.1, 10, 3);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto a = ssrk::aggregate(path, 1, 0, k);
    EXPECT_EQ(a.I, path.pair(0, k).I);
    EXPECT_EQ(a.I0, path.pair(0, k).I0);
  }
}

TEST(Aggregation, TwoStepHandExpansion) {
  const std::vector<IncrementPair> data = {{0.3, 0.01}, {-0.2, 0.02}};
  const ssrk::NoisePath path(1, 0.5, 2, 0, data);
  const auto a = ssrk::aggregate(path, 2, 0, 0);
  EXPECT_DOUBLE_EQ(a.I, 0.1);
  // int_0^1 (W(s) - W(0)) ds = I0_1 + (I0_2 + 0.5 * I_1)
  EXPECT_DOUBLE_EQ(a.I0, 0.01 + 0.02 + 0.5 * 0.3);
}

TEST(Aggregation, IsAssociative) {
  const auto path = ssrk::sample_path(2, 0x1.0p-10, 1024, 77);
  for (std::size_t K1 : {2u, 4u, 8u}) {
    for (std::size_t K2 : {2u, 4u, 16u}) {
      const auto direct = ssrk::coarsen(path, K1 * K2);
      const auto nested = ssrk::coarsen(ssrk::coarsen(path, K1), K2);
      ASSERT_EQ(direct.n_fine(), nested.n_fine());
      for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t k = 0; k < direct.n_fine(); ++k) {
          const auto& a = direct.pair(r, k);
          const auto& b = nested.pair(r, k);
          const double scale_I = std::max(std::abs(a.I), std::sqrt(direct.h_fine()));
          const double scale_J = std::max(std::abs(a.I0), std::pow(direct.h_fine(), 1.5));
          EXPECT_LE(std::abs(a.I - b.I), 1e-12 * scale_I);
          EXPECT_LE(std::abs(a.I0 - b.I0), 1e-12 * scale_J);
        }
      }
    }
  }
}

TEST(Aggregation, RejectsBadFactors) {
  const auto path = ssrk::sample_path(1, 0.1, 12, 1);
  EXPECT_THROW(ssrk::aggregate(path, 5, 0, 0), ssrk::DomainError);
  EXPECT_THROW(ssrk::aggregate(path, 0, 0, 0), ssrk::DomainError);
  EXPECT_THROW(ssrk::aggregate(path, 4, 1, 0), ssrk::DomainError);
  EXPECT_THROW(ssrk::aggregate(path, 4, 0, 3), ssrk::DomainError);
  EXPECT_THROW(ssrk::coarsen(path, 7), ssrk::DomainError);
}

TEST(Sampling, RejectsBadArguments) {
  EXPECT_THROW(ssrk::sample_path(1, 0.0, 10, 1), ssrk::DomainError);
  EXPECT_THROW(ssrk::sample_path(1, -0.1, 10, 1), ssrk::DomainError);
  EXPECT_THROW(ssrk::sample_path(1, 0.1, 0, 1), ssrk::DomainError);
  EXPECT_THROW(ssrk::sample_path(0, 0.1, 10, 1), ssrk::DomainError);
}

TEST(Sampling, SeedDeterminism) {
  const auto a = ssrk::sample_path(2, 0.01, 500, 42);
  const auto b = ssrk::sample_path(2, 0.01, 500, 42);
  const auto c = ssrk::sample_path(2, 0.01, 500, 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Sampling, PrefixIsStable) {
  // A longer path starts with the same increments as a shorter one.
  const auto a = ssrk::sample_path(1, 0.01, 100, 8);
  const auto b = ssrk::sample_path(1, 0.01, 300, 8);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(a.pair(0, k).I, b.pair(0, k).I);
}

TEST(Sampling, NormalsAreFinite) {
  ssrk::NormalPairSource src(0);
  for (int i = 0; i < 100000; ++i) {
    const auto [a, b] = src.next();
    ASSERT_TRUE(std::isfinite(a) && std::isfinite(b));
  }
}

TEST(BinaryDump, RoundTripsBitwise) {
  const auto path = ssrk::sample_path(3, 0.125, 40, 2024);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  ssrk::write_binary(path, buf);
  EXPECT_EQ(buf.str().size(), 32u + 3 * 40 * 16);
  const auto back = ssrk::read_binary(buf);
  EXPECT_TRUE(back == path);
}

TEST(BinaryDump, HeaderIsLittleEndian) {
  const auto path = ssrk::sample_path(1, 0.5, 2, 258);
  std::stringstream buf;
  ssrk::write_binary(path, buf);
  const std::string s = buf.str();
  EXPECT_EQ(static_cast<unsigned char>(s[0]), 1);
  EXPECT_EQ(static_cast<unsigned char>(s[24]), 2);  // seed 258 = 0x0102
  EXPECT_EQ(static_cast<unsigned char>(s[25]), 1);
}

TEST(BinaryDump, TruncatedStreamIsStructuralError) {
  const auto path = ssrk::sample_path(1, 0.5, 4, 1);
  std::stringstream buf;
  ssrk::write_binary(path, buf);
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::stringstream cut(s);
  EXPECT_THROW(ssrk::read_binary(cut), ssrk::StructuralError);
}

TEST(NoisePathType, RejectsPayloadMismatch) {
  EXPECT_THROW(ssrk::NoisePath(1, 0.1, 3, 0, std::vector<IncrementPair>(2)), ssrk::StructuralError);
}

}  // namespace
