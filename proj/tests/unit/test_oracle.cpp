#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pmc/oracle.hpp"

using namespace pmc;

namespace {

const PairState S11{1, 1}, S10{1, 0}, S01{0, 1}, S00{0, 0};

struct Model {
  TransitionMatrix p;
  StationaryDist pi;
};

Model shipped(int i) {
  TransitionMatrix p = i == 0 ? build_ind(0.7, 0.7) : i == 1 ? build_max(0.9, 0.7, 0.05) : build_min(0.7, 0.7, 0.05);
  return {p, stationary(p)};
}

double path_prob(const Model& m, const std::vector<std::uint16_t>& z) {
  double pr = m.pi[z[0]];
  for (std::size_t i = 1; i < z.size(); ++i) pr *= m.p(z[i - 1], z[i]);
  return pr;
}

double binom_pmf(int v, int u, double q) {
  return std::exp(std::lgamma(v + 1.0) - std::lgamma(u + 1.0) - std::lgamma(v - u + 1.0)) * std::pow(q, u) *
         std::pow(1 - q, v - u);
}

}  // namespace

// Frozen values: hand-derived laws for the independent model at n = 3.

TEST(OracleFrozen, Coding) {
  EXPECT_EQ(sequence_count(2, 3), 64u);
  EXPECT_EQ(sequence_count(2, 9), 262144u);
  EXPECT_EQ(decode_sequence(6, 2, 2), (std::vector<std::uint16_t>{1, 2}));
  std::vector<std::uint16_t> z{3, 0, 2};
  EXPECT_EQ(encode_sequence(z, 2), 50u);
  EXPECT_EQ(decode_sequence(50, 2, 3), z);
}

TEST(OracleFrozen, IndN3SaturatedLaw) {
  auto m = shipped(0);
  auto law = enumerate_conditional(m.p, m.pi, TripletPattern::uniform(S11), 3, 1, 1);
  ASSERT_EQ(law.codes.size(), 1u);
  EXPECT_EQ(law.codes[0], 63u);  // (1,1)(1,1)(1,1)
  EXPECT_NEAR(law.normalization, 0.117649, 1e-15);
  EXPECT_NEAR(law.probs[0], 1.0, 1e-15);
}

TEST(OracleFrozen, IndN3UnsaturatedLaw) {
  auto m = shipped(0);
  auto law = enumerate_conditional(m.p, m.pi, TripletPattern::uniform(S11), 3, 0, 1);
  ASSERT_EQ(law.codes, (std::vector<std::uint64_t>{51, 55, 59}));
  EXPECT_NEAR(law.normalization, 0.122451, 1e-15);
  EXPECT_NEAR(law.probs[0], 0.09 / 0.51, 1e-15);
  EXPECT_NEAR(law.probs[1], 0.21 / 0.51, 1e-15);
  EXPECT_NEAR(law.probs[2], 0.21 / 0.51, 1e-15);
}

TEST(OracleFrozen, A3ResidualsAndCaseCounts) {
  auto ind = shipped(0);
  auto r = verify_A3(ind.p, ind.pi, TripletPattern::uniform(S11), 6);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.cases, 3u);  // (u,v) in {(0,1),(0,2),(1,2)}
  EXPECT_LE(r.max_residual, 1e-10);
  EXPECT_EQ(r.tolerance, 1e-10);
}

TEST(Oracle, LawNormalizesAndMatchesPathProducts) {
  for (int i = 0; i < 3; ++i) {
    auto m = shipped(i);
    auto t = TripletPattern::uniform(S11);
    const double q = q_of(m.p, t);
    for (int v = 0; v <= 2; ++v) {
      // P(V = v) by summing the conditional normalizations over u.
      double pv = 0;
      std::vector<ExactLaw> laws;
      for (int u = 0; u <= v; ++u) {
        laws.push_back(enumerate_conditional(m.p, m.pi, t, 6, u, v));
        pv += laws.back().normalization;
      }
      for (int u = 0; u <= v; ++u) {
        const auto& law = laws[static_cast<std::size_t>(u)];
        EXPECT_NEAR(std::accumulate(law.probs.begin(), law.probs.end(), 0.0), 1.0, 1e-12);
        // P(U = u, V = v) = P(V = v) Bin(v, q)(u)
        EXPECT_NEAR(law.normalization, pv * binom_pmf(v, u, q), 1e-14);
        for (std::size_t k = 0; k < law.codes.size(); k += 7) {
          auto z = law.sequence(k);
          EXPECT_NEAR(law.probs[k], path_prob(m, z) / law.normalization, 1e-13);
          auto c = count_uv(z, 2, t);
          EXPECT_EQ(c.u, u);
          EXPECT_EQ(c.v, v);
        }
      }
    }
  }
}

TEST(Oracle, ZeroMatchedLaw) {
  auto m = shipped(1);
  auto t = TripletPattern::uniform(S10);
  auto law = enumerate_conditional(m.p, m.pi, t, 3, 0, 0);
  for (std::size_t k = 0; k < law.codes.size(); ++k) {
    auto z = law.sequence(k);
    EXPECT_FALSE(z[0] == 2 && z[2] == 2);
  }
  EXPECT_THROW(enumerate_conditional(m.p, m.pi, t, 3, 1, 0), EmptyCondition);
}

TEST(Oracle, CapAndExactLimits) {
  auto m = shipped(0);
  OracleOptions opt;
  opt.max_sequences = 1000;
  EXPECT_THROW(verify_A3(m.p, m.pi, TripletPattern::uniform(S11), 6, opt), CapExceeded);
  OracleOptions ex;
  ex.exact = true;
  EXPECT_THROW(verify_A3(m.p, m.pi, TripletPattern::uniform(S11), 9, ex), Unsupported);
}

TEST(Oracle, A3ShippedModels) {
  for (int i = 0; i < 3; ++i) {
    auto m = shipped(i);
    for (int n : {6, 9}) {
      auto r = verify_A3(m.p, m.pi, TripletPattern::uniform(S11), n);
      EXPECT_TRUE(r.passed) << m.p.label() << " n=" << n << " " << r.max_residual;
      EXPECT_LE(r.max_residual, 1e-10);
    }
  }
}

TEST(Oracle, ExactModeAgrees) {
  auto m = shipped(2);
  OracleOptions ex;
  ex.exact = true;
  auto r = verify_A3(m.p, m.pi, TripletPattern{S10, S01, S11}, 6, ex);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_residual, 1e-15);
}

TEST(Oracle, WorkerCountDoesNotChangeResults) {
  auto m = shipped(1);
  OracleOptions one, four;
  four.workers = 4;
  auto a = verify_A3(m.p, m.pi, TripletPattern::uniform(S11), 9, one);
  auto b = verify_A3(m.p, m.pi, TripletPattern::uniform(S11), 9, four);
  EXPECT_EQ(a.max_residual, b.max_residual);
  EXPECT_EQ(a.cases, b.cases);
}

TEST(Oracle, UvIndependence) {
  for (int i = 0; i < 3; ++i) {
    auto m = shipped(i);
    auto r = verify_uv_conditional_independence(m.p, m.pi, TripletPattern::uniform(S11), 6);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.max_residual, 1e-12);
  }
}

TEST(Oracle, MutationsAreCaught) {
  auto m = shipped(0);
  auto t = TripletPattern::uniform(S11);
  OracleOptions biased, shifted, swapped;
  biased.mutation = Mutation::biased_pick;
  shifted.mutation = Mutation::shifted_counter;
  swapped.mutation = Mutation::swapped_weights;

  auto a = verify_A3(m.p, m.pi, t, 9, biased);
  EXPECT_FALSE(a.passed);
  EXPECT_GT(a.max_residual, 1e-6);

  auto u = verify_uv_conditional_independence(m.p, m.pi, t, 9, shifted);
  EXPECT_FALSE(u.passed);
  EXPECT_GT(u.max_residual, 1e-6);

  auto c = verify_combined_A3(m.p, m.pi, TripletPattern::uniform(S10), TripletPattern::uniform(S01), 9,
                              WeightMode::equal_q, swapped);
  EXPECT_FALSE(c.passed);
  EXPECT_GT(c.max_residual, 1e-6);
}

TEST(Oracle, Propositions) {
  for (double p : {0.3, 0.5, 0.7})
    for (int m = 1; m <= 8; ++m) {
      auto r = verify_bernoulli_proposition(m, p);
      EXPECT_TRUE(r.passed);
      EXPECT_LE(r.max_residual, 1e-14);
    }
  auto half = verify_binomial_identity(1, 1, 0.5);
  EXPECT_TRUE(half.passed);
  EXPECT_LE(half.max_residual, 1e-15);
  EXPECT_TRUE(verify_binomial_identity(3, 2, 1.0).passed);
  for (double q : {0.2, 0.5, 0.8})
    for (int v1 = 0; v1 <= 12; ++v1)
      for (int v2 = 0; v1 + v2 <= 12; ++v2) EXPECT_LE(verify_binomial_identity(v1, v2, q).max_residual, 1e-13);
}

TEST(Oracle, CombinedA3) {
  auto m = shipped(0);
  auto r = verify_combined_A3(m.p, m.pi, TripletPattern::uniform(S10), TripletPattern::uniform(S01), 9,
                              WeightMode::equal_q);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_residual, 1e-10);

  auto big = shipped(1);
  EXPECT_THROW(verify_combined_A3(big.p, big.pi, TripletPattern::uniform(S11), TripletPattern::uniform(S00), 6,
                                  WeightMode::equal_q),
               UnequalQ);
}

TEST(Oracle, ExpectedGainMatchesEnumeration) {
  auto m = shipped(1);
  auto r = verify_expected_gain(m.p, m.pi, TripletPattern::uniform(S11), 9, ScoringScheme::lcs(2));
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.max_residual, 0.0);
}

TEST(Rationalize, SimpleFractions) {
  EXPECT_EQ(rationalize(0.75), (std::pair<std::int64_t, std::int64_t>{3, 4}));
  EXPECT_EQ(rationalize(1.0 / 3), (std::pair<std::int64_t, std::int64_t>{1, 3}));
  EXPECT_EQ(rationalize(0.05), (std::pair<std::int64_t, std::int64_t>{1, 20}));
}
