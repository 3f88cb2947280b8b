#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "pmc/transform.hpp"

using namespace pmc;

namespace {

const PairState S11{1, 1}, S10{1, 0}, S01{0, 1}, S00{0, 0};

ChainSample chain(std::vector<PairState> states) {
  ChainSample z;
  z.alphabet = 2;
  for (auto s : states) z.states.push_back(static_cast<std::uint16_t>(s.index(2)));
  return z;
}

// Mean score change over every eligible substitution, recomputed from scratch.
double brute_gain(const ChainSample& z, const TripletPattern& t, const ScoringScheme& s) {
  auto pos = eligible_positions(z, t);
  double base = score(z, s), sum = 0;
  for (auto j : pos) {
    auto z2 = z;
    z2.states[3 * j + 1] = static_cast<std::uint16_t>(t.d.index(2));
    sum += score(z2, s) - base;
  }
  return sum / static_cast<double>(pos.size());
}

double chi2(const std::map<std::size_t, int>& counts, double expected) {
  double c = 0;
  for (auto [k, n] : counts) c += (n - expected) * (n - expected) / expected;
  return c;
}

}  // namespace

TEST(EligiblePositions, Examples) {
  auto t = TripletPattern::uniform(S11);
  EXPECT_TRUE(eligible_positions(chain({S11, S11, S11, S11, S11, S11}), t).empty());
  TripletPattern ab{S10, S01, S00};
  EXPECT_EQ(eligible_positions(chain({S10, S00, S01, S10, S11, S01}), ab), (std::vector<std::size_t>{1}));
}

TEST(EligiblePositions, ConsistentWithSummarize) {
  auto p = build_ind(0.7, 0.7);
  auto pi = stationary(p);
  auto t = TripletPattern::uniform(S11);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto z = sample_chain(p, pi, 60, seed);
    auto s = summarize(z, t);
    std::vector<std::size_t> expect;
    for (std::size_t k = 0; k < s.positions.size(); ++k)
      if (!s.b_vec[k]) expect.push_back(s.positions[k]);
    ASSERT_EQ(eligible_positions(z, t), expect);
  }
}

TEST(ApplySingle, SingleEligibleAndCounterStep) {
  auto t = TripletPattern::uniform(S11);
  auto z = chain({S11, S00, S11, S11, S11, S11});
  Philox rng(1);
  auto out = apply_single(z, t, rng);
  EXPECT_EQ(out.changed_index, 1u);
  EXPECT_EQ(out.old_pair, S00);
  auto before = summarize(z, t), after = summarize(out.modified, t);
  EXPECT_EQ(after.u, before.u + 1);
  EXPECT_EQ(after.v, before.v);
  EXPECT_THROW(apply_single(out.modified, t, rng), NoEligibleTriplet);
}

TEST(ApplySingle, UniformPick) {
  auto t = TripletPattern::uniform(S11);
  auto z = chain({S11, S00, S11, S11, S10, S11, S11, S11, S11, S11, S01, S11});
  Philox rng(2);
  std::map<std::size_t, int> counts;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) ++counts[apply_single(z, t, rng).changed_index];
  ASSERT_EQ(counts.size(), 3u);
  // 2 degrees of freedom; 13.8 is the 0.999 quantile.
  EXPECT_LT(chi2(counts, trials / 3.0), 13.8);
}

TEST(ExpectedGain, RangeZeroAndBruteForce) {
  auto t = TripletPattern::uniform(S11);
  auto s = ScoringScheme::lcs(2);
  // X = Y everywhere, and stays so after setting a middle to (1,1).
  EXPECT_EQ(expected_gain(chain({S11, S00, S11}), t, s), 0.0);
  EXPECT_THROW(expected_gain(chain({S11, S11, S11}), t, s), NoEligibleTriplet);

  auto p = build_max(0.9, 0.7, 0.05);
  auto pi = stationary(p);
  ScoringScheme general(2, {1.0, 0.4, 0.1, 2.0}, 0.2);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto z = sample_chain(p, pi, 3 + 3 * (seed % 4), seed);
    if (eligible_positions(z, t).empty()) continue;
    double g = expected_gain(z, t, s);
    ASSERT_GE(g, -2);
    ASSERT_LE(g, 2);
    ASSERT_NEAR(g, brute_gain(z, t, s), 1e-12);
    ASSERT_NEAR(expected_gain(z, t, general), brute_gain(z, t, general), 1e-12);
  }
}

TEST(GainEvaluator, PrefixesShareOneObject) {
  auto p = build_ind(0.7, 0.7);
  auto z = sample_chain(p, stationary(p), 300, 5);
  auto t = TripletPattern::uniform(S11);
  GainEvaluator ev(z, ScoringScheme::lcs(2));
  for (std::size_t m : {10u, 50u, 100u}) {
    ChainSample prefix = z;
    prefix.states.resize(3 * m);
    auto subs = eligible_substitutions(z, t, m);
    if (subs.empty()) continue;
    auto g = ev.gains(3 * m, subs);
    EXPECT_EQ(g.count, subs.size());
    EXPECT_DOUBLE_EQ(g.base, score(prefix, ScoringScheme::lcs(2)));
    EXPECT_NEAR(g.mean(), expected_gain(prefix, t, ScoringScheme::lcs(2)), 1e-12);
  }
}

TEST(EqualQWeights, Examples) {
  auto w = equal_q_weights(1, 2, 4, 5);
  EXPECT_DOUBLE_EQ(w.r1, 0.5);
  EXPECT_DOUBLE_EQ(w.r2, 0.5);
  auto b = equal_q_weights(3, 0, 3, 2);
  EXPECT_EQ(b.r1, 0.0);
  EXPECT_EQ(b.r2, 1.0);
  auto c = equal_q_weights(0, 1, 3, 2);
  EXPECT_DOUBLE_EQ(c.r1, 0.75);
  EXPECT_THROW(equal_q_weights(2, 1, 2, 1), DomainError);
}

TEST(GeneralQWeights, RecoversEqualQ) {
  for (int v1 = 0; v1 <= 6; ++v1)
    for (int v2 = 0; v2 <= 6; ++v2)
      for (int u = 0; u < v1 + v2; ++u) {
        auto tab = general_q_weights(u, v1, v2, 0.4, 0.4);
        for (int l = tab.l1; l <= tab.l2; ++l) {
          if (l > v1 || u - l > v2 || (l == v1 && u - l == v2)) continue;
          auto eq = equal_q_weights(l, u - l, v1, v2);
          ASSERT_NEAR(tab.r1[static_cast<std::size_t>(l - tab.l1)], eq.r1, 1e-12)
              << u << " " << v1 << " " << v2 << " " << l;
        }
      }
}

TEST(GeneralQWeights, OneSided) {
  auto tab = general_q_weights(2, 5, 0, 0.3, 0.6);
  for (double r : tab.r1) EXPECT_DOUBLE_EQ(r, 1.0);
}

TEST(GeneralQWeights, UnequalQSolvesOrReportsInfeasible) {
  int solved = 0, infeasible = 0;
  for (int v1 = 0; v1 <= 4; ++v1)
    for (int v2 = 0; v2 <= 4; ++v2)
      for (int u = 0; u < v1 + v2; ++u) {
        try {
          auto tab = general_q_weights(u, v1, v2, 0.3, 0.6);
          EXPECT_LE(tab.closing_residual, 1e-9);
          for (double r : tab.r1) {
            EXPECT_GE(r, 0.0);
            EXPECT_LE(r, 1.0);
          }
          ++solved;
        } catch (const Infeasible&) {
          ++infeasible;
        }
      }
  EXPECT_GT(solved, 0);
  EXPECT_EQ(solved + infeasible, 100);
}

TEST(ConditionalSplit, SumsToOne) {
  auto p = conditional_split(4, 5, 3, 0.3, 0.6);
  double s = 0;
  for (double v : p) s += v;
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_EQ(p.size(), 4u);  // l = 1..4
}

TEST(ApplyCombined, EmptySideTwo) {
  TripletPattern t1 = TripletPattern::uniform(S10), t2 = TripletPattern::uniform(S01);
  auto z = chain({S10, S00, S10, S01, S01, S01});
  Philox rng(3);
  for (int i = 0; i < 100; ++i) {
    auto out = apply_combined(z, t1, t2, equal_q_rule(), rng);
    EXPECT_EQ(out.side, 1);
    EXPECT_EQ(out.changed_index, 1u);
  }
}

TEST(ApplyCombined, EqualDeficitsSplitEvenly) {
  TripletPattern t1 = TripletPattern::uniform(S10), t2 = TripletPattern::uniform(S01);
  auto z = chain({S10, S00, S10, S01, S11, S01});
  Philox rng(4);
  std::map<std::size_t, int> sides;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) ++sides[static_cast<std::size_t>(apply_combined(z, t1, t2, equal_q_rule(), rng).side)];
  EXPECT_LT(chi2(sides, trials / 2.0), 10.8);  // 1 dof, 0.999 quantile
  EXPECT_THROW(apply_combined(z, t1, t1, equal_q_rule(), rng), Error);
}
