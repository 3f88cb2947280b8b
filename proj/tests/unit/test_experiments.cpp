#include <gtest/gtest.h>

#include <cmath>

#include "pmc/experiments.hpp"
#include "pmc/rng.hpp"

using namespace pmc;

namespace {

const PairState S11{1, 1}, S10{1, 0}, S01{0, 1}, S00{0, 0};

EmConfig small_config(std::size_t stop, std::size_t chains = 2) {
  EmConfig c;
  c.model = build_max(0.9, 0.7, 0.05);
  c.patterns = {TripletPattern::uniform(S11)};
  c.grid = {50, stop, 50};
  c.n_chains = chains;
  c.seed = 42;
  return c;
}

}  // namespace

TEST(ModelSpec, ParseAndRoundTrip) {
  auto s = ModelSpec::parse("max:0.9,0.7,0.05");
  EXPECT_EQ(s.kind, "max");
  EXPECT_EQ(s.str(), "max:0.9,0.7,0.05");
  EXPECT_EQ(ModelSpec::parse("min:0.7,0.7").str(), "min:0.7,0.7,0.05");
  EXPECT_EQ(ModelSpec::parse("ind:0.7,0.7").build().label(), "ind:0.7,0.7");
  EXPECT_EQ(ModelSpec::parse("uniform:3").build().alphabet(), 3);
  EXPECT_THROW(ModelSpec::parse("max:0.9"), ConfigError);
  EXPECT_THROW(ModelSpec::parse("nope:1"), ConfigError);
  EXPECT_THROW(ModelSpec::parse("ind:0.7,x"), ConfigError);
}

TEST(Pattern, Forms) {
  EXPECT_EQ(parse_pattern("1,0"), TripletPattern::uniform(S10));
  auto t = parse_pattern("1,0/0,1/1,1");
  EXPECT_EQ(t.a, S10);
  EXPECT_EQ(t.b, S01);
  EXPECT_EQ(t.d, S11);
  EXPECT_EQ(pattern_str(t), "1,0/0,1/1,1");
  EXPECT_THROW(parse_pattern("1"), ConfigError);
  EXPECT_THROW(parse_pattern("1,0/0,1"), ConfigError);
}

TEST(MGrid, Values) {
  EXPECT_EQ((MGrid{100, 300, 100}.values()), (std::vector<std::size_t>{100, 200, 300}));
  EXPECT_EQ((MGrid{5700, 7500, 100}.values()).size(), 19u);
}

TEST(RunEm, DeterministicAcrossWorkers) {
  auto c = small_config(400, 3);
  auto a = run_em(c);
  c.workers = 3;
  auto b = run_em(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].chain_id, b[i].chain_id);
    EXPECT_EQ(a[i].m, b[i].m);
    EXPECT_EQ(a[i].e_m, b[i].e_m);
  }
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_TRUE(a[i - 1].chain_id < a[i].chain_id || (a[i - 1].chain_id == a[i].chain_id && a[i - 1].m < a[i].m));
  for (const auto& r : a) {
    EXPECT_GE(r.e_m, -2);
    EXPECT_LE(r.e_m, 2);
    EXPECT_EQ(r.seed, derive_seed(42, r.chain_id));
  }
}

TEST(RunEm, SmallPrefixMatchesExpectedGain) {
  EmConfig c = small_config(4, 1);
  c.grid = {1, 4, 1};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    c.seed = seed;
    for (const auto& r : run_em(c)) {
      auto z = sample_chain(c.model, stationary(c.model), 12, r.seed);
      z.states.resize(3 * r.m);
      ASSERT_NEAR(r.e_m, expected_gain(z, c.patterns[0], c.scheme), 1e-12);
      ASSERT_EQ(r.j_count, eligible_positions(z, c.patterns[0]).size());
    }
  }
}

TEST(RunEm, RecordsWithoutEligibleTripletsAreSkipped) {
  // The (1,0) -> (0,1) endpoints never match when the middle is forced.
  EmConfig c = small_config(200, 1);
  c.model = build_ind(0.7, 0.7);
  c.patterns = {TripletPattern{S00, S00, S11}};
  auto rec = run_em(c);
  for (const auto& r : rec) EXPECT_GT(r.j_count, 0u);
}

TEST(RunEmCombined, PooledIsWeightedAverage) {
  EmConfig c = small_config(300, 2);
  c.model = build_ind(0.7, 0.7);
  c.patterns = {TripletPattern::uniform(S10), TripletPattern::uniform(S01)};
  auto pooled = run_em_combined(c);
  EmConfig c1 = c, c2 = c;
  c1.patterns = {c.patterns[0]};
  c2.patterns = {c.patterns[1]};
  auto r1 = run_em(c1), r2 = run_em(c2);
  ASSERT_EQ(pooled.size(), r1.size());
  ASSERT_EQ(pooled.size(), r2.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double w1 = static_cast<double>(r1[i].j_count), w2 = static_cast<double>(r2[i].j_count);
    EXPECT_EQ(pooled[i].j_count, r1[i].j_count + r2[i].j_count);
    EXPECT_NEAR(pooled[i].e_m, (w1 * r1[i].e_m + w2 * r2[i].e_m) / (w1 + w2), 1e-12);
  }
}

TEST(RunEmCombined, UnequalQRejected) {
  EmConfig c = small_config(100, 1);
  c.patterns = {TripletPattern::uniform(S11), TripletPattern::uniform(S00)};
  EXPECT_THROW(run_em_combined(c), UnequalQ);
  c.patterns = {TripletPattern::uniform(S11), TripletPattern{S11, S11, S00}};
  EXPECT_THROW(run_em_combined(c), ConfigError);
}

TEST(EstimateEps, ConstantOscillatingAndEmpty) {
  std::vector<EmRecord> flat, osc;
  for (std::size_t m = 100; m <= 2000; m += 100) {
    flat.push_back({0, m, 10, 0.4, 0});
    osc.push_back({0, m, 10, (m / 100) % 2 ? 0.01 : -0.01, 0});
  }
  auto e = estimate_eps_o(flat);
  EXPECT_NEAR(e.eps_o, 0.4, 1e-15);
  EXPECT_EQ(e.sign, 1);
  EXPECT_FALSE(e.inconclusive);
  EXPECT_EQ(e.tail_from_m, 1600u);
  EXPECT_EQ(e.tail_records, 5u);

  auto o = estimate_eps_o(osc);
  EXPECT_LT(o.eps_o, 0.05);
  EXPECT_TRUE(o.inconclusive);
  EXPECT_THROW(estimate_eps_o({}), InsufficientData);
}

TEST(Jackknife, IntervalContainsEstimate) {
  Philox g(5);
  std::vector<double> xs(400);
  for (auto& x : xs) x = g.uniform01() * 6;
  auto j = jackknife_variance(xs);
  EXPECT_NEAR(j.var, 3.0, 0.5);  // 36 / 12
  EXPECT_LE(j.ci_lo, j.var);
  EXPECT_GE(j.ci_hi, j.var);
  EXPECT_GE(j.ci_lo, 0.0);
  auto zero = jackknife_variance(std::vector<double>(50, 1.5));
  EXPECT_EQ(zero.var, 0.0);
}

TEST(VarianceScan, ConstantScoreHasZeroVariance) {
  VarianceConfig c;
  c.model = build_ind(0.7, 0.7);
  c.scheme = ScoringScheme(2, {1, 1, 1, 1}, 0);
  c.n_grid = {30, 60};
  c.replicates = 20;
  for (const auto& r : variance_scan(c)) {
    EXPECT_EQ(r.var, 0.0);
    EXPECT_EQ(r.mean, static_cast<double>(r.n));
  }
}

TEST(VarianceScan, SandwichColumnsAndDeterminism) {
  VarianceConfig c;
  c.model = build_max(0.9, 0.7, 0.05);
  c.n_grid = {90, 180};
  c.replicates = 40;
  c.seed = 9;
  c.eps_o = 0.4;
  auto a = variance_scan(c);
  c.workers = 4;
  auto b = variance_scan(c);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].var, b[i].var);
    EXPECT_GT(a[i].var, 0);
    EXPECT_LE(a[i].a_o_n, a[i].var);
    EXPECT_GE(a[i].c2_n, a[i].var);
    EXPECT_LE(a[i].ci_lo, a[i].var);
  }
  c.eps_o.reset();
  EXPECT_TRUE(std::isnan(variance_scan(c)[0].a_o_n));
}

TEST(Tails, VTailSmallRun) {
  auto rep = tail_check_V(build_ind(0.7, 0.7), TripletPattern::uniform(S11), 300, {0.0, 0.5, 1, 2}, 500, 3);
  ASSERT_EQ(rep.points.size(), 4u);
  EXPECT_TRUE(rep.all_dominated);
  for (const auto& p : rep.points) EXPECT_GE(p.bound, p.empirical);
  EXPECT_GT(rep.points[0].empirical, 0.5);  // K = 0: almost every run deviates
  EXPECT_GE(rep.coverage, 0.9);
}

TEST(Tails, McDiarmidSmallRun) {
  auto rep = mcdiarmid_tail_check(build_max(0.9, 0.7, 0.05), ScoringScheme::lcs(2), 200, 300, 4, {0.0, 5.0, 201.0});
  ASSERT_EQ(rep.points.size(), 3u);
  EXPECT_EQ(rep.points[0].bound, 2.0);
  EXPECT_EQ(rep.points[2].empirical, 0.0);
  EXPECT_TRUE(rep.all_dominated);
}
