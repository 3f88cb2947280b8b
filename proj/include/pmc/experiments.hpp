#pragma once

// Simulation protocols: E(m) curves, variance scaling and empirical tails
// against the analytic concentration bounds. Every task draws from its own
// Philox stream keyed by (master seed, task index), so results do not depend
// on the worker count.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/markov_model.hpp"
#include "pmc/transform.hpp"

namespace pmc {

/// Textual model description, e.g. "max:0.9,0.7,0.05", "ind:0.7,0.7",
/// "min:0.7,0.7", "uniform:2", "general:p,q,p',q',l1,l2,m1,m2".
struct ModelSpec {
  std::string kind;
  std::vector<double> params;

  static ModelSpec parse(const std::string& text);
  std::string str() const;
  TransitionMatrix build() const;
};

/// "x,y" for A = B = D = (x,y), or "ax,ay/bx,by/dx,dy".
TripletPattern parse_pattern(const std::string& text);
std::string pattern_str(const TripletPattern& t);

struct MGrid {
  std::size_t start = 100;
  std::size_t stop = 3000;
  std::size_t step = 100;

  std::vector<std::size_t> values() const;
};

struct EmConfig {
  TransitionMatrix model;
  std::vector<TripletPattern> patterns;  // one, or two for the pooled run
  MGrid grid;
  std::size_t n_chains = 3;
  std::uint64_t seed = 0;
  ScoringScheme scheme = ScoringScheme::lcs(2);
  unsigned workers = 1;
  std::size_t subsample = 0;  // 0 = use every eligible triplet
};

struct EmRecord {
  std::size_t chain_id = 0;
  std::size_t m = 0;
  std::size_t j_count = 0;
  double e_m = 0;
  std::uint64_t seed = 0;  // chain seed
};

/// Records sorted by (chain_id, m); grid points with no eligible triplet
/// are skipped.
std::vector<EmRecord> run_em(const EmConfig& config);

/// Pooled statistic over two patterns. Throws UnequalQ unless q1 = q2.
std::vector<EmRecord> run_em_combined(const EmConfig& config);

struct EpsEstimate {
  double eps_o = 0;
  int sign = 0;  // sign of the tail median of E(m)
  bool inconclusive = false;
  std::size_t tail_from_m = 0;
  std::size_t tail_records = 0;
  double quantile = 0.05;
  double tail_fraction = 0.25;
};

/// Lower quantile of |E(m)| over the last `tail_fraction` of the m grid.
/// Throws InsufficientData on an empty tail.
EpsEstimate estimate_eps_o(const std::vector<EmRecord>& records, double tail_fraction = 0.25,
                           double quantile = 0.05);

struct VarianceRecord {
  std::size_t n = 0;
  std::size_t replicates = 0;
  double mean = 0;
  double var = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  double a_o_n = std::numeric_limits<double>::quiet_NaN();
  double c2_n = std::numeric_limits<double>::quiet_NaN();
};

struct VarianceConfig {
  TransitionMatrix model;
  ScoringScheme scheme = ScoringScheme::lcs(2);
  std::vector<std::size_t> n_grid;
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::optional<double> eps_o;  // enables the a_o n column
  TripletPattern pattern = TripletPattern::uniform({1, 1});
};

std::vector<VarianceRecord> variance_scan(const VarianceConfig& config);

/// Sample variance with a jackknife 95% interval.
struct JackknifeVariance {
  double mean = 0, var = 0, ci_lo = 0, ci_hi = 0;
};
JackknifeVariance jackknife_variance(const std::vector<double>& xs);

struct TailPoint {
  double x = 0;          // K for V, s for L
  double empirical = 0;  // P(|V - EV| > K sqrt n) or P(|L - mean| >= s)
  double bound = 1;
  bool applicable = true;
  bool dominated = true;  // bound >= empirical
};

struct VTailReport {
  std::size_t n = 0;
  std::size_t trials = 0;
  double expected_v = 0;
  double lambda = 0;
  int r = 0;
  double K_b0 = 0;         // choose_K(b_o)
  double b_o = 0.9;
  double coverage = 0;     // empirical P(V in [EV - K_b0 sqrt n, EV + K_b0 sqrt n])
  std::vector<TailPoint> points;
  bool all_dominated = true;
  std::size_t applicable_points = 0;
};

/// Empirical two-sided tail of V against twice the one-sided Hoeffding
/// bound for each K. Points below the side condition are reported with
/// applicable = false and the trivial bound 1.
VTailReport tail_check_V(const TransitionMatrix& model, const TripletPattern& pattern, std::size_t n,
                         const std::vector<double>& k_grid, std::size_t trials, std::uint64_t seed,
                         unsigned workers = 1, double b_o = 0.9);

struct LTailReport {
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean = 0;
  double sd = 0;
  double F = 0;
  std::vector<TailPoint> points;
  bool all_dominated = true;
};

/// Empirical tail of |L - mean L| against 2 exp(-s^2 / (n F)). An empty
/// s grid selects multiples of the sample sd plus n Delta + 1.
LTailReport mcdiarmid_tail_check(const TransitionMatrix& model, const ScoringScheme& scheme, std::size_t n,
                                 std::size_t trials, std::uint64_t seed, std::vector<double> s_grid = {},
                                 unsigned workers = 1);

}  // namespace pmc
