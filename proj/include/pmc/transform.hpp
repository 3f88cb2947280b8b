#pragma once

// The random transformation R: pick a matched (A,.,B) triplet whose middle
// is not D uniformly at random and set its middle to D. The combined
// version first picks one of two patterns with probabilities r_1, r_2.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/rng.hpp"

namespace pmc {

/// Triplet indices j (0-based) with endpoints (A,B) and middle != D.
/// The middle sits at position 3j + 1.
std::vector<std::size_t> eligible_positions(std::span<const std::uint16_t> states, int alphabet,
                                            const TripletPattern& pattern);
std::vector<std::size_t> eligible_positions(const ChainSample& z, const TripletPattern& pattern);

struct TransformOutcome {
  ChainSample modified;
  std::size_t changed_index = 0;  // 0-based position of the new D
  PairState old_pair;
  int side = 1;  // pattern used; always 1 for apply_single
};

/// Throws NoEligibleTriplet when u(z) = v(z).
TransformOutcome apply_single(const ChainSample& z, const TripletPattern& pattern, Philox& rng);

struct CombinedWeights {
  double r1 = 0;
  double r2 = 0;
};

/// r_i = (v_i - u_i) / ((v_1 - u_1) + (v_2 - u_2)). DomainError if both
/// sides are saturated or u_i > v_i.
CombinedWeights equal_q_weights(int u1, int u2, int v1, int v2);

/// r_1(l, u - l) for l = l1..l2 at a fixed (u, v1, v2), solving the
/// transport equations forward from the lower boundary. r_2 = 1 - r_1.
struct GeneralWeightTable {
  int u = 0, v1 = 0, v2 = 0;
  int l1 = 0, l2 = 0;
  std::vector<double> r1;          // index l - l1
  std::vector<double> p_now;       // P(U_1 = l | U = u), index l - l1
  double closing_residual = 0;     // mismatch in the upper boundary equation
};

/// P(U_1 = l | U_1 + U_2 = u) for independent Bin(v1,q1), Bin(v2,q2),
/// indexed l - max(0, u - v2). Log-space.
std::vector<double> conditional_split(int u, int v1, int v2, double q1, double q2);

/// Throws Infeasible when a solved weight leaves [0,1] or the closing
/// equation fails by more than 1e-9.
GeneralWeightTable general_q_weights(int u, int v1, int v2, double q1, double q2);

using WeightRule = std::function<CombinedWeights(int u1, int u2, int v1, int v2)>;

WeightRule equal_q_rule();
/// Weights from general_q_weights at (u1 + u2, v1, v2), read at l = u1.
WeightRule general_q_rule(double q1, double q2);

/// Requires (A1,B1) != (A2,B2). Throws NoEligibleTriplet if neither side
/// has an eligible triplet.
TransformOutcome apply_combined(const ChainSample& z, const TripletPattern& p1, const TripletPattern& p2,
                                const WeightRule& weights, Philox& rng);

struct Substitution {
  std::size_t pos = 0;  // 0-based
  PairState pair;
  auto operator<=>(const Substitution&) const = default;
};

struct GainSum {
  std::size_t count = 0;
  double base = 0;  // score of the prefix
  double sum = 0;   // sum of score changes
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

/// Scores prefixes of one chain with single-position substitutions. With
/// the LCS scheme it keeps bit-parallel checkpoints of the whole chain, so
/// every prefix length is served by the same object.
class GainEvaluator {
 public:
  GainEvaluator(const ChainSample& z, ScoringScheme scheme);

  std::size_t size() const { return z_.size(); }
  double score(std::size_t prefix) const;
  /// `subs` must be sorted by position and lie inside the prefix.
  GainSum gains(std::size_t prefix, std::span<const Substitution> subs) const;

 private:
  ChainSample z_;
  ScoringScheme scheme_;
  std::vector<Letter> x_, y_;
  std::unique_ptr<LcsCheckpoints> lcs_;
};

/// Substitutions that R can make on the first `triplets` triplets.
std::vector<Substitution> eligible_substitutions(const ChainSample& z, const TripletPattern& pattern,
                                                 std::size_t triplets);

/// E[L(R(z)) - L(z) | z] = mean over eligible j of the score change.
/// Throws NoEligibleTriplet on an empty eligible set.
double expected_gain(const ChainSample& z, const TripletPattern& pattern, const ScoringScheme& scheme);

}  // namespace pmc
