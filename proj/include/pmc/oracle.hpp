#pragma once

// Exhaustive enumeration of (A x A)^n for small n: exact conditional laws
// given (U, V) and exact transport checks for the random transformation.
//
// Sequences are coded in base k^2 with the first position most
// significant, so code order is lexicographic flat-index order.

#include <cstdint>
#include <string>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/markov_model.hpp"
#include "pmc/transform.hpp"

namespace pmc {

/// Deliberate defects used to show that each check can fail.
enum class Mutation {
  none,
  biased_pick,      // R puts double weight on the first eligible triplet
  shifted_counter,  // U reads the middle of the next triplet
  swapped_weights,  // combined kernel uses (r2, r1)
};

struct OracleOptions {
  std::uint64_t max_sequences = 262144;  // 4^9
  unsigned workers = 1;
  bool exact = false;  // rational arithmetic; k = 2 and n <= 6 only
  Mutation mutation = Mutation::none;
};

struct ExactLaw {
  int alphabet = 0;
  int n = 0;
  std::vector<std::uint64_t> codes;  // ascending
  std::vector<double> probs;
  double normalization = 0;  // P(U = u, V = v)

  std::vector<std::uint16_t> sequence(std::size_t i) const;
};

std::uint64_t sequence_count(int alphabet, int n);
std::vector<std::uint16_t> decode_sequence(std::uint64_t code, int alphabet, int n);
std::uint64_t encode_sequence(std::span<const std::uint16_t> states, int alphabet);

/// P(Z = z | U = u, V = v) over all z of positive probability. Throws
/// CapExceeded or EmptyCondition.
ExactLaw enumerate_conditional(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& pattern,
                               int n, int u, int v, const OracleOptions& opt = {});

struct CheckReport {
  std::string check;
  std::string model;
  int n = 0;
  double max_residual = 0;  // TV distance or absolute residual
  double tolerance = 0;
  std::size_t cases = 0;    // (u,v) pairs or identities examined
  bool passed = true;
  std::string worst_case;
  std::string note;
};

CheckReport verify_A3(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& pattern, int n,
                      const OracleOptions& opt = {});

CheckReport verify_uv_conditional_independence(const TransitionMatrix& p, const StationaryDist& pi,
                                               const TripletPattern& pattern, int n, const OracleOptions& opt = {});

CheckReport verify_bernoulli_proposition(int m, double p, const OracleOptions& opt = {});

CheckReport verify_binomial_identity(int v1, int v2, double q);

enum class WeightMode { automatic, equal_q, general_q };

/// Combined-kernel transport over all feasible (u, v1, v2). With
/// `automatic`, equal-q weights are used when q1 = q2 (1e-12) and the
/// general solver otherwise; `equal_q` with q1 != q2 throws UnequalQ.
CheckReport verify_combined_A3(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& p1,
                               const TripletPattern& p2, int n, WeightMode mode = WeightMode::automatic,
                               const OracleOptions& opt = {});

/// Enumerated E[L(R(z)) - L(z) | z] against transform::expected_gain on
/// every positive-probability z with an eligible triplet.
CheckReport verify_expected_gain(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& pattern,
                                 int n, const ScoringScheme& scheme, const OracleOptions& opt = {});

/// Best rational approximation with denominator <= max_den, as (num, den).
std::pair<std::int64_t, std::int64_t> rationalize(double x, std::int64_t max_den = 1000000);

}  // namespace pmc
