#pragma once

// Triplet counters over a pair chain and the constants of the variance
// lower bound (q, alpha, b(q), K, c, a_o) and of the McDiarmid-type upper
// bound (t_mix, F, C(r), D(r)).
//
// Triplets are the blocks (z_{3i}, z_{3i+1}, z_{3i+2}), i = 0..floor(n/3)-1,
// in 0-based positions.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/markov_model.hpp"

namespace pmc {

struct TripletPattern {
  PairState a, b, d;

  /// A = B = D = s.
  static TripletPattern uniform(PairState s) { return {s, s, s}; }
  bool operator==(const TripletPattern&) const = default;
};

struct CounterSummary {
  std::vector<std::uint8_t> n_vec;     // per triplet: endpoints are (A, B)
  std::int64_t v = 0;                  // sum of n_vec
  std::vector<std::uint8_t> b_vec;     // per matched triplet: middle is D
  std::int64_t u = 0;                  // sum of b_vec
  std::vector<std::size_t> positions;  // triplet indices i with n_vec[i] = 1
};

/// Counters of a sequence of flat pair states.
CounterSummary summarize(std::span<const std::uint16_t> states, int alphabet, const TripletPattern& pattern);
CounterSummary summarize(const ChainSample& z, const TripletPattern& pattern);

/// (u, v) only; no allocation. Used by the enumeration oracle.
struct CountPair {
  int u = 0;
  int v = 0;
};
CountPair count_uv(std::span<const std::uint16_t> states, int alphabet, const TripletPattern& pattern);

/// P(Z_2 = D | Z_1 = A, Z_3 = B). Throws PatternInfeasible if P^2(A,B) = 0.
double q_of(const TransitionMatrix& p, const TripletPattern& pattern);

struct AlphaValue {
  double alpha = 0;    // P(Z_1 = A, Z_3 = B) / 3
  double alpha_n = 0;  // E V / n
};
AlphaValue alpha_of(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& pattern,
                    std::int64_t n);

/// sqrt(2 pi q(1-q)) exp(beta^2 / (2 q(1-q))). Returns +inf on overflow.
double b_of_q(double q, double beta = 1.0);

struct LocalCltResult {
  bool holds = true;
  std::int64_t worst_i = -1;  // window point with the smallest pmf
  double worst_pmf = 0;
  double threshold = 0;       // 1 / (b sqrt(m))
  double ratio = 0;           // worst_pmf / threshold; >= 1 when the bound holds
};

/// Binomial(m, p) pmf on every integer of [mp - beta sqrt m, mp + beta sqrt m]
/// against 1 / (b sqrt m). Relative tolerance 1e-12.
LocalCltResult local_clt_check(std::int64_t m, double p, double beta, double b);

struct LocalCltSweep {
  std::int64_t m_lo = 0, m_hi = 0;
  std::int64_t failures = 0;
  std::int64_t last_failure = 0;  // 0 if none
  std::int64_t m_o = 0;           // the bound holds for every m in [m_o, m_hi]
  double worst_ratio = std::numeric_limits<double>::infinity();
  std::int64_t worst_m = 0;
  /// Smallest factor on b that makes every m in the range pass.
  double needed_multiplier = 1;
};
LocalCltSweep local_clt_sweep(double p, double beta, double b, std::int64_t m_lo, std::int64_t m_hi);

/// Number of integers in [vq - sqrt v, vq + sqrt v] intersected with {0..v}.
std::int64_t u_window_count(std::int64_t v, double q);

/// exp[-lambda^2 (m eps - 2 r fnorm / lambda)^2 / (2 m fnorm^2 r^2)].
/// Throws PreconditionViolated unless m >= 2 r fnorm / (lambda eps).
double hoeffding_mc_bound(double m, double eps, double lambda, double r, double fnorm = 1.0);

/// Doeblin constants of the triplet chain xi_i = (z_{3i}, z_{3i+1}, z_{3i+2})
/// on its reachable state space X: smallest r with P_xi^r > 0 on X x X and
/// lambda = min P_xi^r * |X|.
struct XiDoeblin {
  int r = 0;
  double lambda = 0;
  double min_entry = 0;
  std::size_t states = 0;
  bool valid = true;  // lambda <= 1
};
XiDoeblin xi_doeblin(const TransitionMatrix& p, const StationaryDist& pi, int max_r = 64);

/// Smallest K with exp(-3/8 (lambda/r)^2 K^2) < (1 - b_o)/2, plus 1e-9.
double choose_K(double lambda, double r, double b_o);

/// Fields not produced by a given report are NaN.
struct BoundReport {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  std::int64_t n = 0;
  double r = 2;

  // lower bound
  double q = nan, alpha = nan, alpha_n = nan;
  double b_q = nan, b = nan, c = nan, c_o = nan;
  double K = nan, b_o = nan, phi_n = nan;
  int r_doeblin = 0;
  std::size_t xi_states = 0;
  double lambda = nan;
  bool lambda_valid = true;
  double eps_o = nan;
  double a_o = nan;
  double moment_lower = nan;  // c_o (eps_o sqrt(2 alpha)/16)^r n^(r/2)

  // upper bound
  double delta = nan;
  unsigned mix_lag = 0;
  double p_o = nan;
  double t_mix = nan;
  double F = nan;
  double C_r = nan;        // by quadrature
  double C_r_gamma = nan;  // by the incomplete gamma function
  double D_r = nan;
  double moment_upper = nan;  // C(r) n^(r/2)
};

BoundReport lower_bound_report(const TransitionMatrix& p, const TripletPattern& pattern, double eps_o,
                               double r_moment, std::int64_t n, double b_o = 0.9);
BoundReport upper_bound_report(const TransitionMatrix& p, const ScoringScheme& scheme, double r_moment,
                               std::int64_t n);

/// int_{lower}^inf e^{-u} u^{a-1} du by adaptive Simpson after u = lower + s/(1-s).
double upper_gamma_quadrature(double a, double lower, double tol = 1e-10);

/// 2 exp(-s^2 / (n F)); 2 when F = 0 and s = 0, 0 when F = 0 and s > 0.
double mcdiarmid_bound(double s, std::int64_t n, double F);

/// Sufficient symmetry conditions on a k = 2 matrix for q to coincide on the
/// patterns (1,0)^3 and (0,1)^3: the two mixed states are interchangeable.
bool swap_symmetric(const TransitionMatrix& p, double tol = 1e-12);

}  // namespace pmc
