#pragma once

// Pairwise Markov chains Z_i = (X_i, Y_i) on A x A: transition-matrix
// constructors, lumpability, stationary law, sampling and mixing bounds.
//
// Pair states are encoded by the flat index x*k + y. For k = 2 the display
// order used in tables and in the literature is (1,1),(1,0),(0,1),(0,0),
// i.e. descending flat index; see `display_order`.

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmc/errors.hpp"

namespace pmc {

using Letter = std::uint8_t;

struct PairState {
  int x = 0;
  int y = 0;

  int index(int k) const { return x * k + y; }
  static PairState from_index(int index, int k) { return {index / k, index % k}; }
  auto operator<=>(const PairState&) const = default;
};

/// Row-stochastic matrix over the k*k pair states.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  /// `entries` is row-major over flat indices, (k*k)^2 values. Validates
  /// nonnegativity and row sums within 1e-12.
  TransitionMatrix(int alphabet, std::vector<double> entries, std::string label = {});

  int alphabet() const { return k_; }
  int states() const { return k_ * k_; }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  double operator()(int from, int to) const { return p_[static_cast<std::size_t>(from) * states() + to]; }
  double operator()(PairState from, PairState to) const { return (*this)(from.index(k_), to.index(k_)); }
  std::span<const double> row(int from) const {
    return {p_.data() + static_cast<std::size_t>(from) * states(), static_cast<std::size_t>(states())};
  }
  const std::vector<double>& entries() const { return p_; }

  /// Entries of P^m, row-major.
  std::vector<double> power(unsigned m) const;

 private:
  int k_ = 0;
  std::vector<double> p_;
  std::string label_;
};

struct StationaryDist {
  std::vector<double> probs;

  double operator[](int state) const { return probs[static_cast<std::size_t>(state)]; }
  /// max_j |(pi P)_j - pi_j|
  double residual(const TransitionMatrix& p) const;
};

struct ChainSample {
  int alphabet = 0;
  std::vector<std::uint16_t> states;  // flat pair indices
  std::uint64_t seed = 0;
  std::string label;

  std::size_t size() const { return states.size(); }
  PairState at(std::size_t i) const { return PairState::from_index(states[i], alphabet); }
  std::vector<Letter> xs() const;
  std::vector<Letter> ys() const;
};

/// Parameters of the most general k = 2 joint matrix whose two coordinate
/// processes are Markov with matrices (p,1-p; q,1-q) and (p',1-p'; q',1-q').
struct MarginalParams {
  double p = 0, q = 0, p_prime = 0, q_prime = 0;
  double lambda1 = 0, lambda2 = 0, mu1 = 0, mu2 = 0;
};

/// Descending flat-index order; for k = 2: (1,1),(1,0),(0,1),(0,0).
std::vector<int> display_order(int alphabet);
std::string state_name(int index, int alphabet);

TransitionMatrix build_general(const MarginalParams& params);
TransitionMatrix build_ind(double p, double q);
TransitionMatrix build_max(double p, double q, double eps = 0.05);
TransitionMatrix build_min(double p, double q, double eps = 0.05);
/// All entries 1/k^2.
TransitionMatrix build_uniform(int alphabet);

/// Builds a k = 2 matrix from a 4x4 table written in display order.
TransitionMatrix from_display(const std::vector<double>& table, std::string label);

enum class Coordinate { X, Y };
/// Block id per flat state: the value of the chosen coordinate.
std::vector<int> coordinate_partition(int alphabet, Coordinate c);

struct LumpResult {
  bool lumpable = false;
  int blocks = 0;
  std::vector<double> lumped;  // blocks x blocks, row-major; empty on failure
  int bad_state = -1;          // first state whose row-sum into bad_block differs
  int bad_block = -1;
  double deviation = 0.0;
};

/// Checks that for every block A_i and x in A_i the mass sent into each A_j
/// is a constant q_ij (within `tol`) and returns (q_ij).
LumpResult check_lumpable(const TransitionMatrix& p, std::span<const int> partition, double tol = 1e-12);

bool is_irreducible(const TransitionMatrix& p);
StationaryDist stationary(const TransitionMatrix& p);

/// Z_1 ~ pi, Z_{t+1} | Z_t ~ row of P; a pure function of (P, pi, n, seed).
ChainSample sample_chain(const TransitionMatrix& p, const StationaryDist& pi, std::size_t n, std::uint64_t seed);

struct Primitivity {
  unsigned lag = 0;     // smallest m with P^m > 0 entrywise
  double min_entry = 0; // p_o = min entry of P^m
};
/// Throws NotPrimitive if no m <= k^4 works.
Primitivity primitivity_index(const TransitionMatrix& p);

struct MixingBound {
  Primitivity primitivity;
  double contraction = 0;  // 1 - k^2 p_o
  double rho = 0;          // contraction^(1/m)
  double c = 1;            // 1 if m == 1, else 1/contraction
  double t_eps = 0;        // bound on t(eps)
  double t_mix = 0;        // bound on t(1/4)
  bool clamped = false;    // t_eps bound was <= 0 and was clamped to 1
  std::string warning;
};
/// t(eps) <= (ln eps - ln C) / ln rho. Throws DomainError when
/// 1 - k^2 p_o <= 0 (the chain mixes exactly; no geometric bound needed).
MixingBound mixing_time_bound(const TransitionMatrix& p, double eps = 0.25);

}  // namespace pmc
