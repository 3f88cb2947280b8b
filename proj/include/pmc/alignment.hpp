#pragma once

// Global alignment scores L(X,Y) for a pairwise scoring table S and gap price
// delta, plus the LCS special case with a bit-parallel kernel.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pmc/markov_model.hpp"

namespace pmc {

struct ScoringScheme {
  int alphabet = 2;
  std::vector<double> table;  // alphabet x alphabet, row-major, entries >= 0
  double delta = 0.0;         // price per non-aligned pair, charged as delta*(n-k)

  ScoringScheme() = default;
  ScoringScheme(int alphabet, std::vector<double> table, double delta);

  /// 0/1 identity table, delta = 0.
  static ScoringScheme lcs(int alphabet);

  double operator()(Letter a, Letter b) const { return table[static_cast<std::size_t>(a) * alphabet + b]; }
  bool is_lcs() const;
};

/// max over alignments of sum S(x_rho_i, y_tau_i) + delta (n - k).
/// O(n^2) dynamic programming on two rolling rows.
double score(std::span<const Letter> x, std::span<const Letter> y, const ScoringScheme& scheme);

/// Reference LCS length by the classic O(n^2) recurrence.
std::int64_t lcs(std::span<const Letter> x, std::span<const Letter> y);

/// Bit-parallel LCS (Allison-Dix/Hyyro), O(n^2 / 64) word operations.
/// Letters must be < alphabet <= 256.
std::int64_t lcs_fast(std::span<const Letter> x, std::span<const Letter> y, int alphabet);

/// Largest change of S from altering one coordinate: max |S(u,v) - S(u,w)|.
double delta_max(const ScoringScheme& scheme);

/// Scan state reused across calls with ascending substitution positions.
struct LcsCursor {
  std::size_t prefix = std::numeric_limits<std::size_t>::max();
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> row_state;
  std::vector<std::uint64_t> col_state;
};

/// Bit-parallel LCS of two equal-length sequences with periodic checkpoints
/// of both the row-wise pass (bits over x, one step per letter of y) and
/// the column-wise pass (bits over y, one step per letter of x).
///
/// Both passes only carry from low to high bits, so a checkpoint of the
/// full sequences restricted to its low N bits is also a checkpoint of the
/// length-N prefixes; one object therefore serves every prefix length.
///
/// Substituting position t in both sequences leaves the DP block
/// [0,t) x [0,t) intact. The strip of rows [0,t) over columns >= t is
/// recomputed column-wise from the column checkpoint (y is unchanged
/// there), which yields row t of the DP; rows >= t are then recomputed
/// row-wise. Cost: O((N - t) * N / 64) words plus at most `spacing`
/// steps to reach t from the nearest checkpoint.
class LcsCheckpoints {
 public:
  /// spacing 0 selects ceil(sqrt(n)).
  LcsCheckpoints(std::span<const Letter> x, std::span<const Letter> y, int alphabet, std::size_t spacing = 0);

  std::size_t size() const { return n_; }
  std::size_t spacing() const { return spacing_; }

  /// LCS of x[0,prefix) and y[0,prefix).
  std::int64_t lcs(std::size_t prefix) const;

  /// LCS of the length-`prefix` prefixes after setting x[t] = new_x and
  /// y[t] = new_y. Pass a cursor when calling with ascending t.
  std::int64_t lcs_with_substitution(std::size_t prefix, std::size_t t, Letter new_x, Letter new_y,
                                     LcsCursor* cursor = nullptr) const;

 private:
  void row_state(std::size_t rows, std::size_t prefix, std::vector<std::uint64_t>& out, LcsCursor* cursor) const;
  void col_state(std::size_t cols, std::size_t prefix, std::vector<std::uint64_t>& out, LcsCursor* cursor) const;

  std::size_t n_;
  std::size_t words_;
  int alphabet_;
  std::size_t spacing_;
  std::vector<Letter> x_, y_;
  std::vector<std::uint64_t> mask_x_;  // alphabet x words_, bit j set iff x[j] == a
  std::vector<std::uint64_t> mask_y_;  // alphabet x words_, bit i set iff y[i] == a
  std::vector<std::uint64_t> row_ckpt_;  // state after r*spacing rows
  std::vector<std::uint64_t> col_ckpt_;  // state after c*spacing columns
};

/// Score of z with Z_t replaced by `pair` in both coordinates (t is
/// 0-based). Uses the bit-parallel kernel for the LCS scheme.
double score_with_substitution(const ChainSample& z, std::size_t t, PairState pair, const ScoringScheme& scheme);

/// Score of a whole chain sample.
double score(const ChainSample& z, const ScoringScheme& scheme);

}  // namespace pmc
