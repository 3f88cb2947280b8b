#include "pmc/alignment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace pmc {

namespace {

using Word = std::uint64_t;
constexpr std::size_t kBits = 64;

std::size_t words_for(std::size_t bits) { return (bits + kBits - 1) / kBits; }

void require_equal_length(std::size_t a, std::size_t b) {
  if (a != b) throw LengthMismatch("sequences have lengths " + std::to_string(a) + " and " + std::to_string(b));
}

// One bit-parallel LCS step: V <- (V + (V & M)) | (V & ~M) on `nw` words.
// If `patch_word` < nw, that word of M is replaced by `patch_value`.
inline void lcs_step(Word* v, const Word* m, std::size_t nw, std::size_t patch_word = SIZE_MAX,
                     Word patch_value = 0) {
  Word carry = 0;
  for (std::size_t w = 0; w < nw; ++w) {
    const Word mw = w == patch_word ? patch_value : m[w];
    const Word vw = v[w];
    const Word u = vw & mw;
    const unsigned __int128 sum = static_cast<unsigned __int128>(vw) + u + carry;
    carry = static_cast<Word>(sum >> 64);
    v[w] = static_cast<Word>(sum) | (vw & ~mw);
  }
}

// Number of zero bits among the low `bits` bits.
std::int64_t zeros(const Word* v, std::size_t bits) {
  std::int64_t ones = 0;
  const std::size_t full = bits / kBits;
  for (std::size_t w = 0; w < full; ++w) ones += std::popcount(v[w]);
  const std::size_t rest = bits % kBits;
  if (rest) ones += std::popcount(v[full] & ((Word{1} << rest) - 1));
  return static_cast<std::int64_t>(bits) - ones;
}

std::vector<Word> build_masks(std::span<const Letter> s, int alphabet, std::size_t words) {
  std::vector<Word> masks(static_cast<std::size_t>(alphabet) * words, 0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] >= alphabet) throw DomainError("letter " + std::to_string(s[j]) + " outside the alphabet");
    masks[s[j] * words + j / kBits] |= Word{1} << (j % kBits);
  }
  return masks;
}

}  // namespace

ScoringScheme::ScoringScheme(int k, std::vector<double> t, double d) : alphabet(k), table(std::move(t)), delta(d) {
  if (alphabet < 1) throw DomainError("alphabet must be positive");
  if (table.size() != static_cast<std::size_t>(alphabet) * alphabet) throw DomainError("scoring table must be k x k");
  for (double v : table) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("scoring table entries must be finite and >= 0");
  }
}

ScoringScheme ScoringScheme::lcs(int k) {
  std::vector<double> t(static_cast<std::size_t>(k) * k, 0.0);
  for (int a = 0; a < k; ++a) t[static_cast<std::size_t>(a) * k + a] = 1.0;
  return ScoringScheme(k, std::move(t), 0.0);
}

bool ScoringScheme::is_lcs() const {
  if (delta != 0.0) return false;
  for (int a = 0; a < alphabet; ++a) {
    for (int b = 0; b < alphabet; ++b) {
      if ((*this)(static_cast<Letter>(a), static_cast<Letter>(b)) != (a == b ? 1.0 : 0.0)) return false;
    }
  }
  return true;
}

double score(std::span<const Letter> x, std::span<const Letter> y, const ScoringScheme& scheme) {
  require_equal_length(x.size(), y.size());
  const std::size_t n = x.size();
  const double gap = scheme.delta / 2.0;  // each non-aligned pair leaves one letter on each side
  std::vector<double> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = gap * static_cast<double>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = gap * static_cast<double>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = std::max({prev[j - 1] + scheme(x[i - 1], y[j - 1]), prev[j] + gap, cur[j - 1] + gap});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

std::int64_t lcs(std::span<const Letter> x, std::span<const Letter> y) {
  require_equal_length(x.size(), y.size());
  const std::size_t n = x.size();
  std::vector<std::int64_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

std::int64_t lcs_fast(std::span<const Letter> x, std::span<const Letter> y, int alphabet) {
  require_equal_length(x.size(), y.size());
  if (alphabet < 1 || alphabet > 256) throw DomainError("alphabet must be in [1,256]");
  const std::size_t n = x.size();
  const std::size_t nw = words_for(n);
  const std::vector<Word> masks = build_masks(x, alphabet, nw);
  std::vector<Word> v(nw, ~Word{0});
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] >= alphabet) throw DomainError("letter outside the alphabet");
    lcs_step(v.data(), masks.data() + y[i] * nw, nw);
  }
  return zeros(v.data(), n);
}

double delta_max(const ScoringScheme& s) {
  double best = 0;
  for (int u = 0; u < s.alphabet; ++u) {
    for (int v = 0; v < s.alphabet; ++v) {
      for (int w = 0; w < s.alphabet; ++w) {
        best = std::max(best, std::abs(s(static_cast<Letter>(u), static_cast<Letter>(v)) -
                                       s(static_cast<Letter>(u), static_cast<Letter>(w))));
      }
    }
  }
  return best;
}

LcsCheckpoints::LcsCheckpoints(std::span<const Letter> x, std::span<const Letter> y, int alphabet,
                               std::size_t spacing)
    : n_(x.size()), words_(words_for(x.size())), alphabet_(alphabet), x_(x.begin(), x.end()),
      y_(y.begin(), y.end()) {
  require_equal_length(x.size(), y.size());
  if (alphabet < 1 || alphabet > 256) throw DomainError("alphabet must be in [1,256]");
  spacing_ = spacing ? spacing : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(double(n_)))));
  mask_x_ = build_masks(x_, alphabet_, words_);
  mask_y_ = build_masks(y_, alphabet_, words_);

  const std::size_t count = n_ / spacing_ + 1;
  row_ckpt_.assign(count * words_, ~Word{0});
  col_ckpt_.assign(count * words_, ~Word{0});
  std::vector<Word> rv(words_, ~Word{0}), cv(words_, ~Word{0});
  for (std::size_t i = 1; i <= n_; ++i) {
    lcs_step(rv.data(), mask_x_.data() + y_[i - 1] * words_, words_);
    lcs_step(cv.data(), mask_y_.data() + x_[i - 1] * words_, words_);
    if (i % spacing_ == 0) {
      std::copy(rv.begin(), rv.end(), row_ckpt_.begin() + static_cast<std::ptrdiff_t>(i / spacing_ * words_));
      std::copy(cv.begin(), cv.end(), col_ckpt_.begin() + static_cast<std::ptrdiff_t>(i / spacing_ * words_));
    }
  }
}

std::int64_t LcsCheckpoints::lcs(std::size_t prefix) const {
  if (prefix > n_) throw IndexOutOfRange("prefix longer than the sequences");
  std::vector<Word> v;
  row_state(prefix, prefix, v, nullptr);
  return zeros(v.data(), prefix);
}

// State of the row-wise pass after `rows` rows, on the low `prefix` bits.
void LcsCheckpoints::row_state(std::size_t rows, std::size_t prefix, std::vector<Word>& out,
                               LcsCursor* cursor) const {
  const std::size_t nw = words_for(prefix);
  const std::size_t base = rows / spacing_ * spacing_;
  std::size_t from;
  if (cursor && cursor->prefix == prefix && cursor->row_state.size() == nw && cursor->rows <= rows &&
      cursor->rows >= base) {
    from = cursor->rows;
  } else {
    from = base;
    const auto src = row_ckpt_.begin() + static_cast<std::ptrdiff_t>(base / spacing_ * words_);
    if (cursor) {
      cursor->row_state.assign(src, src + static_cast<std::ptrdiff_t>(nw));
    } else {
      out.assign(src, src + static_cast<std::ptrdiff_t>(nw));
    }
  }
  std::vector<Word>& v = cursor ? cursor->row_state : out;
  for (std::size_t i = from; i < rows; ++i) lcs_step(v.data(), mask_x_.data() + y_[i] * words_, nw);
  if (cursor) {
    cursor->rows = rows;
    out = v;
  }
}

// State of the column-wise pass after `cols` columns, on the low `prefix` bits.
void LcsCheckpoints::col_state(std::size_t cols, std::size_t prefix, std::vector<Word>& out,
                               LcsCursor* cursor) const {
  const std::size_t nw = words_for(prefix);
  const std::size_t base = cols / spacing_ * spacing_;
  std::size_t from;
  if (cursor && cursor->prefix == prefix && cursor->col_state.size() == nw && cursor->cols <= cols &&
      cursor->cols >= base) {
    from = cursor->cols;
  } else {
    from = base;
    const auto src = col_ckpt_.begin() + static_cast<std::ptrdiff_t>(base / spacing_ * words_);
    if (cursor) {
      cursor->col_state.assign(src, src + static_cast<std::ptrdiff_t>(nw));
    } else {
      out.assign(src, src + static_cast<std::ptrdiff_t>(nw));
    }
  }
  std::vector<Word>& v = cursor ? cursor->col_state : out;
  for (std::size_t j = from; j < cols; ++j) lcs_step(v.data(), mask_y_.data() + x_[j] * words_, nw);
  if (cursor) {
    cursor->cols = cols;
    out = v;
  }
}

std::int64_t LcsCheckpoints::lcs_with_substitution(std::size_t prefix, std::size_t t, Letter new_x, Letter new_y,
                                                   LcsCursor* cursor) const {
  if (prefix > n_) throw IndexOutOfRange("prefix longer than the sequences");
  if (t >= prefix) throw IndexOutOfRange("substitution position " + std::to_string(t) + " outside the prefix");
  if (new_x >= alphabet_ || new_y >= alphabet_) throw DomainError("letter outside the alphabet");
  if (cursor && cursor->prefix != prefix) {
    *cursor = LcsCursor{};
    cursor->prefix = prefix;
  }

  const std::size_t nw = words_for(prefix);
  const std::size_t tw = words_for(t);

  // Row t of the DP: columns [0,t) from the row-wise pass, columns >= t by
  // running the column-wise pass over rows [0,t) with the substituted x.
  std::vector<Word> h;
  row_state(t, prefix, h, cursor);
  h.resize(nw);
  std::vector<Word> c;
  col_state(t, prefix, c, cursor);
  c.resize(tw);

  std::int64_t f_prev = zeros(c.data(), t);
  for (std::size_t j = t; j < prefix; ++j) {
    const Letter xj = j == t ? new_x : x_[j];
    if (tw) lcs_step(c.data(), mask_y_.data() + xj * words_, tw);
    const std::int64_t f_cur = tw ? zeros(c.data(), t) : 0;
    const Word bit = Word{1} << (j % kBits);
    if (f_cur == f_prev) {
      h[j / kBits] |= bit;
    } else {
      h[j / kBits] &= ~bit;
    }
    f_prev = f_cur;
  }

  // Rows >= t with x[t] patched in the match masks.
  const std::size_t pw = t / kBits;
  const Word pbit = Word{1} << (t % kBits);
  for (std::size_t i = t; i < prefix; ++i) {
    const Letter yi = i == t ? new_y : y_[i];
    const Word* m = mask_x_.data() + yi * words_;
    const Word patched = (m[pw] & ~pbit) | (yi == new_x ? pbit : 0);
    lcs_step(h.data(), m, nw, pw, patched);
  }
  return zeros(h.data(), prefix);
}

double score(const ChainSample& z, const ScoringScheme& scheme) {
  const std::vector<Letter> x = z.xs(), y = z.ys();
  if (scheme.is_lcs()) return static_cast<double>(lcs_fast(x, y, scheme.alphabet));
  return score(x, y, scheme);
}

double score_with_substitution(const ChainSample& z, std::size_t t, PairState pair, const ScoringScheme& scheme) {
  if (t >= z.size()) throw IndexOutOfRange("position " + std::to_string(t) + " >= n = " + std::to_string(z.size()));
  if (pair.x < 0 || pair.y < 0 || pair.x >= z.alphabet || pair.y >= z.alphabet) {
    throw DomainError("pair state outside the alphabet");
  }
  std::vector<Letter> x = z.xs(), y = z.ys();
  x[t] = static_cast<Letter>(pair.x);
  y[t] = static_cast<Letter>(pair.y);
  if (scheme.is_lcs()) return static_cast<double>(lcs_fast(x, y, scheme.alphabet));
  return score(x, y, scheme);
}

}  // namespace pmc
