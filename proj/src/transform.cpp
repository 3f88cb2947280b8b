#include "pmc/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmc {

namespace {

double log_binom(int n, int k, double q) {
  if (k < 0 || k > n) return -INFINITY;
  const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  const double a = k ? k * std::log(q) : 0.0;
  const double b = n - k ? (n - k) * std::log1p(-q) : 0.0;
  return lc + a + b;
}

void require_distinct(const TripletPattern& p1, const TripletPattern& p2) {
  if (p1.a == p2.a && p1.b == p2.b) throw DomainError("combined patterns need (A1,B1) != (A2,B2)");
}

}  // namespace

std::vector<std::size_t> eligible_positions(std::span<const std::uint16_t> z, int k, const TripletPattern& t) {
  const int a = t.a.index(k), b = t.b.index(k), d = t.d.index(k);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; 3 * j + 2 < z.size(); ++j) {
    if (z[3 * j] == a && z[3 * j + 2] == b && z[3 * j + 1] != d) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> eligible_positions(const ChainSample& z, const TripletPattern& t) {
  return eligible_positions(z.states, z.alphabet, t);
}

TransformOutcome apply_single(const ChainSample& z, const TripletPattern& t, Philox& rng) {
  const std::vector<std::size_t> js = eligible_positions(z, t);
  if (js.empty()) throw NoEligibleTriplet("every matched triplet already has D in the middle");
  const std::size_t j = js[rng.uniform_below(js.size())];
  TransformOutcome out{z, 3 * j + 1, z.at(3 * j + 1), 1};
  out.modified.states[out.changed_index] = static_cast<std::uint16_t>(t.d.index(z.alphabet));
  return out;
}

CombinedWeights equal_q_weights(int u1, int u2, int v1, int v2) {
  if (u1 < 0 || u2 < 0 || u1 > v1 || u2 > v2) throw DomainError("need 0 <= u_i <= v_i");
  const int d1 = v1 - u1, d2 = v2 - u2;
  if (d1 + d2 == 0) throw DomainError("no eligible triplet on either side");
  const double s = d1 + d2;
  return {d1 / s, d2 / s};
}

std::vector<double> conditional_split(int u, int v1, int v2, double q1, double q2) {
  if (v1 < 0 || v2 < 0 || u < 0 || u > v1 + v2) throw DomainError("need 0 <= u <= v1 + v2");
  const int l1 = std::max(0, u - v2), l2 = std::min(u, v1);
  std::vector<double> lw;
  for (int l = l1; l <= l2; ++l) lw.push_back(log_binom(v1, l, q1) + log_binom(v2, u - l, q2));
  const double mx = *std::max_element(lw.begin(), lw.end());
  if (!std::isfinite(mx)) throw DomainError("U = " + std::to_string(u) + " has probability zero");
  double total = 0;
  for (double& w : lw) total += (w = std::exp(w - mx));
  for (double& w : lw) w /= total;
  return lw;
}

GeneralWeightTable general_q_weights(int u, int v1, int v2, double q1, double q2) {
  if (!(q1 > 0 && q1 < 1 && q2 > 0 && q2 < 1)) throw DomainError("q1, q2 must lie in (0,1)");
  if (u < 0 || v1 < 0 || v2 < 0 || u >= v1 + v2) throw DomainError("need 0 <= u < v1 + v2");
  GeneralWeightTable t;
  t.u = u;
  t.v1 = v1;
  t.v2 = v2;
  t.l1 = std::max(0, u - v2);
  t.l2 = std::min(u, v1);
  t.p_now = conditional_split(u, v1, v2, q1, q2);
  const std::vector<double> next = conditional_split(u + 1, v1, v2, q1, q2);
  const int n1 = std::max(0, u + 1 - v2);
  auto p_next = [&](int l) {
    const int i = l - n1;
    return i >= 0 && i < static_cast<int>(next.size()) ? next[static_cast<std::size_t>(i)] : 0.0;
  };
  auto p_now = [&](int l) { return t.p_now[static_cast<std::size_t>(l - t.l1)]; };

  // Summing the interior equations from l1 up to l telescopes to
  //   r_1(l) p(l|u) = F_u(l) - F_{u+1}(l),  F = conditional cdf of U_1,
  // with the lower boundary equation as the first term. Past the median the
  // difference is taken on upper tails to avoid cancellation.
  const int width = t.l2 - t.l1 + 1;
  std::vector<double> lo_now(width), lo_next(width), hi_now(width), hi_next(width);
  double a = 0, b = 0;
  for (int l = t.l1; l <= t.l2; ++l) {
    a += p_now(l);
    b += p_next(l);
    lo_now[l - t.l1] = a;
    lo_next[l - t.l1] = b;
  }
  a = 0;
  b = p_next(t.l2 + 1);
  for (int l = t.l2; l >= t.l1; --l) {
    hi_now[l - t.l1] = a;
    hi_next[l - t.l1] = b;
    a += p_now(l);
    b += p_next(l);
  }
  t.r1.assign(static_cast<std::size_t>(width), 0.0);
  for (int i = 0; i < width; ++i) {
    const double diff = lo_now[i] <= 0.5 ? lo_now[i] - lo_next[i] : hi_next[i] - hi_now[i];
    t.r1[static_cast<std::size_t>(i)] = diff / t.p_now[static_cast<std::size_t>(i)];
  }
  // Lower boundary: r_2 = 0 when u - l1 = v2.
  if (u >= v2) {
    t.closing_residual = std::abs(t.r1[0] - 1.0) * t.p_now[0];
    t.r1[0] = 1.0;
  }
  // Upper boundary: r_1(u, 0) p(u|u) = p(u+1|u+1) when u < v1, else r_1 = 0.
  double& last = t.r1.back();
  if (u < v1) {
    t.closing_residual = std::max(t.closing_residual, std::abs(last * p_now(t.l2) - p_next(u + 1)));
  } else {
    t.closing_residual = std::max(t.closing_residual, std::abs(last) * p_now(t.l2));
    last = 0.0;
  }
  if (t.closing_residual > 1e-9) {
    throw Infeasible("boundary equation off by " + std::to_string(t.closing_residual));
  }
  for (std::size_t i = 0; i < t.r1.size(); ++i) {
    double& r = t.r1[i];
    if (r < -1e-12 || r > 1 + 1e-12) {
      throw Infeasible("r_1(" + std::to_string(t.l1 + static_cast<int>(i)) + ") = " + std::to_string(r) +
                       " outside [0,1] at u = " + std::to_string(u));
    }
    r = std::clamp(r, 0.0, 1.0);
  }
  return t;
}

WeightRule equal_q_rule() { return [](int u1, int u2, int v1, int v2) { return equal_q_weights(u1, u2, v1, v2); }; }

WeightRule general_q_rule(double q1, double q2) {
  return [q1, q2](int u1, int u2, int v1, int v2) {
    if (u1 > v1 || u2 > v2) throw DomainError("need u_i <= v_i");
    const GeneralWeightTable t = general_q_weights(u1 + u2, v1, v2, q1, q2);
    const double r1 = t.r1[static_cast<std::size_t>(u1 - t.l1)];
    return CombinedWeights{r1, 1.0 - r1};
  };
}

TransformOutcome apply_combined(const ChainSample& z, const TripletPattern& p1, const TripletPattern& p2,
                                const WeightRule& weights, Philox& rng) {
  require_distinct(p1, p2);
  const CountPair c1 = count_uv(z.states, z.alphabet, p1);
  const CountPair c2 = count_uv(z.states, z.alphabet, p2);
  if (c1.u == c1.v && c2.u == c2.v) throw NoEligibleTriplet("both patterns saturated");
  const CombinedWeights w = weights(c1.u, c2.u, c1.v, c2.v);
  const bool first = rng.uniform01() < w.r1;
  TransformOutcome out = apply_single(z, first ? p1 : p2, rng);
  out.side = first ? 1 : 2;
  return out;
}

GainEvaluator::GainEvaluator(const ChainSample& z, ScoringScheme scheme)
    : z_(z), scheme_(std::move(scheme)), x_(z.xs()), y_(z.ys()) {
  if (scheme_.alphabet != z.alphabet) throw DomainError("scoring alphabet differs from the chain alphabet");
  if (scheme_.is_lcs()) lcs_ = std::make_unique<LcsCheckpoints>(x_, y_, z.alphabet);
}

double GainEvaluator::score(std::size_t prefix) const {
  if (prefix > z_.size()) throw IndexOutOfRange("prefix longer than the chain");
  if (lcs_) return static_cast<double>(lcs_->lcs(prefix));
  return pmc::score(std::span(x_).first(prefix), std::span(y_).first(prefix), scheme_);
}

GainSum GainEvaluator::gains(std::size_t prefix, std::span<const Substitution> subs) const {
  GainSum g;
  g.base = score(prefix);
  g.count = subs.size();
  if (lcs_) {
    LcsCursor cursor;
    for (const Substitution& s : subs) {
      const auto v = lcs_->lcs_with_substitution(prefix, s.pos, static_cast<Letter>(s.pair.x),
                                                 static_cast<Letter>(s.pair.y), &cursor);
      g.sum += static_cast<double>(v) - g.base;
    }
    return g;
  }
  std::vector<Letter> x(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(prefix));
  std::vector<Letter> y(y_.begin(), y_.begin() + static_cast<std::ptrdiff_t>(prefix));
  for (const Substitution& s : subs) {
    if (s.pos >= prefix) throw IndexOutOfRange("substitution outside the prefix");
    x[s.pos] = static_cast<Letter>(s.pair.x);
    y[s.pos] = static_cast<Letter>(s.pair.y);
    g.sum += pmc::score(x, y, scheme_) - g.base;
    x[s.pos] = x_[s.pos];
    y[s.pos] = y_[s.pos];
  }
  return g;
}

std::vector<Substitution> eligible_substitutions(const ChainSample& z, const TripletPattern& t,
                                                 std::size_t triplets) {
  const std::size_t len = std::min(z.size(), 3 * triplets);
  std::vector<Substitution> out;
  for (std::size_t j : eligible_positions(std::span(z.states).first(len), z.alphabet, t)) {
    out.push_back({3 * j + 1, t.d});
  }
  return out;
}

double expected_gain(const ChainSample& z, const TripletPattern& t, const ScoringScheme& scheme) {
  const std::vector<Substitution> subs = eligible_substitutions(z, t, z.size() / 3);
  if (subs.empty()) throw NoEligibleTriplet("no eligible triplet");
  return GainEvaluator(z, scheme).gains(z.size(), subs).mean();
}

}  // namespace pmc
