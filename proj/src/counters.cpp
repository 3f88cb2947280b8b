#include "pmc/counters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "pmc/linalg.hpp"

namespace pmc {

namespace {

void check_pattern(const TripletPattern& t, int k) {
  for (const PairState& s : {t.a, t.b, t.d}) {
    if (s.x < 0 || s.y < 0 || s.x >= k || s.y >= k) {
      throw DomainError("pattern state (" + std::to_string(s.x) + "," + std::to_string(s.y) + ") outside the alphabet");
    }
  }
}

double two_step(const TransitionMatrix& p, int a, int b) {
  double s = 0;
  for (int d = 0; d < p.states(); ++d) s += p(a, d) * p(d, b);
  return s;
}

double log_binom_pmf(std::int64_t m, std::int64_t i, double p) {
  const double md = static_cast<double>(m), id = static_cast<double>(i);
  return std::lgamma(md + 1) - std::lgamma(id + 1) - std::lgamma(md - id + 1) + id * std::log(p) +
         (md - id) * std::log1p(-p);
}

// Adaptive Simpson with the usual Richardson correction.
template <class F>
double simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

CountPair count_uv(std::span<const std::uint16_t> z, int k, const TripletPattern& t) {
  const int a = t.a.index(k), b = t.b.index(k), d = t.d.index(k);
  CountPair c;
  for (std::size_t i = 0; i + 2 < z.size(); i += 3) {
    if (z[i] == a && z[i + 2] == b) {
      ++c.v;
      if (z[i + 1] == d) ++c.u;
    }
  }
  return c;
}

CounterSummary summarize(std::span<const std::uint16_t> z, int k, const TripletPattern& t) {
  check_pattern(t, k);
  const int a = t.a.index(k), b = t.b.index(k), d = t.d.index(k);
  CounterSummary s;
  const std::size_t m = z.size() / 3;
  s.n_vec.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (z[3 * i] != a || z[3 * i + 2] != b) continue;
    s.n_vec[i] = 1;
    s.positions.push_back(i);
    const bool mid = z[3 * i + 1] == d;
    s.b_vec.push_back(mid ? 1 : 0);
    s.u += mid;
  }
  s.v = static_cast<std::int64_t>(s.positions.size());
  return s;
}

CounterSummary summarize(const ChainSample& z, const TripletPattern& t) {
  return summarize(z.states, z.alphabet, t);
}

double q_of(const TransitionMatrix& p, const TripletPattern& t) {
  const int k = p.alphabet();
  check_pattern(t, k);
  const int a = t.a.index(k), b = t.b.index(k), d = t.d.index(k);
  const double denom = two_step(p, a, b);
  if (!(denom > 0)) throw PatternInfeasible("P^2(A,B) = 0: no (A,.,B) triplet can occur");
  return std::clamp(p(a, d) * p(d, b) / denom, 0.0, 1.0);
}

AlphaValue alpha_of(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& t, std::int64_t n) {
  const int k = p.alphabet();
  check_pattern(t, k);
  if (n < 1) throw DomainError("n must be positive");
  const int a = t.a.index(k), b = t.b.index(k);
  AlphaValue v;
  v.alpha = pi[a] * two_step(p, a, b) / 3.0;
  if (!(v.alpha > 0)) throw PatternInfeasible("P(Z_1 = A, Z_3 = B) = 0");
  v.alpha_n = static_cast<double>(n / 3) * 3.0 * v.alpha / static_cast<double>(n);
  return v;
}

double b_of_q(double q, double beta) {
  if (!(q > 0 && q < 1)) throw DomainError("b(q) needs q in (0,1), got " + std::to_string(q));
  const double s = q * (1 - q);
  return std::sqrt(2 * std::numbers::pi * s) * std::exp(beta * beta / (2 * s));
}

LocalCltResult local_clt_check(std::int64_t m, double p, double beta, double b) {
  if (m < 1) throw DomainError("m must be >= 1");
  if (!(p > 0 && p < 1)) throw DomainError("p must lie in (0,1)");
  const double md = static_cast<double>(m);
  const double half = beta * std::sqrt(md);
  const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(md * p - half)));
  const auto hi = std::min<std::int64_t>(m, static_cast<std::int64_t>(std::floor(md * p + half)));
  LocalCltResult r;
  r.threshold = 1.0 / (b * std::sqrt(md));
  double worst = std::numeric_limits<double>::infinity();
  for (std::int64_t i = lo; i <= hi; ++i) {
    const double lp = log_binom_pmf(m, i, p);
    if (lp < worst) {
      worst = lp;
      r.worst_i = i;
    }
  }
  if (r.worst_i < 0) return r;  // empty window: vacuous
  r.worst_pmf = std::exp(worst);
  r.ratio = r.worst_pmf / r.threshold;
  r.holds = r.ratio >= 1.0 - 1e-12;
  return r;
}

LocalCltSweep local_clt_sweep(double p, double beta, double b, std::int64_t m_lo, std::int64_t m_hi) {
  if (m_lo < 1 || m_hi < m_lo) throw DomainError("bad sweep range");
  LocalCltSweep s;
  s.m_lo = m_lo;
  s.m_hi = m_hi;
  for (std::int64_t m = m_lo; m <= m_hi; ++m) {
    const LocalCltResult r = local_clt_check(m, p, beta, b);
    if (r.worst_i < 0) continue;
    if (r.ratio < s.worst_ratio) {
      s.worst_ratio = r.ratio;
      s.worst_m = m;
    }
    if (!r.holds) {
      ++s.failures;
      s.last_failure = m;
    }
  }
  s.m_o = s.failures ? s.last_failure + 1 : m_lo;
  s.needed_multiplier = std::max(1.0, 1.0 / s.worst_ratio);
  return s;
}

std::int64_t u_window_count(std::int64_t v, double q) {
  if (v < 0) throw DomainError("v must be >= 0");
  const double vd = static_cast<double>(v), r = std::sqrt(vd);
  const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(vd * q - r)));
  const auto hi = std::min<std::int64_t>(v, static_cast<std::int64_t>(std::floor(vd * q + r)));
  return std::max<std::int64_t>(0, hi - lo + 1);
}

double hoeffding_mc_bound(double m, double eps, double lambda, double r, double fnorm) {
  if (!(lambda > 0) || !(r > 0) || !(eps > 0) || !(fnorm > 0)) {
    throw DomainError("hoeffding bound needs lambda, r, eps, |f| > 0");
  }
  const double shift = 2.0 * r * fnorm / lambda;
  if (m * eps < shift * (1 - 1e-12)) {
    throw PreconditionViolated("m eps = " + std::to_string(m * eps) + " below 2 r |f| / lambda = " +
                               std::to_string(shift));
  }
  const double gap = std::max(0.0, m * eps - shift);
  return std::exp(-lambda * lambda * gap * gap / (2.0 * m * fnorm * fnorm * r * r));
}

XiDoeblin xi_doeblin(const TransitionMatrix& p, const StationaryDist& pi, int max_r) {
  const int s = p.states();
  struct Triple {
    int z1, z2, z3;
    double tail;  // p(z1,z2) p(z2,z3)
  };
  std::vector<Triple> xs;
  for (int a = 0; a < s; ++a) {
    if (!(pi[a] > 0)) continue;
    for (int b = 0; b < s; ++b) {
      for (int c = 0; c < s; ++c) {
        const double w = p(a, b) * p(b, c);
        if (w > 0) xs.push_back({a, b, c, w});
      }
    }
  }
  XiDoeblin out;
  out.states = xs.size();
  const std::size_t n = static_cast<std::size_t>(s);
  const std::vector<double> base = p.entries();
  std::vector<double> pw = base;  // P^(3r-2)
  for (int r = 1; r <= max_r; ++r) {
    if (r > 1) pw = linalg::multiply(pw, linalg::multiply(linalg::multiply(base, base, n), base, n), n);
    double mn = std::numeric_limits<double>::infinity();
    for (const Triple& x : xs) {
      for (const Triple& y : xs) mn = std::min(mn, pw[static_cast<std::size_t>(x.z3) * n + y.z1] * y.tail);
    }
    if (mn > 0) {
      out.r = r;
      out.min_entry = mn;
      out.lambda = mn * static_cast<double>(xs.size());
      out.valid = out.lambda <= 1.0 + 1e-12;
      return out;
    }
  }
  throw NotPrimitive("triplet chain has no positive power up to r = " + std::to_string(max_r));
}

double choose_K(double lambda, double r, double b_o) {
  if (!(b_o > 0 && b_o < 1)) throw DomainError("b_o must lie in (0,1)");
  if (!(lambda > 0 && r > 0)) throw DomainError("lambda and r must be positive");
  return (r / lambda) * std::sqrt(8.0 / 3.0 * std::log(2.0 / (1.0 - b_o))) + 1e-9;
}

BoundReport lower_bound_report(const TransitionMatrix& p, const TripletPattern& t, double eps_o, double r_moment,
                               std::int64_t n, double b_o) {
  if (!(eps_o >= 0) || !std::isfinite(eps_o)) throw DomainError("eps_o must be a finite value >= 0");
  if (!(r_moment > 0)) throw DomainError("moment order r must be positive");
  const StationaryDist pi = stationary(p);
  BoundReport rep;
  rep.n = n;
  rep.r = r_moment;
  rep.eps_o = eps_o;
  rep.b_o = b_o;
  rep.q = q_of(p, t);
  const AlphaValue a = alpha_of(p, pi, t, n);
  rep.alpha = a.alpha;
  rep.alpha_n = a.alpha_n;
  if (rep.q > 0 && rep.q < 1) {
    rep.b_q = b_of_q(rep.q);
    rep.b = rep.b_q * (1 + 1e-9);
    rep.c = std::sqrt(2 * rep.alpha) / rep.b;
    rep.c_o = rep.c / 8 * (1 - 1e-9);
    rep.phi_n = 1.0 / (rep.b * std::sqrt(static_cast<double>(n)));
    rep.a_o = 2 * rep.c_o * rep.alpha * eps_o * eps_o / 256.0;
    rep.moment_lower = rep.c_o * std::pow(eps_o * std::sqrt(2 * rep.alpha) / 16.0, r_moment) *
                       std::pow(static_cast<double>(n), r_moment / 2);
  }
  try {
    const XiDoeblin xi = xi_doeblin(p, pi);
    rep.r_doeblin = xi.r;
    rep.lambda = xi.lambda;
    rep.lambda_valid = xi.valid;
    rep.xi_states = xi.states;
    rep.K = choose_K(xi.lambda, xi.r, b_o);
  } catch (const NotPrimitive&) {
    // K stays NaN
  }
  return rep;
}

double upper_gamma_quadrature(double a, double lower, double tol) {
  if (!(a > 0) || !(lower >= 0)) throw DomainError("need a > 0 and lower >= 0");
  auto f = [&](double s) {
    if (s >= 1) return 0.0;
    const double u = lower + s / (1 - s);
    if (u <= 0) return a >= 1 ? (a == 1 ? 1.0 : 0.0) : 0.0;
    const double v = std::exp(-u + (a - 1) * std::log(u)) / ((1 - s) * (1 - s));
    return std::isfinite(v) ? v : 0.0;
  };
  const double fa = f(0), fm = f(0.5), fb = f(1);
  const double whole = (fa + 4 * fm + fb) / 6;
  return simpson(f, 0.0, 1.0, fa, fm, fb, whole, tol, 50);
}

BoundReport upper_bound_report(const TransitionMatrix& p, const ScoringScheme& scheme, double r_moment,
                               std::int64_t n) {
  if (!(r_moment > 0)) throw DomainError("moment order r must be positive");
  if (scheme.alphabet != p.alphabet()) throw DomainError("scoring alphabet differs from the chain alphabet");
  BoundReport rep;
  rep.n = n;
  rep.r = r_moment;
  rep.delta = delta_max(scheme);
  const Primitivity prim = primitivity_index(p);
  rep.mix_lag = prim.lag;
  rep.p_o = prim.min_entry;
  try {
    rep.t_mix = mixing_time_bound(p, 0.25).t_mix;
  } catch (const DomainError&) {
    // P^m has identical rows: stationary after m steps.
    rep.t_mix = prim.lag;
  }
  rep.F = 32 * rep.delta * rep.delta * rep.t_mix;
  const double a = r_moment / 2;
  const double fr = std::pow(rep.F, a);
  rep.C_r = fr * (std::pow(std::numbers::ln2, a) + r_moment * upper_gamma_quadrature(a, std::numbers::ln2));
  rep.C_r_gamma = fr * (std::pow(std::numbers::ln2, a) + r_moment * boost::math::tgamma(a, std::numbers::ln2));
  rep.D_r = r_moment * fr * std::tgamma(a);
  rep.moment_upper = rep.C_r * std::pow(static_cast<double>(n), a);
  return rep;
}

double mcdiarmid_bound(double s, std::int64_t n, double F) {
  if (!(s >= 0)) throw DomainError("s must be >= 0");
  const double denom = static_cast<double>(n) * F;
  if (!(denom > 0)) return s > 0 ? 0.0 : 2.0;
  return 2.0 * std::exp(-s * s / denom);
}

bool swap_symmetric(const TransitionMatrix& p, double tol) {
  if (p.alphabet() != 2) throw Unsupported("symmetry conditions are stated for k = 2");
  // Display indices 1..4 are flat 3..0.
  auto d = [&](int i, int j) { return p(4 - i, 4 - j); };
  auto eq = [&](double x, double y) { return std::abs(x - y) <= tol; };
  return eq(d(2, 2), d(3, 3)) && eq(d(2, 3), d(3, 2)) && eq(d(2, 1), d(3, 1)) && eq(d(1, 2), d(1, 3)) &&
         eq(d(2, 4), d(3, 4)) && eq(d(4, 2), d(4, 3));
}

}  // namespace pmc
