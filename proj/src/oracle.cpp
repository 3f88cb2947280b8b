#include "pmc/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "pmc/linalg.hpp"
#include "pmc/parallel.hpp"

namespace pmc {

namespace {

using Rational = boost::multiprecision::cpp_rational;

double to_double(double x) { return x; }
double to_double(const Rational& x) { return x.convert_to<double>(); }

template <class T>
T abs_diff(const T& a, const T& b) {
  return a < b ? T(b - a) : T(a - b);
}

/// Plain sum for exact types, Neumaier-compensated for double.
template <class T>
struct Sum {
  T s{0};
  void add(const T& x) { s += x; }
  T value() const { return s; }
};

template <>
struct Sum<double> {
  double s = 0, c = 0;
  void add(double x) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

struct Model {
  int k = 0;
  int states = 0;
  int n = 0;
  std::uint64_t count = 0;
  std::vector<std::uint64_t> place;  // states^(n-1-i)
};

Model make_model(int k, int n, const OracleOptions& opt) {
  if (n < 1) throw DomainError("n must be >= 1");
  Model m;
  m.k = k;
  m.states = k * k;
  m.n = n;
  m.count = sequence_count(k, n);
  if (m.count > opt.max_sequences) {
    throw CapExceeded(std::to_string(m.count) + " sequences exceed the cap of " + std::to_string(opt.max_sequences));
  }
  if (opt.exact && (k != 2 || n > 6)) throw Unsupported("exact mode is limited to k = 2 and n <= 6");
  m.place.assign(static_cast<std::size_t>(n), 1);
  for (int i = n - 2; i >= 0; --i) m.place[i] = m.place[i + 1] * static_cast<std::uint64_t>(m.states);
  return m;
}

template <class T>
struct Chain {
  std::vector<T> p;   // states x states
  std::vector<T> pi;  // states
};

Chain<double> chain_of(const TransitionMatrix& p, const StationaryDist& pi) {
  return {p.entries(), pi.probs};
}

Chain<Rational> rational_chain_of(const TransitionMatrix& p) {
  Chain<Rational> c;
  for (double x : p.entries()) {
    const auto [num, den] = rationalize(x);
    c.p.emplace_back(num, den);
  }
  const auto n = static_cast<std::size_t>(p.states());
  for (std::size_t i = 0; i < n; ++i) {
    Rational row = 0;
    for (std::size_t j = 0; j < n; ++j) row += c.p[i * n + j];
    if (row != 1) throw DomainError("row " + std::to_string(i) + " does not sum to 1 after rationalisation");
  }
  if (!linalg::solve_stationary(c.p, n, c.pi)) throw NotIrreducible("rational stationary system is singular");
  return c;
}

/// P(z) for every code; partitioned by first state across workers.
template <class T>
std::vector<T> sequence_probs(const Model& m, const Chain<T>& c, unsigned workers) {
  std::vector<T> prob(m.count, T(0));
  const std::uint64_t block = m.place[0];
  parallel_for(static_cast<std::size_t>(m.states), workers, [&](std::size_t s0) {
    std::vector<std::uint16_t> z;
    for (std::uint64_t code = s0 * block; code < (s0 + 1) * block; ++code) {
      z = decode_sequence(code, m.k, m.n);
      T w = c.pi[z[0]];
      for (int i = 1; i < m.n && w != T(0); ++i) w *= c.p[static_cast<std::size_t>(z[i - 1]) * m.states + z[i]];
      prob[code] = w;
    }
  });
  return prob;
}

CountPair counts(std::span<const std::uint16_t> z, int k, const TripletPattern& t, Mutation mut) {
  if (mut != Mutation::shifted_counter) return count_uv(z, k, t);
  const int a = t.a.index(k), b = t.b.index(k), d = t.d.index(k);
  CountPair c;
  for (std::size_t i = 0; i + 2 < z.size(); i += 3) {
    if (z[i] == a && z[i + 2] == b) {
      ++c.v;
      if (i + 4 < z.size() && z[i + 4] == d) ++c.u;
    }
  }
  return c;
}

/// Pick weights of R over `eligible` triplets, possibly mutated.
std::vector<double> pick_weights(std::size_t eligible, Mutation mut) {
  std::vector<double> w(eligible, 1.0);
  if (mut == Mutation::biased_pick && eligible > 1) w[0] = 2.0;
  double s = 0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return w;
}

template <class T>
T rational_weight(const std::vector<double>& w, std::size_t i, std::size_t eligible, Mutation mut) {
  if constexpr (std::is_same_v<T, double>) {
    return w[i];
  } else {
    if (mut == Mutation::biased_pick && eligible > 1) return T(i == 0 ? 2 : 1, static_cast<long>(eligible + 1));
    return T(1, static_cast<long>(eligible));
  }
}

std::string uv_name(int u, int v) { return "(u=" + std::to_string(u) + ", v=" + std::to_string(v) + ")"; }

template <class T>
CheckReport run_A3(const Model& m, const Chain<T>& c, const TripletPattern& t, const OracleOptions& opt) {
  const std::vector<T> prob = sequence_probs(m, c, opt.workers);
  const int vmax = m.n / 3;
  const auto key = [&](int u, int v) { return static_cast<std::size_t>(v * (vmax + 1) + u); };
  std::vector<Sum<T>> mass(static_cast<std::size_t>((vmax + 1) * (vmax + 1)));
  std::vector<CountPair> cls(m.count);
  for (std::uint64_t code = 0; code < m.count; ++code) {
    const auto z = decode_sequence(code, m.k, m.n);
    cls[code] = counts(z, m.k, t, opt.mutation);
    if (prob[code] != T(0)) mass[key(cls[code].u, cls[code].v)].add(prob[code]);
  }
  std::vector<Sum<T>> pushed(m.count);
  const auto d = static_cast<std::uint64_t>(t.d.index(m.k));
  for (std::uint64_t code = 0; code < m.count; ++code) {
    if (prob[code] == T(0)) continue;
    const auto z = decode_sequence(code, m.k, m.n);
    const std::vector<std::size_t> js = eligible_positions(z, m.k, t);
    if (js.empty()) continue;
    const T base = prob[code] / mass[key(cls[code].u, cls[code].v)].value();
    const std::vector<double> w = pick_weights(js.size(), opt.mutation);
    for (std::size_t i = 0; i < js.size(); ++i) {
      const std::size_t pos = 3 * js[i] + 1;
      const std::uint64_t target = code + (d - z[pos]) * m.place[pos];
      pushed[target].add(base * rational_weight<T>(w, i, js.size(), opt.mutation));
    }
  }
  // TV per target class (u+1, v), accumulated over every code in the class.
  std::vector<Sum<T>> tv(mass.size());
  for (std::uint64_t code = 0; code < m.count; ++code) {
    const T got = pushed[code].value();
    const CountPair cp = cls[code];
    if (cp.u == 0) continue;
    const T src = mass[key(cp.u - 1, cp.v)].value();
    if (src == T(0)) continue;  // nothing is pushed into this class
    const T dst = mass[key(cp.u, cp.v)].value();
    const T want = dst == T(0) ? T(0) : T(prob[code] / dst);
    tv[key(cp.u, cp.v)].add(abs_diff(got, want));
  }
  CheckReport r;
  r.check = "A3";
  r.n = m.n;
  r.tolerance = 1e-10;
  for (int v = 1; v <= vmax; ++v) {
    for (int u = 0; u < v; ++u) {
      if (mass[key(u, v)].value() == T(0)) continue;
      ++r.cases;
      const double dist = mass[key(u + 1, v)].value() == T(0) ? 1.0 : to_double(tv[key(u + 1, v)].value()) / 2;
      if (dist >= r.max_residual) {
        r.max_residual = dist;
        r.worst_case = uv_name(u, v);
      }
    }
  }
  r.passed = r.max_residual <= r.tolerance;
  return r;
}

template <class T>
CheckReport run_uv(const Model& m, const Chain<T>& c, const TripletPattern& t, const OracleOptions& opt) {
  const std::vector<T> prob = sequence_probs(m, c, opt.workers);
  const int triplets = m.n / 3;
  const std::size_t patterns = std::size_t{1} << triplets;
  const int a_idx = t.a.index(m.k), b_idx = t.b.index(m.k);
  // joint[eta][u] and marginal[eta]
  std::vector<std::vector<Sum<T>>> joint(patterns, std::vector<Sum<T>>(static_cast<std::size_t>(triplets + 1)));
  std::vector<Sum<T>> eta_mass(patterns);
  for (std::uint64_t code = 0; code < m.count; ++code) {
    if (prob[code] == T(0)) continue;
    const auto z = decode_sequence(code, m.k, m.n);
    std::size_t eta = 0;
    for (int i = 0; i < triplets; ++i) {
      if (z[3 * i] == a_idx && z[3 * i + 2] == b_idx) eta |= std::size_t{1} << i;
    }
    const CountPair cp = counts(z, m.k, t, opt.mutation);
    joint[eta][static_cast<std::size_t>(cp.u)].add(prob[code]);
    eta_mass[eta].add(prob[code]);
  }
  std::vector<T> pv(static_cast<std::size_t>(triplets + 1), T(0));
  std::vector<std::vector<T>> puv(static_cast<std::size_t>(triplets + 1),
                                  std::vector<T>(static_cast<std::size_t>(triplets + 1), T(0)));
  for (std::size_t eta = 0; eta < patterns; ++eta) {
    const auto v = static_cast<std::size_t>(std::popcount(eta));
    pv[v] += eta_mass[eta].value();
    for (std::size_t u = 0; u <= static_cast<std::size_t>(triplets); ++u) puv[v][u] += joint[eta][u].value();
  }
  CheckReport r;
  r.check = "uv_conditional_independence";
  r.n = m.n;
  r.tolerance = 1e-12;
  for (std::size_t eta = 0; eta < patterns; ++eta) {
    const auto v = static_cast<std::size_t>(std::popcount(eta));
    if (pv[v] == T(0)) continue;
    const T marginal = eta_mass[eta].value() / pv[v];
    for (std::size_t u = 0; u <= v; ++u) {
      if (puv[v][u] == T(0)) continue;
      ++r.cases;
      const double res = to_double(abs_diff(T(joint[eta][u].value() / puv[v][u]), marginal));
      if (res > r.max_residual) {
        r.max_residual = res;
        r.worst_case = "eta=" + std::to_string(eta) + " " + uv_name(static_cast<int>(u), static_cast<int>(v));
      }
    }
  }
  if (r.cases == 0) r.note = "no feasible (eta, u, v): vacuous";
  r.passed = r.max_residual <= r.tolerance;
  return r;
}

struct Quad {
  int u, v1, v2;
  auto operator<=>(const Quad&) const = default;
};

template <class T>
CheckReport run_combined(const Model& m, const Chain<T>& c, const TripletPattern& p1, const TripletPattern& p2,
                         const WeightRule& rule, const OracleOptions& opt) {
  const std::vector<T> prob = sequence_probs(m, c, opt.workers);
  std::map<Quad, Sum<T>> mass;
  struct Cls {
    CountPair c1, c2;
  };
  std::vector<Cls> cls(m.count);
  for (std::uint64_t code = 0; code < m.count; ++code) {
    const auto z = decode_sequence(code, m.k, m.n);
    cls[code] = {count_uv(z, m.k, p1), count_uv(z, m.k, p2)};
    if (prob[code] != T(0)) mass[{cls[code].c1.u + cls[code].c2.u, cls[code].c1.v, cls[code].c2.v}].add(prob[code]);
  }
  auto mass_of = [&](const Quad& q) {
    const auto it = mass.find(q);
    return it == mass.end() ? T(0) : it->second.value();
  };
  std::vector<Sum<T>> pushed(m.count);
  for (std::uint64_t code = 0; code < m.count; ++code) {
    if (prob[code] == T(0)) continue;
    const Cls& k = cls[code];
    if (k.c1.u == k.c1.v && k.c2.u == k.c2.v) continue;
    const auto z = decode_sequence(code, m.k, m.n);
    const T base = prob[code] / mass_of({k.c1.u + k.c2.u, k.c1.v, k.c2.v});
    CombinedWeights w = rule(k.c1.u, k.c2.u, k.c1.v, k.c2.v);
    T r1, r2;
    if constexpr (std::is_same_v<T, double>) {
      r1 = w.r1;
      r2 = w.r2;
    } else {
      const int d1 = k.c1.v - k.c1.u, d2 = k.c2.v - k.c2.u;
      r1 = T(d1, d1 + d2);
      r2 = T(d2, d1 + d2);
    }
    if (opt.mutation == Mutation::swapped_weights) std::swap(r1, r2);
    for (int side = 1; side <= 2; ++side) {
      const TripletPattern& t = side == 1 ? p1 : p2;
      const T& rs = side == 1 ? r1 : r2;
      if (rs == T(0)) continue;
      const std::vector<std::size_t> js = eligible_positions(z, m.k, t);
      if (js.empty()) continue;  // only reachable under a mutation
      const auto d = static_cast<std::uint64_t>(t.d.index(m.k));
      const T each = base * rs / T(static_cast<long>(js.size()));
      for (std::size_t j : js) {
        const std::size_t pos = 3 * j + 1;
        pushed[code + (d - z[pos]) * m.place[pos]].add(each);
      }
    }
  }
  std::map<Quad, Sum<T>> tv;
  for (std::uint64_t code = 0; code < m.count; ++code) {
    const Cls& k = cls[code];
    const Quad target{k.c1.u + k.c2.u, k.c1.v, k.c2.v};
    if (target.u == 0 || mass_of({target.u - 1, target.v1, target.v2}) == T(0)) continue;
    const T dst = mass_of(target);
    const T want = dst == T(0) ? T(0) : T(prob[code] / dst);
    tv[target].add(abs_diff(pushed[code].value(), want));
  }
  CheckReport r;
  r.check = "combined_A3";
  r.n = m.n;
  r.tolerance = 1e-10;
  for (const auto& [q, s] : mass) {
    if (q.u >= q.v1 + q.v2 || s.value() == T(0)) continue;
    ++r.cases;
    const Quad target{q.u + 1, q.v1, q.v2};
    const double dist = mass_of(target) == T(0) ? 1.0 : to_double(tv[target].value()) / 2;
    if (dist >= r.max_residual) {
      r.max_residual = dist;
      r.worst_case = "(u=" + std::to_string(q.u) + ", v1=" + std::to_string(q.v1) + ", v2=" + std::to_string(q.v2) + ")";
    }
  }
  r.passed = r.max_residual <= r.tolerance;
  return r;
}

}  // namespace

std::uint64_t sequence_count(int k, int n) {
  if (k < 1 || n < 0) throw DomainError("bad enumeration size");
  std::uint64_t c = 1;
  const auto s = static_cast<std::uint64_t>(k) * k;
  for (int i = 0; i < n; ++i) {
    if (c > std::numeric_limits<std::uint64_t>::max() / s) throw CapExceeded("sequence count overflows 64 bits");
    c *= s;
  }
  return c;
}

std::vector<std::uint16_t> decode_sequence(std::uint64_t code, int k, int n) {
  const auto s = static_cast<std::uint64_t>(k) * k;
  std::vector<std::uint16_t> z(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    z[i] = static_cast<std::uint16_t>(code % s);
    code /= s;
  }
  return z;
}

std::uint64_t encode_sequence(std::span<const std::uint16_t> z, int k) {
  const auto s = static_cast<std::uint64_t>(k) * k;
  std::uint64_t code = 0;
  for (std::uint16_t x : z) code = code * s + x;
  return code;
}

std::vector<std::uint16_t> ExactLaw::sequence(std::size_t i) const { return decode_sequence(codes.at(i), alphabet, n); }

std::pair<std::int64_t, std::int64_t> rationalize(double x, std::int64_t max_den) {
  if (!std::isfinite(x)) throw DomainError("cannot rationalise a non-finite value");
  const bool neg = x < 0;
  double r = std::abs(x);
  // Convergents h/k of the continued fraction, stopping before k > max_den.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (a > 9e15) break;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t k2 = ai * k1 + k0;
    if (k2 > max_den) break;
    const std::int64_t h2 = ai * h1 + h0;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    const double frac = r - a;
    if (frac < 1e-15 || std::abs(static_cast<double>(h1) / k1 - std::abs(x)) < 1e-16) break;
    r = 1.0 / frac;
  }
  return {neg ? -h1 : h1, k1};
}

ExactLaw enumerate_conditional(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& t, int n,
                               int u, int v, const OracleOptions& opt) {
  OracleOptions o = opt;
  o.exact = false;
  const Model m = make_model(p.alphabet(), n, o);
  const std::vector<double> prob = sequence_probs(m, chain_of(p, pi), opt.workers);
  ExactLaw law;
  law.alphabet = m.k;
  law.n = n;
  Sum<double> total;
  for (std::uint64_t code = 0; code < m.count; ++code) {
    if (prob[code] == 0) continue;
    const CountPair cp = counts(decode_sequence(code, m.k, n), m.k, t, opt.mutation);
    if (cp.u != u || cp.v != v) continue;
    law.codes.push_back(code);
    law.probs.push_back(prob[code]);
    total.add(prob[code]);
  }
  law.normalization = total.value();
  if (law.codes.empty() || !(law.normalization > 0)) throw EmptyCondition("P" + uv_name(u, v) + " = 0");
  for (double& x : law.probs) x /= law.normalization;
  return law;
}

CheckReport verify_A3(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& t, int n,
                      const OracleOptions& opt) {
  const Model m = make_model(p.alphabet(), n, opt);
  CheckReport r = opt.exact ? run_A3(m, rational_chain_of(p), t, opt) : run_A3(m, chain_of(p, pi), t, opt);
  r.model = p.label();
  if (opt.exact) r.note = "exact rational arithmetic";
  return r;
}

CheckReport verify_uv_conditional_independence(const TransitionMatrix& p, const StationaryDist& pi,
                                               const TripletPattern& t, int n, const OracleOptions& opt) {
  const Model m = make_model(p.alphabet(), n, opt);
  CheckReport r = opt.exact ? run_uv(m, rational_chain_of(p), t, opt) : run_uv(m, chain_of(p, pi), t, opt);
  r.model = p.label();
  return r;
}

CheckReport verify_bernoulli_proposition(int m, double p, const OracleOptions& opt) {
  if (m < 1 || m > 16) throw DomainError("m must lie in [1,16]");
  if (!(p > 0 && p < 1)) throw DomainError("p must lie in (0,1)");
  const std::uint32_t count = 1U << m;
  std::vector<double> prob(count);
  std::vector<Sum<double>> mass(static_cast<std::size_t>(m + 1));
  for (std::uint32_t w = 0; w < count; ++w) {
    const int ones = std::popcount(w);
    prob[w] = std::pow(p, ones) * std::pow(1 - p, m - ones);
    mass[static_cast<std::size_t>(ones)].add(prob[w]);
  }
  CheckReport r;
  r.check = "bernoulli_proposition";
  r.model = "Bernoulli(" + std::to_string(p) + ")";
  r.n = m;
  r.tolerance = 1e-14;
  // Uniformity of the conditional law at each u.
  for (std::uint32_t w = 0; w < count; ++w) {
    const int ones = std::popcount(w);
    const double uni = std::exp(std::lgamma(ones + 1.0) + std::lgamma(m - ones + 1.0) - std::lgamma(m + 1.0));
    const double res = std::abs(prob[w] / mass[static_cast<std::size_t>(ones)].value() - uni);
    if (res > r.max_residual) {
      r.max_residual = res;
      r.worst_case = "uniformity at u=" + std::to_string(ones);
    }
  }
  std::vector<Sum<double>> pushed(count);
  for (std::uint32_t w = 0; w < count; ++w) {
    const int ones = std::popcount(w);
    if (ones == m) continue;
    std::vector<int> zeros;
    for (int i = 0; i < m; ++i) {
      if (!(w >> i & 1U)) zeros.push_back(i);
    }
    const std::vector<double> pw = pick_weights(zeros.size(), opt.mutation);
    const double base = prob[w] / mass[static_cast<std::size_t>(ones)].value();
    for (std::size_t i = 0; i < zeros.size(); ++i) pushed[w | (1U << zeros[i])].add(base * pw[i]);
  }
  std::vector<Sum<double>> tv(static_cast<std::size_t>(m + 1));
  for (std::uint32_t w = 0; w < count; ++w) {
    const int ones = std::popcount(w);
    if (ones == 0) continue;
    tv[static_cast<std::size_t>(ones)].add(
        std::abs(pushed[w].value() - prob[w] / mass[static_cast<std::size_t>(ones)].value()));
  }
  for (int u = 0; u < m; ++u) {
    ++r.cases;
    const double d = tv[static_cast<std::size_t>(u + 1)].value() / 2;
    if (d > r.max_residual) {
      r.max_residual = d;
      r.worst_case = "transport at u=" + std::to_string(u);
    }
  }
  r.passed = r.max_residual <= r.tolerance;
  return r;
}

CheckReport verify_binomial_identity(int v1, int v2, double q) {
  if (v1 < 0 || v2 < 0 || v1 + v2 > 40) throw DomainError("need v1, v2 >= 0 and v1 + v2 <= 40");
  if (!(q >= 0 && q <= 1)) throw DomainError("q must lie in [0,1]");
  CheckReport r;
  r.check = "binomial_identity";
  r.model = "q=" + std::to_string(q) + " v1=" + std::to_string(v1) + " v2=" + std::to_string(v2);
  r.n = v1 + v2;
  r.tolerance = 1e-13;
  const auto [num, den] = rationalize(q);
  const Rational qr(num, den), one(1);
  auto binom = [](int n, int k) {
    Rational c = 1;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
  };
  auto pw = [](const Rational& b, int e) {
    Rational x = 1;
    for (int i = 0; i < e; ++i) x *= b;
    return x;
  };
  // Exact P(X = l | X + Y = s); zero outside the support.
  auto cond = [&](int l, int s) -> Rational {
    Rational total = 0, hit = 0;
    for (int j = std::max(0, s - v2); j <= std::min(s, v1); ++j) {
      const Rational w = binom(v1, j) * pw(qr, j) * pw(one - qr, v1 - j) * binom(v2, s - j) * pw(qr, s - j) *
                         pw(one - qr, v2 - s + j);
      total += w;
      if (j == l) hit = w;
    }
    return total == 0 ? Rational(-1) : Rational(hit / total);
  };
  const bool interior_q = q > 0 && q < 1;
  bool exact_ok = true;
  for (int u = 0; u < v1 + v2; ++u) {
    const Rational denom = v1 + v2 - u;
    const std::vector<double> now = interior_q ? conditional_split(u, v1, v2, q, q) : std::vector<double>{};
    const std::vector<double> next = interior_q ? conditional_split(u + 1, v1, v2, q, q) : std::vector<double>{};
    const int lo_now = std::max(0, u - v2), lo_next = std::max(0, u + 1 - v2);
    auto dn = [&](const std::vector<double>& v, int lo, int l) {
      const int i = l - lo;
      return i >= 0 && i < static_cast<int>(v.size()) ? v[static_cast<std::size_t>(i)] : 0.0;
    };
    for (int l = std::max(0, u - v2) + 1; l <= std::min(u, v1); ++l) {
      const Rational a = cond(l - 1, u), b = cond(l, u), c = cond(l, u + 1);
      if (a < 0 || c < 0) continue;  // conditioning event has probability zero
      ++r.cases;
      const Rational lhs = Rational(v1 - l + 1) / denom * a + Rational(v2 - u + l) / denom * b;
      if (lhs != c) exact_ok = false;
      if (interior_q) {
        const double dl = (v1 - l + 1.0) / (v1 + v2 - u) * dn(now, lo_now, l - 1) +
                          (v2 - u + l + 0.0) / (v1 + v2 - u) * dn(now, lo_now, l);
        r.max_residual = std::max(r.max_residual, std::abs(dl - dn(next, lo_next, l)));
      }
    }
    if (u < v2) {
      const Rational a = cond(0, u), c = cond(0, u + 1);
      if (a < 0 || c < 0) continue;
      ++r.cases;
      if (Rational(v2 - u) / denom * a != c) exact_ok = false;
      if (interior_q) {
        const double dl = (v2 - u + 0.0) / (v1 + v2 - u) * dn(now, lo_now, 0);
        r.max_residual = std::max(r.max_residual, std::abs(dl - dn(next, lo_next, 0)));
      }
    }
  }
  if (!exact_ok) {
    r.max_residual = std::max(r.max_residual, 1.0);
    r.note = "exact rational identity failed";
  } else if (r.cases == 0) {
    r.note = "vacuous: every conditioning event has probability zero";
  } else {
    r.note = "exact rational identity holds";
  }
  r.passed = exact_ok && r.max_residual <= r.tolerance;
  return r;
}

CheckReport verify_combined_A3(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& p1,
                               const TripletPattern& p2, int n, WeightMode mode, const OracleOptions& opt) {
  if (p1.a == p2.a && p1.b == p2.b) throw DomainError("combined patterns need (A1,B1) != (A2,B2)");
  const Model m = make_model(p.alphabet(), n, opt);
  const double q1 = q_of(p, p1), q2 = q_of(p, p2);
  const bool equal = std::abs(q1 - q2) <= 1e-12;
  if (mode == WeightMode::equal_q && !equal) {
    throw UnequalQ("q1 = " + std::to_string(q1) + ", q2 = " + std::to_string(q2));
  }
  const bool use_equal = mode == WeightMode::equal_q || (mode == WeightMode::automatic && equal);
  if (opt.exact && !use_equal) throw Unsupported("exact mode supports equal-q weights only");
  const WeightRule rule = use_equal ? equal_q_rule() : general_q_rule(q1, q2);
  CheckReport r;
  try {
    r = opt.exact ? run_combined(m, rational_chain_of(p), p1, p2, rule, opt)
                  : run_combined(m, chain_of(p, pi), p1, p2, rule, opt);
  } catch (const Infeasible& e) {
    r.check = "combined_A3";
    r.n = n;
    r.tolerance = 1e-10;
    r.max_residual = 1;
    r.passed = false;
    r.note = std::string("general-q weights infeasible: ") + e.what();
    r.model = p.label();
    return r;
  }
  r.model = p.label();
  r.note = use_equal ? "equal-q weights" : "general-q weights (q1 != q2)";
  return r;
}

CheckReport verify_expected_gain(const TransitionMatrix& p, const StationaryDist& pi, const TripletPattern& t, int n,
                                 const ScoringScheme& scheme, const OracleOptions& opt) {
  OracleOptions o = opt;
  o.exact = false;
  const Model m = make_model(p.alphabet(), n, o);
  const std::vector<double> prob = sequence_probs(m, chain_of(p, pi), opt.workers);
  CheckReport r;
  r.check = "expected_gain";
  r.model = p.label();
  r.n = n;
  r.tolerance = 1e-12;
  const auto d = static_cast<std::uint16_t>(t.d.index(m.k));
  for (std::uint64_t code = 0; code < m.count; ++code) {
    if (prob[code] == 0) continue;
    ChainSample z;
    z.alphabet = m.k;
    z.states = decode_sequence(code, m.k, n);
    const std::vector<std::size_t> js = eligible_positions(z, t);
    if (js.empty()) continue;
    ++r.cases;
    // Brute force over R's uniform choice with the reference DP.
    const double base = score(z.xs(), z.ys(), scheme);
    double total = 0;
    for (std::size_t j : js) {
      ChainSample w = z;
      w.states[3 * j + 1] = d;
      total += score(w.xs(), w.ys(), scheme) - base;
    }
    const double brute = total / static_cast<double>(js.size());
    const double res = std::abs(brute - expected_gain(z, t, scheme));
    if (res > r.max_residual) {
      r.max_residual = res;
      std::ostringstream s;
      s << "code=" << code;
      r.worst_case = s.str();
    }
  }
  r.passed = r.max_residual <= r.tolerance;
  return r;
}

}  // namespace pmc
