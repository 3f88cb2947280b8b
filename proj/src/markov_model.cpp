#include "pmc/markov_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmc/linalg.hpp"
#include "pmc/rng.hpp"

namespace pmc {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kEntryTol = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Entries within kEntryTol of [0,1] are snapped onto it; anything further
// out is an error.
void snap_entries(std::vector<double>& entries, const char* what) {
  for (double& v : entries) {
    if (v < -kEntryTol || v > 1.0 + kEntryTol || !std::isfinite(v)) {
      throw DomainError(std::string(what) + ": entry " + fmt(v) + " outside [0,1]");
    }
    v = std::clamp(v, 0.0, 1.0);
  }
}

}  // namespace

TransitionMatrix::TransitionMatrix(int alphabet, std::vector<double> entries, std::string label)
    : k_(alphabet), p_(std::move(entries)), label_(std::move(label)) {
  if (k_ < 2) throw DomainError("alphabet size must be >= 2, got " + std::to_string(k_));
  const std::size_t s = static_cast<std::size_t>(states());
  if (p_.size() != s * s) {
    throw DomainError("expected " + std::to_string(s * s) + " entries, got " + std::to_string(p_.size()));
  }
  for (std::size_t i = 0; i < s; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < s; ++j) {
      const double v = p_[i * s + j];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw DomainError("negative or non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowTol) {
      throw DomainError("row " + std::to_string(i) + " sums to " + fmt(sum));
    }
  }
}

std::vector<double> TransitionMatrix::power(unsigned m) const {
  return linalg::power(p_, static_cast<std::size_t>(states()), m);
}

double StationaryDist::residual(const TransitionMatrix& p) const {
  const int s = p.states();
  double worst = 0;
  for (int j = 0; j < s; ++j) {
    double acc = 0;
    for (int i = 0; i < s; ++i) acc += probs[i] * p(i, j);
    worst = std::max(worst, std::abs(acc - probs[j]));
  }
  return worst;
}

std::vector<Letter> ChainSample::xs() const {
  std::vector<Letter> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = static_cast<Letter>(states[i] / alphabet);
  return out;
}

std::vector<Letter> ChainSample::ys() const {
  std::vector<Letter> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = static_cast<Letter>(states[i] % alphabet);
  return out;
}

std::vector<int> display_order(int alphabet) {
  std::vector<int> order(static_cast<std::size_t>(alphabet * alphabet));
  for (int i = 0; i < alphabet * alphabet; ++i) order[i] = alphabet * alphabet - 1 - i;
  return order;
}

std::string state_name(int index, int alphabet) {
  const PairState s = PairState::from_index(index, alphabet);
  return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

TransitionMatrix from_display(const std::vector<double>& table, std::string label) {
  if (table.size() != 16) throw DomainError("display table must be 4x4");
  std::vector<double> entries(table);
  snap_entries(entries, label.c_str());
  const std::vector<int> order = display_order(2);
  std::vector<double> flat(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) flat[order[a] * 4 + order[b]] = entries[a * 4 + b];
  }
  return TransitionMatrix(2, std::move(flat), std::move(label));
}

TransitionMatrix build_general(const MarginalParams& m) {
  for (auto [name, v] : {std::pair{"p", m.p}, {"q", m.q}, {"p'", m.p_prime}, {"q'", m.q_prime}}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConstraintViolation(std::string(name) + " = " + fmt(v) + " not in [0,1]");
  }
  auto check = [](const char* name, double value, double target, double marginal) {
    if (marginal <= 0.0) return;  // the parameter multiplies a zero row
    const double lo = std::max((target + marginal - 1.0) / marginal, 0.0);
    const double hi = std::min(target / marginal, 1.0);
    if (value < lo - kEntryTol || value > hi + kEntryTol) {
      throw ConstraintViolation(std::string(name) + " = " + fmt(value) + " not in [" + fmt(lo) + ", " + fmt(hi) + "]");
    }
  };
  check("lambda1", m.lambda1, m.p_prime, m.p);
  check("lambda2", m.lambda2, m.q_prime, m.p);
  check("mu1", m.mu1, m.p_prime, m.q);
  check("mu2", m.mu2, m.q_prime, m.q);

  const double p = m.p, q = m.q, pp = m.p_prime, qp = m.q_prime;
  const std::vector<double> table = {
      p * m.lambda1, p * (1 - m.lambda1), pp - p * m.lambda1, 1 + p * m.lambda1 - pp - p,
      p * m.lambda2, p * (1 - m.lambda2), qp - p * m.lambda2, 1 + p * m.lambda2 - qp - p,
      q * m.mu1,     q * (1 - m.mu1),     pp - q * m.mu1,     1 + q * m.mu1 - pp - q,
      q * m.mu2,     q * (1 - m.mu2),     qp - q * m.mu2,     1 + q * m.mu2 - qp - q,
  };
  return from_display(table, "general");
}

TransitionMatrix build_ind(double p, double q) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("p = " + fmt(p) + " not in (0,1)");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q = " + fmt(q) + " not in (0,1)");
  const double marginal[2][2] = {{p, 1 - p}, {q, 1 - q}};  // display order: letter 1, letter 0
  std::vector<double> table(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) table[a * 4 + b] = marginal[a / 2][b / 2] * marginal[a % 2][b % 2];
  }
  return from_display(table, "ind");
}

TransitionMatrix build_max(double p, double q, double eps) {
  if (p < q) throw DomainError("build_max requires p >= q");
  const double e = eps;
  return from_display({p - e, e, e, 1 - p - e,
                       q, p - q, 0, 1 - p,
                       q, 0, p - q, 1 - p,
                       q - e, e, e, 1 - q - e},
                      "max");
}

TransitionMatrix build_min(double p, double q, double eps) {
  if (p + q <= 1.0) throw Unsupported("no minimal-dependence matrix is defined for p + q <= 1");
  const double e = eps;
  std::vector<double> table = {2 * p - 1 + e, 1 - p - e, 1 - p - e, e,
                               p + q - 1, 1 - q, 1 - p, 0,
                               p + q - 1, 1 - p, 1 - q, 0,
                               2 * q - 1 + e, 1 - q - e, 1 - q - e, e};
  if (q < 0.5) {
    table[12] = e;
    table[13] = q - e;
    table[14] = q - e;
    table[15] = 1 - 2 * q + e;
  }
  return from_display(table, "min");
}

TransitionMatrix build_uniform(int alphabet) {
  const std::size_t s = static_cast<std::size_t>(alphabet) * alphabet;
  return TransitionMatrix(alphabet, std::vector<double>(s * s, 1.0 / static_cast<double>(s)), "uniform");
}

std::vector<int> coordinate_partition(int alphabet, Coordinate c) {
  std::vector<int> blocks(static_cast<std::size_t>(alphabet * alphabet));
  for (int i = 0; i < alphabet * alphabet; ++i) {
    const PairState s = PairState::from_index(i, alphabet);
    blocks[i] = c == Coordinate::X ? s.x : s.y;
  }
  return blocks;
}

LumpResult check_lumpable(const TransitionMatrix& p, std::span<const int> partition, double tol) {
  const int s = p.states();
  if (static_cast<int>(partition.size()) != s) throw DomainError("partition must label every state");
  LumpResult result;
  result.blocks = *std::max_element(partition.begin(), partition.end()) + 1;
  const int nb = result.blocks;
  std::vector<double> lumped(static_cast<std::size_t>(nb * nb), -1.0);
  std::vector<bool> seen(static_cast<std::size_t>(nb), false);
  for (int x = 0; x < s; ++x) {
    if (partition[x] < 0) throw DomainError("negative block id");
    seen[partition[x]] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw DomainError("partition has an empty block");

  for (int x = 0; x < s; ++x) {
    std::vector<double> into(static_cast<std::size_t>(nb), 0.0);
    for (int y = 0; y < s; ++y) into[partition[y]] += p(x, y);
    const int i = partition[x];
    for (int j = 0; j < nb; ++j) {
      double& slot = lumped[static_cast<std::size_t>(i * nb + j)];
      if (slot < 0) {
        slot = into[j];
      } else if (std::abs(slot - into[j]) > tol) {
        result.bad_state = x;
        result.bad_block = j;
        result.deviation = into[j] - slot;
        return result;
      }
    }
  }
  result.lumpable = true;
  result.lumped = std::move(lumped);
  return result;
}

bool is_irreducible(const TransitionMatrix& p) {
  const int s = p.states();
  auto reach_all = [&](bool forward) {
    std::vector<bool> seen(static_cast<std::size_t>(s), false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < s; ++v) {
        const double w = forward ? p(u, v) : p(v, u);
        if (w > 0 && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reach_all(true) && reach_all(false);
}

StationaryDist stationary(const TransitionMatrix& p) {
  if (!is_irreducible(p)) throw NotIrreducible("matrix '" + p.label() + "' is not irreducible");
  StationaryDist pi;
  if (!linalg::solve_stationary(p.entries(), static_cast<std::size_t>(p.states()), pi.probs)) {
    throw NotIrreducible("singular stationary system for '" + p.label() + "'");
  }
  double total = 0;
  for (double& v : pi.probs) {
    v = std::max(v, 0.0);
    total += v;
  }
  for (double& v : pi.probs) v /= total;
  return pi;
}

ChainSample sample_chain(const TransitionMatrix& p, const StationaryDist& pi, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("chain length must be >= 1");
  const int s = p.states();
  if (static_cast<int>(pi.probs.size()) != s) throw DomainError("stationary vector has wrong size");

  // Cumulative tables; the last positive entry of each row absorbs rounding.
  auto cumulative = [s](std::span<const double> w) {
    std::vector<double> c(static_cast<std::size_t>(s));
    double acc = 0;
    int last = 0;
    for (int j = 0; j < s; ++j) {
      acc += w[j];
      c[j] = acc;
      if (w[j] > 0) last = j;
    }
    for (int j = last; j < s; ++j) c[j] = 2.0;
    return c;
  };
  auto draw = [s](const std::vector<double>& c, double u) {
    int j = 0;
    while (j < s - 1 && u >= c[j]) ++j;
    return j;
  };

  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) rows.push_back(cumulative(p.row(i)));
  const std::vector<double> init = cumulative(pi.probs);

  Philox rng(seed);
  ChainSample out;
  out.alphabet = p.alphabet();
  out.seed = seed;
  out.label = p.label();
  out.states.resize(n);
  int state = draw(init, rng.uniform01());
  out.states[0] = static_cast<std::uint16_t>(state);
  for (std::size_t t = 1; t < n; ++t) {
    state = draw(rows[static_cast<std::size_t>(state)], rng.uniform01());
    out.states[t] = static_cast<std::uint16_t>(state);
  }
  return out;
}

Primitivity primitivity_index(const TransitionMatrix& p) {
  const std::size_t s = static_cast<std::size_t>(p.states());
  const unsigned cap = static_cast<unsigned>(s * s);  // k^4, above Wielandt's (s-1)^2 + 1
  std::vector<char> pattern(s * s);
  for (std::size_t i = 0; i < s * s; ++i) pattern[i] = p.entries()[i] > 0 ? 1 : 0;
  std::vector<char> current = pattern;
  for (unsigned m = 1; m <= cap; ++m) {
    if (std::all_of(current.begin(), current.end(), [](char c) { return c != 0; })) {
      const std::vector<double> pm = p.power(m);
      return {m, *std::min_element(pm.begin(), pm.end())};
    }
    std::vector<char> next(s * s, 0);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t l = 0; l < s; ++l) {
        if (!current[i * s + l]) continue;
        for (std::size_t j = 0; j < s; ++j) next[i * s + j] |= pattern[l * s + j];
      }
    }
    current = std::move(next);
  }
  throw NotPrimitive("no power P^m with m <= " + std::to_string(cap) + " is strictly positive");
}

MixingBound mixing_time_bound(const TransitionMatrix& p, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
  MixingBound b;
  b.primitivity = primitivity_index(p);
  const double k = p.alphabet();
  b.contraction = 1.0 - k * k * b.primitivity.min_entry;
  if (b.contraction <= 0.0) {
    throw DomainError("1 - |A|^2 p_o = " + fmt(b.contraction) + " <= 0: the chain mixes exactly");
  }
  const double m = b.primitivity.lag;
  b.rho = std::pow(b.contraction, 1.0 / m);
  b.c = b.primitivity.lag == 1 ? 1.0 : 1.0 / b.contraction;
  const double log_rho = std::log(b.rho);
  b.t_eps = (std::log(eps) - std::log(b.c)) / log_rho;
  b.t_mix = -(std::log(4.0) + std::log(b.c)) / log_rho;
  if (b.t_eps <= 0.0) {
    b.clamped = true;
    b.warning = "t(eps) bound " + fmt(b.t_eps) + " <= 0; clamped to 1";
    b.t_eps = 1.0;
  }
  return b;
}

}  // namespace pmc
