#include "pmc/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "pmc/parallel.hpp"
#include "pmc/rng.hpp"

namespace pmc {

namespace {

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad number '" + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

// Shortest text that reads back to the same double.
std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double score_chain(const ChainSample& z, const ScoringScheme& scheme) { return score(z, scheme); }

std::vector<Substitution> subsample(std::vector<Substitution> subs, std::size_t keep, std::uint64_t seed) {
  if (keep == 0 || subs.size() <= keep) return subs;
  Philox rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + rng.uniform_below(subs.size() - i);
    std::swap(subs[i], subs[j]);
  }
  subs.resize(keep);
  std::sort(subs.begin(), subs.end());
  return subs;
}

void validate(const EmConfig& c) {
  if (c.grid.step < 1) throw ConfigError("m grid step must be >= 1");
  if (c.grid.start < 1 || c.grid.stop < c.grid.start) throw ConfigError("m grid needs 1 <= start <= stop");
  if (c.n_chains < 1) throw ConfigError("need at least one chain");
  if (c.patterns.empty() || c.patterns.size() > 2) throw ConfigError("one or two patterns expected");
  if (c.scheme.alphabet != c.model.alphabet()) throw ConfigError("scoring alphabet differs from the model alphabet");
  for (const auto& t : c.patterns) q_of(c.model, t);  // feasibility
}

std::vector<EmRecord> em_core(const EmConfig& c) {
  validate(c);
  const StationaryDist pi = stationary(c.model);
  const std::vector<std::size_t> ms = c.grid.values();
  const std::size_t length = 3 * c.grid.stop;

  std::vector<std::unique_ptr<GainEvaluator>> evals(c.n_chains);
  std::vector<ChainSample> chains(c.n_chains);
  parallel_for(c.n_chains, c.workers, [&](std::size_t id) {
    chains[id] = sample_chain(c.model, pi, length, derive_seed(c.seed, id));
    evals[id] = std::make_unique<GainEvaluator>(chains[id], c.scheme);
  });

  std::vector<std::optional<EmRecord>> slots(c.n_chains * ms.size());
  parallel_for(slots.size(), c.workers, [&](std::size_t task) {
    const std::size_t id = task / ms.size();
    const std::size_t m = ms[task % ms.size()];
    std::vector<Substitution> subs;
    for (const auto& t : c.patterns) {
      const auto s = eligible_substitutions(chains[id], t, m);
      subs.insert(subs.end(), s.begin(), s.end());
    }
    if (subs.empty()) return;
    std::sort(subs.begin(), subs.end());
    subs = subsample(std::move(subs), c.subsample, derive_seed(chains[id].seed, m));
    const GainSum g = evals[id]->gains(3 * m, subs);
    slots[task] = EmRecord{id, m, g.count, g.mean(), chains[id].seed};
  });

  std::vector<EmRecord> out;
  for (const auto& s : slots) {
    if (s) out.push_back(*s);
  }
  return out;
}

double quantile_sorted(const std::vector<double>& xs, double q) {
  const double h = (static_cast<double>(xs.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace

ModelSpec ModelSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  ModelSpec s;
  s.kind = text.substr(0, colon);
  if (colon != std::string::npos) s.params = parse_numbers(text.substr(colon + 1), "model '" + text + "'");
  const auto n = s.params.size();
  if (s.kind == "max" || s.kind == "min") {
    if (n == 2) s.params.push_back(0.05);
    if (s.params.size() != 3) throw ConfigError(s.kind + " needs p,q[,eps]");
  } else if (s.kind == "ind") {
    if (n != 2) throw ConfigError("ind needs p,q");
  } else if (s.kind == "uniform") {
    if (n == 0) s.params.push_back(2);
    if (s.params.size() != 1) throw ConfigError("uniform needs k");
  } else if (s.kind == "general") {
    if (n != 8) throw ConfigError("general needs p,q,p',q',lambda1,lambda2,mu1,mu2");
  } else {
    throw ConfigError("unknown model kind '" + s.kind + "'");
  }
  return s;
}

std::string ModelSpec::str() const {
  std::string out = kind + ":";
  for (std::size_t i = 0; i < params.size(); ++i) out += (i ? "," : "") + format_number(params[i]);
  return out;
}

TransitionMatrix ModelSpec::build() const {
  TransitionMatrix m;
  if (kind == "max") {
    m = build_max(params[0], params[1], params[2]);
  } else if (kind == "min") {
    m = build_min(params[0], params[1], params[2]);
  } else if (kind == "ind") {
    m = build_ind(params[0], params[1]);
  } else if (kind == "uniform") {
    const double k = params[0];
    if (k != std::floor(k) || k < 1 || k > 16) throw ConfigError("uniform alphabet must be an integer in [1,16]");
    m = build_uniform(static_cast<int>(k));
  } else if (kind == "general") {
    m = build_general({params[0], params[1], params[2], params[3], params[4], params[5], params[6], params[7]});
  } else {
    throw ConfigError("unknown model kind '" + kind + "'");
  }
  m.set_label(str());
  return m;
}

TripletPattern parse_pattern(const std::string& text) {
  std::vector<PairState> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '/')) {
    const auto v = parse_numbers(item, "pattern '" + text + "'");
    if (v.size() != 2 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] < 0 || v[1] < 0) {
      throw ConfigError("pattern state '" + item + "' must be x,y with integer letters");
    }
    parts.push_back({static_cast<int>(v[0]), static_cast<int>(v[1])});
  }
  if (parts.size() == 1) return TripletPattern::uniform(parts[0]);
  if (parts.size() == 3) return {parts[0], parts[1], parts[2]};
  throw ConfigError("pattern must be 'x,y' or 'ax,ay/bx,by/dx,dy'");
}

std::string pattern_str(const TripletPattern& t) {
  auto s = [](PairState p) { return std::to_string(p.x) + "," + std::to_string(p.y); };
  return s(t.a) + "/" + s(t.b) + "/" + s(t.d);
}

std::vector<std::size_t> MGrid::values() const {
  if (step < 1) throw ConfigError("m grid step must be >= 1");
  std::vector<std::size_t> v;
  for (std::size_t m = start; m <= stop; m += step) v.push_back(m);
  return v;
}

std::vector<EmRecord> run_em(const EmConfig& config) {
  if (config.patterns.size() != 1) throw ConfigError("run_em takes one pattern");
  return em_core(config);
}

std::vector<EmRecord> run_em_combined(const EmConfig& config) {
  if (config.patterns.size() != 2) throw ConfigError("run_em_combined takes two patterns");
  const TripletPattern &p1 = config.patterns[0], &p2 = config.patterns[1];
  if (p1.a == p2.a && p1.b == p2.b) throw ConfigError("combined patterns need (A1,B1) != (A2,B2)");
  const double q1 = q_of(config.model, p1), q2 = q_of(config.model, p2);
  if (std::abs(q1 - q2) > 1e-12) {
    throw UnequalQ("q1 = " + format_number(q1) + " differs from q2 = " + format_number(q2));
  }
  return em_core(config);
}

EpsEstimate estimate_eps_o(const std::vector<EmRecord>& records, double tail_fraction, double quantile) {
  if (records.empty()) throw InsufficientData("no E(m) records");
  if (!(tail_fraction > 0 && tail_fraction <= 1)) throw DomainError("tail fraction must lie in (0,1]");
  if (!(quantile >= 0 && quantile <= 1)) throw DomainError("quantile must lie in [0,1]");
  std::vector<std::size_t> ms;
  for (const auto& r : records) ms.push_back(r.m);
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  const auto keep = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(ms.size())));
  EpsEstimate e;
  e.tail_fraction = tail_fraction;
  e.quantile = quantile;
  e.tail_from_m = ms[ms.size() - std::max<std::size_t>(1, keep)];
  std::vector<double> mags, vals;
  for (const auto& r : records) {
    if (r.m < e.tail_from_m) continue;
    mags.push_back(std::abs(r.e_m));
    vals.push_back(r.e_m);
  }
  if (mags.empty()) throw InsufficientData("empty tail");
  std::sort(mags.begin(), mags.end());
  std::sort(vals.begin(), vals.end());
  e.tail_records = mags.size();
  e.eps_o = quantile_sorted(mags, quantile);
  const double med = quantile_sorted(vals, 0.5);
  e.sign = med > 0 ? 1 : (med < 0 ? -1 : 0);
  e.inconclusive = e.eps_o < 0.05;
  return e;
}

JackknifeVariance jackknife_variance(const std::vector<double>& xs) {
  const std::size_t r = xs.size();
  if (r < 2) throw DomainError("need at least two replicates");
  const double rd = static_cast<double>(r);
  const double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  JackknifeVariance j;
  j.mean = sum / rd;
  double ss = 0;
  for (double x : xs) ss += (x - j.mean) * (x - j.mean);
  j.var = ss / (rd - 1);
  // Leave-one-out variances via updated sums.
  std::vector<double> loo(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double s1 = sum - xs[i];
    const double m = s1 / (rd - 1);
    double v = 0;
    for (std::size_t k = 0; k < r; ++k) {
      if (k != i) v += (xs[k] - m) * (xs[k] - m);
    }
    loo[i] = r > 2 ? v / (rd - 2) : 0.0;
  }
  const double lm = std::accumulate(loo.begin(), loo.end(), 0.0) / rd;
  double d = 0;
  for (double v : loo) d += (v - lm) * (v - lm);
  const double se = std::sqrt((rd - 1) / rd * d);
  j.ci_lo = std::max(0.0, j.var - 1.96 * se);
  j.ci_hi = j.var + 1.96 * se;
  return j;
}

std::vector<VarianceRecord> variance_scan(const VarianceConfig& c) {
  if (c.replicates < 2) throw ConfigError("variance needs at least two replicates");
  if (c.n_grid.empty()) throw ConfigError("empty n grid");
  if (c.scheme.alphabet != c.model.alphabet()) throw ConfigError("scoring alphabet differs from the model alphabet");
  const StationaryDist pi = stationary(c.model);
  const std::size_t R = c.replicates;
  std::vector<double> scores(c.n_grid.size() * R);
  parallel_for(scores.size(), c.workers, [&](std::size_t task) {
    const std::size_t n = c.n_grid[task / R];
    const std::uint64_t s = derive_seed(derive_seed(c.seed, n), task % R);
    scores[task] = score_chain(sample_chain(c.model, pi, n, s), c.scheme);
  });
  std::vector<VarianceRecord> out;
  for (std::size_t g = 0; g < c.n_grid.size(); ++g) {
    const std::size_t n = c.n_grid[g];
    const std::vector<double> xs(scores.begin() + static_cast<std::ptrdiff_t>(g * R),
                                 scores.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    const JackknifeVariance j = jackknife_variance(xs);
    VarianceRecord rec{n, R, j.mean, j.var, j.ci_lo, j.ci_hi};
    if (c.eps_o) {
      rec.a_o_n = lower_bound_report(c.model, c.pattern, *c.eps_o, 2, static_cast<std::int64_t>(n)).a_o *
                  static_cast<double>(n);
    }
    rec.c2_n = upper_bound_report(c.model, c.scheme, 2, static_cast<std::int64_t>(n)).C_r * static_cast<double>(n);
    out.push_back(rec);
  }
  return out;
}

VTailReport tail_check_V(const TransitionMatrix& model, const TripletPattern& pattern, std::size_t n,
                         const std::vector<double>& k_grid, std::size_t trials, std::uint64_t seed,
                         unsigned workers, double b_o) {
  if (n < 3) throw DomainError("n must be >= 3");
  if (trials < 1) throw ConfigError("need at least one trial");
  const StationaryDist pi = stationary(model);
  const AlphaValue a = alpha_of(model, pi, pattern, static_cast<std::int64_t>(n));
  const XiDoeblin xi = xi_doeblin(model, pi);
  VTailReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.expected_v = a.alpha_n * static_cast<double>(n);
  rep.lambda = xi.lambda;
  rep.r = xi.r;
  rep.b_o = b_o;
  rep.K_b0 = choose_K(xi.lambda, xi.r, b_o);

  std::vector<std::int64_t> vs(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    vs[i] = count_uv(sample_chain(model, pi, n, derive_seed(seed, i)).states, model.alphabet(), pattern).v;
  });

  const double sn = std::sqrt(static_cast<double>(n));
  const double m = static_cast<double>(n / 3);
  auto frac_outside = [&](double k) {
    std::size_t c = 0;
    for (auto v : vs) c += std::abs(static_cast<double>(v) - rep.expected_v) > k * sn;
    return static_cast<double>(c) / static_cast<double>(trials);
  };
  rep.coverage = 1.0 - frac_outside(rep.K_b0);
  for (double k : k_grid) {
    TailPoint p;
    p.x = k;
    p.empirical = frac_outside(k);
    const double eps = k * sn / m;
    p.applicable = eps > 0 && m * eps > 2.0 * xi.r / xi.lambda;
    p.bound = p.applicable ? std::min(1.0, 2.0 * hoeffding_mc_bound(m, eps, xi.lambda, xi.r)) : 1.0;
    p.dominated = p.bound >= p.empirical;
    rep.all_dominated = rep.all_dominated && p.dominated;
    rep.applicable_points += p.applicable;
    rep.points.push_back(p);
  }
  return rep;
}

LTailReport mcdiarmid_tail_check(const TransitionMatrix& model, const ScoringScheme& scheme, std::size_t n,
                                 std::size_t trials, std::uint64_t seed, std::vector<double> s_grid,
                                 unsigned workers) {
  if (trials < 2) throw ConfigError("need at least two trials");
  const BoundReport ub = upper_bound_report(model, scheme, 2, static_cast<std::int64_t>(n));
  const StationaryDist pi = stationary(model);
  std::vector<double> ls(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    ls[i] = score_chain(sample_chain(model, pi, n, derive_seed(seed, i)), scheme);
  });
  const JackknifeVariance j = jackknife_variance(ls);
  LTailReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.mean = j.mean;
  rep.sd = std::sqrt(j.var);
  rep.F = ub.F;
  if (s_grid.empty()) {
    for (int i = 0; i <= 16; ++i) s_grid.push_back(0.5 * i * rep.sd);
    s_grid.push_back(static_cast<double>(n) * ub.delta + 1);
  }
  for (double s : s_grid) {
    TailPoint p;
    p.x = s;
    std::size_t c = 0;
    for (double l : ls) c += std::abs(l - rep.mean) >= s;
    p.empirical = static_cast<double>(c) / static_cast<double>(trials);
    p.bound = mcdiarmid_bound(s, static_cast<std::int64_t>(n), ub.F);
    p.dominated = p.bound >= p.empirical;
    rep.all_dominated = rep.all_dominated && p.dominated;
    rep.points.push_back(p);
  }
  return rep;
}

}  // namespace pmc
