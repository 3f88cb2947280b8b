// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/experiments.hpp"
#include "pmc/markov_model.hpp"
#include "pmc/oracle.hpp"
#include "pmc/parallel.hpp"
#include "pmc/rng.hpp"

using namespace pmc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 20240101;
const PairState S11{1, 1}, S10{1, 0}, S01{0, 1};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << " ["
            << fmt(secs, 3) << " s]" << std::endl;
}

TransitionMatrix max_model() { return build_max(0.9, 0.7, 0.05); }
TransitionMatrix min_model() { return build_min(0.7, 0.7, 0.05); }
TransitionMatrix ind_model() { return build_ind(0.7, 0.7); }

std::vector<Letter> random_letters(Philox& g, std::size_t n) {
  std::vector<Letter> v(n);
  for (auto& a : v) a = static_cast<Letter>(g.uniform_below(2));
  return v;
}

// Shared between criteria 7 and 9.
std::optional<double> eps_from_c7;

Outcome c7_em() {
  EmConfig c;
  c.model = max_model();
  c.patterns = {TripletPattern::uniform(S11)};
  c.grid = {100, 3000, 100};
  c.n_chains = 3;
  c.seed = kSeed;
  c.workers = default_workers();
  const auto rec = run_em(c);

  std::map<std::size_t, std::vector<double>> by_m;
  for (const auto& r : rec)
    if (r.m >= 2000) by_m[r.m].push_back(r.e_m);
  double lo = 1e9, hi = -1e9, spread = 0;
  bool complete = true;
  for (const auto& [m, v] : by_m) {
    complete = complete && v.size() == 3;
    const auto [a, b] = std::minmax_element(v.begin(), v.end());
    lo = std::min(lo, *a);
    hi = std::max(hi, *b);
    spread = std::max(spread, *b - *a);
  }
  const auto e = estimate_eps_o(rec);
  if (e.sign > 0 && !e.inconclusive) eps_from_c7 = e.eps_o;
  const bool pass = complete && !by_m.empty() && lo >= 0.30 && hi <= 0.50 && spread <= 0.1;
  return {pass, "E(m), m>=2000: [" + fmt(lo) + ", " + fmt(hi) + "], max chain spread " + fmt(spread) +
                    ", eps_o " + fmt(e.eps_o)};
}

Outcome c8_combined() {
  // Full-scale grid (m to 7500, one chain) and the tail mean over the last
  // quarter; the pointwise range is printed for reference.
  std::string detail;
  bool pass = true;
  for (const auto& model : {ind_model(), min_model()}) {
    EmConfig c;
    c.model = model;
    c.patterns = {TripletPattern::uniform(S10), TripletPattern::uniform(S01)};
    c.grid = {100, 7500, 100};
    c.n_chains = 1;
    c.seed = kSeed;
    c.workers = default_workers();
    const auto rec = run_em_combined(c);
    const std::size_t from = 5700;
    double sum = 0, lo = 1e9, hi = -1e9;
    std::size_t count = 0;
    for (const auto& r : rec) {
      if (r.m < from) continue;
      sum += r.e_m;
      lo = std::min(lo, r.e_m);
      hi = std::max(hi, r.e_m);
      ++count;
    }
    const double mean = count ? sum / static_cast<double>(count) : NAN;
    const bool ok = count > 0 && mean >= -0.55 && mean <= -0.25;
    pass = pass && ok;
    detail += model.label() + " tail mean " + fmt(mean) + " (m>=" + std::to_string(from) + ", pointwise [" + fmt(lo) +
              ", " + fmt(hi) + "]); ";
  }
  return {pass, detail};
}

Outcome c9_variance() {
  if (!eps_from_c7) return {false, "no conclusive eps_o from criterion 7"};
  VarianceConfig c;
  c.model = max_model();
  c.n_grid = {300, 600, 1200, 2400};
  c.replicates = 200;
  c.seed = kSeed;
  c.workers = default_workers();
  c.eps_o = *eps_from_c7;
  const auto rows = variance_scan(c);
  bool sandwich = true;
  std::string detail;
  double sxy = 0, sxx = 0, mean_v = 0;
  for (const auto& r : rows) {
    sandwich = sandwich && r.a_o_n <= r.var && r.var <= r.c2_n;
    const double n = static_cast<double>(r.n);
    sxy += n * r.var;
    sxx += n * n;
    mean_v += r.var / static_cast<double>(rows.size());
    detail += "n=" + std::to_string(r.n) + " var " + fmt(r.var) + " in [" + fmt(r.a_o_n) + ", " + fmt(r.c2_n) + "]; ";
  }
  const double slope = sxy / sxx;
  double ss_res = 0, ss_tot = 0;
  for (const auto& r : rows) {
    const double fit = slope * static_cast<double>(r.n);
    ss_res += (r.var - fit) * (r.var - fit);
    ss_tot += (r.var - mean_v) * (r.var - mean_v);
  }
  const double r2 = 1 - ss_res / ss_tot;
  detail += "slope " + fmt(slope) + ", R^2 " + fmt(r2);
  return {sandwich && slope > 0 && r2 >= 0.9, detail};
}

Outcome c10_tails() {
  const std::vector<double> k_grid{0.5, 1, 1.5, 2, 3, 4, 6};
  bool pass = true;
  std::string detail;
  for (const auto& model : {max_model(), ind_model()}) {
    const auto v = tail_check_V(model, TripletPattern::uniform(S11), 900, k_grid, 10000, derive_seed(kSeed, 1),
                                default_workers());
    pass = pass && v.all_dominated;
    detail += "V " + model.label() + ": dominated=" + (v.all_dominated ? "yes" : "no") + " (" +
              std::to_string(v.applicable_points) + "/" + std::to_string(v.points.size()) + " non-trivial); ";
  }
  const auto l = mcdiarmid_tail_check(max_model(), ScoringScheme::lcs(2), 900, 10000, derive_seed(kSeed, 2), {},
                                      default_workers());
  pass = pass && l.all_dominated;
  double worst = 0;
  for (const auto& p : l.points) worst = std::max(worst, p.bound > 0 ? p.empirical / p.bound : 0.0);
  detail += "L: dominated=" + std::string(l.all_dominated ? "yes" : "no") + ", max empirical/bound " + fmt(worst);
  return {pass, detail};
}

Outcome c11_kernels() {
  // Exhaustive binary pairs with n <= 10.
  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    std::vector<Letter> x(n), y(n);
    for (std::uint32_t a = 0; a < (1U << n); ++a) {
      for (std::size_t i = 0; i < n; ++i) x[i] = (a >> i) & 1U;
      for (std::uint32_t b = 0; b < (1U << n); ++b) {
        for (std::size_t i = 0; i < n; ++i) y[i] = (b >> i) & 1U;
        ++pairs;
        if (lcs_fast(x, y, 2) != lcs(x, y)) ++mismatches;
      }
    }
  }
  Philox g(derive_seed(kSeed, 11));
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + g.uniform_below(2000);
    const auto x = random_letters(g, n), y = random_letters(g, n);
    if (lcs_fast(x, y, 2) != lcs(x, y)) ++mismatches;
  }

  // 1e5 substitutions on chains from the max model.
  const auto model = max_model();
  const auto pi = stationary(model);
  std::size_t subs = 0, outside = 0, naive_checked = 0, naive_mismatch = 0;
  std::map<long, std::size_t> hist;
  for (std::uint64_t chain = 0; chain < 100; ++chain) {
    const auto z = sample_chain(model, pi, 900, derive_seed(kSeed, 1000 + chain));
    const auto xs = z.xs(), ys = z.ys();
    const LcsCheckpoints ck(xs, ys, 2);
    const auto base = ck.lcs(z.size());
    std::vector<std::pair<std::size_t, std::uint16_t>> picks(1000);
    for (auto& [t, s] : picks) {
      t = g.uniform_below(z.size());
      s = static_cast<std::uint16_t>(g.uniform_below(4));
    }
    std::sort(picks.begin(), picks.end());
    LcsCursor cursor;
    for (const auto& [t, s] : picks) {
      const auto pair = PairState::from_index(s, 2);
      const auto after = ck.lcs_with_substitution(z.size(), t, pair.x, pair.y, &cursor);
      const long r = static_cast<long>(after - base);
      ++hist[r];
      ++subs;
      if (r < -2 || r > 2) ++outside;
      if (subs % 1000 == 1) {
        auto x2 = xs, y2 = ys;
        x2[t] = pair.x;
        y2[t] = pair.y;
        ++naive_checked;
        if (lcs(x2, y2) != after) ++naive_mismatch;
        if (score_with_substitution(z, t, pair, ScoringScheme::lcs(2)) != static_cast<double>(after)) ++naive_mismatch;
      }
    }
  }
  std::string h;
  for (const auto& [r, c] : hist) h += std::to_string(r) + ":" + std::to_string(c) + " ";
  return {mismatches == 0 && outside == 0 && naive_mismatch == 0,
          std::to_string(pairs) + " exhaustive + 1000 random pairs, " + std::to_string(mismatches) + " mismatches; " +
              std::to_string(subs) + " substitutions, " + std::to_string(outside) + " outside [-2,2], " +
              std::to_string(naive_mismatch) + "/" + std::to_string(naive_checked) + " naive mismatches; r counts " +
              h};
}

// Criterion 12: each subcommand is run with --workers 1, then rerun from its
// own manifest with --workers 4 into another directory.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(PMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c12_determinism() {
  const fs::path root = fs::temp_directory_path() / ("pmc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> cases{
      {"matrices", "matrices"},
      {"align", "align 1101001110 1001011101"},
      {"bounds", "bounds --eps-o 0.39"},
      {"verify", "verify"},
      {"simulate-em", "simulate-em --m-stop 900"},
      {"simulate-em-combined", "simulate-em-combined --m-stop 900"},
      {"variance", "variance --n-grid 300,600 --replicates 40"},
      {"tails", "tails --n 300 --trials 1000"},
  };
  std::string bad;
  for (const auto& [sub, args] : cases) {
    const fs::path a = root / sub / "w1", b = root / sub / "w4";
    for (const auto* fmt_name : {"csv", "json"}) {
      const fs::path da = a / fmt_name, db = b / fmt_name;
      const int ra = run_cli("--workers 1 --format " + std::string(fmt_name) + " --output-dir " + da.string() + " " + args);
      const fs::path manifest = da / (sub + ".manifest.json");
      const int rb = run_cli("--workers 4 --output-dir " + db.string() + " --config " + manifest.string());
      const fs::path out = sub + "." + fmt_name;
      bool same = ra == 0 && rb == 0 && fs::exists(da / out) && slurp(da / out) == slurp(db / out);
      if (same) {
        auto ma = nlohmann::json::parse(slurp(manifest));
        auto mb = nlohmann::json::parse(slurp(db / (sub + ".manifest.json")));
        ma.erase("runtime");
        mb.erase("runtime");
        same = ma == mb;
      }
      if (!same) bad += sub + "/" + fmt_name + " ";
    }
  }
  fs::remove_all(root);
  return {bad.empty(), bad.empty() ? "8 subcommands x {csv,json}: outputs and manifests identical across workers 1/4"
                                   : "differences: " + bad};
}

}  // namespace

int main() {
  std::cout << "seed " << kSeed << ", workers " << default_workers() << std::endl;

  report(1, "stationary max", [] {
    const double v = stationary(max_model()).probs[S11.index(2)];
    return Outcome{std::abs(v - 0.819) <= 0.001, "P((1,1)) = " + fmt(v)};
  });

  report(2, "stationary min", [] {
    const double v = stationary(min_model()).probs[S01.index(2)];
    return Outcome{std::abs(v - 0.28) <= 0.005, "P((0,1)) = " + fmt(v)};
  });

  report(3, "A3 exactness", [] {
    double worst = 0;
    std::size_t cases = 0;
    OracleOptions opt;
    opt.workers = default_workers();
    for (const auto& model : {ind_model(), max_model(), min_model()}) {
      for (int n : {6, 9}) {
        const auto r = verify_A3(model, stationary(model), TripletPattern::uniform(S11), n, opt);
        worst = std::max(worst, r.max_residual);
        cases += r.cases;
      }
    }
    return Outcome{worst <= 1e-10, "max TV " + fmt(worst) + " over " + std::to_string(cases) + " (u,v) cases"};
  });

  report(4, "combined A3", [] {
    double worst = 0;
    std::size_t cases = 0;
    OracleOptions opt;
    opt.workers = default_workers();
    for (const auto& model : {ind_model(), max_model(), min_model()}) {
      const auto r = verify_combined_A3(model, stationary(model), TripletPattern::uniform(S10),
                                        TripletPattern::uniform(S01), 9, WeightMode::equal_q, opt);
      worst = std::max(worst, r.max_residual);
      cases += r.cases;
    }
    return Outcome{worst <= 1e-10, "max TV " + fmt(worst) + " over " + std::to_string(cases) + " cases, n=9"};
  });

  report(5, "propositions", [] {
    double bern = 0, binom = 0;
    for (double p : {0.3, 0.5, 0.7})
      for (int m = 1; m <= 8; ++m) bern = std::max(bern, verify_bernoulli_proposition(m, p).max_residual);
    for (double q : {0.2, 0.5, 0.8})
      for (int v1 = 0; v1 <= 12; ++v1)
        for (int v2 = 0; v1 + v2 <= 12; ++v2) binom = std::max(binom, verify_binomial_identity(v1, v2, q).max_residual);
    return Outcome{bern <= 1e-13 && binom <= 1e-13, "Bernoulli residual " + fmt(bern) + ", binomial " + fmt(binom)};
  });

  report(6, "local CLT", [] {
    bool pass = true;
    std::string detail;
    for (int i = 1; i <= 9; ++i) {
      const double q = i / 10.0;
      const auto s = local_clt_sweep(q, 1.0, b_of_q(q) * (1 + 1e-9), 1, 10000);
      const bool ok = s.m_o <= 100;
      pass = pass && ok;
      detail += "q=" + fmt(q, 2) + " m_o=" + (s.m_o > 10000 ? std::string("none") : std::to_string(s.m_o));
      if (!ok) {
        const auto tail = local_clt_sweep(q, 1.0, b_of_q(q) * (1 + 1e-9), 100, 10000);
        detail += " (x" + fmt(tail.needed_multiplier, 4) + " on b needed from m=100)";
      }
      detail += "; ";
    }
    return Outcome{pass, detail};
  });

  report(7, "E(m) max (1,1)", c7_em);
  report(8, "combined E(m) sign", c8_combined);
  report(9, "variance sandwich", c9_variance);
  report(10, "concentration domination", c10_tails);
  report(11, "kernel equivalence", c11_kernels);
  report(12, "determinism", c12_determinism);

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
