#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/errors.hpp"
#include "pmc/experiments.hpp"
#include "pmc/markov_model.hpp"
#include "pmc/oracle.hpp"
#include "pmc/parallel.hpp"
#include "pmc/rng.hpp"

#ifndef PMC_VERSION
#define PMC_VERSION "0.0.0"
#endif

namespace pmc::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kDefaultModels = "max:0.9,0.7,0.05;min:0.7,0.7,0.05;ind:0.7,0.7";

// ---------------------------------------------------------------- formatting

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) {
    T v{};
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError("bad value '" + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json_file(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

// ------------------------------------------------------------ input loading

/// A model spec string ("max:0.9,0.7,0.05") or a JSON file {label, k, entries}.
TransitionMatrix load_model(const std::string& text) {
  if (text.ends_with(".json")) {
    Json j = parse_json_file(text);
    try {
      int k = j.at("k").get<int>();
      auto entries = j.at("entries").get<std::vector<double>>();
      return TransitionMatrix(k, std::move(entries), j.value("label", fs::path(text).stem().string()));
    } catch (const Json::exception& e) {
      throw ConfigError(text + ": " + e.what());
    }
  }
  return ModelSpec::parse(text).build();
}

Json matrix_json(const TransitionMatrix& p) {
  return Json{{"label", p.label()}, {"k", p.alphabet()}, {"entries", p.entries()}};
}

struct SchemeOptions {
  std::string kind = "lcs";
  std::string table;
  double delta = 0;

  void add(CLI::App* sub) {
    sub->add_option("--scheme", kind, "Scoring scheme")->check(CLI::IsMember({"lcs", "table"}));
    sub->add_option("--table", table, "Scoring table file (JSON {k, table} or k*k numbers)");
    sub->add_option("--delta", delta, "Gap price: delta (n - k) for k aligned pairs");
  }

  ScoringScheme build(int k) const {
    if (kind == "lcs") {
      if (delta == 0) return ScoringScheme::lcs(k);
      std::vector<double> id(static_cast<std::size_t>(k * k), 0.0);
      for (int a = 0; a < k; ++a) id[static_cast<std::size_t>(a * k + a)] = 1;
      return ScoringScheme(k, std::move(id), delta);
    }
    if (table.empty()) throw ConfigError("--scheme table needs --table <file>");
    std::vector<double> values;
    if (table.ends_with(".json")) {
      Json j = parse_json_file(table);
      try {
        if (j.at("k").get<int>() != k) throw ConfigError("scoring table alphabet differs from the model");
        values = j.at("table").get<std::vector<double>>();
      } catch (const Json::exception& e) {
        throw ConfigError(table + ": " + e.what());
      }
    } else {
      std::string text = read_file(table);
      for (char& c : text)
        if (c == ',' || c == '\n' || c == '\t' || c == '\r') c = ' ';
      std::istringstream in(text);
      for (double v; in >> v;) values.push_back(v);
      if (!in.eof()) throw ConfigError("non-numeric entry in " + table);
    }
    if (values.size() != static_cast<std::size_t>(k * k))
      throw ConfigError("scoring table needs " + std::to_string(k * k) + " entries");
    return ScoringScheme(k, std::move(values), delta);
  }

  std::string str() const { return kind == "lcs" ? "lcs" : "table:" + table; }
};

// ------------------------------------------------------------ command model

struct Shared {
  std::string output_dir = ".";
  std::uint64_t seed = 20240101;
  unsigned workers = default_workers();
  std::string format = "csv";
  std::string config;
};

struct Result {
  Json json;
  std::string csv;
  Json summary;         // copied into the manifest
  std::string message;  // human-readable stdout text
  bool ok = true;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<Result(const Shared&)> run;
};

/// Flags are bound to bools; config values for them are applied directly.
class FlagRegistry {
 public:
  CLI::Option* add(CLI::App* sub, const std::string& name, bool& target, const std::string& desc) {
    auto* opt = sub->add_flag(name, target, desc);
    targets_[opt] = &target;
    return opt;
  }
  bool* find(const CLI::Option* opt) const {
    auto it = targets_.find(opt);
    return it == targets_.end() ? nullptr : it->second;
  }

 private:
  std::map<const CLI::Option*, bool*> targets_;
};

// Options that only affect where or how fast a run happens.
bool runtime_option(const std::string& name) {
  return name == "help" || name == "version" || name == "config" || name == "output-dir" || name == "workers";
}

std::string config_token(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) out += (out.empty() ? "" : ",") + config_token(item);
    return out;
  }
  throw ConfigError("unsupported config value " + v.dump());
}

void apply_config(const Json& file, CLI::App& app, CLI::App& sub, const FlagRegistry& flags) {
  if (!file.is_object()) throw ConfigError("config must be a JSON object");
  if (file.contains("subcommand") && file["subcommand"] != sub.get_name())
    throw ConfigError("config is for '" + file["subcommand"].get<std::string>() + "', not '" + sub.get_name() + "'");
  const Json& values = file.contains("config") ? file["config"] : file;
  for (const auto& [key, value] : values.items()) {
    if (key == "subcommand" || value.is_null()) continue;
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) opt = sub.get_option_no_throw(key);  // positional
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt || key == "help" || key == "config") throw ConfigError("unknown config key '" + key + "'");
    std::string token = config_token(value);
    try {
      if (bool* target = flags.find(opt)) {
        if (token != "true" && token != "false") throw ConfigError("flag '" + key + "' needs true or false");
        *target = token == "true";
        opt->default_str(token);
      } else {
        opt->default_val(token);
      }
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

Json resolved_config(const CLI::App& app, const CLI::App& sub, const FlagRegistry& flags) {
  Json out = Json::object();
  auto add = [&](const CLI::Option* opt) {
    std::string name = opt->get_single_name();
    if (name.empty() || runtime_option(name)) return;
    if (bool* target = flags.find(opt)) {
      out[name] = *target;
      return;
    }
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    if (!value.empty()) out[name] = value;
  };
  for (const auto* opt : app.get_options()) add(opt);
  for (const auto* opt : sub.get_options()) add(opt);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'", false);
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'", false);
}

// ---------------------------------------------------------------- matrices

Json lump_json(const LumpResult& r) {
  Json j{{"lumpable", r.lumpable}};
  if (r.lumpable) {
    j["lumped"] = r.lumped;
  } else {
    j["bad_state"] = r.bad_state;
    j["bad_block"] = r.bad_block;
    j["deviation"] = r.deviation;
  }
  return j;
}

void add_matrices(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string models = kDefaultModels;
    double eps = 0.25;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("matrices", "Transition matrices, stationary laws, lumpability and mixing bounds");
  sub->add_option("--models", o->models, "';'-separated model specs or JSON files");
  sub->add_option("--eps", o->eps, "Mixing-time threshold")->check(CLI::Range(0.0, 1.0));
  commands.push_back({sub, [o](const Shared&) {
    Result res;
    res.json = Json{{"models", Json::array()}};
    res.csv = "model,quantity,from,to,value\n";
    std::ostringstream msg;
    for (const auto& spec : split(o->models, ';')) {
      TransitionMatrix p = load_model(spec);
      const int k = p.alphabet();
      const auto order = display_order(k);
      StationaryDist pi = stationary(p);
      const std::string label = csv_field(p.label());

      Json m = matrix_json(p);
      Json names = Json::array();
      for (int s : order) names.push_back(state_name(s, k));
      m["display_order"] = names;
      Json st = Json::array();
      for (int s : order) st.push_back(Json{{"state", state_name(s, k)}, {"prob", pi[s]}});
      m["stationary"] = st;
      m["stationary_residual"] = pi.residual(p);
      m["irreducible"] = is_irreducible(p);
      auto lx = check_lumpable(p, coordinate_partition(k, Coordinate::X));
      auto ly = check_lumpable(p, coordinate_partition(k, Coordinate::Y));
      m["lumpable_x"] = lump_json(lx);
      m["lumpable_y"] = lump_json(ly);
      m["swap_symmetric"] = k == 2 ? Json(swap_symmetric(p)) : Json(nullptr);

      for (int a : order)
        for (int b : order)
          res.csv += label + ",P," + state_name(a, k) + "," + state_name(b, k) + "," + fmt(p(a, b)) + "\n";
      for (int s : order) res.csv += label + ",pi," + state_name(s, k) + ",," + fmt(pi[s]) + "\n";
      res.csv += label + ",lumpable_x,,," + std::string(lx.lumpable ? "1" : "0") + "\n";
      res.csv += label + ",lumpable_y,,," + std::string(ly.lumpable ? "1" : "0") + "\n";

      msg << p.label() << " (k=" << k << ")\n";
      for (int a : order) {
        msg << "  " << state_name(a, k) << " ";
        for (int b : order) msg << " " << std::setw(8) << std::fixed << std::setprecision(5) << p(a, b);
        msg << "\n";
      }
      msg << "  pi ";
      for (int s : order) msg << " " << std::setw(8) << std::fixed << std::setprecision(5) << pi[s];
      msg << "\n  lumpable X: " << (lx.lumpable ? "yes" : "no") << ", Y: " << (ly.lumpable ? "yes" : "no") << "\n";

      try {
        Primitivity prim = primitivity_index(p);
        m["primitivity"] = Json{{"lag", prim.lag}, {"p_o", prim.min_entry}};
        res.csv += label + ",primitivity_lag,,," + std::to_string(prim.lag) + "\n";
        res.csv += label + ",p_o,,," + fmt(prim.min_entry) + "\n";
        msg << "  primitivity lag " << prim.lag << ", p_o " << fmt(prim.min_entry) << "\n";
        try {
          MixingBound mb = mixing_time_bound(p, o->eps);
          m["mixing"] = Json{{"eps", o->eps},       {"contraction", mb.contraction}, {"rho", mb.rho},
                             {"C", mb.c},           {"t_eps", mb.t_eps},             {"t_mix", mb.t_mix},
                             {"clamped", mb.clamped}, {"warning", mb.warning}};
          res.csv += label + ",t_eps,,," + fmt(mb.t_eps) + "\n";
          res.csv += label + ",t_mix,,," + fmt(mb.t_mix) + "\n";
          msg << "  t(" << fmt(o->eps) << ") <= " << fmt(mb.t_eps) << ", t_mix <= " << fmt(mb.t_mix) << "\n";
        } catch (const DomainError& e) {
          m["mixing"] = Json{{"eps", o->eps}, {"error", e.what()}};
          msg << "  mixing: " << e.what() << "\n";
        }
      } catch (const NotPrimitive& e) {
        m["primitivity"] = Json{{"error", e.what()}};
        msg << "  " << e.what() << "\n";
      }
      res.json["models"].push_back(m);
    }
    res.message = msg.str();
    return res;
  }});
}

// ------------------------------------------------------------------- align

struct Sequences {
  std::vector<Letter> x, y;
  int alphabet = 2;
};

std::string sequence_text(const std::string& arg) {
  if (!arg.starts_with("@")) return arg;
  std::string text = read_file(arg.substr(1));
  std::erase_if(text, [](char c) { return c == '\n' || c == '\r' || c == ' ' || c == '\t'; });
  return text;
}

// Comma-separated indices, or one symbol per character. Digit strings map
// to their values; other symbol sets are numbered in sorted order.
Sequences parse_sequences(const std::string& xs, const std::string& ys, int alphabet) {
  Sequences out;
  const bool indexed = xs.find(',') != std::string::npos || ys.find(',') != std::string::npos;
  auto digits = [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  int max_letter = 0;
  auto push = [&](std::vector<Letter>& dst, int v) {
    if (v < 0 || v > 255) throw ConfigError("letters must lie in [0,255]");
    dst.push_back(static_cast<Letter>(v));
    max_letter = std::max(max_letter, v);
  };
  if (indexed) {
    for (int v : parse_list<int>(xs, "x")) push(out.x, v);
    for (int v : parse_list<int>(ys, "y")) push(out.y, v);
  } else if (digits(xs) && digits(ys)) {
    for (char c : xs) push(out.x, c - '0');
    for (char c : ys) push(out.y, c - '0');
  } else {
    std::map<char, int> code;
    for (char c : xs + ys) code[c] = 0;
    int next = 0;
    for (auto& [c, v] : code) v = next++;
    for (char c : xs) push(out.x, code[c]);
    for (char c : ys) push(out.y, code[c]);
  }
  out.alphabet = std::max(2, max_letter + 1);
  if (alphabet > 0) {
    if (max_letter >= alphabet) throw ConfigError("sequence letter exceeds --alphabet");
    out.alphabet = alphabet;
  }
  return out;
}

void add_align(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string x, y;
    int alphabet = 0;
    SchemeOptions scheme;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("align", "Global alignment score of two sequences");
  sub->add_option("x", o->x, "First sequence (symbols, comma-separated indices, or @file)");
  sub->add_option("y", o->y, "Second sequence");
  sub->add_option("--alphabet", o->alphabet, "Alphabet size (default: inferred)");
  o->scheme.add(sub);
  commands.push_back({sub, [o](const Shared&) {
    if (o->x.empty() || o->y.empty()) throw ConfigError("align needs two sequences");
    Sequences s = parse_sequences(sequence_text(o->x), sequence_text(o->y), o->alphabet);
    ScoringScheme scheme = o->scheme.build(s.alphabet);
    double value = score(s.x, s.y, scheme);
    Result res;
    res.json = Json{{"n_x", s.x.size()},  {"n_y", s.y.size()},        {"alphabet", s.alphabet},
                    {"scheme", o->scheme.str()}, {"delta", scheme.delta}, {"score", value}};
    res.csv = "key,value\nn_x," + std::to_string(s.x.size()) + "\nn_y," + std::to_string(s.y.size()) +
              "\nalphabet," + std::to_string(s.alphabet) + "\nscheme," + csv_field(o->scheme.str()) + "\ndelta," +
              fmt(scheme.delta) + "\nscore," + fmt(value) + "\n";
    res.message = fmt(value) + "\n";
    return res;
  }});
}

// ------------------------------------------------------------------ bounds

Json bound_json(const BoundReport& lo, const BoundReport& up) {
  Json lower{{"q", num(lo.q)},
             {"alpha", num(lo.alpha)},
             {"alpha_n", num(lo.alpha_n)},
             {"b_q", num(lo.b_q)},
             {"b", num(lo.b)},
             {"c", num(lo.c)},
             {"c_o", num(lo.c_o)},
             {"K", num(lo.K)},
             {"b_o", num(lo.b_o)},
             {"phi_n", num(lo.phi_n)},
             {"r_doeblin", lo.r_doeblin},
             {"xi_states", lo.xi_states},
             {"lambda", num(lo.lambda)},
             {"lambda_valid", lo.lambda_valid},
             {"eps_o", num(lo.eps_o)},
             {"a_o", num(lo.a_o)},
             {"moment_lower", num(lo.moment_lower)}};
  Json upper{{"delta", num(up.delta)}, {"mix_lag", up.mix_lag}, {"p_o", num(up.p_o)},
             {"t_mix", num(up.t_mix)}, {"F", num(up.F)},         {"C_r", num(up.C_r)},
             {"C_r_gamma", num(up.C_r_gamma)}, {"D_r", num(up.D_r)}, {"moment_upper", num(up.moment_upper)}};
  return Json{{"lower", lower}, {"upper", upper}};
}

void flatten_csv(const Json& j, const std::string& prefix, std::string& csv) {
  for (const auto& [key, value] : j.items()) {
    std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_csv(value, name, csv);
    } else if (value.is_null()) {
      csv += name + ",nan\n";
    } else if (value.is_number_float()) {
      csv += name + "," + fmt(value.get<double>()) + "\n";
    } else if (value.is_string()) {
      csv += name + "," + csv_field(value.get<std::string>()) + "\n";
    } else {
      csv += name + "," + csv_field(value.dump()) + "\n";
    }
  }
}

void add_bounds(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max:0.9,0.7,0.05";
    std::string pattern = "1,1";
    std::optional<double> eps_o;
    double r = 2;
    std::int64_t n = 900;
    double b_o = 0.9;
    std::int64_t clt_max = 10000;
    SchemeOptions scheme;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("bounds", "Lower and upper moment bound constants");
  sub->add_option("--model", o->model, "Model spec or JSON file");
  sub->add_option("--pattern", o->pattern, "Triplet pattern 'x,y' or 'ax,ay/bx,by/dx,dy'");
  sub->add_option("--eps-o", o->eps_o, "Measured drift eps_o (lower-bound constants need it)");
  sub->add_option("--r", o->r, "Moment order")->check(CLI::PositiveNumber);
  sub->add_option("--n", o->n, "Sequence length")->check(CLI::PositiveNumber);
  sub->add_option("--b-o", o->b_o, "Coverage probability for K")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--clt-max", o->clt_max, "Upper end of the local CLT sweep (0 to skip)");
  o->scheme.add(sub);
  commands.push_back({sub, [o](const Shared&) {
    TransitionMatrix p = load_model(o->model);
    TripletPattern t = parse_pattern(o->pattern);
    BoundReport lo = lower_bound_report(p, t, o->eps_o.value_or(0.0), o->r, o->n, o->b_o);
    if (!o->eps_o) lo.eps_o = lo.a_o = lo.moment_lower = BoundReport::nan;
    BoundReport up = upper_bound_report(p, o->scheme.build(p.alphabet()), o->r, o->n);

    Result res;
    res.json = Json{{"model", matrix_json(p)},
                    {"pattern", pattern_str(t)},
                    {"scheme", o->scheme.str()},
                    {"n", o->n},
                    {"r", o->r}};
    Json b = bound_json(lo, up);
    res.json["lower"] = b["lower"];
    res.json["upper"] = b["upper"];
    if (o->clt_max > 0 && std::isfinite(lo.q) && lo.q > 0 && lo.q < 1) {
      LocalCltSweep sw = local_clt_sweep(lo.q, 1.0, lo.b, 1, o->clt_max);
      res.json["local_clt"] = Json{{"m_lo", sw.m_lo},         {"m_hi", sw.m_hi},
                                   {"failures", sw.failures}, {"last_failure", sw.last_failure},
                                   {"m_o", sw.m_o},           {"worst_ratio", num(sw.worst_ratio)},
                                   {"worst_m", sw.worst_m},   {"needed_multiplier", sw.needed_multiplier}};
    }
    res.csv = "key,value\n";
    Json flat = res.json;
    flat.erase("model");
    flat["model"] = p.label();
    flatten_csv(flat, "", res.csv);
    std::ostringstream msg;
    msg << p.label() << " pattern " << pattern_str(t) << " n=" << o->n << " r=" << fmt(o->r) << "\n"
        << "  q=" << fmt(lo.q) << " alpha=" << fmt(lo.alpha) << " c_o=" << fmt(lo.c_o) << " lambda=" << fmt(lo.lambda)
        << (lo.lambda_valid ? "" : " (exceeds 1)") << " K=" << fmt(lo.K) << "\n";
    if (o->eps_o) msg << "  a_o=" << fmt(lo.a_o) << " E|L-EL|^r >= " << fmt(lo.moment_lower) << "\n";
    msg << "  F=" << fmt(up.F) << " C(r)=" << fmt(up.C_r) << " E|L-EL|^r <= " << fmt(up.moment_upper) << "\n";
    res.message = msg.str();
    return res;
  }});
}

// ------------------------------------------------------------------ verify

Mutation parse_mutation(const std::string& s) {
  if (s == "none") return Mutation::none;
  if (s == "biased-pick") return Mutation::biased_pick;
  if (s == "shifted-counter") return Mutation::shifted_counter;
  if (s == "swapped-weights") return Mutation::swapped_weights;
  throw ConfigError("unknown mutation '" + s + "'");
}

Json check_json(const CheckReport& r) {
  return Json{{"check", r.check},       {"model", r.model},         {"n", r.n},
              {"max_residual", r.max_residual}, {"tolerance", r.tolerance}, {"cases", r.cases},
              {"passed", r.passed},     {"worst_case", r.worst_case}, {"note", r.note}};
}

void add_verify(CLI::App& app, std::vector<Command>& commands, FlagRegistry& flags) {
  struct Opts {
    std::string models = kDefaultModels;
    std::string pattern = "1,1";
    std::string pattern1 = "1,0";
    std::string pattern2 = "0,1";
    std::string n_list = "6,9";
    std::string weights = "auto";
    std::string mutate = "none";
    std::uint64_t max_sequences = 262144;
    bool all = false, a3 = false, uv = false, combined = false, propositions = false, gain = false, exact = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("verify", "Exact checks by enumeration; exit 0 iff all pass");
  flags.add(sub, "--all", o->all, "Run every check");
  flags.add(sub, "--a3", o->a3, "Transport P(u,v) -> P(u+1,v) of the single transformation");
  flags.add(sub, "--uv", o->uv, "Conditional independence given (U,V)");
  flags.add(sub, "--combined", o->combined, "Transport of the combined transformation");
  flags.add(sub, "--propositions", o->propositions, "Bernoulli and binomial identities");
  flags.add(sub, "--gain", o->gain, "Enumerated expected gain against expected_gain");
  flags.add(sub, "--exact", o->exact, "Rational arithmetic (k=2, n<=6)");
  sub->add_option("--models", o->models, "';'-separated model specs or JSON files");
  sub->add_option("--pattern", o->pattern, "Pattern for the single-pattern checks");
  sub->add_option("--pattern1", o->pattern1, "First pattern of the combined check");
  sub->add_option("--pattern2", o->pattern2, "Second pattern of the combined check");
  sub->add_option("--n", o->n_list, "Comma-separated chain lengths (multiples of 3)");
  sub->add_option("--weights", o->weights, "Combined weights")->check(CLI::IsMember({"auto", "equal", "general"}));
  sub->add_option("--mutate", o->mutate, "Deliberate defect: none, biased-pick, shifted-counter, swapped-weights");
  sub->add_option("--max-sequences", o->max_sequences, "Enumeration cap");
  commands.push_back({sub, [o](const Shared& shared) {
    const bool any = o->a3 || o->uv || o->combined || o->propositions || o->gain;
    const bool all = o->all || !any;
    OracleOptions opt;
    opt.max_sequences = o->max_sequences;
    opt.workers = shared.workers;
    opt.exact = o->exact;
    opt.mutation = parse_mutation(o->mutate);
    const auto ns = parse_list<int>(o->n_list, "--n");
    const WeightMode mode = o->weights == "equal"     ? WeightMode::equal_q
                            : o->weights == "general" ? WeightMode::general_q
                                                      : WeightMode::automatic;

    std::vector<CheckReport> reports;
    auto guarded = [&](const std::string& check, const std::string& model, int n, auto&& f) {
      try {
        reports.push_back(f());
      } catch (const Error& e) {
        CheckReport r;
        r.check = check;
        r.model = model;
        r.n = n;
        r.passed = false;
        r.note = e.what();
        reports.push_back(r);
      }
    };

    std::vector<TransitionMatrix> models;
    for (const auto& spec : split(o->models, ';')) models.push_back(load_model(spec));
    const TripletPattern t = parse_pattern(o->pattern);
    const TripletPattern t1 = parse_pattern(o->pattern1);
    const TripletPattern t2 = parse_pattern(o->pattern2);
    for (const auto& p : models) {
      StationaryDist pi = stationary(p);
      for (int n : ns) {
        if (all || o->a3) guarded("A3", p.label(), n, [&] { return verify_A3(p, pi, t, n, opt); });
        if (all || o->uv)
          guarded("uv_independence", p.label(), n, [&] { return verify_uv_conditional_independence(p, pi, t, n, opt); });
        if (all || o->combined)
          guarded("combined_A3", p.label(), n, [&] { return verify_combined_A3(p, pi, t1, t2, n, mode, opt); });
        if (all || o->gain)
          guarded("expected_gain", p.label(), n,
                  [&] { return verify_expected_gain(p, pi, t, n, ScoringScheme::lcs(p.alphabet()), opt); });
      }
    }
    if (all || o->propositions) {
      // Worst residual over m <= 8 (Bernoulli) and v1 + v2 <= 12 (binomial).
      for (double pr : {0.3, 0.5, 0.7}) {
        CheckReport agg;
        agg.check = "bernoulli_proposition";
        agg.model = "p=" + fmt(pr);
        for (int m = 1; m <= 8; ++m) {
          CheckReport r = verify_bernoulli_proposition(m, pr, opt);
          agg.tolerance = r.tolerance;
          agg.cases += r.cases;
          agg.passed = agg.passed && r.passed;
          if (r.max_residual >= agg.max_residual) {
            agg.max_residual = r.max_residual;
            agg.n = m;
            agg.worst_case = "m=" + std::to_string(m) + (r.worst_case.empty() ? "" : " " + r.worst_case);
          }
        }
        reports.push_back(agg);
      }
      for (double q : {0.2, 0.5, 0.8}) {
        CheckReport agg;
        agg.check = "binomial_identity";
        agg.model = "q=" + fmt(q);
        for (int total = 0; total <= 12; ++total) {
          for (int v1 = 0; v1 <= total; ++v1) {
            CheckReport r = verify_binomial_identity(v1, total - v1, q);
            agg.tolerance = r.tolerance;
            agg.cases += r.cases;
            agg.passed = agg.passed && r.passed;
            if (r.max_residual >= agg.max_residual) {
              agg.max_residual = r.max_residual;
              agg.n = total;
              agg.worst_case = "v1=" + std::to_string(v1) + " v2=" + std::to_string(total - v1);
            }
          }
        }
        reports.push_back(agg);
      }
    }

    Result res;
    res.json = Json{{"passed", true}, {"mutation", o->mutate}, {"checks", Json::array()}};
    res.csv = "check,model,n,max_residual,tolerance,cases,passed,worst_case,note\n";
    std::ostringstream msg;
    for (const auto& r : reports) {
      res.ok = res.ok && r.passed;
      res.json["checks"].push_back(check_json(r));
      res.csv += r.check + "," + csv_field(r.model) + "," + std::to_string(r.n) + "," + fmt(r.max_residual) + "," +
                 fmt(r.tolerance) + "," + std::to_string(r.cases) + "," + (r.passed ? "1" : "0") + "," +
                 csv_field(r.worst_case) + "," + csv_field(r.note) + "\n";
      msg << (r.passed ? "PASS " : "FAIL ") << r.check << " " << r.model << " n=" << r.n
          << " residual=" << fmt(r.max_residual) << " tol=" << fmt(r.tolerance);
      if (!r.note.empty()) msg << " (" << r.note << ")";
      msg << "\n";
    }
    res.json["passed"] = res.ok;
    res.summary = Json{{"passed", res.ok}, {"checks", reports.size()}};
    res.message = msg.str();
    return res;
  }});
}

// ------------------------------------------------------------- experiments

Json eps_json(const std::vector<EmRecord>& records) {
  try {
    EpsEstimate e = estimate_eps_o(records);
    return Json{{"eps_o", e.eps_o},
                {"sign", e.sign},
                {"inconclusive", e.inconclusive},
                {"tail_from_m", e.tail_from_m},
                {"tail_records", e.tail_records},
                {"quantile", e.quantile},
                {"tail_fraction", e.tail_fraction},
                {"convention", "lower quantile of |E(m)| over the grid tail"}};
  } catch (const InsufficientData& e) {
    return Json{{"error", e.what()}};
  }
}

Result em_result(const std::vector<EmRecord>& records) {
  Result res;
  res.csv = "chain_id,m,j_count,e_m,seed\n";
  Json rows = Json::array();
  for (const auto& r : records) {
    res.csv += std::to_string(r.chain_id) + "," + std::to_string(r.m) + "," + std::to_string(r.j_count) + "," +
               fmt(r.e_m) + "," + std::to_string(r.seed) + "\n";
    rows.push_back(Json{{"chain_id", r.chain_id}, {"m", r.m}, {"j_count", r.j_count}, {"e_m", r.e_m}, {"seed", r.seed}});
  }
  res.summary = Json{{"records", records.size()}, {"eps_estimate", eps_json(records)}};
  res.json = Json{{"records", rows}, {"eps_estimate", res.summary["eps_estimate"]}};
  std::ostringstream msg;
  msg << records.size() << " records";
  const Json& e = res.summary["eps_estimate"];
  if (e.contains("eps_o"))
    msg << "; eps_o=" << fmt(e["eps_o"].get<double>()) << " sign=" << e["sign"].get<int>()
        << (e["inconclusive"].get<bool>() ? " (inconclusive)" : "");
  res.message = msg.str() + "\n";
  return res;
}

struct EmOptions {
  std::string model;
  std::size_t m_start = 100, m_stop = 3000, m_step = 100;
  bool full_scale = false;
  std::size_t chains = 3;
  std::size_t subsample = 0;
  SchemeOptions scheme;

  void add(CLI::App* sub, FlagRegistry& flags) {
    sub->add_option("--model", model, "Model spec or JSON file");
    sub->add_option("--m-start", m_start, "First m of the grid")->check(CLI::PositiveNumber);
    sub->add_option("--m-stop", m_stop, "Last m of the grid")->check(CLI::PositiveNumber);
    sub->add_option("--m-step", m_step, "Grid step")->check(CLI::PositiveNumber);
    flags.add(sub, "--full-scale", full_scale, "Grid up to m = 7500");
    sub->add_option("--chains", chains, "Independent chains")->check(CLI::PositiveNumber);
    sub->add_option("--subsample", subsample, "Eligible triplets sampled per m (0 = all)");
    scheme.add(sub);
  }

  EmConfig config(const Shared& shared) const {
    EmConfig c;
    c.model = load_model(model);
    c.grid = {m_start, full_scale ? std::max<std::size_t>(m_stop, 7500) : m_stop, m_step};
    c.n_chains = chains;
    c.seed = shared.seed;
    c.scheme = scheme.build(c.model.alphabet());
    c.workers = shared.workers;
    c.subsample = subsample;
    return c;
  }
};

void add_simulate_em(CLI::App& app, std::vector<Command>& commands, FlagRegistry& flags) {
  struct Opts : EmOptions {
    std::string pattern = "1,1";
  };
  auto o = std::make_shared<Opts>();
  o->model = "max:0.9,0.7,0.05";
  auto* sub = app.add_subcommand("simulate-em", "Exact conditional drift E(m) along simulated chains");
  o->add(sub, flags);
  sub->add_option("--pattern", o->pattern, "Triplet pattern");
  commands.push_back({sub, [o](const Shared& shared) {
    EmConfig c = o->config(shared);
    c.patterns = {parse_pattern(o->pattern)};
    return em_result(run_em(c));
  }});
}

void add_simulate_em_combined(CLI::App& app, std::vector<Command>& commands, FlagRegistry& flags) {
  struct Opts : EmOptions {
    std::string pattern1 = "1,0";
    std::string pattern2 = "0,1";
  };
  auto o = std::make_shared<Opts>();
  o->model = "ind:0.7,0.7";
  o->chains = 1;
  auto* sub = app.add_subcommand("simulate-em-combined", "E(m) for the combined transformation (equal q)");
  o->add(sub, flags);
  sub->add_option("--pattern1", o->pattern1, "First pattern");
  sub->add_option("--pattern2", o->pattern2, "Second pattern");
  commands.push_back({sub, [o](const Shared& shared) {
    EmConfig c = o->config(shared);
    c.patterns = {parse_pattern(o->pattern1), parse_pattern(o->pattern2)};
    return em_result(run_em_combined(c));
  }});
}

void add_variance(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max:0.9,0.7,0.05";
    std::string n_grid = "300,600,1200,2400";
    std::size_t replicates = 200;
    std::optional<double> eps_o;
    std::string pattern = "1,1";
    SchemeOptions scheme;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("variance", "Var(L_n) over an n grid against a_o n and C(2) n");
  sub->add_option("--model", o->model, "Model spec or JSON file");
  sub->add_option("--n-grid", o->n_grid, "Comma-separated sequence lengths");
  sub->add_option("--replicates", o->replicates, "Chains per n")->check(CLI::Range(2, 100000000));
  sub->add_option("--eps-o", o->eps_o, "Drift eps_o for the a_o n column");
  sub->add_option("--pattern", o->pattern, "Pattern for a_o");
  o->scheme.add(sub);
  commands.push_back({sub, [o](const Shared& shared) {
    VarianceConfig c;
    c.model = load_model(o->model);
    c.scheme = o->scheme.build(c.model.alphabet());
    c.n_grid = parse_list<std::size_t>(o->n_grid, "--n-grid");
    c.replicates = o->replicates;
    c.seed = shared.seed;
    c.workers = shared.workers;
    c.eps_o = o->eps_o;
    c.pattern = parse_pattern(o->pattern);
    auto records = variance_scan(c);

    Result res;
    res.csv = "n,replicates,mean,var,ci_lo,ci_hi,a_o_n,c2_n\n";
    Json rows = Json::array();
    std::ostringstream msg;
    for (const auto& r : records) {
      res.csv += std::to_string(r.n) + "," + std::to_string(r.replicates) + "," + fmt(r.mean) + "," + fmt(r.var) +
                 "," + fmt(r.ci_lo) + "," + fmt(r.ci_hi) + "," + fmt(r.a_o_n) + "," + fmt(r.c2_n) + "\n";
      rows.push_back(Json{{"n", r.n},         {"replicates", r.replicates}, {"mean", r.mean},
                          {"var", r.var},     {"ci_lo", r.ci_lo},           {"ci_hi", r.ci_hi},
                          {"a_o_n", num(r.a_o_n)}, {"c2_n", num(r.c2_n)}});
      msg << "n=" << r.n << " var=" << fmt(r.var) << " [" << fmt(r.ci_lo) << ", " << fmt(r.ci_hi) << "]\n";
    }
    res.json = Json{{"records", rows}};
    res.summary = Json{{"records", records.size()}};
    res.message = msg.str();
    return res;
  }});
}

Json tail_points_json(const std::vector<TailPoint>& pts) {
  Json out = Json::array();
  for (const auto& p : pts)
    out.push_back(Json{{"x", p.x},
                       {"empirical", p.empirical},
                       {"bound", p.bound},
                       {"applicable", p.applicable},
                       {"dominated", p.dominated}});
  return out;
}

void add_tails(CLI::App& app, std::vector<Command>& commands) {
  struct Opts {
    std::string model = "max:0.9,0.7,0.05";
    std::string pattern = "1,1";
    std::size_t n = 900;
    std::size_t trials = 10000;
    std::string k_grid = "0.5,1,1.5,2,3,4,6";
    std::string s_grid;
    double b_o = 0.9;
    std::string which = "both";
    SchemeOptions scheme;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("tails", "Empirical tails of V and L against the concentration bounds");
  sub->add_option("--model", o->model, "Model spec or JSON file");
  sub->add_option("--pattern", o->pattern, "Triplet pattern for V");
  sub->add_option("--n", o->n, "Sequence length")->check(CLI::PositiveNumber);
  sub->add_option("--trials", o->trials, "Simulated chains")->check(CLI::Range(2, 100000000));
  sub->add_option("--k-grid", o->k_grid, "K values for P(|V - EV| > K sqrt n)");
  sub->add_option("--s-grid", o->s_grid, "s values for P(|L - EL| >= s) (default: multiples of the sd)");
  sub->add_option("--b-o", o->b_o, "Coverage probability for K")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--which", o->which, "Tails to compute")->check(CLI::IsMember({"both", "v", "l"}));
  o->scheme.add(sub);
  commands.push_back({sub, [o](const Shared& shared) {
    TransitionMatrix p = load_model(o->model);
    Result res;
    res.json = Json::object();
    res.csv = "kind,x,empirical,bound,applicable,dominated\n";
    res.summary = Json::object();
    std::ostringstream msg;
    auto rows = [&](const char* kind, const std::vector<TailPoint>& pts) {
      for (const auto& t : pts)
        res.csv += std::string(kind) + "," + fmt(t.x) + "," + fmt(t.empirical) + "," + fmt(t.bound) + "," +
                   (t.applicable ? "1" : "0") + "," + (t.dominated ? "1" : "0") + "\n";
    };
    if (o->which != "l") {
      VTailReport v = tail_check_V(p, parse_pattern(o->pattern), o->n, parse_list<double>(o->k_grid, "--k-grid"),
                                   o->trials, derive_seed(shared.seed, 1), shared.workers, o->b_o);
      res.json["v_tail"] = Json{{"n", v.n},
                                {"trials", v.trials},
                                {"expected_v", v.expected_v},
                                {"lambda", v.lambda},
                                {"r", v.r},
                                {"K_b0", num(v.K_b0)},
                                {"b_o", v.b_o},
                                {"coverage", v.coverage},
                                {"all_dominated", v.all_dominated},
                                {"applicable_points", v.applicable_points},
                                {"points", tail_points_json(v.points)}};
      rows("V", v.points);
      res.summary["v_all_dominated"] = v.all_dominated;
      msg << "V tail: " << v.points.size() << " points, " << v.applicable_points << " with a nontrivial bound, "
          << (v.all_dominated ? "all dominated" : "NOT dominated") << "\n";
    }
    if (o->which != "v") {
      LTailReport l = mcdiarmid_tail_check(p, o->scheme.build(p.alphabet()), o->n, o->trials,
                                           derive_seed(shared.seed, 2), parse_list<double>(o->s_grid, "--s-grid"),
                                           shared.workers);
      res.json["l_tail"] = Json{{"n", l.n},   {"trials", l.trials},
                                {"mean", l.mean}, {"sd", l.sd},
                                {"F", l.F},   {"all_dominated", l.all_dominated},
                                {"points", tail_points_json(l.points)}};
      rows("L", l.points);
      res.summary["l_all_dominated"] = l.all_dominated;
      msg << "L tail: " << l.points.size() << " points, " << (l.all_dominated ? "all dominated" : "NOT dominated")
          << "\n";
    }
    res.message = msg.str();
    return res;
  }});
}

// ---------------------------------------------------------------- dispatch

void print_error(const std::string& what, const std::string& fallback_type) {
  std::string type = fallback_type, message = what;
  if (auto pos = what.find(": "); pos != std::string::npos && pos > 0 &&
                                  std::all_of(what.begin(), what.begin() + static_cast<std::ptrdiff_t>(pos),
                                              [](unsigned char c) { return std::isalnum(c); })) {
    type = what.substr(0, pos);
    message = what.substr(pos + 2);
  }
  std::cerr << Json{{"error", type}, {"message", message}}.dump() << "\n";
}

struct Prescan {
  std::string config;
  std::string subcommand;
};

Prescan prescan(const std::vector<std::string>& args, const CLI::App& app) {
  Prescan out;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      out.config = args[++i];
    } else if (a.starts_with("--config=")) {
      out.config = a.substr(9);
    } else if (out.subcommand.empty() && !a.starts_with("-") && app.get_subcommand_no_throw(a)) {
      out.subcommand = a;
    }
  }
  return out;
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Alignment scores of pairwise Markov chains: simulation, exact checks and moment bounds", "pmc"};
  app.set_version_flag("--version", std::string(PMC_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  Shared shared;
  app.add_option("--output-dir", shared.output_dir, "Directory for outputs and the run manifest");
  app.add_option("--seed", shared.seed, "Master seed");
  app.add_option("--workers", shared.workers, "Worker threads (default: available parallelism)")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", shared.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--config", shared.config, "JSON config ({\"option\": value}) or a run manifest");

  FlagRegistry flags;
  std::vector<Command> commands;
  add_matrices(app, commands);
  add_align(app, commands);
  add_bounds(app, commands);
  add_verify(app, commands, flags);
  add_simulate_em(app, commands, flags);
  add_simulate_em_combined(app, commands, flags);
  add_variance(app, commands);
  add_tails(app, commands);
  for (auto& c : commands) c.app->option_defaults()->always_capture_default();

  std::vector<std::string> args(argv, argv + argc);
  const Command* chosen = nullptr;
  try {
    Prescan pre = prescan(args, app);
    if (!pre.config.empty()) {
      Json file = parse_json_file(pre.config);
      if (pre.subcommand.empty() && file.is_object() && file.contains("subcommand")) {
        pre.subcommand = file["subcommand"].get<std::string>();
        if (!app.get_subcommand_no_throw(pre.subcommand)) throw ConfigError("unknown subcommand in config");
        args.push_back(pre.subcommand);
      }
      if (!pre.subcommand.empty()) apply_config(file, app, *app.get_subcommand(pre.subcommand), flags);
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    print_error(e.what(), "ConfigError");
    return 3;
  }

  for (const auto& c : commands)
    if (c.app->parsed()) chosen = &c;
  if (!chosen) return 2;

  try {
    const std::string started = utc_now();
    Result res = chosen->run(shared);
    const std::string finished = utc_now();

    const std::string name = chosen->app->get_name();
    const fs::path dir = shared.output_dir;
    fs::create_directories(dir);
    const std::string file = name + (shared.format == "json" ? ".json" : ".csv");
    write_text(dir / file, shared.format == "json" ? res.json.dump(2) + "\n" : res.csv);

    Json manifest{{"subcommand", name},
                  {"version", PMC_VERSION},
                  {"seed", shared.seed},
                  {"config", resolved_config(app, *chosen->app, flags)},
                  {"outputs", Json::array({file})}};
    if (!res.summary.is_null()) manifest["summary"] = res.summary;
    manifest["runtime"] = Json{{"workers", shared.workers},
                               {"output_dir", shared.output_dir},
                               {"started_at", started},
                               {"finished_at", finished}};
    write_text(dir / (name + ".manifest.json"), manifest.dump(2) + "\n");

    std::cout << res.message;
    std::cout << "wrote " << (dir / file).string() << "\n";
    return res.ok ? 0 : 1;
  } catch (const Error& e) {
    print_error(e.what(), e.validation() ? "ValidationError" : "InternalError");
    return e.validation() ? 3 : 1;
  } catch (const std::exception& e) {
    print_error(std::string("InternalError: ") + e.what(), "InternalError");
    return 1;
  }
}

}  // namespace pmc::cli
