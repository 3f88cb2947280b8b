#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <string>
#include <vector>

#include "pmc/alignment.hpp"
#include "pmc/counters.hpp"
#include "pmc/errors.hpp"
#include "pmc/experiments.hpp"
#include "pmc/markov_model.hpp"
#include "pmc/oracle.hpp"

namespace py = pybind11;
using namespace pmc;

namespace {

py::object num(double x) { return std::isfinite(x) ? py::object(py::float_(x)) : py::object(py::none()); }

std::vector<Letter> letters(const std::vector<int>& v) {
  std::vector<Letter> out;
  out.reserve(v.size());
  for (int a : v) {
    if (a < 0 || a > 255) throw DomainError("letters must lie in [0,255]");
    out.push_back(static_cast<Letter>(a));
  }
  return out;
}

py::dict check_dict(const CheckReport& r) {
  py::dict d;
  d["check"] = r.check;
  d["model"] = r.model;
  d["n"] = r.n;
  d["max_residual"] = r.max_residual;
  d["tolerance"] = r.tolerance;
  d["cases"] = r.cases;
  d["passed"] = r.passed;
  d["worst_case"] = r.worst_case;
  d["note"] = r.note;
  return d;
}

py::dict bound_dict(const BoundReport& b) {
  py::dict d;
  d["n"] = b.n;
  d["r"] = b.r;
  for (auto [name, value] : {std::pair{"q", b.q}, {"alpha", b.alpha}, {"alpha_n", b.alpha_n}, {"b_q", b.b_q},
                             {"b", b.b}, {"c", b.c}, {"c_o", b.c_o}, {"K", b.K}, {"b_o", b.b_o},
                             {"phi_n", b.phi_n}, {"lambda", b.lambda}, {"eps_o", b.eps_o}, {"a_o", b.a_o},
                             {"moment_lower", b.moment_lower}, {"delta", b.delta}, {"p_o", b.p_o},
                             {"t_mix", b.t_mix}, {"F", b.F}, {"C_r", b.C_r}, {"C_r_gamma", b.C_r_gamma},
                             {"D_r", b.D_r}, {"moment_upper", b.moment_upper}})
    d[name] = num(value);
  d["r_doeblin"] = b.r_doeblin;
  d["xi_states"] = b.xi_states;
  d["lambda_valid"] = b.lambda_valid;
  d["mix_lag"] = b.mix_lag;
  return d;
}

py::list em_list(const std::vector<EmRecord>& records) {
  py::list out;
  for (const auto& r : records) {
    py::dict d;
    d["chain_id"] = r.chain_id;
    d["m"] = r.m;
    d["j_count"] = r.j_count;
    d["e_m"] = r.e_m;
    d["seed"] = r.seed;
    out.append(d);
  }
  return out;
}

std::vector<EmRecord> em_records(const py::list& records) {
  std::vector<EmRecord> out;
  for (const auto& item : records) {
    auto d = item.cast<py::dict>();
    EmRecord r;
    r.chain_id = d["chain_id"].cast<std::size_t>();
    r.m = d["m"].cast<std::size_t>();
    r.j_count = d.contains("j_count") ? d["j_count"].cast<std::size_t>() : 0;
    r.e_m = d["e_m"].cast<double>();
    out.push_back(r);
  }
  return out;
}

EmConfig em_config(const TransitionMatrix& p, std::size_t m_start, std::size_t m_stop, std::size_t m_step,
                   std::size_t chains, std::uint64_t seed, unsigned workers) {
  EmConfig c;
  c.model = p;
  c.grid = {m_start, m_stop, m_step};
  c.n_chains = chains;
  c.seed = seed;
  c.scheme = ScoringScheme::lcs(p.alphabet());
  c.workers = workers;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of pmcmoments";
  m.attr("__version__") = PMC_VERSION;

  // Registered last, so ConfigError is matched before its base.
  py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));

  py::class_<TransitionMatrix>(m, "TransitionMatrix")
      .def(py::init<int, std::vector<double>, std::string>(), py::arg("k"), py::arg("entries"),
           py::arg("label") = "")
      .def_property_readonly("k", &TransitionMatrix::alphabet)
      .def_property_readonly("states", &TransitionMatrix::states)
      .def_property_readonly("label", &TransitionMatrix::label)
      .def_property_readonly("entries", &TransitionMatrix::entries)
      .def("__call__", [](const TransitionMatrix& p, int from, int to) { return p(from, to); })
      .def("__repr__", [](const TransitionMatrix& p) { return "<TransitionMatrix " + p.label() + ">"; });

  m.def("build_max", &build_max, py::arg("p"), py::arg("q"), py::arg("eps") = 0.05);
  m.def("build_min", &build_min, py::arg("p"), py::arg("q"), py::arg("eps") = 0.05);
  m.def("build_ind", &build_ind, py::arg("p"), py::arg("q"));
  m.def("build_uniform", &build_uniform, py::arg("k"));
  m.def(
      "model", [](const std::string& spec) { return ModelSpec::parse(spec).build(); }, py::arg("spec"),
      "Model from a spec string such as 'max:0.9,0.7,0.05'.");
  m.def(
      "stationary", [](const TransitionMatrix& p) { return stationary(p).probs; }, py::arg("P"),
      "Stationary law indexed by flat state x*k + y.");
  m.def(
      "sample_chain",
      [](const TransitionMatrix& p, std::size_t n, std::uint64_t seed) {
        return sample_chain(p, stationary(p), n, seed).states;
      },
      py::arg("P"), py::arg("n"), py::arg("seed"));

  m.def(
      "lcs", [](const std::vector<int>& x, const std::vector<int>& y) { return lcs(letters(x), letters(y)); },
      py::arg("x"), py::arg("y"));
  m.def(
      "lcs_fast",
      [](const std::vector<int>& x, const std::vector<int>& y, int k) { return lcs_fast(letters(x), letters(y), k); },
      py::arg("x"), py::arg("y"), py::arg("k") = 2);
  m.def(
      "score",
      [](const std::vector<int>& x, const std::vector<int>& y, const std::vector<double>& table, int k, double delta) {
        return score(letters(x), letters(y), ScoringScheme(k, table, delta));
      },
      py::arg("x"), py::arg("y"), py::arg("table"), py::arg("k") = 2, py::arg("delta") = 0.0);

  m.def(
      "verify_A3",
      [](const TransitionMatrix& p, const std::string& pattern, int n) {
        return check_dict(verify_A3(p, stationary(p), parse_pattern(pattern), n));
      },
      py::arg("P"), py::arg("pattern") = "1,1", py::arg("n") = 6);
  m.def(
      "verify_combined_A3",
      [](const TransitionMatrix& p, const std::string& p1, const std::string& p2, int n) {
        return check_dict(verify_combined_A3(p, stationary(p), parse_pattern(p1), parse_pattern(p2), n));
      },
      py::arg("P"), py::arg("pattern1") = "1,0", py::arg("pattern2") = "0,1", py::arg("n") = 6);

  m.def(
      "lower_bound_report",
      [](const TransitionMatrix& p, const std::string& pattern, double eps_o, double r, std::int64_t n, double b_o) {
        return bound_dict(lower_bound_report(p, parse_pattern(pattern), eps_o, r, n, b_o));
      },
      py::arg("P"), py::arg("pattern") = "1,1", py::arg("eps_o") = 0.0, py::arg("r") = 2.0, py::arg("n") = 900,
      py::arg("b_o") = 0.9);
  m.def(
      "upper_bound_report",
      [](const TransitionMatrix& p, double r, std::int64_t n) {
        return bound_dict(upper_bound_report(p, ScoringScheme::lcs(p.alphabet()), r, n));
      },
      py::arg("P"), py::arg("r") = 2.0, py::arg("n") = 900);

  m.def(
      "run_em",
      [](const TransitionMatrix& p, const std::string& pattern, std::size_t m_start, std::size_t m_stop,
         std::size_t m_step, std::size_t chains, std::uint64_t seed, unsigned workers) {
        EmConfig c = em_config(p, m_start, m_stop, m_step, chains, seed, workers);
        c.patterns = {parse_pattern(pattern)};
        std::vector<EmRecord> records;
        {
          py::gil_scoped_release release;
          records = run_em(c);
        }
        return em_list(records);
      },
      py::arg("P"), py::arg("pattern") = "1,1", py::arg("m_start") = 100, py::arg("m_stop") = 3000,
      py::arg("m_step") = 100, py::arg("chains") = 3, py::arg("seed") = 0, py::arg("workers") = 1);
  m.def(
      "run_em_combined",
      [](const TransitionMatrix& p, const std::string& p1, const std::string& p2, std::size_t m_start,
         std::size_t m_stop, std::size_t m_step, std::size_t chains, std::uint64_t seed, unsigned workers) {
        EmConfig c = em_config(p, m_start, m_stop, m_step, chains, seed, workers);
        c.patterns = {parse_pattern(p1), parse_pattern(p2)};
        std::vector<EmRecord> records;
        {
          py::gil_scoped_release release;
          records = run_em_combined(c);
        }
        return em_list(records);
      },
      py::arg("P"), py::arg("pattern1") = "1,0", py::arg("pattern2") = "0,1", py::arg("m_start") = 100,
      py::arg("m_stop") = 3000, py::arg("m_step") = 100, py::arg("chains") = 1, py::arg("seed") = 0,
      py::arg("workers") = 1);
  m.def(
      "estimate_eps_o",
      [](const py::list& records, double tail_fraction, double quantile) {
        EpsEstimate e = estimate_eps_o(em_records(records), tail_fraction, quantile);
        py::dict d;
        d["eps_o"] = e.eps_o;
        d["sign"] = e.sign;
        d["inconclusive"] = e.inconclusive;
        d["tail_from_m"] = e.tail_from_m;
        d["tail_records"] = e.tail_records;
        return d;
      },
      py::arg("records"), py::arg("tail_fraction") = 0.25, py::arg("quantile") = 0.05);
}
