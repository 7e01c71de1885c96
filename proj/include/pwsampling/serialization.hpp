#pragma once

// JSON and CSV views of the library's result types. Non-finite numbers are
// written to JSON as the strings "inf", "-inf" and "nan". CSV files carry a
// header row and print reals with %.17g.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pwsampling/grid.hpp"
#include "pwsampling/inequality_lab.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/spectral.hpp"
#include "pwsampling/splines.hpp"
#include "pwsampling/uniqueness.hpp"

namespace pws {

using Json = nlohmann::ordered_json;

inline Json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ParseError("expected a number, got " + j.dump());
}

inline Json json_vector(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
  return a;
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const Grid& g) {
  Json axes = Json::array({"t"});
  for (int k = 1; k <= g.m(); ++k) axes.push_back("x" + std::to_string(k));
  for (int k = 1; k <= g.m(); ++k) axes.push_back("y" + std::to_string(k));
  return Json{{"m", g.m()},
              {"t_extent", g.t_extent()},
              {"xy_extent", g.xy_extent()},
              {"h", g.h()},
              {"ht", g.ht()},
              {"t_steps", g.t_steps()},
              {"spatial_steps", g.spatial_steps()},
              {"node_count", g.node_count()},
              {"axes", axes},
              {"layout", "row-major, t slowest"}};
}

inline Grid grid_from_json(const Json& j) {
  try {
    return Grid(j.at("m").get<int>(), j.at("t_extent").get<double>(), j.at("xy_extent").get<double>(),
                j.at("h").get<double>(), j.value("node_cap", kDefaultNodeCap));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("grid: ") + e.what());
  }
}

inline Json to_json(const SampleSet& s) {
  return Json{{"level", s.level},         {"dimension", s.dimension},   {"t_stride", s.t_stride},
              {"spatial_stride", s.spatial_stride}, {"anchor", s.anchor}, {"size", s.size()},
              {"indices", s.indices}};
}

inline SampleSet sample_set_from_json(const Json& j) {
  try {
    auto s = explicit_sample_set(j.at("dimension").get<Eigen::Index>(),
                                 j.at("indices").get<std::vector<Eigen::Index>>(), j.value("level", 0));
    s.t_stride = j.value("t_stride", 1LL);
    s.spatial_stride = j.value("spatial_stride", 1LL);
    s.anchor = j.value("anchor", s.anchor);
    return s;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("sample set: ") + e.what());
  }
}

inline Json to_json(const PWReport& r) {
  Json ratios = Json::array();
  for (double x : r.ratios) ratios.push_back(json_number(x));
  return Json{{"omega", json_number(r.omega)},
              {"ratios", ratios},
              {"energy_above", json_number(r.energy_above)},
              {"ratios_within", r.ratios_within},
              {"energy_within", r.energy_within},
              {"verdict", r.in_space ? "in-space" : "out-of-space"}};
}

inline Json to_json(const SplineSolution& s, bool with_values = false) {
  Json j{{"order", s.order},
         {"path", path_name(s.path)},
         {"sample_count", s.samples.size()},
         {"sample_level", s.samples.level},
         {"interpolation_residual", json_number(s.interpolation_residual)},
         {"objective", json_number(s.objective)},
         {"objective_normalized", json_number(s.objective_normalized)},
         {"scale", json_number(s.scale)},
         {"alpha_normalized", json_vector(s.alpha)},
         {"iterations", s.iterations},
         {"final_residual", json_number(s.final_residual)},
         {"below_norm_equivalence_order", s.below_norm_equivalence_order}};
  if (with_values) j["values"] = json_vector(s.values);
  return j;
}

inline Json to_json(const UniquenessReport& r) {
  return Json{{"omega", json_number(r.omega)},     {"dim_pw", r.dim_pw},  {"sample_count", r.sample_count},
              {"sigma_min", json_number(r.sigma_min)}, {"sigma_max", json_number(r.sigma_max)},
              {"rank", r.rank},                    {"unique", r.unique()}, {"has_witness", r.witness.has_value()}};
}

inline Json to_json(const ConvergenceReport& r) {
  Json errors = Json::array(), ratios = Json::array(), exact = Json::array();
  for (double e : r.errors) errors.push_back(json_number(e));
  for (double x : r.ratios) ratios.push_back(json_number(x));
  for (bool b : r.exact_reproduction) exact.push_back(b);
  Json j{{"omega", json_number(r.omega)},
         {"level", r.level},
         {"schedule", r.schedule},
         {"errors", errors},
         {"ratios", ratios},
         {"exact_reproduction", exact},
         {"dim_pw", r.dim_pw},
         {"sample_count", r.sample_count},
         {"sigma_min", json_number(r.sigma_min)},
         {"rank", r.rank},
         {"verdict", verdict_name(r.verdict)}};
  if (r.failure_stage >= 0) {
    j["failure_stage"] = r.failure_stage;
    j["failure_message"] = r.failure_message;
  }
  return j;
}

inline Json to_json(const ConstantEstimate& c) {
  return Json{{"quantity", c.quantity},
              {"level", c.level},
              {"order", c.order},
              {"value", json_number(c.value)},
              {"value_normalized", json_number(c.value_normalized)},
              {"scale", json_number(c.scale)},
              {"root", json_number(c.root)},
              {"proxy_q", json_number(c.proxy_q)},
              {"proxy_half", json_number(c.proxy_half)},
              {"method", c.method},
              {"certificate", json_number(c.certificate)},
              {"infinite", c.infinite}};
}

inline Json to_json(const PowerInequalityReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"m", row.m}, {"lhs", json_number(row.lhs)}, {"rhs", json_number(row.rhs)}, {"holds", row.holds}});
  return Json{{"a", json_number(r.a)}, {"b", json_number(r.b)}, {"rows", rows}, {"all_hold", r.all_hold()}};
}

inline Json to_json(const NormEquivalenceReport& r) {
  return Json{{"order", r.order},
              {"trials", r.trials},
              {"lower", json_number(r.lower)},
              {"upper", json_number(r.upper)},
              {"has_witness", r.witness.has_value()}};
}

inline Json to_json(const ScanTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json row{{"j", r.level},
             {"k", r.order},
             {"sample_count", r.sample_count},
             {"dim_pw", r.dim_pw},
             {"sigma_min", json_number(r.sigma_min)},
             {"C_emp", json_number(r.c_emp)},
             {"e_final", json_number(r.error)},
             {"verdict", verdict_name(r.verdict)}};
    if (!r.message.empty()) row["message"] = r.message;
    rows.push_back(row);
  }
  Json j{{"omega", json_number(t.omega)}, {"rows", rows}};
  j["j_star"] = t.j_star ? Json(*t.j_star) : Json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string spectrum_csv(const SpectralDecomposition& d) {
  std::ostringstream os;
  os << "index,eigenvalue,residual\n";
  for (Eigen::Index i = 0; i < d.size(); ++i)
    os << i << "," << csv_number(d.eigenvalues[i]) << "," << csv_number(d.residuals[i]) << "\n";
  return os.str();
}

inline std::string vector_csv(const Eigen::VectorXd& v, const std::string& column = "value") {
  std::ostringstream os;
  os << "index," << column << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << i << "," << csv_number(v[i]) << "\n";
  return os.str();
}

inline std::string convergence_csv(const ConvergenceReport& r) {
  std::ostringstream os;
  os << "k,error,rho,exact_reproduction\n";
  for (std::size_t l = 0; l < r.errors.size(); ++l) {
    os << r.schedule[l] << "," << csv_number(r.errors[l]) << "," << csv_number(r.ratios[l]) << ","
       << (r.exact_reproduction[l] ? 1 : 0) << "\n";
  }
  return os.str();
}

inline std::string scan_csv(const ScanTable& t) {
  std::ostringstream os;
  os << "j,k,sigma_min,C_emp,e_final,verdict\n";
  for (const auto& r : t.rows) {
    os << r.level << "," << r.order << "," << csv_number(r.sigma_min) << "," << csv_number(r.c_emp) << ","
       << csv_number(r.error) << "," << verdict_name(r.verdict) << "\n";
  }
  return os.str();
}

}  // namespace pws
