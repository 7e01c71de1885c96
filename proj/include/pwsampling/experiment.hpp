#pragma once

// Configuration-driven experiment runners behind the pws command-line tool.
// A run computes every output in memory and commits the files only when the
// whole computation finished, together with the resolved configuration and
// a manifest that lists each file with its size and hash.

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/grid.hpp"
#include "pwsampling/inequality_lab.hpp"
#include "pwsampling/matrix_market.hpp"
#include "pwsampling/operator.hpp"
#include "pwsampling/sample_set.hpp"
#include "pwsampling/serialization.hpp"
#include "pwsampling/spectral.hpp"
#include "pwsampling/splines.hpp"
#include "pwsampling/uniqueness.hpp"

namespace pws {

inline constexpr const char* kToolVersion = "0.3.0";

/// Seed for a named random stream, derived from the configuration seed.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& stream) {
  Fnv1a h;
  h.value(base);
  h.string(stream);
  return h.digest();
}

// ---------------------------------------------------------------------------
// Configuration

struct OperatorSpec {
  Backend backend = Backend::circle;
  std::optional<std::string> file;
  // circle
  Eigen::Index n = 0;
  double h = 1.0;
  // heisenberg
  int m = 1;
  double t_extent = 0.0, xy_extent = 0.0;
  long long node_cap = kDefaultNodeCap;
  // graph
  std::vector<WeightedEdge> edges;
  double edge_probability = -1.0;  // >= 0 selects a random graph
  double weight_lo = 1.0, weight_hi = 1.0;
  bool connect = true;
};

struct SamplingSpec {
  std::vector<int> levels{0};
  long long base_stride = 1;
  std::optional<Eigen::Index> anchor;
  std::optional<std::vector<Eigen::Index>> indices;
};

struct VerifySpec {
  std::vector<std::string> suites{"symmetry", "bernstein", "uniqueness"};
  int power_count = 100, power_n = 50, power_l_max = 3;
  int bernstein_count = 20, bernstein_k_max = 8;
  std::vector<int> pp_orders{2, 4};
  int equivalence_order = 2, equivalence_trials = 1000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  OperatorSpec op;
  std::optional<double> omega;
  std::optional<Eigen::Index> band_dimension;
  SamplingSpec sampling;
  int order = 1;
  std::vector<int> schedule{4, 8, 16, 32};
  std::string target_kind = "random_pw";
  std::string target_path;
  DecomposeMode spectrum_mode = DecomposeMode::full;
  Eigen::Index spectrum_r = 0;
  double energy_tolerance = 1e-12, decay_factor = 1e-2, error_floor = 1e-11, ridge = 0.0;
  VerifySpec verify;
  std::string output = "out";
  std::string base_dir = ".";
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw error("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ParseError("config: unknown key '" + field(it.key()) + "'");
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  const Json& raw(const std::string& k) const { return j_.at(k); }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <class T>
  T get(const std::string& k) const {
    if (!has(k)) throw ParseError("config: missing required field '" + field(k) + "'");
    try {
      return j_.at(k).get<T>();
    } catch (const Json::exception&) {
      throw ParseError("config: field '" + field(k) + "' has the wrong type (" + j_.at(k).dump() + ")");
    }
  }

  template <class T>
  T get(const std::string& k, T fallback) const {
    return has(k) ? get<T>(k) : fallback;
  }

  double number(const std::string& k) const {
    if (!has(k) || !j_.at(k).is_number()) throw ParseError("config: field '" + field(k) + "' must be a number");
    return j_.at(k).get<double>();
  }

  ConfigReader child(const std::string& k) const { return ConfigReader(j_.at(k), field(k)); }

  ParseError error(const std::string& msg) const {
    return ParseError("config: " + (path_.empty() ? std::string("<root>") : path_) + ": " + msg);
  }

 private:
  const Json& j_;
  std::string path_;
};

inline std::string resolve_path(const std::string& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

inline std::vector<int> int_list(const ConfigReader& r, const std::string& k) {
  const auto v = r.get<std::vector<int>>(k);
  if (v.empty()) throw ParseError("config: '" + r.field(k) + "' must not be empty");
  return v;
}

}  // namespace detail

/// Validates a configuration object. Unknown keys are rejected at every
/// level and the seed is mandatory.
inline ExperimentConfig parse_config(const Json& j, const std::string& base_dir = ".") {
  detail::ConfigReader root(j, "");
  root.allow({"seed", "backend", "circle", "heisenberg", "graph", "operator_file", "omega", "band_dimension",
              "sampling", "order", "schedule", "target", "spectrum", "tolerances", "verify", "output"});
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!root.has("seed")) throw ParseError("config: missing required field 'seed' (seeds are mandatory)");
  if (!root.raw("seed").is_number_unsigned()) throw ParseError("config: 'seed' must be a nonnegative integer");
  c.seed = root.get<std::uint64_t>("seed");

  if (root.has("operator_file")) {
    c.op.file = detail::resolve_path(base_dir, root.get<std::string>("operator_file"));
    if (root.has("backend")) c.op.backend = parse_backend(root.get<std::string>("backend"));
    else c.op.backend = Backend::generic;
  } else {
    c.op.backend = parse_backend(root.get<std::string>("backend"));
    const std::string name = backend_name(c.op.backend);
    if (!root.has(name)) throw ParseError("config: backend '" + name + "' needs a '" + name + "' section");
    auto b = root.child(name);
    switch (c.op.backend) {
      case Backend::circle:
        b.allow({"n", "h"});
        c.op.n = b.get<Eigen::Index>("n");
        c.op.h = b.has("h") ? b.number("h") : 1.0;
        break;
      case Backend::heisenberg:
        b.allow({"m", "t_extent", "xy_extent", "h", "node_cap"});
        c.op.m = b.get<int>("m", 1);
        c.op.t_extent = b.number("t_extent");
        c.op.xy_extent = b.number("xy_extent");
        c.op.h = b.number("h");
        c.op.node_cap = b.get<long long>("node_cap", kDefaultNodeCap);
        break;
      case Backend::graph: {
        b.allow({"n", "edges", "edge_probability", "weight_range", "connect"});
        c.op.n = b.get<Eigen::Index>("n");
        if (b.has("edges") == b.has("edge_probability"))
          throw b.error("give exactly one of 'edges' and 'edge_probability'");
        if (b.has("edges")) {
          for (const auto& e : b.raw("edges")) {
            if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
                !e[2].is_number())
              throw b.error("each edge must be [i, j, weight]");
            c.op.edges.push_back({e[0].get<Eigen::Index>(), e[1].get<Eigen::Index>(), e[2].get<double>()});
          }
        } else {
          c.op.edge_probability = b.number("edge_probability");
          const auto w = b.get<std::vector<double>>("weight_range", {1.0, 1.0});
          if (w.size() != 2) throw b.error("'weight_range' must be [lo, hi]");
          c.op.weight_lo = w[0];
          c.op.weight_hi = w[1];
          c.op.connect = b.get<bool>("connect", true);
        }
        break;
      }
      case Backend::generic:
        throw ParseError("config: backend 'generic' requires 'operator_file'");
    }
  }

  if (root.has("omega") && root.has("band_dimension"))
    throw ParseError("config: give at most one of 'omega' and 'band_dimension'");
  if (root.has("omega")) {
    c.omega = root.number("omega");
    if (!(*c.omega >= 0.0)) throw ParseError("config: 'omega' must be nonnegative");
  }
  if (root.has("band_dimension")) {
    c.band_dimension = root.get<Eigen::Index>("band_dimension");
    if (*c.band_dimension < 1) throw ParseError("config: 'band_dimension' must be >= 1");
  }

  if (root.has("sampling")) {
    auto s = root.child("sampling");
    s.allow({"levels", "base_stride", "anchor", "indices"});
    if (s.has("indices")) {
      if (s.has("levels") || s.has("base_stride")) throw s.error("'indices' excludes 'levels' and 'base_stride'");
      c.sampling.indices = s.get<std::vector<Eigen::Index>>("indices");
    } else {
      c.sampling.levels = detail::int_list(s, "levels");
      c.sampling.base_stride = s.get<long long>("base_stride", 1);
    }
    if (s.has("anchor")) c.sampling.anchor = s.get<Eigen::Index>("anchor");
  }
  c.order = root.get<int>("order", 1);
  if (c.order < 1) throw ParseError("config: 'order' must be >= 1");
  if (root.has("schedule")) c.schedule = detail::int_list(root, "schedule");

  if (root.has("target")) {
    auto t = root.child("target");
    t.allow({"kind", "path"});
    c.target_kind = t.get<std::string>("kind");
    if (c.target_kind == "vector_file") {
      c.target_path = detail::resolve_path(base_dir, t.get<std::string>("path"));
    } else if (c.target_kind != "random_pw") {
      throw t.error("kind must be 'random_pw' or 'vector_file'");
    } else if (t.has("path")) {
      throw t.error("'path' only applies to kind 'vector_file'");
    }
  }
  if (root.has("spectrum")) {
    auto s = root.child("spectrum");
    s.allow({"mode", "r"});
    const auto mode = s.get<std::string>("mode", "full");
    if (mode == "full") c.spectrum_mode = DecomposeMode::full;
    else if (mode == "lowest") c.spectrum_mode = DecomposeMode::lowest;
    else throw s.error("mode must be 'full' or 'lowest'");
    c.spectrum_r = s.get<Eigen::Index>("r", 0);
  }
  if (root.has("tolerances")) {
    auto t = root.child("tolerances");
    t.allow({"energy", "decay", "error_floor", "ridge"});
    if (t.has("energy")) c.energy_tolerance = t.number("energy");
    if (t.has("decay")) c.decay_factor = t.number("decay");
    if (t.has("error_floor")) c.error_floor = t.number("error_floor");
    if (t.has("ridge")) c.ridge = t.number("ridge");
  }
  if (root.has("verify")) {
    auto v = root.child("verify");
    v.allow({"suites", "power_inequality", "bernstein", "plancherel_polya", "norm_equivalence"});
    if (v.has("suites")) {
      c.verify.suites = v.get<std::vector<std::string>>("suites");
      static const std::set<std::string> known{"symmetry", "power_inequality", "bernstein", "plancherel_polya", "norm_equivalence",
                                               "uniqueness"};
      for (const auto& s : c.verify.suites)
        if (!known.count(s)) throw v.error("unknown suite '" + s + "'");
    }
    if (v.has("power_inequality")) {
      auto l = v.child("power_inequality");
      l.allow({"count", "n", "l_max"});
      c.verify.power_count = l.get<int>("count", c.verify.power_count);
      c.verify.power_n = l.get<int>("n", c.verify.power_n);
      c.verify.power_l_max = l.get<int>("l_max", c.verify.power_l_max);
    }
    if (v.has("bernstein")) {
      auto b = v.child("bernstein");
      b.allow({"count", "k_max"});
      c.verify.bernstein_count = b.get<int>("count", c.verify.bernstein_count);
      c.verify.bernstein_k_max = b.get<int>("k_max", c.verify.bernstein_k_max);
    }
    if (v.has("plancherel_polya")) {
      auto p = v.child("plancherel_polya");
      p.allow({"orders"});
      c.verify.pp_orders = detail::int_list(p, "orders");
    }
    if (v.has("norm_equivalence")) {
      auto l = v.child("norm_equivalence");
      l.allow({"order", "trials"});
      c.verify.equivalence_order = l.get<int>("order", c.verify.equivalence_order);
      c.verify.equivalence_trials = l.get<int>("trials", c.verify.equivalence_trials);
    }
  }
  c.output = root.get<std::string>("output", "out");
  return c;
}

/// Parses JSON text; syntax errors report the line and column.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source,
                                          const std::string& base_dir = ".") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
  return parse_config(j, base_dir);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config_text(ss.str(), path, base.empty() ? "." : base);
}

/// The configuration with every default made explicit.
inline Json resolved_config(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["backend"] = backend_name(c.op.backend);
  if (c.op.file) {
    j["operator_file"] = *c.op.file;
  } else if (c.op.backend == Backend::circle) {
    j["circle"] = Json{{"n", c.op.n}, {"h", c.op.h}};
  } else if (c.op.backend == Backend::heisenberg) {
    j["heisenberg"] = Json{{"m", c.op.m},
                           {"t_extent", c.op.t_extent},
                           {"xy_extent", c.op.xy_extent},
                           {"h", c.op.h},
                           {"node_cap", c.op.node_cap}};
  } else if (c.op.backend == Backend::graph) {
    Json g{{"n", c.op.n}};
    if (c.op.edge_probability >= 0.0) {
      g["edge_probability"] = c.op.edge_probability;
      g["weight_range"] = {c.op.weight_lo, c.op.weight_hi};
      g["connect"] = c.op.connect;
    } else {
      Json e = Json::array();
      for (const auto& w : c.op.edges) e.push_back({w.i, w.j, w.weight});
      g["edges"] = e;
    }
    j["graph"] = g;
  }
  if (c.omega) j["omega"] = *c.omega;
  if (c.band_dimension) j["band_dimension"] = *c.band_dimension;
  Json s;
  if (c.sampling.indices) {
    s["indices"] = *c.sampling.indices;
  } else {
    s["levels"] = c.sampling.levels;
    s["base_stride"] = c.sampling.base_stride;
  }
  if (c.sampling.anchor) s["anchor"] = *c.sampling.anchor;
  j["sampling"] = s;
  j["order"] = c.order;
  j["schedule"] = c.schedule;
  j["target"] = c.target_kind == "vector_file" ? Json{{"kind", "vector_file"}, {"path", c.target_path}}
                                               : Json{{"kind", "random_pw"}};
  j["spectrum"] = Json{{"mode", c.spectrum_mode == DecomposeMode::full ? "full" : "lowest"}, {"r", c.spectrum_r}};
  j["tolerances"] = Json{{"energy", c.energy_tolerance},
                         {"decay", c.decay_factor},
                         {"error_floor", c.error_floor},
                         {"ridge", c.ridge}};
  j["verify"] = Json{{"suites", c.verify.suites},
                     {"power_inequality", {{"count", c.verify.power_count}, {"n", c.verify.power_n}, {"l_max", c.verify.power_l_max}}},
                     {"bernstein", {{"count", c.verify.bernstein_count}, {"k_max", c.verify.bernstein_k_max}}},
                     {"plancherel_polya", {{"orders", c.verify.pp_orders}}},
                     {"norm_equivalence", {{"order", c.verify.equivalence_order}, {"trials", c.verify.equivalence_trials}}}};
  j["output"] = c.output;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  Fnv1a h;
  h.string(resolved_config(c).dump());
  return hex64(h.digest());
}

// ---------------------------------------------------------------------------
// Run context

struct RunOutput {
  int exit_code = 0;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::vector<std::string> messages;                        // printed to stdout
  std::string operator_fingerprint;
  std::vector<std::pair<std::string, double>> timings_ms;

  void add(const std::string& name, std::string contents) { files.emplace_back(name, std::move(contents)); }
};

class StageTimer {
 public:
  StageTimer(RunOutput& out, std::string name)
      : out_(out), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto d = std::chrono::steady_clock::now() - start_;
    out_.timings_ms.emplace_back(name_, std::chrono::duration<double, std::milli>(d).count());
  }

 private:
  RunOutput& out_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

struct BuiltOperator {
  SymmetricOperator op;
  std::optional<Grid> grid;
};

inline BuiltOperator build_operator(const ExperimentConfig& c) {
  BuiltOperator b;
  if (c.op.file) {
    b.op = read_matrix_market(*c.op.file);
    if (c.op.backend != Backend::generic && b.op.backend() != c.op.backend)
      throw ParseError("config: operator file backend '" + std::string(backend_name(b.op.backend())) +
                       "' differs from configured backend");
    return b;
  }
  switch (c.op.backend) {
    case Backend::circle:
      b.op = build_circle_laplacian(c.op.n, c.op.h);
      break;
    case Backend::heisenberg:
      b.grid = Grid(c.op.m, c.op.t_extent, c.op.xy_extent, c.op.h, c.op.node_cap);
      b.op = build_heisenberg_operator(*b.grid);
      break;
    case Backend::graph:
      if (c.op.edge_probability >= 0.0) {
        b.op = build_graph_laplacian(random_graph_edges(c.op.n, c.op.edge_probability, c.op.weight_lo, c.op.weight_hi,
                                                        derive_seed(c.seed, "graph"), c.op.connect),
                                     c.op.n);
      } else {
        b.op = build_graph_laplacian(c.op.edges, c.op.n);
      }
      break;
    case Backend::generic:
      throw ParseError("config: backend 'generic' requires 'operator_file'");
  }
  return b;
}

/// Sample set for one level (lattice backends) or the explicit index list.
inline SampleSet make_sample_set(const ExperimentConfig& c, const BuiltOperator& b, int level) {
  const Eigen::Index n = b.op.dimension();
  if (c.sampling.indices) return explicit_sample_set(n, *c.sampling.indices, 0);
  if (b.grid) {
    Eigen::Index anchor = 0;
    if (c.sampling.anchor) {
      anchor = *c.sampling.anchor;
    } else {
      // node at the grid center
      std::vector<int> mi(static_cast<std::size_t>(b.grid->axis_count()));
      for (int a = 0; a < b.grid->axis_count(); ++a) mi[static_cast<std::size_t>(a)] = b.grid->axis_size(a) / 2;
      anchor = static_cast<Eigen::Index>(b.grid->index(mi));
    }
    return lattice_sample_set(*b.grid, level, anchor, c.sampling.base_stride);
  }
  if (b.op.backend() == Backend::circle || b.op.backend() == Backend::generic) {
    return circle_sample_set(n, level, c.sampling.anchor.value_or(0), c.sampling.base_stride);
  }
  throw ParseError("config: graph backends need 'sampling.indices'");
}

inline double resolve_omega(const ExperimentConfig& c, const SpectralDecomposition& d,
                            const std::optional<Eigen::VectorXd>& target = std::nullopt) {
  if (c.omega) return *c.omega;
  if (c.band_dimension) {
    if (*c.band_dimension > d.size()) throw ParseError("config: 'band_dimension' exceeds the operator dimension");
    return std::max(d.eigenvalues[*c.band_dimension - 1], 0.0);
  }
  if (target) return min_bandwidth(d, *target, c.energy_tolerance);
  throw ParseError("config: this command needs 'omega' or 'band_dimension'");
}

inline Eigen::VectorXd read_vector_csv(const std::string& path, Eigen::Index n) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open vector file '" + path + "'");
  std::string line;
  std::getline(is, line);
  if (line.rfind("index,", 0) != 0) throw ParseError(path + ": expected header 'index,value'");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(path + ":" + std::to_string(line_no) + ": expected index,value");
    long long i = 0;
    double x = 0.0;
    try {
      i = std::stoll(line.substr(0, comma));
      x = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad number");
    }
    if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)])
      throw ParseError(path + ":" + std::to_string(line_no) + ": index out of range or repeated");
    seen[static_cast<std::size_t>(i)] = true;
    v[i] = x;
  }
  return v;
}

inline Eigen::VectorXd make_target(const ExperimentConfig& c, const SpectralDecomposition& d, double omega) {
  if (c.target_kind == "vector_file") return read_vector_csv(c.target_path, d.dimension());
  return random_pw(d, omega, derive_seed(c.seed, "target"));
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Commands

inline RunOutput cmd_build(const ExperimentConfig& c) {
  RunOutput out;
  BuiltOperator b;
  {
    StageTimer t(out, "build");
    b = build_operator(c);
  }
  if (!b.op.is_symmetric()) throw SymmetryError("symmetry check failed: assembled operator is not symmetric");
  std::ostringstream mtx;
  write_matrix_market(mtx, b.op, {"fingerprint: " + hex64(b.op.fingerprint())});
  out.add("operator.mtx", mtx.str());
  Json g = b.grid ? to_json(*b.grid) : Json{{"backend", backend_name(b.op.backend())}, {"n", b.op.dimension()}};
  if (!b.grid && b.op.backend() == Backend::circle) g["h"] = c.op.h;
  out.add("grid.json", dump_json(g));
  out.operator_fingerprint = hex64(b.op.fingerprint());
  out.messages.push_back("fingerprint " + out.operator_fingerprint);
  out.messages.push_back("dimension " + std::to_string(b.op.dimension()) + ", nonzeros " +
                         std::to_string(b.op.nonzeros()));
  return out;
}

inline RunOutput cmd_spectrum(const ExperimentConfig& c, const SymmetricOperator& op) {
  RunOutput out;
  out.operator_fingerprint = hex64(op.fingerprint());
  DecomposeOptions opt;
  opt.mode = c.spectrum_mode;
  opt.r = c.spectrum_r;
  opt.seed = derive_seed(c.seed, "spectrum");
  SpectralDecomposition d;
  {
    StageTimer t(out, "decompose");
    d = decompose(op, opt);
  }
  out.add("spectrum.csv", spectrum_csv(d));
  out.messages.push_back("eigenpairs " + std::to_string(d.size()) + ", residual bound " + csv_number(d.residual_bound));
  return out;
}

inline RunOutput cmd_project(const ExperimentConfig& c) {
  RunOutput out;
  const auto b = build_operator(c);
  out.operator_fingerprint = hex64(b.op.fingerprint());
  SpectralDecomposition d;
  {
    StageTimer t(out, "decompose");
    d = decompose(b.op);
  }
  const double omega = resolve_omega(c, d);
  const Eigen::VectorXd g = gaussian_vector(d.dimension(), derive_seed(c.seed, "project"));
  const Eigen::VectorXd f = pw_project(d, omega, g);
  const auto rep = bernstein_check(d, f, omega);
  Json j = to_json(rep);
  j["min_bandwidth"] = json_number(min_bandwidth(d, f, c.energy_tolerance));
  j["norm_in"] = json_number(g.norm());
  j["norm_out"] = json_number(f.norm());
  out.add("projected.csv", vector_csv(f));
  out.add("pw_report.json", dump_json(j));
  out.messages.push_back(std::string("verdict ") + (rep.in_space ? "in-space" : "out-of-space"));
  return out;
}

inline RunOutput cmd_spline(const ExperimentConfig& c) {
  RunOutput out;
  const auto b = build_operator(c);
  out.operator_fingerprint = hex64(b.op.fingerprint());
  SpectralDecomposition d;
  {
    StageTimer t(out, "decompose");
    d = decompose(b.op);
  }
  const SampleSet s = make_sample_set(c, b, c.sampling.levels.front());
  const double omega = c.target_kind == "vector_file" && !c.omega && !c.band_dimension ? 0.0 : resolve_omega(c, d);
  const Eigen::VectorXd f = make_target(c, d, omega);
  SplineOptions opt;
  opt.ridge = c.ridge;
  SplineSolution sol;
  {
    StageTimer t(out, "spline");
    sol = variational_spline(d, c.order, s, s.restrict(f), opt);
  }
  if (b.grid) detail::flag_heisenberg_order(sol, Backend::heisenberg, b.grid->m());
  const auto alpha = alpha_l2_report(sol);
  Json j = to_json(sol);
  j["delta_support_residual"] = json_number(delta_support_residual(d, sol));
  j["alpha_l2"] = json_number(alpha.l2_norm);
  j["alpha_l2_operator_units"] = json_number(alpha.l2_norm_operator);
  j["energy_identity_defect"] = json_number(alpha.relative_defect);
  j["energy_identity_holds"] = alpha.identity_holds;
  j["relative_error"] = json_number((f - sol.values).norm() / f.norm());
  out.add("spline.csv", vector_csv(sol.values));
  out.add("spline.json", dump_json(j));
  out.messages.push_back("objective " + csv_number(sol.objective) + ", interpolation residual " +
                         csv_number(sol.interpolation_residual));
  return out;
}

inline RunOutput cmd_reconstruct(const ExperimentConfig& c, bool expect_converged) {
  RunOutput out;
  const auto b = build_operator(c);
  out.operator_fingerprint = hex64(b.op.fingerprint());
  SpectralDecomposition d;
  {
    StageTimer t(out, "decompose");
    d = decompose(b.op);
  }
  const SampleSet s = make_sample_set(c, b, c.sampling.levels.front());
  std::optional<double> omega;
  if (c.omega || c.band_dimension) omega = resolve_omega(c, d);
  if (!omega && c.target_kind == "random_pw") throw ParseError("config: random_pw targets need 'omega' or 'band_dimension'");
  const Eigen::VectorXd f = make_target(c, d, omega.value_or(0.0));
  ReconstructOptions ro;
  ro.omega = omega;
  ro.energy_tolerance = c.energy_tolerance;
  ro.decay_factor = c.decay_factor;
  ro.error_floor = c.error_floor;
  ro.spline.ridge = c.ridge;
  ConvergenceReport rep;
  {
    StageTimer t(out, "reconstruct");
    rep = reconstruct(d, f, s, c.schedule, ro);
  }
  out.add("report.json", dump_json(to_json(rep)));
  out.add("errors.csv", convergence_csv(rep));
  out.messages.push_back(std::string("verdict ") + verdict_name(rep.verdict));
  if (expect_converged && rep.verdict != Verdict::converged) out.exit_code = 1;
  return out;
}

inline RunOutput cmd_scan(const ExperimentConfig& c, int jobs) {
  RunOutput out;
  const auto b = build_operator(c);
  out.operator_fingerprint = hex64(b.op.fingerprint());
  if (c.sampling.indices) throw ParseError("config: scan needs 'sampling.levels'");
  SpectralDecomposition d;
  {
    StageTimer t(out, "decompose");
    d = decompose(b.op);
  }
  const double omega = resolve_omega(c, d);
  ScanOptions so;
  so.seed = derive_seed(c.seed, "target");
  so.jobs = jobs;
  so.reconstruct.decay_factor = c.decay_factor;
  so.reconstruct.error_floor = c.error_floor;
  so.reconstruct.spline.ridge = c.ridge;
  ScanTable table;
  {
    StageTimer t(out, "scan");
    table = critical_density_scan(d, omega, [&](int j) { return make_sample_set(c, b, j); }, c.sampling.levels,
                                  c.schedule, so);
  }
  out.add("scan.csv", scan_csv(table));
  out.add("scan.json", dump_json(to_json(table)));
  out.messages.push_back("j* " + (table.j_star ? std::to_string(*table.j_star) : std::string("none")));
  return out;
}

namespace detail {

struct VerifyRow {
  std::string suite, property, parameter;
  double value;
  bool pass;
  bool asserted = true;
};

inline SymmetricOperator random_psd_operator(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd bm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) bm(i, j) = normal(rng);
  // rank-deficient half the time so the kernel case is exercised
  if (seed % 2 == 0) bm.rightCols(n / 5).setZero();
  const Eigen::MatrixXd a = bm * bm.transpose() / n;
  std::vector<Triplet> upper;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      if (a(i, j) != 0.0) upper.push_back({i, j, a(i, j)});
  return SymmetricOperator(assemble_symmetric(n, std::move(upper)), Backend::generic);
}

}  // namespace detail

/// Runs the selected inequality suites. Each row is one property with its
/// measured value; the exit code is 1 when any asserted row fails.
inline RunOutput cmd_verify(const ExperimentConfig& c) {
  RunOutput out;
  std::vector<detail::VerifyRow> rows;
  std::optional<BuiltOperator> b;
  std::optional<SpectralDecomposition> d;
  auto need_operator = [&]() {
    if (!b) {
      b = build_operator(c);
      out.operator_fingerprint = hex64(b->op.fingerprint());
    }
    if (!d) {
      StageTimer t(out, "decompose");
      d = decompose(b->op);
    }
  };
  auto has = [&](const std::string& s) {
    return std::find(c.verify.suites.begin(), c.verify.suites.end(), s) != c.verify.suites.end();
  };

  if (has("symmetry")) {
    b = build_operator(c);
    out.operator_fingerprint = hex64(b->op.fingerprint());
    const bool sym = b->op.is_symmetric();
    rows.push_back({"symmetry", "bit_exact_symmetry", "", b->op.symmetry_defect(), sym});
    if (!sym) throw SymmetryError("symmetry check failed: operator is not symmetric");
    need_operator();
    const double ratio = d->eigenvalues[0] / d->scale();
    rows.push_back({"symmetry", "lambda_min_over_lambda_max", "", ratio, ratio >= -1e-10});
  }

  if (has("power_inequality")) {
    StageTimer t(out, "power_inequality");
    int violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < c.verify.power_count; ++trial) {
      const auto a_op = detail::random_psd_operator(c.verify.power_n, derive_seed(c.seed, "power_inequality/op/" + std::to_string(trial)));
      const auto da = decompose(a_op);
      const Eigen::VectorXd f = gaussian_vector(c.verify.power_n, derive_seed(c.seed, "power_inequality/f/" + std::to_string(trial)));
      const double af = a_op.apply(f).norm();
      // b = 0 needs ||A f|| > 0; otherwise use the kernel form b = ||f||
      const double a = af > 0.0 ? f.norm() / af : 1.0;
      const double bb = af > 0.0 ? 0.0 : f.norm();
      const auto rep = power_inequality_check(da, f, a, bb, c.verify.power_l_max);
      for (const auto& r : rep.rows) {
        if (!r.holds) ++violations;
        worst = std::min(worst, r.rhs / r.lhs);
      }
    }
    rows.push_back({"power_inequality", "violations", "count=" + std::to_string(c.verify.power_count), double(violations), violations == 0});
    rows.push_back({"power_inequality", "min_rhs_over_lhs", "l_max=" + std::to_string(c.verify.power_l_max), worst, worst >= 1.0 - 1e-8});
  }

  if (has("bernstein")) {
    need_operator();
    StageTimer t(out, "bernstein");
    const double omega = resolve_omega(c, *d);
    int inside_ok = 0, outside_ok = 0, outside_total = 0;
    double max_inside = 0.0;
    const bool has_outside = d->band_size(omega) < d->size();
    for (int i = 0; i < c.verify.bernstein_count; ++i) {
      const Eigen::VectorXd g = gaussian_vector(d->dimension(), derive_seed(c.seed, "bernstein/" + std::to_string(i)));
      const Eigen::VectorXd f = pw_project(*d, omega, g);
      if (f.norm() > 0.0) {
        const auto rep = bernstein_check(*d, f, omega, c.verify.bernstein_k_max);
        if (rep.in_space) ++inside_ok;
        for (double r : rep.ratios) max_inside = std::max(max_inside, r);
      }
      if (has_outside) {
        ++outside_total;
        const Eigen::VectorXd h = g - pw_project(*d, omega, g);
        const auto rep = bernstein_check(*d, h, omega, c.verify.bernstein_k_max);
        if (!rep.ratios_within) ++outside_ok;
      }
    }
    rows.push_back({"bernstein", "in_band_in_space", "count=" + std::to_string(c.verify.bernstein_count), double(inside_ok),
                    inside_ok == c.verify.bernstein_count});
    rows.push_back({"bernstein", "max_in_band_ratio", "k_max=" + std::to_string(c.verify.bernstein_k_max), max_inside,
                    max_inside <= 1.0 + 1e-10});
    rows.push_back({"bernstein", "out_of_band_detected", "count=" + std::to_string(outside_total), double(outside_ok),
                    outside_ok == outside_total});
  }

  if (has("uniqueness")) {
    need_operator();
    StageTimer t(out, "uniqueness");
    const double omega = resolve_omega(c, *d);
    for (int j : c.sampling.indices ? std::vector<int>{0} : c.sampling.levels) {
      const auto s = make_sample_set(c, *b, j);
      const auto rep = uniqueness_test(*d, omega, s);
      const std::string p = "j=" + std::to_string(j);
      rows.push_back({"uniqueness", "sigma_min", p, rep.sigma_min, true, false});
      if (rep.witness) {
        const Eigen::VectorXd& w = *rep.witness;
        const double on_samples = s.restrict(w).cwiseAbs().maxCoeff();
        const auto br = bernstein_check(*d, w, omega);
        rows.push_back({"uniqueness", "witness_max_on_samples", p, on_samples, on_samples <= 1e-8});
        rows.push_back({"uniqueness", "witness_unit_norm_defect", p, std::abs(w.norm() - 1.0), std::abs(w.norm() - 1.0) <= 1e-12});
        rows.push_back({"uniqueness", "witness_energy_above_band", p, br.energy_above, br.energy_within});
      }
    }
  }

  if (has("plancherel_polya")) {
    need_operator();
    StageTimer t(out, "plancherel_polya");
    if (c.sampling.indices) throw ParseError("config: plancherel_polya suite needs 'sampling.levels'");
    const int q = b->grid ? homogeneous_dimension(b->grid->m()) : 0;
    std::map<std::pair<int, int>, ConstantEstimate> est;
    for (int j : c.sampling.levels) {
      const auto s = make_sample_set(c, *b, j);
      for (int k : c.verify.pp_orders) {
        const auto e = plancherel_polya_constant(*d, s, k, q);
        est[{j, k}] = e;
        const std::string p = "j=" + std::to_string(j) + ";k=" + std::to_string(k);
        rows.push_back({"plancherel_polya", "C_emp", p, e.value, true, false});
        rows.push_back({"plancherel_polya", "C_emp_root", p, e.root, true, false});
        rows.push_back({"plancherel_polya", "certificate", p, e.certificate, e.infinite || e.certificate <= 1e-6});
      }
    }
    // finer lattices (smaller j) give smaller constants
    std::vector<int> levels = c.sampling.levels;
    std::sort(levels.begin(), levels.end());
    for (int k : c.verify.pp_orders) {
      for (std::size_t a = 1; a < levels.size(); ++a) {
        const double fine = est[{levels[a - 1], k}].value, coarse = est[{levels[a], k}].value;
        const std::string p = "k=" + std::to_string(k) + ";j=" + std::to_string(levels[a - 1]) + "<" + std::to_string(levels[a]);
        rows.push_back({"plancherel_polya", "monotone_in_j", p, coarse > 0.0 ? fine / coarse : 0.0,
                        fine <= coarse * (1.0 + 1e-10)});
      }
    }
    for (int j : levels) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (int k : c.verify.pp_orders) {
        const double r = est[{j, k}].root;
        if (r > 0.0) {
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
      }
      if (hi > 0.0)
        rows.push_back({"plancherel_polya", "root_spread_across_k", "j=" + std::to_string(j), hi / lo, hi / lo <= 2.0, false});
    }
  }

  if (has("norm_equivalence")) {
    need_operator();
    StageTimer t(out, "norm_equivalence");
    for (int j : c.sampling.indices ? std::vector<int>{0} : c.sampling.levels) {
      const auto s = make_sample_set(c, *b, j);
      const auto rep = norm_equivalence_scan(*d, s, c.verify.equivalence_order, c.verify.equivalence_trials,
                                         derive_seed(c.seed, "norm_equivalence/" + std::to_string(j)));
      const std::string p = "j=" + std::to_string(j) + ";k=" + std::to_string(c.verify.equivalence_order);
      const bool unique = !rep.witness;
      rows.push_back({"norm_equivalence", "lower", p, rep.lower, !unique || (rep.lower > 0.0 && std::isfinite(rep.lower))});
      rows.push_back({"norm_equivalence", "upper", p, rep.upper, rep.upper > 0.0 && std::isfinite(rep.upper)});
    }
  }

  bool all = true;
  Json jrows = Json::array();
  std::ostringstream csv;
  csv << "suite,property,parameter,value,asserted,pass\n";
  for (const auto& r : rows) {
    if (r.asserted && !r.pass) all = false;
    jrows.push_back(Json{{"suite", r.suite},
                         {"property", r.property},
                         {"parameter", r.parameter},
                         {"value", json_number(r.value)},
                         {"asserted", r.asserted},
                         {"pass", r.pass}});
    csv << r.suite << "," << r.property << "," << r.parameter << "," << csv_number(r.value) << ","
        << (r.asserted ? 1 : 0) << "," << (r.pass ? 1 : 0) << "\n";
  }
  out.add("verify.json", dump_json(Json{{"suites", c.verify.suites}, {"all_pass", all}, {"properties", jrows}}));
  out.add("verify.csv", csv.str());
  out.messages.push_back(all ? "all properties pass" : "property failures present");
  if (!all) out.exit_code = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Committing outputs

/// Writes every file (through a temporary name and a rename), then the
/// resolved configuration and the manifest. Files already written are
/// removed if a later write fails.
inline std::vector<std::string> commit_outputs(const std::string& dir, const std::string& command,
                                               const Json& resolved, RunOutput& out) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  out.add("config.resolved.json", dump_json(resolved));
  std::vector<fs::path> written;
  Json inventory = Json::array();
  try {
    for (const auto& [name, contents] : out.files) {
      const fs::path target = fs::path(dir) / name;
      const fs::path tmp = fs::path(dir) / (name + ".partial");
      {
        std::ofstream os(tmp, std::ios::binary);
        os << contents;
        if (!os) throw ParseError("cannot write '" + tmp.string() + "'");
      }
      fs::rename(tmp, target);
      written.push_back(target);
      Fnv1a h;
      h.string(contents);
      inventory.push_back(Json{{"name", name}, {"bytes", contents.size()}, {"fnv1a", hex64(h.digest())}});
    }
    Json timings = Json::object();
    for (const auto& [stage, ms] : out.timings_ms) timings[stage] = ms;
    Fnv1a ch;
    ch.string(resolved.dump());
    const Json manifest{{"tool", "pws"},
                        {"version", kToolVersion},
                        {"command", command},
                        {"config_hash", hex64(ch.digest())},
                        {"operator_fingerprint", out.operator_fingerprint},
                        {"timings_ms", timings},
                        {"files", inventory}};
    const fs::path mpath = fs::path(dir) / "manifest.json";
    std::ofstream os(mpath, std::ios::binary);
    os << dump_json(manifest);
    if (!os) throw ParseError("cannot write manifest");
    written.push_back(mpath);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    for (const auto& [name, contents] : out.files) fs::remove(fs::path(dir) / (name + ".partial"), ec);
    throw;
  }
  std::vector<std::string> names;
  for (const auto& p : written) names.push_back(p.filename().string());
  return names;
}

}  // namespace pws
