#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ouc/cutoff.hpp"
#include "ouc/error.hpp"
#include "ouc/io.hpp"
#include "ouc/models.hpp"
#include "ouc/ou.hpp"
#include "ouc/wasserstein.hpp"

#ifndef OUC_VERSION
#define OUC_VERSION "0.1.0"
#endif

namespace ouc {

using Json = nlohmann::ordered_json;

[[nodiscard]] inline const char* version() noexcept { return OUC_VERSION; }

// ---------------------------------------------------------------------------
// Config.

struct SystemSource {
  std::string preset;  ///< "", "oscillator" or "jacobi"
  OscillatorParams oscillator;
  JacobiParams jacobi;
  std::optional<Matrix> a;
  std::optional<Matrix> sigma;
  std::string a_csv;
  std::string sigma_csv;
};

struct SimulateSection {
  double t_end = 10.0;
  std::size_t n_steps = 1000;
  std::size_t n_paths = 1;
  std::size_t n_stationary = 1000;
  Scheme scheme = Scheme::Auto;
};

struct ObservableSection {
  bool enabled = false;
  double q = 1.0;
  double delta = 2.0;
  Vector eps;  ///< empty: reuse grids.eps
};

struct BoundsSection {
  Vector t;  ///< empty: no bounds.csv
  std::size_t mc = 512;
};

struct Figure1Section {
  OscillatorParams params;
  double t_max = 100.0;
  std::size_t n_points = 2001;
};

struct ExperimentConfig {
  SystemSource system;
  std::optional<NoiseSpec> noise;  ///< default: Brownian of sigma's column count
  Vector x;
  double p = 2.0;
  Vector eps_grid{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  Vector delta_grid{0.5, 2.0};
  Vector r_grid;
  Vector window_eps_grid{1e-5, 1e-6, 1e-7, 1e-8};
  std::size_t mc = 10000;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  double distinct_tol = kDistinctnessRelTol;
  SimulateSection simulate;
  ObservableSection observable;
  BoundsSection bounds;
  Figure1Section figure1;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

inline void only_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) config_error("unknown key '" + k + "' in " + where);
  }
}

[[nodiscard]] inline double get_number(const Json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) config_error(where + "." + key + " must be a number");
  return v.get<double>();
}

// Parsed files give unsigned integers, in-memory literals signed ones.
[[nodiscard]] inline bool non_negative_integer(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

[[nodiscard]] inline std::size_t get_count(const Json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!non_negative_integer(v)) config_error(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

[[nodiscard]] inline Vector get_vector(const Json& v, const std::string& where) {
  if (!v.is_array()) config_error(where + " must be an array of numbers");
  Vector out;
  for (const auto& e : v) {
    if (!e.is_number()) config_error(where + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

[[nodiscard]] inline Matrix get_matrix(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) config_error(where + " must be a non-empty array of rows");
  std::vector<Vector> rows;
  for (const auto& r : v) rows.push_back(get_vector(r, where));
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) config_error(where + " has ragged rows");
    for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

[[nodiscard]] inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(row);
  }
  return rows;
}

[[nodiscard]] inline Json vector_json(std::span<const double> v) {
  Json a = Json::array();
  for (double e : v) a.push_back(e);
  return a;
}

[[nodiscard]] inline Scheme parse_scheme(const std::string& s) {
  if (s == "auto") return Scheme::Auto;
  if (s == "exact") return Scheme::Exact;
  if (s == "euler_maruyama") return Scheme::EulerMaruyama;
  if (s == "exponential_midpoint") return Scheme::ExponentialMidpoint;
  config_error("unknown scheme '" + s + "'");
}

[[nodiscard]] inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Auto: return "auto";
    case Scheme::Exact: return "exact";
    case Scheme::EulerMaruyama: return "euler_maruyama";
    case Scheme::ExponentialMidpoint: return "exponential_midpoint";
  }
  return "auto";
}

}  // namespace detail

/// Tagged-object form, e.g. {"type":"alpha_stable","alpha":1.5,"scale":1.0,"dim":2}.
[[nodiscard]] inline NoiseSpec noise_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    detail::config_error("noise spec needs a string 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "brownian") {
    detail::only_keys(j, {"type", "dim"}, "noise");
    return Brownian{detail::get_count(j, "dim", "noise")};
  }
  if (type == "alpha_stable") {
    detail::only_keys(j, {"type", "dim", "alpha", "scale"}, "noise");
    AlphaStable a;
    a.dim = detail::get_count(j, "dim", "noise");
    a.alpha = detail::get_number(j, "alpha", "noise");
    if (j.contains("scale")) a.scale = detail::get_number(j, "scale", "noise");
    return a;
  }
  if (type == "compound_poisson") {
    detail::only_keys(j, {"type", "dim", "rate", "jumps"}, "noise");
    CompoundPoisson c;
    c.dim = detail::get_count(j, "dim", "noise");
    c.rate = detail::get_number(j, "rate", "noise");
    const Json& jumps = j.at("jumps");
    const std::string jt = jumps.value("type", "");
    if (jt == "gaussian") {
      detail::only_keys(jumps, {"type", "std"}, "noise.jumps");
      c.jumps = IsotropicGaussianJumps{detail::get_number(jumps, "std", "noise.jumps")};
    } else if (jt == "atoms") {
      detail::only_keys(jumps, {"type", "points", "weights"}, "noise.jumps");
      FixedAtoms f;
      for (const auto& pt : jumps.at("points")) f.points.push_back(detail::get_vector(pt, "noise.jumps.points"));
      f.weights = detail::get_vector(jumps.at("weights"), "noise.jumps.weights");
      c.jumps = std::move(f);
    } else {
      detail::config_error("jump law type must be 'gaussian' or 'atoms'");
    }
    return c;
  }
  if (type == "drift") {
    detail::only_keys(j, {"type", "gamma"}, "noise");
    return Drift{detail::get_vector(j.at("gamma"), "noise.gamma")};
  }
  if (type == "sum") {
    detail::only_keys(j, {"type", "parts"}, "noise");
    NoiseSum s;
    if (!j.at("parts").is_array()) detail::config_error("noise.parts must be an array");
    for (const auto& part : j.at("parts")) s.parts.push_back(noise_from_json(part));
    return s;
  }
  detail::config_error("unknown noise type '" + type + "'");
}

[[nodiscard]] inline Json noise_to_json(const NoiseSpec& spec) {
  return std::visit(detail::overloaded{
                        [](const Brownian& b) { return Json{{"type", "brownian"}, {"dim", b.dim}}; },
                        [](const AlphaStable& a) {
                          return Json{{"type", "alpha_stable"}, {"dim", a.dim}, {"alpha", a.alpha}, {"scale", a.scale}};
                        },
                        [](const CompoundPoisson& c) {
                          Json jumps = std::visit(
                              detail::overloaded{
                                  [](const IsotropicGaussianJumps& g) { return Json{{"type", "gaussian"}, {"std", g.std}}; },
                                  [](const FixedAtoms& f) {
                                    Json pts = Json::array();
                                    for (const auto& p : f.points) pts.push_back(detail::vector_json(p));
                                    return Json{{"type", "atoms"}, {"points", pts}, {"weights", detail::vector_json(f.weights)}};
                                  },
                              },
                              c.jumps);
                          return Json{{"type", "compound_poisson"}, {"dim", c.dim}, {"rate", c.rate}, {"jumps", jumps}};
                        },
                        [](const Drift& d) { return Json{{"type", "drift"}, {"gamma", detail::vector_json(d.gamma)}}; },
                        [](const NoiseSum& s) {
                          Json parts = Json::array();
                          for (const auto& p : s.parts) parts.push_back(noise_to_json(p));
                          return Json{{"type", "sum"}, {"parts", parts}};
                        },
                    },
                    spec.kind);
}

/// Parses and schema-checks a config document. `base_dir` resolves relative CSV paths.
[[nodiscard]] inline ExperimentConfig config_from_json(const Json& j, const std::string& base_dir = ".") {
  using namespace detail;
  only_keys(j,
            {"version", "system", "noise", "x", "p", "grids", "mc", "seed", "out", "distinct_tol", "simulate",
             "observable", "bounds", "figure1"},
            "config");
  ExperimentConfig c;
  if (j.contains("system")) {
    const Json& s = j.at("system");
    only_keys(s, {"preset", "params", "A", "sigma", "A_csv", "sigma_csv"}, "system");
    if (s.contains("preset")) {
      c.system.preset = s.at("preset").get<std::string>();
      const Json params = s.value("params", Json::object());
      if (c.system.preset == "oscillator") {
        only_keys(params, {"kappa", "gamma", "varsigma"}, "system.params");
        if (params.contains("kappa")) c.system.oscillator.kappa = get_number(params, "kappa", "system.params");
        if (params.contains("gamma")) c.system.oscillator.gamma = get_number(params, "gamma", "system.params");
        if (params.contains("varsigma")) c.system.oscillator.varsigma = get_number(params, "varsigma", "system.params");
      } else if (c.system.preset == "jacobi") {
        only_keys(params, {"m", "kappa", "gamma", "varsigma_1", "varsigma_m"}, "system.params");
        if (params.contains("m")) c.system.jacobi.m = get_count(params, "m", "system.params");
        if (params.contains("kappa")) c.system.jacobi.kappa = get_number(params, "kappa", "system.params");
        if (params.contains("gamma")) c.system.jacobi.gamma = get_number(params, "gamma", "system.params");
        if (params.contains("varsigma_1")) c.system.jacobi.varsigma_1 = get_number(params, "varsigma_1", "system.params");
        if (params.contains("varsigma_m")) c.system.jacobi.varsigma_m = get_number(params, "varsigma_m", "system.params");
      } else {
        config_error("unknown preset '" + c.system.preset + "' (expected oscillator or jacobi)");
      }
      if (s.contains("A") || s.contains("sigma") || s.contains("A_csv") || s.contains("sigma_csv")) {
        config_error("system takes either a preset or explicit matrices, not both");
      }
    } else {
      if (s.contains("A")) c.system.a = get_matrix(s.at("A"), "system.A");
      if (s.contains("sigma")) c.system.sigma = get_matrix(s.at("sigma"), "system.sigma");
      if (s.contains("A_csv")) {
        c.system.a_csv = s.at("A_csv").get<std::string>();
        c.system.a = matrix_from_csv(read_file((std::filesystem::path(base_dir) / c.system.a_csv).string()));
      }
      if (s.contains("sigma_csv")) {
        c.system.sigma_csv = s.at("sigma_csv").get<std::string>();
        c.system.sigma = matrix_from_csv(read_file((std::filesystem::path(base_dir) / c.system.sigma_csv).string()));
      }
      if (!c.system.a) config_error("system needs a preset, A or A_csv");
      if (!c.system.sigma) c.system.sigma = Matrix::identity(c.system.a->rows());
    }
  } else {
    config_error("config needs a 'system' section");
  }
  if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
  if (j.contains("x")) c.x = get_vector(j.at("x"), "x");
  if (j.contains("p")) c.p = get_number(j, "p", "config");
  if (j.contains("grids")) {
    const Json& g = j.at("grids");
    only_keys(g, {"eps", "delta", "r", "window_eps"}, "grids");
    if (g.contains("eps")) c.eps_grid = get_vector(g.at("eps"), "grids.eps");
    if (g.contains("delta")) c.delta_grid = get_vector(g.at("delta"), "grids.delta");
    if (g.contains("r")) c.r_grid = get_vector(g.at("r"), "grids.r");
    if (g.contains("window_eps")) c.window_eps_grid = get_vector(g.at("window_eps"), "grids.window_eps");
    if (c.eps_grid.empty() || c.delta_grid.empty() || c.window_eps_grid.empty()) config_error("grids must be non-empty");
  }
  if (j.contains("mc")) c.mc = get_count(j, "mc", "config");
  if (j.contains("seed")) {
    if (!non_negative_integer(j.at("seed"))) config_error("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  if (j.contains("distinct_tol")) c.distinct_tol = get_number(j, "distinct_tol", "config");
  if (j.contains("simulate")) {
    const Json& s = j.at("simulate");
    only_keys(s, {"t_end", "n_steps", "n_paths", "n_stationary", "scheme"}, "simulate");
    if (s.contains("t_end")) c.simulate.t_end = get_number(s, "t_end", "simulate");
    if (s.contains("n_steps")) c.simulate.n_steps = get_count(s, "n_steps", "simulate");
    if (s.contains("n_paths")) c.simulate.n_paths = get_count(s, "n_paths", "simulate");
    if (s.contains("n_stationary")) c.simulate.n_stationary = get_count(s, "n_stationary", "simulate");
    if (s.contains("scheme")) c.simulate.scheme = parse_scheme(s.at("scheme").get<std::string>());
  }
  if (j.contains("observable")) {
    const Json& o = j.at("observable");
    only_keys(o, {"q", "delta", "eps"}, "observable");
    c.observable.enabled = true;
    if (o.contains("q")) c.observable.q = get_number(o, "q", "observable");
    if (o.contains("delta")) c.observable.delta = get_number(o, "delta", "observable");
    if (o.contains("eps")) c.observable.eps = get_vector(o.at("eps"), "observable.eps");
  }
  if (j.contains("bounds")) {
    const Json& b = j.at("bounds");
    only_keys(b, {"t", "mc"}, "bounds");
    if (b.contains("t")) c.bounds.t = get_vector(b.at("t"), "bounds.t");
    if (b.contains("mc")) c.bounds.mc = get_count(b, "mc", "bounds");
  }
  if (j.contains("figure1")) {
    const Json& f = j.at("figure1");
    only_keys(f, {"kappa", "gamma", "varsigma", "t_max", "n_points"}, "figure1");
    if (f.contains("kappa")) c.figure1.params.kappa = get_number(f, "kappa", "figure1");
    if (f.contains("gamma")) c.figure1.params.gamma = get_number(f, "gamma", "figure1");
    if (f.contains("varsigma")) c.figure1.params.varsigma = get_number(f, "varsigma", "figure1");
    if (f.contains("t_max")) c.figure1.t_max = get_number(f, "t_max", "figure1");
    if (f.contains("n_points")) c.figure1.n_points = get_count(f, "n_points", "figure1");
  }
  return c;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config parse error: ") + e.what());
  }
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path().string());
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config schema error: ") + e.what());
  }
}

/// Fully resolved config (defaults filled in, matrices inlined).
[[nodiscard]] inline Json config_to_json(const ExperimentConfig& c) {
  using detail::vector_json;
  Json j;
  j["version"] = version();
  Json sys;
  if (c.system.preset == "oscillator") {
    sys["preset"] = "oscillator";
    sys["params"] = {{"kappa", c.system.oscillator.kappa},
                     {"gamma", c.system.oscillator.gamma},
                     {"varsigma", c.system.oscillator.varsigma}};
  } else if (c.system.preset == "jacobi") {
    sys["preset"] = "jacobi";
    sys["params"] = {{"m", c.system.jacobi.m},
                     {"kappa", c.system.jacobi.kappa},
                     {"gamma", c.system.jacobi.gamma},
                     {"varsigma_1", c.system.jacobi.varsigma_1},
                     {"varsigma_m", c.system.jacobi.varsigma_m}};
  } else {
    sys["A"] = detail::matrix_json(*c.system.a);
    sys["sigma"] = detail::matrix_json(*c.system.sigma);
  }
  j["system"] = sys;
  if (c.noise) j["noise"] = noise_to_json(*c.noise);
  j["x"] = vector_json(c.x);
  j["p"] = c.p;
  j["grids"] = {{"eps", vector_json(c.eps_grid)},
                {"delta", vector_json(c.delta_grid)},
                {"r", vector_json(c.r_grid)},
                {"window_eps", vector_json(c.window_eps_grid)}};
  j["mc"] = c.mc;
  if (c.seed) j["seed"] = *c.seed;
  j["out"] = c.out;
  j["distinct_tol"] = c.distinct_tol;
  j["simulate"] = {{"t_end", c.simulate.t_end},
                   {"n_steps", c.simulate.n_steps},
                   {"n_paths", c.simulate.n_paths},
                   {"n_stationary", c.simulate.n_stationary},
                   {"scheme", detail::scheme_name(c.simulate.scheme)}};
  if (c.observable.enabled) {
    j["observable"] = {{"q", c.observable.q}, {"delta", c.observable.delta}, {"eps", vector_json(c.observable.eps)}};
  }
  if (!c.bounds.t.empty()) j["bounds"] = {{"t", vector_json(c.bounds.t)}, {"mc", c.bounds.mc}};
  j["figure1"] = {{"kappa", c.figure1.params.kappa},
                  {"gamma", c.figure1.params.gamma},
                  {"varsigma", c.figure1.params.varsigma},
                  {"t_max", c.figure1.t_max},
                  {"n_points", c.figure1.n_points}};
  return j;
}

/// Builds the validated OU system described by the config.
[[nodiscard]] inline OUSystem make_system(const ExperimentConfig& c) {
  Matrix a;
  Matrix sigma;
  if (c.system.preset == "oscillator") {
    validate(c.system.oscillator);
    a = Matrix{{0.0, -1.0}, {c.system.oscillator.kappa, c.system.oscillator.gamma}};
    sigma = Matrix{{0.0, 0.0}, {0.0, c.system.oscillator.varsigma}};
  } else if (c.system.preset == "jacobi") {
    std::tie(a, sigma) = jacobi_matrices(c.system.jacobi);
  } else {
    a = *c.system.a;
    sigma = *c.system.sigma;
  }
  NoiseSpec noise = c.noise ? *c.noise : NoiseSpec(Brownian{sigma.cols()});
  return build_system(std::move(a), std::move(sigma), std::move(noise), c.distinct_tol);
}

// ---------------------------------------------------------------------------
// Commands. Each writes into `out_dir` and returns a JSON summary.

struct RunOptions {
  std::string out_dir;
  unsigned threads = 1;
};

namespace detail {

[[nodiscard]] inline std::uint64_t require_seed(const ExperimentConfig& c) {
  if (!c.seed) config_error("a seed is required (config 'seed' or --seed)");
  return *c.seed;
}

[[nodiscard]] inline std::filesystem::path prepare_out(const ExperimentConfig& c, const RunOptions& opt) {
  std::filesystem::path dir = opt.out_dir.empty() ? c.out : opt.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) config_error("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file((dir / "resolved_config.json").string(), config_to_json(c).dump(2) + "\n");
  return dir;
}

[[nodiscard]] inline Vector require_x(const ExperimentConfig& c, const OUSystem& sys) {
  if (c.x.size() != sys.dim()) {
    config_error("x has " + std::to_string(c.x.size()) + " entries, system dimension is " + std::to_string(sys.dim()));
  }
  return c.x;
}

[[nodiscard]] inline Json complex_json(const Complex& z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

}  // namespace detail

/// Spectrum, flags and (when x is given) the decay rate of x.
inline Json cmd_analyze(const ExperimentConfig& c, const RunOptions& opt) {
  const OUSystem sys = make_system(c);
  const auto dir = detail::prepare_out(c, opt);
  Json j;
  j["version"] = version();
  j["dim"] = sys.dim();
  Json vals = Json::array();
  for (const auto& v : sys.spectral().values) vals.push_back(detail::complex_json(v));
  j["eigenvalues"] = vals;
  j["hurwitz"] = sys.hurwitz();
  j["generic"] = sys.generic();
  j["normal"] = sys.normal();
  j["min_eigen_gap"] = sys.spectral().min_gap;
  j["distinct_tol"] = c.distinct_tol;
  j["rho_min"] = sys.rho_min();
  j["rho_max"] = sys.rho_max();
  j["stationary_mean"] = detail::vector_json(stationary_mean(sys));
  if (!c.x.empty()) {
    const Vector x = detail::require_x(c, sys);
    j["x"] = detail::vector_json(x);
    j["mean_condition"] = mean_condition(sys, x);
    if (sys.generic() && norm(x) > 0.0) {
      const auto ra = rate_analysis(sys, x);
      j["rho_x"] = ra.rho_x;
      j["c1"] = ra.c1;
      j["c2"] = ra.c2;
      j["active"] = ra.active;
      j["resonant"] = ra.resonant;
      j["envelope_horizon"] = ra.horizon;
      const Vector z = subtract(x, stationary_mean(sys));
      if (z == x) {
        j["rho_mean_route"] = ra.rho_x;
      } else if (norm(z) > 0.0) {
        j["rho_mean_route"] = rate_analysis(sys, z).rho_x;
      }
    } else {
      j["rho_x"] = nullptr;
    }
  }
  write_file((dir / "analysis.json").string(), j.dump(2) + "\n");
  return j;
}

/// Sample paths and stationary draws.
inline Json cmd_simulate(const ExperimentConfig& c, const RunOptions& opt) {
  const OUSystem sys = make_system(c);
  const std::uint64_t seed = detail::require_seed(c);
  const Vector x = detail::require_x(c, sys);
  const auto dir = detail::prepare_out(c, opt);
  const RngStream root(seed, 0);
  const auto& s = c.simulate;
  if (s.n_paths == 0) detail::config_error("simulate.n_paths must be >= 1");
  std::vector<std::string> blocks(s.n_paths);
  const RngStream paths_rng = root.substream(1);
  parallel_for(s.n_paths, opt.threads, [&](std::size_t i) {
    blocks[i] = path_to_csv(simulate_path(sys, x, s.t_end, s.n_steps, paths_rng.substream(i), s.scheme), false);
  });
  std::string paths = "t," + numbered_header("x", sys.dim()) + '\n';
  for (const auto& b : blocks) paths += b;
  write_file((dir / "paths.csv").string(), paths);
  Json j{{"version", version()}, {"paths", s.n_paths}, {"steps", s.n_steps}, {"seed", seed}};
  if (s.n_stationary > 0) {
    const auto st = sample_stationary(sys, s.n_stationary, root.substream(2), opt.threads);
    write_file((dir / "stationary.csv").string(), samples_to_csv(st));
    j["stationary"] = s.n_stationary;
  }
  return j;
}

/// Dichotomy sweep, optional window profile and observable check.
inline Json cmd_cutoff(const ExperimentConfig& c, const RunOptions& opt) {
  const OUSystem sys = make_system(c);
  const std::uint64_t seed = detail::require_seed(c);
  const Vector x = detail::require_x(c, sys);
  const auto dir = detail::prepare_out(c, opt);
  const RngStream root(seed, 0);

  const auto rep = dichotomy_sweep(sys, x, c.p, c.eps_grid, c.delta_grid, c.mc, root.substream(100), opt.threads);
  std::string csv = "eps,delta,t,ratio,route,verdict\n";
  for (std::size_t k = 0; k < rep.cells.size(); ++k) {
    const auto& cell = rep.cells[k];
    const char* verdict = to_string(rep.verdicts[k / rep.eps_grid.size()]);
    const auto& e = cell.estimate;
    auto row = [&](double value, Route route) {
      csv += fmt(cell.eps) + ',' + fmt(cell.delta) + ',' + fmt(e.t) + ',' + fmt(value / cell.eps) + ',' +
             to_string(route) + ',' + verdict + '\n';
    };
    if (rep.exact) {
      row(e.upper, Route::ExactGaussian);
    } else {
      row(e.upper, e.upper_route);
      row(e.lower, e.lower_route);
    }
  }
  write_file((dir / "dichotomy.csv").string(), csv);

  Json j;
  j["version"] = version();
  j["x"] = detail::vector_json(x);
  j["rho_x"] = rep.rho_x;
  j["rho_mean_route"] = rep.rho_lower;
  j["rates_differ"] = rep.rates_differ;
  j["mean_condition"] = rep.mean_condition;
  j["p"] = c.p;
  j["eps"] = detail::vector_json(rep.eps_grid);
  j["delta"] = detail::vector_json(rep.delta_grid);
  j["t_eps"] = detail::vector_json(rep.t_eps);
  j["exact"] = rep.exact;
  j["thresholds"] = {{"vanish_below", rep.thresholds.vanish_below},
                     {"diverge_above", rep.thresholds.diverge_above},
                     {"min_points", rep.thresholds.min_points},
                     {"se_multiplier", rep.thresholds.se_multiplier}};
  Json verdicts = Json::array();
  for (std::size_t d = 0; d < rep.delta_grid.size(); ++d) {
    verdicts.push_back({{"delta", rep.delta_grid[d]}, {"verdict", to_string(rep.verdicts[d])}});
  }
  j["verdicts"] = verdicts;
  j["mc"] = c.mc;
  j["seed"] = seed;

  if (!c.r_grid.empty()) {
    const auto wp = window_profile(sys, x, c.p, c.window_eps_grid, c.r_grid, c.mc, root.substream(200), opt.threads);
    std::string wcsv = "eps,r,t,lower_ratio,upper_ratio\n";
    for (const auto& cell : wp.cells) {
      wcsv += csv_row(Vector{cell.eps, cell.r, cell.t, cell.lower_ratio, cell.upper_ratio}) + '\n';
    }
    write_file((dir / "window.csv").string(), wcsv);
    j["window"] = {{"r", detail::vector_json(wp.r_grid)},
                   {"inf_lower_ratio", detail::vector_json(wp.inf_lower)},
                   {"sup_upper_ratio", detail::vector_json(wp.sup_upper)},
                   {"lower_route", to_string(wp.lower_route)}};
  }
  if (c.observable.enabled) {
    const Vector& eps = c.observable.eps.empty() ? c.eps_grid : c.observable.eps;
    const auto ob = observable_precutoff(sys, x, c.observable.q, eps, c.observable.delta, c.mc, root.substream(300),
                                         opt.threads);
    std::string ocsv = "eps,t,gap,gap_se,ratio\n";
    for (const auto& r : ob.rows) ocsv += csv_row(Vector{r.eps, r.t, r.gap, r.gap_se, r.ratio}) + '\n';
    write_file((dir / "observable.csv").string(), ocsv);
    j["observable"] = {{"q", ob.q}, {"delta", ob.delta}, {"verdict", to_string(ob.verdict)}};
  }
  if (!c.bounds.t.empty()) {
    std::string bcsv = std::string(kBoundsCsvHeader) + '\n';
    for (std::size_t i = 0; i < c.bounds.t.size(); ++i) {
      const auto b = ergodicity_bounds(sys, x, c.bounds.t[i], c.p, c.bounds.mc, root.substream(400 + i), opt.threads);
      bcsv += bounds_csv_row(b) + '\n';
    }
    write_file((dir / "bounds.csv").string(), bcsv);
  }
  write_file((dir / "cutoff.json").string(), j.dump(2) + "\n");
  return j;
}

/// t -> e^{2 gamma t} W_2^2(X_t(0), mu) for the oscillator on [0, t_max].
inline Json cmd_figure1(const ExperimentConfig& c, const RunOptions& opt) {
  const auto& f = c.figure1;
  if (f.n_points < 2) detail::config_error("figure1.n_points must be >= 2");
  if (!(f.t_max > 0.0)) detail::config_error("figure1.t_max must be > 0");
  const auto dir = detail::prepare_out(c, opt);
  Vector t(f.n_points);
  for (std::size_t i = 0; i < f.n_points; ++i) t[i] = f.t_max * static_cast<double>(i) / static_cast<double>(f.n_points - 1);
  const Vector v = oscillator_band_curve(f.params, t);
  std::string csv = "t,value\n";
  for (std::size_t i = 0; i < t.size(); ++i) csv += fmt(t[i]) + ',' + fmt(v[i]) + '\n';
  write_file((dir / "figure1.csv").string(), csv);
  return Json{{"version", version()}, {"points", f.n_points}, {"kappa", f.params.kappa}, {"gamma", f.params.gamma}};
}

}  // namespace ouc
