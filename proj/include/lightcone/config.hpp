#pragma once

// Flat INI configuration for the lab harness. Every experiment reads the
// shared [run], [grid], [model] and [bounds] sections plus its own section;
// keys are addressed as "section.key". Physical quantities are in natural
// units (hbar = mass = 1, T = kappa |p|^2 + V).

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lightcone/bounds.hpp"
#include "lightcone/error.hpp"
#include "lightcone/fock.hpp"
#include "lightcone/grid.hpp"

namespace lightcone {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"onebody-scan",     "propagation-norm", "manybody-scan",
                                              "condexp-check",    "constants-report", "clustering",
                                              "volume-convergence"};
  return names;
}

inline bool is_experiment(const std::string& name) {
  for (const auto& n : experiment_names())
    if (n == name) return true;
  return false;
}

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text) {
    Config c;
    std::istringstream is(text);
    try {
      boost::property_tree::ini_parser::read_ini(is, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(errc::config, std::string("cannot parse config: ") + e.what());
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), errc::config, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return bool(tree_.get_optional<std::string>(key)); }

  std::string text(const std::string& key, const std::string& fallback) const {
    return tree_.get<std::string>(key, fallback);
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    auto s = tree_.get_optional<std::string>(key);
    if (!s) return fallback;
    return convert<T>(key, *s);
  }

  /// Comma or whitespace separated list of numbers.
  std::vector<double> list(const std::string& key, std::vector<double> fallback = {}) const {
    auto s = tree_.get_optional<std::string>(key);
    if (!s) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream is(*s);
    while (is >> item) {
      std::istringstream parts(item);
      std::string cell;
      while (std::getline(parts, cell, ','))
        if (!cell.empty()) out.push_back(convert<double>(key, cell));
    }
    return out;
  }

  std::vector<int> int_list(const std::string& key, std::vector<int> fallback = {}) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (double v : list(key)) {
      require(v == std::floor(v), errc::config, "'" + key + "' must list integers");
      out.push_back(int(v));
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

  const boost::property_tree::ptree& tree() const { return tree_; }

 private:
  template <class T>
  static T convert(const std::string& key, const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      fail(errc::config, "'" + key + "' is not a boolean: '" + s + "'");
    } else {
      std::istringstream is(s);
      T v{};
      is >> v;
      require(!is.fail() && (is >> std::ws).eof(), errc::config, "'" + key + "' is not a number: '" + s + "'");
      return v;
    }
  }

  boost::property_tree::ptree tree_;
};

// --- shared readers --------------------------------------------------------------

inline Grid config_grid(const Config& c) {
  return Grid(c.get<int>("grid.dim", 1), c.get<int>("grid.points", 256), c.get<double>("grid.length", 64.0));
}

inline BoundParams config_bounds(const Config& c) {
  BoundParams P;
  P.n = c.get("bounds.n", P.n);
  P.delta = c.get("bounds.delta", P.delta);
  P.sigma = c.get("model.sigma", P.sigma);
  P.alpha = c.get("bounds.alpha", P.alpha);
  P.n_V = c.get("bounds.n_V", P.n_V);
  P.n_W = c.get("bounds.n_W", P.n_W);
  P.c_W = c.get("bounds.c_W", P.c_W);
  P.W_l1 = c.get("bounds.W_l1", P.W_l1);
  P.C_ob0 = c.get("bounds.C_ob0", P.C_ob0);
  P.C_ob1 = c.get("bounds.C_ob1", P.C_ob1);
  P.C_nW = c.get("bounds.C_nW", P.C_nW);
  P.C_phi = c.get("bounds.C_phi", P.C_phi);
  P.C_mb1 = c.get("bounds.C_mb1", P.C_mb1);
  P.C_mb2 = c.get("bounds.C_mb2", P.C_mb2);
  return P;
}

/// Light-cone radius <t>^{1 + (1 + 2 delta)/n}.
inline double cone_radius(double t, int n, double delta) {
  return std::pow(japanese_bracket(t), 1.0 + (1.0 + 2.0 * delta) / n);
}

// --- validation --------------------------------------------------------------------

struct Violation {
  errc code = errc::config;
  std::string message;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// Sweep lists that each experiment reads; all must be non-empty.
inline std::vector<std::string> sweep_keys(const std::string& experiment) {
  if (experiment == "onebody-scan") return {"onebody.t"};
  if (experiment == "propagation-norm") return {"propagation.gaps"};
  if (experiment == "manybody-scan") return {"manybody.t", "manybody.distances"};
  if (experiment == "condexp-check") return {"condexp.C_X"};
  if (experiment == "constants-report") return {"constants.t"};
  if (experiment == "clustering") return {"clustering.b", "clustering.distances"};
  if (experiment == "volume-convergence") return {"volume.t", "volume.radii"};
  return {};
}

/// Section holding the mode set of a Fock-space experiment.
inline std::string fock_section(const std::string& experiment) {
  if (experiment == "manybody-scan") return "manybody";
  if (experiment == "condexp-check") return "condexp";
  if (experiment == "clustering") return "clustering";
  if (experiment == "volume-convergence") return "volume";
  return "";
}

}  // namespace detail

/// Checks a configuration before any numerics run; empty means runnable.
inline std::vector<Violation> validate(const Config& c, const std::string& experiment) {
  std::vector<Violation> out;
  auto add = [&](errc code, std::string m) { out.push_back({code, std::move(m)}); };
  if (!is_experiment(experiment)) {
    add(errc::config, "unknown experiment '" + experiment + "'");
    return out;
  }
  try {
    const int dim = c.get<int>("grid.dim", 1), points = c.get<int>("grid.points", 256);
    const double L = c.get<double>("grid.length", 64.0);
    if (dim != 1 && dim != 2) add(errc::config, "grid.dim must be 1 or 2");
    if (points < 2 || (points & (points - 1)) != 0) add(errc::config, "grid.points must be a power of two");
    if (!(L > 0.0)) add(errc::config, "grid.length must be positive");
    if (!out.empty()) return out;
    const double h = L / points;

    const BoundParams P = config_bounds(c);
    if (P.n < 1) add(errc::parameter, "n must be positive");
    if (2 * P.n > P.n_V || P.n > P.n_W)
      add(errc::hypothesis, "n ≤ n_V/2 ∧ n_W violated (n = " + std::to_string(P.n) + ", n_V = " +
                                std::to_string(P.n_V) + ", n_W = " + std::to_string(P.n_W) + ")");
    if (!(P.delta > 0.0)) add(errc::parameter, "delta must be positive");
    if (!(P.alpha > 1.0)) add(errc::parameter, "alpha must exceed 1");
    if (!(c.get<double>("model.kappa", 0.5) > 0.0)) add(errc::parameter, "model.kappa must be positive");

    auto resolution = [&](const std::string& key, double fallback) {
      const double s = c.get<double>(key, fallback);
      if (!(s >= 2.0 * h))
        add(errc::resolution, "resolution: " + key + " = " + detail::num(s) + " is below 2h = " + detail::num(2.0 * h));
    };
    resolution("model.sigma", 1.0);

    for (const auto& key : detail::sweep_keys(experiment)) {
      if (!c.has(key)) continue;  // defaults are non-empty
      if (c.text(key, "") != "auto" && c.list(key).empty()) add(errc::config, "sweep list '" + key + "' is empty");
    }

    const bool dense = experiment == "onebody-scan" || experiment == "propagation-norm" ||
                       experiment == "constants-report";
    if (dense && (dim == 1 ? Eigen::Index(points) : Eigen::Index(points) * points) > dense_eig_cap)
      add(errc::capacity, "grid exceeds the dense eigendecomposition cap of " + std::to_string(dense_eig_cap));

    if (experiment == "onebody-scan" || experiment == "constants-report") {
      const std::string sec = experiment == "onebody-scan" ? "onebody" : "constants";
      resolution(sec + ".probe_sigma", c.get<double>("model.sigma", 1.0));
      std::vector<double> ts = c.list(sec + ".t", {0.5, 1.0, 2.0});
      double far = 0.0;
      for (double t : ts) far = std::max(far, cone_radius(t, P.n, P.delta));
      if (far >= 0.5 * L)
        add(errc::resolution, "box too small: L/2 = " + detail::num(0.5 * L) + " is inside the light cone radius " +
                                  detail::num(far));
      double reach = 0.0;
      if (c.text(sec + ".R", "auto") == "auto") {
        for (double t : ts) reach = std::max(reach, 2.0 * cone_radius(t, P.n, P.delta) * c.get(sec + ".R_span", 10.0));
      } else {
        for (double R : c.list(sec + ".R")) reach = std::max(reach, R);
      }
      if (reach >= 0.5 * L)
        add(errc::resolution, "box too small: probes reach " + detail::num(reach) + " beyond L/2 = " + detail::num(0.5 * L));
    }
    if (experiment == "propagation-norm") {
      const double r = c.get("propagation.r", 2.0);
      for (double gap : c.list("propagation.gaps", {8, 16, 32}))
        if (r + gap > 0.5 * L)
          add(errc::resolution, "box too small: R = r + gap = " + detail::num(r + gap) + " exceeds L/2");
      if (!(c.get("propagation.alpha", 2.0) > 1.0)) add(errc::parameter, "propagation.alpha must exceed 1");
      if (!(c.get("propagation.E", 4.0) > 0.0)) add(errc::parameter, "propagation.E must be positive");
    }
    if (const std::string sec = detail::fock_section(experiment); !sec.empty()) {
      const int M = c.get<int>(sec + ".modes", 8);
      if (M < 2 || M > max_modes)
        add(errc::capacity, "mode count " + std::to_string(M) + " outside [2, " + std::to_string(max_modes) + "]");
      if (sec != "condexp") resolution(sec + ".mode_width", 0.5);
      const double spacing = c.get(sec + ".mode_spacing", 1.0);
      if (M * spacing >= L) add(errc::resolution, "box too small for " + std::to_string(M) + " modes");
    }
    if (experiment == "manybody-scan") {
      const int M = c.get<int>("manybody.modes", 8);
      const int centers = c.get<int>("manybody.centers", 6);
      if (centers < 0 || centers > M) add(errc::config, "manybody.centers must lie in [0, modes]");
      const int f = c.get<int>("manybody.f_mode", 0);
      for (int D : c.int_list("manybody.distances", {2, 3, 4}))
        if (f + D < 0 || f + D >= M) add(errc::config, "distance " + std::to_string(D) + " leaves the mode set");
    }
  } catch (const error& e) {
    add(e.code(), e.what());
  }
  return out;
}

}  // namespace lightcone
