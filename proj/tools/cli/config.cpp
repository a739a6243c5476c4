#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace svcflm::cli {

using nlohmann::json;

namespace {

// Tracks which keys of one JSON object were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = raw(key);
    if (!v) return;
    try {
      read(*v, out);
    } catch (const json::exception& e) {
      throw ConfigError(name(key) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(name(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(doc_.at(key), name(key));
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name(key) + "'");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  static void read(const json& v, int& out) {
    if (!v.is_number_integer()) throw ConfigError("expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError("expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, double& out) {
    if (!v.is_number()) throw ConfigError("expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError("expected a finite number");
  }
  static void read(const json& v, bool& out) {
    if (!v.is_boolean()) throw ConfigError("expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, fs::path& out) {
    if (!v.is_string()) throw ConfigError("expected a path string");
    out = v.get<std::string>();
  }
  static void read(const json& v, std::optional<double>& out) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    double x = 0.0;
    read(v, x);
    out = x;
  }
  template <class T>
  static void read(const json& v, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError("expected an array");
    out.clear();
    for (const auto& e : v) {
      T x{};
      read(e, x);
      out.push_back(x);
    }
  }
  static void read(const json& v, PilotEstimator& out) {
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "joint") out = PilotEstimator::joint;
    else if (s == "per_group") out = PilotEstimator::per_group;
    else throw ConfigError("expected \"joint\" or \"per_group\"");
  }
  static void read(const json& v, DfNorm& out) {
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "theta") out = DfNorm::theta;
    else if (s == "b") out = DfNorm::b;
    else throw ConfigError("expected \"theta\" or \"b\"");
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_basis(Section sec, BasisSpec& spec) {
  sec.get("order", spec.order);
  sec.get("n_basis", spec.n_basis);
  sec.get("lower", spec.lower);
  sec.get("upper", spec.upper);
  sec.finish();
}

void read_grid(Section& sec, TuningGrid& grid) {
  sec.get("lambdas", grid.lambdas);
  sec.get("n_lambda", grid.n_lambda);
  sec.get("lambda_ratio", grid.lambda_ratio);
  sec.get("alphas", grid.alphas);
  sec.get("m2_values", grid.m2_values);
}

void resolve(fs::path& p, const fs::path& base) {
  if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json basis_json(const BasisSpec& b) {
  return {{"order", b.order}, {"n_basis", b.n_basis}, {"lower", opt(b.lower)}, {"upper", opt(b.upper)}};
}

std::string pilot_name(PilotEstimator p) { return p == PilotEstimator::joint ? "joint" : "per_group"; }
std::string df_name(DfNorm d) { return d == DfNorm::theta ? "theta" : "b"; }

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_grid(const TuningGrid& g, const std::string& where) {
  check(!g.alphas.empty() && !g.m2_values.empty(), where + ": alphas and m2_values must be nonempty");
  for (double a : g.alphas) check(a > 0.0 && a <= 1.0, where + ".alphas: values must lie in (0, 1]");
  for (int m : g.m2_values) check(m >= 1, where + ".m2_values: values must be >= 1");
  for (std::size_t k = 0; k < g.lambdas.size(); ++k) {
    check(g.lambdas[k] > 0.0, where + ".lambdas: values must be > 0");
    if (k > 0) check(g.lambdas[k] < g.lambdas[k - 1], where + ".lambdas: must be strictly descending");
  }
  check(g.n_lambda >= 1, where + ".n_lambda must be >= 1");
  check(g.lambda_ratio > 0.0 && g.lambda_ratio < 1.0, where + ".lambda_ratio must lie in (0, 1)");
}

void check_basis(const BasisSpec& b, const std::string& where) {
  check(b.order >= 1, where + ".order must be >= 1");
  check(b.n_basis >= b.order, where + ".n_basis must be >= order");
  if (b.lower && b.upper) check(*b.lower < *b.upper, where + ": lower must be < upper");
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  Section root(doc, "");
  if (root.has("data")) {
    Section s = root.child("data");
    s.get("long", cfg.data.long_csv);
    s.get("response", cfg.data.response_csv);
    s.get("fit_summary", cfg.data.fit_summary);
    s.get("new_long", cfg.data.new_long_csv);
    s.get("exogenous", cfg.data.exogenous_csv);
    s.finish();
  }
  if (root.has("bases")) {
    Section s = root.child("bases");
    if (s.has("default")) read_basis(s.child("default"), cfg.bases.defaults);
    if (s.has("variables")) {
      Section vars = s.child("variables");
      for (const auto& [name, _] : doc.at("bases").at("variables").items()) {
        BasisSpec spec = cfg.bases.defaults;
        read_basis(vars.child(name), spec);
        cfg.bases.variables[name] = spec;
      }
      vars.finish();
    }
    if (s.has("t")) {
      Section t = s.child("t");
      t.get("order", cfg.bases.t.order);
      t.get("lower", cfg.bases.t.lower);
      t.get("upper", cfg.bases.t.upper);
      t.finish();
    }
    s.finish();
  }
  if (root.has("fpca")) {
    Section s = root.child("fpca");
    s.get("components", cfg.fpca.components);
    s.get("share", cfg.fpca.share);
    s.finish();
  }
  if (root.has("penalty")) {
    Section s = root.child("penalty");
    s.get("adaptive", cfg.penalty.adaptive);
    read_grid(s, cfg.penalty.grid);
    s.get("pilot", cfg.penalty.pilot);
    s.get("df_norm", cfg.penalty.df_norm);
    s.get("tol", cfg.penalty.fit.tol);
    s.get("max_sweeps", cfg.penalty.fit.max_sweeps);
    s.get("max_df_fraction", cfg.penalty.max_df_fraction);
    s.finish();
  }
  if (root.has("output")) {
    Section s = root.child("output");
    s.get("directory", cfg.output.directory);
    s.get("grid_points", cfg.output.grid_points);
    s.finish();
  }
  if (root.has("simulation")) {
    Section s = root.child("simulation");
    auto& g = cfg.simulation.generator;
    s.get("n", g.n);
    s.get("p", g.p);
    s.get("m1_gen", g.m1_gen);
    s.get("m2_gen", g.m2_gen);
    s.get("gen_order", g.gen_order);
    s.get("n_points", g.n_points);
    s.get("s", g.s);
    s.get("predictor_noise_factor", g.predictor_noise_factor);
    s.get("seed", g.seed);
    s.get("replicates", g.replicates);
    s.get("n_values", cfg.simulation.n_values);
    s.get("s_values", cfg.simulation.s_values);
    s.finish();
  }
  if (root.has("study")) {
    Section s = root.child("study");
    auto& e = cfg.study;
    s.get("smooth_order", e.smooth_order);
    s.get("smooth_basis", e.smooth_basis);
    s.get("fpca_components", e.fpca_components);
    s.get("fpca_share", e.fpca_share);
    s.get("t_order", e.t_order);
    read_grid(s, e.grid);
    s.get("pilot", e.pilot);
    s.get("df_norm", e.df_norm);
    s.get("tol", e.fit.tol);
    s.get("max_sweeps", e.fit.max_sweeps);
    s.get("max_df_fraction", e.max_df_fraction);
    s.finish();
  }
  root.finish();

  resolve(cfg.data.long_csv, base_dir);
  resolve(cfg.data.response_csv, base_dir);
  resolve(cfg.data.fit_summary, base_dir);
  resolve(cfg.data.new_long_csv, base_dir);
  resolve(cfg.data.exogenous_csv, base_dir);
  resolve(cfg.output.directory, base_dir);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void validate(const RunConfig& c) {
  check_basis(c.bases.defaults, "bases.default");
  for (const auto& [name, b] : c.bases.variables) check_basis(b, "bases.variables." + name);
  check(c.bases.t.order >= 1, "bases.t.order must be >= 1");
  if (c.bases.t.lower && c.bases.t.upper) check(*c.bases.t.lower < *c.bases.t.upper, "bases.t: lower must be < upper");
  check(c.fpca.components >= 0, "fpca.components must be >= 0");
  check(c.fpca.share > 0.0 && c.fpca.share <= 1.0, "fpca.share must lie in (0, 1]");
  check_grid(c.penalty.grid, "penalty");
  check(c.penalty.fit.tol > 0.0, "penalty.tol must be > 0");
  check(c.penalty.fit.max_sweeps >= 1, "penalty.max_sweeps must be >= 1");
  check(c.penalty.max_df_fraction > 0.0, "penalty.max_df_fraction must be > 0");
  check(c.output.grid_points >= 1, "output.grid_points must be >= 1");
  check(!c.simulation.n_values.empty() && !c.simulation.s_values.empty(),
        "simulation.n_values and simulation.s_values must be nonempty");
  for (int n : c.simulation.n_values) check(n >= 2, "simulation.n_values: values must be >= 2");
  for (double s : c.simulation.s_values) check(s > 0.0, "simulation.s_values: values must be > 0");
  try {
    svcflm::validate(c.simulation.generator);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("simulation: ") + e.what());
  }
  check(c.study.smooth_order >= 1 && c.study.smooth_basis >= c.study.smooth_order,
        "study: smooth_basis must be >= smooth_order >= 1");
  check(c.study.fpca_components >= 0, "study.fpca_components must be >= 0");
  check(c.study.fpca_share > 0.0 && c.study.fpca_share <= 1.0, "study.fpca_share must lie in (0, 1]");
  check(c.study.t_order >= 1, "study.t_order must be >= 1");
  check_grid(c.study.grid, "study");
  check(c.study.fit.tol > 0.0 && c.study.fit.max_sweeps >= 1, "study: tol must be > 0 and max_sweeps >= 1");
  check(c.study.max_df_fraction > 0.0, "study.max_df_fraction must be > 0");
}

json default_config_json() {
  const RunConfig c;
  json vars = json::object();
  const auto& g = c.simulation.generator;
  const auto& e = c.study;
  return {
      {"data", {{"long", ""}, {"response", ""}, {"fit_summary", ""}, {"new_long", ""}, {"exogenous", ""}}},
      {"bases",
       {{"default", basis_json(c.bases.defaults)},
        {"variables", vars},
        {"t", {{"order", c.bases.t.order}, {"lower", nullptr}, {"upper", nullptr}}}}},
      {"fpca", {{"components", c.fpca.components}, {"share", c.fpca.share}}},
      {"penalty",
       {{"adaptive", c.penalty.adaptive},
        {"lambdas", c.penalty.grid.lambdas},
        {"n_lambda", c.penalty.grid.n_lambda},
        {"lambda_ratio", c.penalty.grid.lambda_ratio},
        {"alphas", c.penalty.grid.alphas},
        {"m2_values", c.penalty.grid.m2_values},
        {"pilot", pilot_name(c.penalty.pilot)},
        {"df_norm", df_name(c.penalty.df_norm)},
        {"tol", c.penalty.fit.tol},
        {"max_sweeps", c.penalty.fit.max_sweeps},
        {"max_df_fraction", c.penalty.max_df_fraction}}},
      {"output", {{"directory", c.output.directory.string()}, {"grid_points", c.output.grid_points}}},
      {"simulation",
       {{"n", g.n},
        {"p", g.p},
        {"m1_gen", g.m1_gen},
        {"m2_gen", g.m2_gen},
        {"gen_order", g.gen_order},
        {"n_points", g.n_points},
        {"s", g.s},
        {"predictor_noise_factor", g.predictor_noise_factor},
        {"seed", g.seed},
        {"replicates", g.replicates},
        {"n_values", c.simulation.n_values},
        {"s_values", c.simulation.s_values}}},
      {"study",
       {{"smooth_order", e.smooth_order},
        {"smooth_basis", e.smooth_basis},
        {"fpca_components", e.fpca_components},
        {"fpca_share", e.fpca_share},
        {"t_order", e.t_order},
        {"lambdas", e.grid.lambdas},
        {"n_lambda", e.grid.n_lambda},
        {"lambda_ratio", e.grid.lambda_ratio},
        {"alphas", e.grid.alphas},
        {"m2_values", e.grid.m2_values},
        {"pilot", pilot_name(e.pilot)},
        {"df_norm", df_name(e.df_norm)},
        {"tol", e.fit.tol},
        {"max_sweeps", e.fit.max_sweeps},
        {"max_df_fraction", e.max_df_fraction}}},
  };
}

}  // namespace svcflm::cli
