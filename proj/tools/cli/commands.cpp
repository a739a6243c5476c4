#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <clocale>
#include <iostream>
#include <locale>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "svcflm/design.hpp"
#include "svcflm/errors.hpp"
#include "svcflm/fpca.hpp"
#include "svcflm/io.hpp"
#include "svcflm/simulation.hpp"

namespace svcflm::cli {

using nlohmann::json;

std::vector<double> linspace(double lower, double upper, int n) {
  if (n < 1) throw std::invalid_argument("linspace: need at least one point");
  if (n == 1) return {lower};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = lower + (upper - lower) * k / (n - 1);
  out.back() = upper;
  return out;
}

std::string surface_file_name(const std::string& variable) {
  std::string safe = variable;
  for (char& c : safe) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) c = '_';
  }
  return "surface_" + safe + ".csv";
}

namespace {

std::string subject_name(int i, int n) {
  const std::string digits = std::to_string(n);
  std::string idx = std::to_string(i + 1);
  return "s" + std::string(digits.size() - std::min(digits.size(), idx.size()), '0') + idx;
}

void write_json(const fs::path& path, const json& doc) { io::write_text_file(path, doc.dump(2) + "\n"); }

void write_surfaces(const FitSummary& s, const std::vector<std::string>& names, int grid_points,
                    const fs::path& out) {
  const auto t_grid = linspace(s.model.t_basis.lower(), s.model.t_basis.upper(), grid_points);
  for (const auto& name : names) {
    const auto it = std::find(s.variables.begin(), s.variables.end(), name);
    if (it == s.variables.end()) throw std::invalid_argument("unknown variable '" + name + "'");
    const auto j = static_cast<std::size_t>(it - s.variables.begin());
    const FPCAResult& f = s.model.fpca[j];
    const auto s_grid = linspace(f.basis.lower(), f.basis.upper(), grid_points);
    const Eigen::MatrixXd surface = coefficient_surface(s.model.b[j], f, s.model.t_basis, s_grid, t_grid);
    io::export_surface_grid(surface, s_grid, t_grid, out / surface_file_name(name));
  }
}

BSplineBasis smoothing_basis(const BasisSpec& spec, double lower, double upper) {
  const double lo = spec.lower.value_or(lower);
  const double hi = spec.upper.value_or(upper);
  if (!(lo < hi)) throw DomainError("smoothing basis needs lower < upper, got [" + io::format_double(lo) + ", " +
                                    io::format_double(hi) + "]; set bases.*.lower/upper");
  return BSplineBasis::uniform(lo, hi, spec.order, spec.n_basis);
}

}  // namespace

void cmd_simulate(const RunConfig& config, const fs::path& out) {
  const SimulationConfig& gen = config.simulation.generator;
  const SyntheticDataset data = generate(gen, 0);
  const int n = data.samples();
  const int p = data.predictors();

  std::vector<std::string> subjects, variables;
  for (int i = 0; i < n; ++i) subjects.push_back(subject_name(i, n));
  for (int j = 0; j < p; ++j) variables.push_back("x" + std::to_string(j + 1));

  io::LongTable long_table;
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < data.time_points.size(); ++k) {
        long_table.rows.push_back({subjects[static_cast<std::size_t>(i)], variables[static_cast<std::size_t>(j)],
                                   data.time_points[k], data.x[static_cast<std::size_t>(j)](i, static_cast<Eigen::Index>(k))});
      }
    }
  }
  io::ResponseTable response;
  for (int i = 0; i < n; ++i) response.rows.push_back({subjects[static_cast<std::size_t>(i)], data.y[i], data.t[i]});

  std::ostringstream long_csv, response_csv;
  io::write_long_csv(long_csv, long_table);
  io::write_response_csv(response_csv, response);

  json truth_active = json::array(), B = json::object(), w = json::object();
  for (int j = 0; j < p; ++j) {
    const auto& name = variables[static_cast<std::size_t>(j)];
    if (data.true_active[static_cast<std::size_t>(j)]) truth_active.push_back(name);
    B[name] = matrix_to_json(data.B[static_cast<std::size_t>(j)]);
    w[name] = matrix_to_json(data.w[static_cast<std::size_t>(j)]);
  }
  const json truth = {{"n", n},
                      {"p", p},
                      {"s", gen.s},
                      {"seed", gen.seed},
                      {"noise_sd", data.noise_sd},
                      {"signal_range", data.signal_range},
                      {"variables", variables},
                      {"subjects", subjects},
                      {"true_active", truth_active},
                      {"s_basis", basis_to_json(data.s_basis)},
                      {"t_basis", basis_to_json(data.t_basis)},
                      {"time_points", data.time_points},
                      {"t", vector_to_json(data.t)},
                      {"f", vector_to_json(data.f)},
                      {"B", B},
                      {"w", w}};

  io::write_text_file(out / "long.csv", long_csv.str());
  io::write_text_file(out / "response.csv", response_csv.str());
  write_json(out / "truth.json", truth);
}

void cmd_study(const RunConfig& config, const fs::path& out, int threads) {
  std::vector<StudyReport> reports;
  for (int n : config.simulation.n_values) {
    for (double s : config.simulation.s_values) {
      SimulationConfig gen = config.simulation.generator;
      gen.n = n;
      gen.s = s;
      const auto start = std::chrono::steady_clock::now();
      reports.push_back(run_study(gen, kAllMethods, config.study, threads));
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      std::cerr << "study n=" << n << " s=" << s << ": " << gen.replicates << " replicates in "
                << took.count() << " s\n";
    }
  }
  std::ostringstream report, log;
  io::write_study_report(report, reports);
  io::write_study_log(log, reports);
  io::write_text_file(out / "study_report.csv", report.str());
  io::write_text_file(out / "study_log.csv", log.str());
}

FitSummary cmd_fit(const RunConfig& config, const fs::path& out, int threads) {
  if (config.data.long_csv.empty() || config.data.response_csv.empty())
    throw std::invalid_argument("fit needs data.long and data.response (or --long / --response)");
  const io::LongTable table = io::load_long_csv(config.data.long_csv);
  const io::ResponseTable response = io::load_response_csv(config.data.response_csv);
  if (table.rows.empty()) throw std::invalid_argument("fit: " + config.data.long_csv.string() + " has no observations");

  std::map<std::string, std::pair<double, double>> ranges;
  for (const auto& r : table.rows) {
    auto [it, fresh] = ranges.try_emplace(r.variable, r.time, r.time);
    it->second.first = std::min(it->second.first, r.time);
    it->second.second = std::max(it->second.second, r.time);
  }
  std::map<std::string, BSplineBasis> bases;
  for (const auto& [name, range] : ranges) {
    const auto spec = config.bases.variables.count(name) ? config.bases.variables.at(name) : config.bases.defaults;
    bases.emplace(name, smoothing_basis(spec, range.first, range.second));
  }
  for (const auto& [name, _] : config.bases.variables) {
    if (!ranges.count(name)) throw std::invalid_argument("bases.variables names unknown variable '" + name + "'");
  }

  const io::AssembledData data = io::assemble(table, response, bases);
  const int n = static_cast<int>(data.subjects.size());
  if (n < 2) throw std::invalid_argument("fit needs at least 2 subjects");

  std::vector<FPCAResult> fpcas;
  for (const auto& sample : data.samples) {
    fpcas.push_back(config.fpca.components > 0
                        ? fpca(sample, std::min({config.fpca.components, n, sample.basis.size()}))
                        : fpca_by_share(sample, config.fpca.share));
  }

  const double t_lo = config.bases.t.lower.value_or(data.t.minCoeff());
  const double t_hi = config.bases.t.upper.value_or(data.t.maxCoeff());
  if (!(t_lo < t_hi))
    throw DomainError("the exogenous variable t is constant; set bases.t.lower and bases.t.upper");
  const int t_order = config.bases.t.order;
  const DesignBuilder builder = [&](int m2) {
    return build_design(fpcas, data.t, exogenous_basis(t_lo, t_hi, m2, t_order), data.y);
  };
  SelectOptions options;
  options.adaptive = config.penalty.adaptive;
  options.pilot = config.penalty.pilot;
  options.df_norm = config.penalty.df_norm;
  options.fit = config.penalty.fit;
  options.max_df_fraction = config.penalty.max_df_fraction;
  options.threads = threads;
  const Selection sel = select(builder, config.penalty.grid, options);

  FitSummary summary;
  summary.variables = data.variables;
  summary.subjects = data.subjects;
  summary.model = FittedModel{fpcas, sel.design.t_basis, sel.fit.b, Standardization{sel.design.y_center, sel.design.y_scale}};
  summary.active = sel.fit.active;
  summary.weights = sel.penalty.weights;
  summary.best = sel.report.rows[sel.report.best];
  summary.adaptive = config.penalty.adaptive;
  summary.converged = sel.fit.converged;
  summary.sweeps = sel.fit.sweeps;
  summary.fitted = fitted_to_response(sel.design, sel.fit.fitted);
  for (auto& f : summary.model.fpca) f.scores.resize(0, 0);

  std::ostringstream selected, tuning;
  for (const auto& name : summary.active_variables()) selected << name << '\n';
  io::write_tuning_report(tuning, sel.report);
  io::write_text_file(out / "selected_variables.txt", selected.str());
  io::write_text_file(out / "tuning_report.csv", tuning.str());
  write_surfaces(summary, summary.active_variables(), config.output.grid_points, out);
  write_json(out / "fit_summary.json", to_json(summary));
  return summary;
}

void cmd_predict(const RunConfig& config, const fs::path& out) {
  if (config.data.fit_summary.empty()) throw std::invalid_argument("predict needs data.fit_summary (or --fit-summary)");
  if (config.data.new_long_csv.empty()) throw std::invalid_argument("predict needs data.new_long (or --new-long)");
  const FitSummary summary = load_summary(config.data.fit_summary);
  const io::LongTable table = io::load_long_csv(config.data.new_long_csv);

  std::set<std::string> subject_set;
  for (const auto& r : table.rows) subject_set.insert(r.subject);
  const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

  std::ostringstream csv;
  csv << "subject,y_hat\n";
  if (!subjects.empty()) {
    const fs::path exo_path = config.data.exogenous_csv.empty() ? config.data.response_csv : config.data.exogenous_csv;
    if (exo_path.empty()) throw std::invalid_argument("predict needs data.exogenous (or --exogenous)");
    std::map<std::string, double> t_of;
    for (const auto& r : io::load_exogenous_csv(exo_path)) {
      if (!t_of.emplace(r.subject, r.t).second)
        throw ParseError(exo_path.string() + ": duplicate subject '" + r.subject + "'");
    }
    std::vector<std::string> missing;
    Eigen::VectorXd t(static_cast<Eigen::Index>(subjects.size()));
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      const auto it = t_of.find(subjects[i]);
      if (it == t_of.end()) missing.push_back(subjects[i]);
      else t[static_cast<Eigen::Index>(i)] = it->second;
    }
    if (!missing.empty()) {
      std::string msg = "no exogenous value for subjects:";
      for (const auto& s : missing) msg += " " + s;
      throw std::invalid_argument(msg);
    }
    std::map<std::string, BSplineBasis> bases;
    for (std::size_t j = 0; j < summary.variables.size(); ++j) bases.emplace(summary.variables[j], summary.model.fpca[j].basis);
    const auto coef = io::smooth_table(table, subjects, summary.variables, bases);
    const Eigen::VectorXd y_hat = predict_from_coefficients(summary.model, coef, t);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      csv << subjects[i] << ',' << io::format_double(y_hat[static_cast<Eigen::Index>(i)]) << '\n';
    }
  }
  io::write_text_file(out / "predictions.csv", csv.str());
}

void cmd_export_surface(const RunConfig& config, const fs::path& out, const std::vector<std::string>& variables) {
  if (config.data.fit_summary.empty())
    throw std::invalid_argument("export-surface needs data.fit_summary (or --fit-summary)");
  const FitSummary summary = load_summary(config.data.fit_summary);
  write_surfaces(summary, variables.empty() ? summary.active_variables() : variables, config.output.grid_points, out);
}

int run(int argc, const char* const* argv) {
  std::setlocale(LC_ALL, "C");
  std::locale::global(std::locale::classic());

  CLI::App app{"svcflm: sparse varying-coefficient functional linear models"};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
  };
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "RunConfig JSON file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed (overrides simulation.seed)");
    sub->add_option("--out", common.out, "output directory (overrides output.directory)");
    sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
  };

  std::optional<int> n, p, replicates, n_points, grid_points;
  std::optional<double> s, noise_factor;
  std::vector<int> n_values;
  std::vector<double> s_values;
  std::string long_csv, response_csv, fit_summary, new_long, exogenous;
  std::vector<std::string> variables;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset with ground truth");
  add_common(simulate);
  simulate->add_option("--n", n, "subjects");
  simulate->add_option("--p", p, "predictors (even)");
  simulate->add_option("--s", s, "noise level");
  simulate->add_option("--n-points", n_points, "observations per curve");
  simulate->add_option("--noise-factor", noise_factor, "predictor noise factor");

  auto* study = app.add_subcommand("study", "Monte-Carlo comparison of SVCFLM/aSVCFLM/SFLM/aSFLM");
  add_common(study);
  study->add_option("--n", n_values, "sample sizes (one panel each)");
  study->add_option("--s", s_values, "noise levels (one panel each)");
  study->add_option("--p", p, "predictors (even)");
  study->add_option("--replicates", replicates, "replicates per panel");

  auto* fit = app.add_subcommand("fit", "fit by BIC-tuned group adaptive elastic net");
  add_common(fit);
  fit->add_option("--long", long_csv, "long-format predictor CSV");
  fit->add_option("--response", response_csv, "response CSV (subject,y,t)");
  fit->add_option("--grid-points", grid_points, "surface grid points per axis");

  auto* predict = app.add_subcommand("predict", "predict responses for new curves");
  add_common(predict);
  predict->add_option("--fit-summary", fit_summary, "fit_summary.json written by fit");
  predict->add_option("--new-long", new_long, "long-format CSV of new curves");
  predict->add_option("--exogenous", exogenous, "CSV with subject,t (or subject,y,t)");

  auto* surface = app.add_subcommand("export-surface", "write coefficient-surface grids from a fit summary");
  add_common(surface);
  surface->add_option("--fit-summary", fit_summary, "fit_summary.json written by fit");
  surface->add_option("--variable", variables, "variables to export (default: active set)");
  surface->add_option("--grid-points", grid_points, "grid points per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig config = common.config.empty() ? RunConfig{} : load_config(common.config);
    auto& gen = config.simulation.generator;
    if (common.seed) gen.seed = *common.seed;
    if (!common.out.empty()) config.output.directory = common.out;
    if (n) gen.n = *n;
    if (p) gen.p = *p;
    if (s) gen.s = *s;
    if (n_points) gen.n_points = *n_points;
    if (noise_factor) gen.predictor_noise_factor = *noise_factor;
    if (replicates) gen.replicates = *replicates;
    if (!n_values.empty()) config.simulation.n_values = n_values;
    if (!s_values.empty()) config.simulation.s_values = s_values;
    if (!long_csv.empty()) config.data.long_csv = long_csv;
    if (!response_csv.empty()) config.data.response_csv = response_csv;
    if (!fit_summary.empty()) config.data.fit_summary = fit_summary;
    if (!new_long.empty()) config.data.new_long_csv = new_long;
    if (!exogenous.empty()) config.data.exogenous_csv = exogenous;
    if (grid_points) config.output.grid_points = *grid_points;
    validate(config);

    const fs::path out = config.output.directory;
    if (simulate->parsed()) cmd_simulate(config, out);
    else if (study->parsed()) cmd_study(config, out, common.threads);
    else if (fit->parsed()) cmd_fit(config, out, common.threads);
    else if (predict->parsed()) cmd_predict(config, out);
    else cmd_export_surface(config, out, variables);
  } catch (const std::exception& e) {
    std::cerr << "svcflm: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace svcflm::cli
