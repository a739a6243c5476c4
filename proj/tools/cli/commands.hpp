#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "cli/summary.hpp"

namespace svcflm::cli {

/// Writes long.csv, response.csv and truth.json for replicate 0 of the
/// configured generator.
void cmd_simulate(const RunConfig& config, const fs::path& out);

/// Runs the study over simulation.n_values x simulation.s_values; writes
/// study_report.csv and study_log.csv.
void cmd_study(const RunConfig& config, const fs::path& out, int threads);

/// Loads data.long / data.response, tunes by BIC and writes
/// selected_variables.txt, tuning_report.csv, surface_<var>.csv per active
/// variable and fit_summary.json.
FitSummary cmd_fit(const RunConfig& config, const fs::path& out, int threads);

/// Writes predictions.csv (`subject,y_hat`, sorted by subject) for every
/// subject in data.new_long. Exogenous values come from data.exogenous, or
/// data.response when that is unset.
void cmd_predict(const RunConfig& config, const fs::path& out);

/// Writes surface_<var>.csv for the named variables (all active ones when
/// empty) on an output.grid_points square grid.
void cmd_export_surface(const RunConfig& config, const fs::path& out, const std::vector<std::string>& variables);

/// `n` equispaced points on [lower, upper]; {lower} when n == 1.
std::vector<double> linspace(double lower, double upper, int n);

/// File-name-safe form of a variable name.
std::string surface_file_name(const std::string& variable);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace svcflm::cli
