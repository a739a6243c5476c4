#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "svcflm/simulation.hpp"
#include "svcflm/solver.hpp"
#include "svcflm/tuning.hpp"

namespace svcflm::cli {

namespace fs = std::filesystem;

/// Thrown for schema violations in a RunConfig document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smoothing basis of one predictor. Missing bounds default to the observed
/// time range of that variable.
struct BasisSpec {
  int order = 4;
  int n_basis = 8;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct ExogenousSpec {
  int order = 4;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct RunConfig {
  struct Data {
    fs::path long_csv;      // functional predictors, long format
    fs::path response_csv;  // subject,y,t
    fs::path fit_summary;   // input of predict / export-surface
    fs::path new_long_csv;  // predict: new curves
    fs::path exogenous_csv; // predict: subject,t
  } data;

  struct Bases {
    BasisSpec defaults;
    std::map<std::string, BasisSpec> variables;
    ExogenousSpec t;
  } bases;

  struct Fpca {
    int components = 0;  // > 0 fixes m1 for every variable
    double share = 0.99;
  } fpca;

  struct Penalty {
    bool adaptive = true;
    TuningGrid grid;
    PilotEstimator pilot = PilotEstimator::joint;
    DfNorm df_norm = DfNorm::theta;
    FitOptions fit;
    double max_df_fraction = 1.0;
  } penalty;

  struct Output {
    fs::path directory = "out";
    int grid_points = 51;  // per axis of exported surfaces
  } output;

  struct Simulation {
    SimulationConfig generator;
    std::vector<int> n_values{100, 200};  // study panels
    std::vector<double> s_values{0.1, 0.3};
  } simulation;

  EstimatorConfig study;
};

/// Parses and validates a RunConfig document. Unknown keys, wrong types and
/// out-of-range values throw ConfigError naming the offending key. Relative
/// paths are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const fs::path& base_dir = {});
RunConfig load_config(const fs::path& path);

/// Range checks shared by config parsing and flag overrides.
void validate(const RunConfig& config);

/// The fully-defaulted document, suitable as a template.
nlohmann::json default_config_json();

}  // namespace svcflm::cli
