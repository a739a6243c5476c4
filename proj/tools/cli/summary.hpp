#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "svcflm/basis.hpp"
#include "svcflm/solver.hpp"
#include "svcflm/tuning.hpp"

namespace svcflm::cli {

/// Everything `fit` reports and everything `predict` / `export-surface`
/// need to rebuild the model without the training data.
struct FitSummary {
  std::vector<std::string> variables;
  std::vector<std::string> subjects;
  FittedModel model;
  std::vector<bool> active;
  Eigen::VectorXd weights;
  TuningRow best;  // lambda*, alpha*, m2*, BIC, sigma2, df
  bool adaptive = true;
  bool converged = true;
  int sweeps = 0;
  Eigen::VectorXd fitted;  // response scale, one per subject

  std::vector<std::string> active_variables() const;
};

nlohmann::json basis_to_json(const BSplineBasis& basis);
BSplineBasis basis_from_json(const nlohmann::json& doc);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const FitSummary& summary);
/// Throws ParseError on missing fields or inconsistent dimensions.
FitSummary summary_from_json(const nlohmann::json& doc);
FitSummary load_summary(const std::filesystem::path& path);

}  // namespace svcflm::cli
