#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svcflm/basis.hpp"
#include "svcflm/fpca.hpp"
#include "svcflm/simulation.hpp"
#include "svcflm/tuning.hpp"

namespace svcflm::io {

/// 17 significant digits, independent of the global locale.
std::string format_double(double value);

struct LongRow {
  std::string subject;
  std::string variable;
  double time = 0.0;
  double value = 0.0;

  bool operator==(const LongRow&) const = default;
};

/// Long-format longitudinal observations, sorted by (variable, subject,
/// time) with unique keys.
struct LongTable {
  std::vector<LongRow> rows;

  bool operator==(const LongTable&) const = default;
};

struct ResponseRow {
  std::string subject;
  double y = 0.0;
  double t = 0.0;
};

struct ResponseTable {
  std::vector<ResponseRow> rows;
};

/// Subject plus exogenous value; the input side of prediction.
struct ExogenousRow {
  std::string subject;
  double t = 0.0;
};

/// Header `subject,variable,time,value`. Throws ParseError with the line
/// number on malformed, non-finite or duplicate rows, and when a
/// (subject, variable) pair has fewer than 2 rows.
LongTable read_long_csv(std::istream& in, const std::string& source = "<stream>");
LongTable load_long_csv(const std::filesystem::path& path);
void write_long_csv(std::ostream& out, const LongTable& table);
void save_long_csv(const std::filesystem::path& path, const LongTable& table);

/// Header `subject,y,t`; subjects unique.
ResponseTable read_response_csv(std::istream& in, const std::string& source = "<stream>");
ResponseTable load_response_csv(const std::filesystem::path& path);
void write_response_csv(std::ostream& out, const ResponseTable& table);

/// Header `subject,t` or `subject,y,t` (y ignored).
std::vector<ExogenousRow> load_exogenous_csv(const std::filesystem::path& path);

/// Basis coefficients of every (variable, subject) curve, subjects and
/// variables in the given order. Throws std::invalid_argument listing every
/// missing (subject, variable) pair.
std::vector<Eigen::MatrixXd> smooth_table(const LongTable& table, std::span<const std::string> subjects,
                                          std::span<const std::string> variables,
                                          const std::map<std::string, BSplineBasis>& bases);

struct AssembledData {
  std::vector<std::string> variables;  // sorted
  std::vector<std::string> subjects;   // sorted
  std::vector<FunctionalSample> samples;
  Eigen::VectorXd y;
  Eigen::VectorXd t;
};

/// Smooths every response subject's curves with the basis of its variable.
/// Output rows follow the sorted subject order, independent of input row
/// order.
AssembledData assemble(const LongTable& table, const ResponseTable& response,
                       const std::map<std::string, BSplineBasis>& bases);

struct SurfaceGrid {
  std::vector<double> grid_s;
  std::vector<double> grid_t;
  Eigen::MatrixXd values;  // |s| x |t|
};

/// CSV `s,t,beta`, row-major over (s, t).
void write_surface_grid(std::ostream& out, const Eigen::MatrixXd& surface, std::span<const double> grid_s,
                        std::span<const double> grid_t);
void export_surface_grid(const Eigen::MatrixXd& surface, std::span<const double> grid_s,
                         std::span<const double> grid_t, const std::filesystem::path& path);
SurfaceGrid read_surface_grid(std::istream& in, const std::string& source = "<stream>");
SurfaceGrid load_surface_grid(const std::filesystem::path& path);

/// CSV `m2,alpha,lambda,bic,sigma2,df,n_active`.
void write_tuning_report(std::ostream& out, const TuningReport& report);
std::vector<TuningRow> read_tuning_report(std::istream& in, const std::string& source = "<stream>");

/// Table-1 layout: one block of RMSE, RMSE_SD, APR, ANR rows per (n, s),
/// method columns in report order.
void write_study_report(std::ostream& out, std::span<const StudyReport> reports);
void write_study_log(std::ostream& out, std::span<const StudyReport> reports);

/// Writes a text file, creating parent directories. Throws
/// std::runtime_error when the path is not writable.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace svcflm::io
