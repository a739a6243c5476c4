#include "cli/summary.hpp"

#include <fstream>

#include "svcflm/errors.hpp"

namespace svcflm::cli {

using nlohmann::json;

std::vector<std::string> FitSummary::active_variables() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < variables.size(); ++j) {
    if (active[j]) out.push_back(variables[j]);
  }
  return out;
}

json basis_to_json(const BSplineBasis& basis) {
  return {{"lower", basis.lower()},
          {"upper", basis.upper()},
          {"order", basis.order()},
          {"interior_knots", basis.interior_knots()}};
}

BSplineBasis basis_from_json(const json& doc) {
  return BSplineBasis(doc.at("lower").get<double>(), doc.at("upper").get<double>(), doc.at("order").get<int>(),
                      doc.at("interior_knots").get<std::vector<double>>());
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& doc) {
  if (!doc.is_array()) throw ParseError("matrix: expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(doc.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(doc[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = doc[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("matrix: ragged rows");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& doc) {
  const auto x = doc.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

json to_json(const FitSummary& s) {
  json vars = json::array();
  for (std::size_t j = 0; j < s.variables.size(); ++j) {
    const FPCAResult& f = s.model.fpca[j];
    vars.push_back({{"name", s.variables[j]},
                    {"active", static_cast<bool>(s.active[j])},
                    {"weight", s.weights.size() ? s.weights[static_cast<Eigen::Index>(j)] : 1.0},
                    {"basis", basis_to_json(f.basis)},
                    {"mean_coef", vector_to_json(f.mean_coef)},
                    {"eigen_coef", matrix_to_json(f.eigen_coef)},
                    {"eigenvalues", vector_to_json(f.eigenvalues)},
                    {"all_eigenvalues", vector_to_json(f.all_eigenvalues)},
                    {"b", vector_to_json(s.model.b[j])}});
  }
  json fitted = json::array();
  for (std::size_t i = 0; i < s.subjects.size(); ++i) {
    fitted.push_back({{"subject", s.subjects[i]}, {"y_hat", s.fitted[static_cast<Eigen::Index>(i)]}});
  }
  return {{"lambda", s.best.lambda},
          {"alpha", s.best.alpha},
          {"m2", s.best.m2},
          {"bic", s.best.bic},
          {"sigma2", s.best.sigma2},
          {"df", s.best.df},
          {"n_active", s.best.n_active},
          {"active_set", s.active_variables()},
          {"adaptive", s.adaptive},
          {"converged", s.converged},
          {"sweeps", s.sweeps},
          {"standardization", {{"center", s.model.standardization.center}, {"scale", s.model.standardization.scale}}},
          {"t_basis", basis_to_json(s.model.t_basis)},
          {"variables", vars},
          {"fitted", fitted}};
}

FitSummary summary_from_json(const json& doc) {
  try {
    FitSummary s;
    s.best.lambda = doc.at("lambda").get<double>();
    s.best.alpha = doc.at("alpha").get<double>();
    s.best.m2 = doc.at("m2").get<int>();
    s.best.bic = doc.at("bic").get<double>();
    s.best.sigma2 = doc.at("sigma2").get<double>();
    s.best.df = doc.at("df").get<double>();
    s.best.n_active = doc.at("n_active").get<int>();
    s.adaptive = doc.at("adaptive").get<bool>();
    s.converged = doc.at("converged").get<bool>();
    s.sweeps = doc.at("sweeps").get<int>();
    s.model.standardization.center = doc.at("standardization").at("center").get<double>();
    s.model.standardization.scale = doc.at("standardization").at("scale").get<double>();
    s.model.t_basis = basis_from_json(doc.at("t_basis"));

    const json& vars = doc.at("variables");
    s.weights.resize(static_cast<Eigen::Index>(vars.size()));
    for (const json& v : vars) {
      FPCAResult f{basis_from_json(v.at("basis")), {}, {}, {}, {}, {}, {}};
      f.gram = gram_matrix(f.basis);
      f.mean_coef = vector_from_json(v.at("mean_coef"));
      f.eigen_coef = matrix_from_json(v.at("eigen_coef"));
      f.eigenvalues = vector_from_json(v.at("eigenvalues"));
      f.all_eigenvalues = vector_from_json(v.at("all_eigenvalues"));
      const int m = f.basis.size();
      if (f.mean_coef.size() != m || f.eigen_coef.rows() != m || f.eigen_coef.cols() != f.eigenvalues.size())
        throw ParseError("variable '" + v.at("name").get<std::string>() + "': FPCA dimensions do not match its basis");
      Eigen::VectorXd b = vector_from_json(v.at("b"));
      if (b.size() != f.eigen_coef.cols() * s.model.t_basis.size())
        throw ParseError("variable '" + v.at("name").get<std::string>() + "': coefficient length mismatch");
      s.weights[static_cast<Eigen::Index>(s.variables.size())] = v.at("weight").get<double>();
      s.variables.push_back(v.at("name").get<std::string>());
      s.active.push_back(v.at("active").get<bool>());
      s.model.fpca.push_back(std::move(f));
      s.model.b.push_back(std::move(b));
    }

    const json& fitted = doc.at("fitted");
    s.fitted.resize(static_cast<Eigen::Index>(fitted.size()));
    for (const json& row : fitted) {
      s.fitted[static_cast<Eigen::Index>(s.subjects.size())] = row.at("y_hat").get<double>();
      s.subjects.push_back(row.at("subject").get<std::string>());
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit summary: ") + e.what());
  }
}

FitSummary load_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open fit summary " + path.string());
  try {
    return summary_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace svcflm::cli
