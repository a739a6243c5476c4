#include "svcflm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "svcflm/errors.hpp"

namespace svcflm::io {
namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> split_csv(const std::string& line, const std::string& source, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw ParseError(where(source, line_no) + "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

double parse_double(const std::string& text, const std::string& source, std::size_t line_no, const char* column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError(where(source, line_no) + "column '" + column + "': cannot parse '" + text + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError(where(source, line_no) + "column '" + column + "': non-finite value '" + text + "'");
  }
  return value;
}

// Reads lines, strips a trailing '\r', skips blank lines. Returns false at EOF.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

void expect_header(std::istream& in, const std::string& source, std::size_t& line_no,
                   const std::vector<std::string>& expected) {
  std::string line;
  std::string joined;
  for (std::size_t k = 0; k < expected.size(); ++k) joined += (k ? "," : "") + expected[k];
  if (!next_line(in, line, line_no)) throw ParseError(source + ": missing header `" + joined + "`");
  if (split_csv(line, source, line_no) != expected) {
    throw ParseError(where(source, line_no) + "expected header `" + joined + "`, found `" + line + "`");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

LongTable read_long_csv(std::istream& in, const std::string& source) {
  std::size_t line_no = 0;
  expect_header(in, source, line_no, {"subject", "variable", "time", "value"});
  struct Entry {
    LongRow row;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::string line;
  while (next_line(in, line, line_no)) {
    const auto fields = split_csv(line, source, line_no);
    if (fields.size() != 4) {
      throw ParseError(where(source, line_no) + "expected 4 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError(where(source, line_no) + "empty subject or variable");
    entries.push_back({LongRow{fields[0], fields[1], parse_double(fields[2], source, line_no, "time"),
                               parse_double(fields[3], source, line_no, "value")},
                       line_no});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.row.variable, a.row.subject, a.row.time) < std::tie(b.row.variable, b.row.subject, b.row.time);
  });
  LongTable table;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const LongRow& r = entries[k].row;
    if (k > 0) {
      const LongRow& prev = entries[k - 1].row;
      if (prev.variable == r.variable && prev.subject == r.subject && prev.time == r.time) {
        throw ParseError(where(source, std::max(entries[k].line, entries[k - 1].line)) + "duplicate key (" +
                         r.subject + ", " + r.variable + ", " + format_double(r.time) + ")");
      }
    }
    table.rows.push_back(r);
  }
  for (std::size_t k = 0; k < entries.size();) {
    std::size_t m = k;
    while (m < entries.size() && entries[m].row.variable == entries[k].row.variable &&
           entries[m].row.subject == entries[k].row.subject) {
      ++m;
    }
    if (m - k < 2) {
      throw ParseError(where(source, entries[k].line) + "(" + entries[k].row.subject + ", " +
                       entries[k].row.variable + ") has fewer than 2 observations");
    }
    k = m;
  }
  return table;
}

LongTable load_long_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_long_csv(in, path.string());
}

void write_long_csv(std::ostream& out, const LongTable& table) {
  out << "subject,variable,time,value\n";
  for (const LongRow& r : table.rows) {
    out << quote(r.subject) << ',' << quote(r.variable) << ',' << format_double(r.time) << ','
        << format_double(r.value) << '\n';
  }
}

void save_long_csv(const std::filesystem::path& path, const LongTable& table) {
  auto out = open_output(path);
  write_long_csv(out, table);
  finish(out, path);
}

ResponseTable read_response_csv(std::istream& in, const std::string& source) {
  std::size_t line_no = 0;
  expect_header(in, source, line_no, {"subject", "y", "t"});
  ResponseTable table;
  std::set<std::string> seen;
  std::string line;
  while (next_line(in, line, line_no)) {
    const auto fields = split_csv(line, source, line_no);
    if (fields.size() != 3) {
      throw ParseError(where(source, line_no) + "expected 3 fields, found " + std::to_string(fields.size()));
    }
    if (!seen.insert(fields[0]).second) {
      throw ParseError(where(source, line_no) + "duplicate subject '" + fields[0] + "'");
    }
    table.rows.push_back(
        {fields[0], parse_double(fields[1], source, line_no, "y"), parse_double(fields[2], source, line_no, "t")});
  }
  return table;
}

ResponseTable load_response_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_response_csv(in, path.string());
}

void write_response_csv(std::ostream& out, const ResponseTable& table) {
  out << "subject,y,t\n";
  for (const ResponseRow& r : table.rows) {
    out << quote(r.subject) << ',' << format_double(r.y) << ',' << format_double(r.t) << '\n';
  }
}

std::vector<ExogenousRow> load_exogenous_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::size_t line_no = 0;
  std::string line;
  std::vector<ExogenousRow> rows;
  if (!next_line(in, line, line_no)) return rows;
  const auto header = split_csv(line, source, line_no);
  std::size_t t_col = 0;
  if (header == std::vector<std::string>{"subject", "t"}) {
    t_col = 1;
  } else if (header == std::vector<std::string>{"subject", "y", "t"}) {
    t_col = 2;
  } else {
    throw ParseError(where(source, line_no) + "expected header `subject,t` or `subject,y,t`");
  }
  std::set<std::string> seen;
  while (next_line(in, line, line_no)) {
    const auto fields = split_csv(line, source, line_no);
    if (fields.size() != header.size()) {
      throw ParseError(where(source, line_no) + "expected " + std::to_string(header.size()) + " fields");
    }
    if (!seen.insert(fields[0]).second) {
      throw ParseError(where(source, line_no) + "duplicate subject '" + fields[0] + "'");
    }
    if (t_col == 2) parse_double(fields[1], source, line_no, "y");
    rows.push_back({fields[0], parse_double(fields[t_col], source, line_no, "t")});
  }
  return rows;
}

std::vector<Eigen::MatrixXd> smooth_table(const LongTable& table, std::span<const std::string> subjects,
                                          std::span<const std::string> variables,
                                          const std::map<std::string, BSplineBasis>& bases) {
  std::map<std::pair<std::string, std::string>, RawCurve> curves;  // (variable, subject)
  for (const LongRow& r : table.rows) {
    RawCurve& c = curves[{r.variable, r.subject}];
    c.time.push_back(r.time);
    c.value.push_back(r.value);
  }
  // Rows may arrive unsorted when the table was built in memory.
  for (auto& [key, c] : curves) {
    std::vector<std::size_t> idx(c.time.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c.time[a] < c.time[b]; });
    RawCurve sorted;
    for (std::size_t k : idx) {
      sorted.time.push_back(c.time[k]);
      sorted.value.push_back(c.value[k]);
    }
    c = std::move(sorted);
  }

  std::vector<std::string> gaps;
  for (const auto& v : variables) {
    for (const auto& s : subjects) {
      if (!curves.count({v, s})) gaps.push_back("(" + s + ", " + v + ")");
    }
  }
  if (!gaps.empty()) {
    std::string msg = "missing curves for " + std::to_string(gaps.size()) + " (subject, variable) pairs:";
    for (const auto& g : gaps) msg += " " + g;
    throw std::invalid_argument(msg);
  }

  std::vector<Eigen::MatrixXd> out;
  for (const auto& v : variables) {
    const auto it = bases.find(v);
    if (it == bases.end()) throw std::invalid_argument("no smoothing basis for variable '" + v + "'");
    const BSplineBasis& basis = it->second;
    Eigen::MatrixXd coef(static_cast<Eigen::Index>(subjects.size()), basis.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      try {
        coef.row(static_cast<Eigen::Index>(i)) = smooth_curve(curves.at({v, subjects[i]}), basis).transpose();
      } catch (const std::exception& e) {
        throw std::invalid_argument("smoothing (" + subjects[i] + ", " + v + "): " + e.what());
      }
    }
    out.push_back(std::move(coef));
  }
  return out;
}

AssembledData assemble(const LongTable& table, const ResponseTable& response,
                       const std::map<std::string, BSplineBasis>& bases) {
  AssembledData out;
  std::set<std::string> variables;
  for (const LongRow& r : table.rows) variables.insert(r.variable);
  out.variables.assign(variables.begin(), variables.end());

  std::vector<const ResponseRow*> rows;
  for (const ResponseRow& r : response.rows) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](const ResponseRow* a, const ResponseRow* b) { return a->subject < b->subject; });
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.t.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i]->subject == rows[i - 1]->subject) {
      throw std::invalid_argument("duplicate response subject '" + rows[i]->subject + "'");
    }
    out.subjects.push_back(rows[i]->subject);
    out.y[static_cast<Eigen::Index>(i)] = rows[i]->y;
    out.t[static_cast<Eigen::Index>(i)] = rows[i]->t;
  }
  std::vector<Eigen::MatrixXd> coef = smooth_table(table, out.subjects, out.variables, bases);
  for (std::size_t j = 0; j < out.variables.size(); ++j) {
    out.samples.push_back(FunctionalSample{bases.at(out.variables[j]), std::move(coef[j])});
  }
  return out;
}

void write_surface_grid(std::ostream& out, const Eigen::MatrixXd& surface, std::span<const double> grid_s,
                        std::span<const double> grid_t) {
  if (surface.rows() != static_cast<Eigen::Index>(grid_s.size()) ||
      surface.cols() != static_cast<Eigen::Index>(grid_t.size())) {
    throw DimensionError("write_surface_grid: surface is " + std::to_string(surface.rows()) + "x" +
                         std::to_string(surface.cols()) + ", grids are " + std::to_string(grid_s.size()) + "x" +
                         std::to_string(grid_t.size()));
  }
  out << "s,t,beta\n";
  for (std::size_t a = 0; a < grid_s.size(); ++a) {
    for (std::size_t b = 0; b < grid_t.size(); ++b) {
      out << format_double(grid_s[a]) << ',' << format_double(grid_t[b]) << ','
          << format_double(surface(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) << '\n';
    }
  }
}

void export_surface_grid(const Eigen::MatrixXd& surface, std::span<const double> grid_s,
                         std::span<const double> grid_t, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_surface_grid(buffer, surface, grid_s, grid_t);
  write_text_file(path, buffer.str());
}

SurfaceGrid read_surface_grid(std::istream& in, const std::string& source) {
  std::size_t line_no = 0;
  expect_header(in, source, line_no, {"s", "t", "beta"});
  std::vector<std::tuple<double, double, double>> cells;
  std::string line;
  while (next_line(in, line, line_no)) {
    const auto f = split_csv(line, source, line_no);
    if (f.size() != 3) throw ParseError(where(source, line_no) + "expected 3 fields");
    cells.emplace_back(parse_double(f[0], source, line_no, "s"), parse_double(f[1], source, line_no, "t"),
                       parse_double(f[2], source, line_no, "beta"));
  }
  SurfaceGrid grid;
  for (const auto& [s, t, beta] : cells) {
    if (grid.grid_s.empty() || grid.grid_s.back() != s) grid.grid_s.push_back(s);
  }
  const std::size_t n_s = grid.grid_s.size();
  if (n_s == 0) return grid;
  if (cells.size() % n_s != 0) throw ParseError(source + ": surface grid is not rectangular");
  const std::size_t n_t = cells.size() / n_s;
  for (std::size_t b = 0; b < n_t; ++b) grid.grid_t.push_back(std::get<1>(cells[b]));
  grid.values.resize(static_cast<Eigen::Index>(n_s), static_cast<Eigen::Index>(n_t));
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const std::size_t a = k / n_t;
    const std::size_t b = k % n_t;
    if (std::get<0>(cells[k]) != grid.grid_s[a] || std::get<1>(cells[k]) != grid.grid_t[b]) {
      throw ParseError(source + ": surface grid rows are not in row-major (s, t) order");
    }
    grid.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = std::get<2>(cells[k]);
  }
  return grid;
}

SurfaceGrid load_surface_grid(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_surface_grid(in, path.string());
}

void write_tuning_report(std::ostream& out, const TuningReport& report) {
  out << "m2,alpha,lambda,bic,sigma2,df,n_active\n";
  for (const TuningRow& r : report.rows) {
    out << r.m2 << ',' << format_double(r.alpha) << ',' << format_double(r.lambda) << ',' << format_double(r.bic)
        << ',' << format_double(r.sigma2) << ',' << format_double(r.df) << ',' << r.n_active << '\n';
  }
}

std::vector<TuningRow> read_tuning_report(std::istream& in, const std::string& source) {
  std::size_t line_no = 0;
  expect_header(in, source, line_no, {"m2", "alpha", "lambda", "bic", "sigma2", "df", "n_active"});
  std::vector<TuningRow> rows;
  std::string line;
  while (next_line(in, line, line_no)) {
    const auto f = split_csv(line, source, line_no);
    if (f.size() != 7) throw ParseError(where(source, line_no) + "expected 7 fields");
    TuningRow r;
    r.m2 = static_cast<int>(parse_double(f[0], source, line_no, "m2"));
    r.alpha = parse_double(f[1], source, line_no, "alpha");
    r.lambda = parse_double(f[2], source, line_no, "lambda");
    r.bic = parse_double(f[3], source, line_no, "bic");
    r.sigma2 = parse_double(f[4], source, line_no, "sigma2");
    r.df = parse_double(f[5], source, line_no, "df");
    r.n_active = static_cast<int>(parse_double(f[6], source, line_no, "n_active"));
    rows.push_back(r);
  }
  return rows;
}

void write_study_report(std::ostream& out, std::span<const StudyReport> reports) {
  out << "n,s,metric";
  if (!reports.empty()) {
    for (const auto& m : reports.front().methods) out << ',' << method_name(m.method);
  }
  out << '\n';
  for (const StudyReport& rep : reports) {
    const auto row = [&](const char* metric, auto get) {
      out << rep.n << ',' << format_double(rep.s) << ',' << metric;
      for (const auto& m : rep.methods) out << ',' << format_double(get(m));
      out << '\n';
    };
    row("RMSE", [](const MethodSummary& m) { return m.mean_rmse; });
    row("RMSE_SD", [](const MethodSummary& m) { return m.sd_rmse; });
    row("APR", [](const MethodSummary& m) { return m.mean_apr; });
    row("ANR", [](const MethodSummary& m) { return m.mean_anr; });
  }
}

void write_study_log(std::ostream& out, std::span<const StudyReport> reports) {
  out << "n,s,replicate,method,status,rmse,apr,anr,m2,alpha,lambda,n_active,error\n";
  for (const StudyReport& rep : reports) {
    for (const ReplicateOutcome& o : rep.outcomes) {
      out << rep.n << ',' << format_double(rep.s) << ',' << o.replicate << ',' << method_name(o.method) << ','
          << (o.ok ? "ok" : "failed") << ',' << format_double(o.rmse) << ',' << format_double(o.apr) << ','
          << format_double(o.anr) << ',' << o.m2 << ',' << format_double(o.alpha) << ','
          << format_double(o.lambda) << ',' << o.n_active << ',' << quote(o.error) << '\n';
    }
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  auto out = open_output(path);
  out << contents;
  finish(out, path);
}

}  // namespace svcflm::io
