#pragma once

// CSV and JSON exchange formats.
//
//   paths     path,step,s,x
//   dataset   path,step,x,a[,r]     (a and r are empty on the maturity row)
//   payoffs   path,payoff
//   dp paths  path,step,a,pi,q,reward
//   lambda    step,lambda_impl,loglik,boundary_flag

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qlbs/basis.hpp"
#include "qlbs/dp_solver.hpp"
#include "qlbs/errors.hpp"
#include "qlbs/fqi_solver.hpp"
#include "qlbs/irl.hpp"
#include "qlbs/market_sim.hpp"

namespace qlbs::io {

inline constexpr int kCsvPrecision = 17;

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, int line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw SchemaError("csv line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

inline long to_index(const std::string& s, int line_no) {
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0)
    throw SchemaError("csv line " + std::to_string(line_no) + ": bad index '" + s + "'");
  return v;
}

/// Reads the header and all rows; rows must have as many cells as the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("csv: empty input");
  t.header = split(line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw SchemaError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void require_header(const Table& t, const std::vector<std::string>& expected, std::string_view what) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw SchemaError(std::string(what) + ": expected header '" + want + "'");
  }
}

/// Shape of a (path, step) table from its largest indices.
inline std::pair<Eigen::Index, Eigen::Index> grid_shape(const Table& t) {
  long max_path = -1;
  long max_step = -1;
  int line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    max_path = std::max(max_path, to_index(row[0], line_no));
    max_step = std::max(max_step, to_index(row[1], line_no));
  }
  if (max_path < 0 || max_step < 0) throw SchemaError("csv: no data rows");
  const auto n_paths = static_cast<Eigen::Index>(max_path + 1);
  const auto n_cols = static_cast<Eigen::Index>(max_step + 1);
  if (static_cast<Eigen::Index>(t.rows.size()) != n_paths * n_cols)
    throw SchemaError("csv: expected one row per (path, step)");
  return {n_paths, n_cols};
}

}  // namespace detail

inline void write_paths_csv(std::ostream& out, const PathSet& paths) {
  out << "path,step,s,x\n" << std::setprecision(kCsvPrecision);
  for (Eigen::Index k = 0; k < paths.n_paths(); ++k)
    for (Eigen::Index t = 0; t < paths.s.cols(); ++t) out << k << ',' << t << ',' << paths.s(k, t) << ',' << paths.x(k, t) << '\n';
}

inline PathSet read_paths_csv(std::istream& in, const MarketParams& params, std::uint64_t seed = 0) {
  const auto table = detail::read_table(in);
  detail::require_header(table, {"path", "step", "s", "x"}, "paths csv");
  const auto [n_paths, n_cols] = detail::grid_shape(table);
  PathSet p;
  p.params = params;
  p.seed = seed;
  p.s.resize(n_paths, n_cols);
  p.x.resize(n_paths, n_cols);
  int line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const auto k = detail::to_index(row[0], line_no);
    const auto t = detail::to_index(row[1], line_no);
    p.s(k, t) = detail::to_double(row[2], line_no);
    p.x(k, t) = detail::to_double(row[3], line_no);
  }
  return p;
}

inline void write_dataset_csv(std::ostream& out, const HedgeDataset& data) {
  const bool with_r = data.r.has_value();
  out << (with_r ? "path,step,x,a,r\n" : "path,step,x,a\n") << std::setprecision(kCsvPrecision);
  const int n = data.n_steps();
  for (Eigen::Index k = 0; k < data.n_paths(); ++k) {
    for (int t = 0; t <= n; ++t) {
      out << k << ',' << t << ',' << data.x(k, t) << ',';
      if (t < n) out << data.a(k, t);
      if (with_r) {
        out << ',';
        if (t < n) out << (*data.r)(k, t);
      }
      out << '\n';
    }
  }
}

inline void write_payoffs_csv(std::ostream& out, const Eigen::VectorXd& payoff) {
  out << "path,payoff\n" << std::setprecision(kCsvPrecision);
  for (Eigen::Index k = 0; k < payoff.size(); ++k) out << k << ',' << payoff(k) << '\n';
}

inline Eigen::VectorXd read_payoffs_csv(std::istream& in) {
  const auto table = detail::read_table(in);
  detail::require_header(table, {"path", "payoff"}, "payoffs csv");
  Eigen::VectorXd payoff(static_cast<Eigen::Index>(table.rows.size()));
  std::vector<bool> seen(table.rows.size(), false);
  int line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const auto k = static_cast<std::size_t>(detail::to_index(row[0], line_no));
    if (k >= seen.size() || seen[k]) throw SchemaError("payoffs csv: path indices must be 0..N-1, each once");
    seen[k] = true;
    payoff(static_cast<Eigen::Index>(k)) = detail::to_double(row[1], line_no);
  }
  return payoff;
}

/// Dataset rows plus terminal payoffs from the companion file.
inline HedgeDataset read_dataset_csv(std::istream& in, std::istream& payoffs) {
  const auto table = detail::read_table(in);
  const bool with_r = table.header.size() == 5;
  if (with_r)
    detail::require_header(table, {"path", "step", "x", "a", "r"}, "dataset csv");
  else
    detail::require_header(table, {"path", "step", "x", "a"}, "dataset csv");
  const auto [n_paths, n_cols] = detail::grid_shape(table);
  const int n = static_cast<int>(n_cols) - 1;
  HedgeDataset data;
  data.x.resize(n_paths, n_cols);
  data.a.resize(n_paths, n);
  if (with_r) data.r = Eigen::MatrixXd(n_paths, n);
  int line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const auto k = detail::to_index(row[0], line_no);
    const auto t = detail::to_index(row[1], line_no);
    data.x(k, t) = detail::to_double(row[2], line_no);
    if (t < n) {
      data.a(k, t) = detail::to_double(row[3], line_no);
      if (with_r) (*data.r)(k, t) = detail::to_double(row[4], line_no);
    }
  }
  data.terminal_payoff = read_payoffs_csv(payoffs);
  data.validate();
  return data;
}

inline void write_dp_paths_csv(std::ostream& out, const DPSolution& sol) {
  out << "path,step,a,pi,q,reward\n" << std::setprecision(kCsvPrecision);
  const auto n = sol.a_star.cols();
  for (Eigen::Index k = 0; k < sol.pi.rows(); ++k) {
    for (Eigen::Index t = 0; t <= n; ++t) {
      const double a = t < n ? sol.a_star(k, t) : 0.0;
      const double r = t < n ? sol.rewards(k, t) : sol.terminal_reward;
      out << k << ',' << t << ',' << a << ',' << sol.pi(k, t) << ',' << sol.q_star(k, t) << ',' << r << '\n';
    }
  }
}

inline nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json dp_summary_json(const DPSolution& sol) {
  return {{"price", sol.price},
          {"lambda", sol.lambda},
          {"regularization", sol.regularization},
          {"terminal_reward", sol.terminal_reward},
          {"phi", matrix_rows(sol.phi)},
          {"omega", matrix_rows(sol.omega)}};
}

inline nlohmann::json fqi_summary_json(const FQISolution& sol) {
  auto w = nlohmann::json::array();
  for (const auto& wt : sol.w) w.push_back(matrix_rows(wt));
  return {{"price", sol.price},
          {"w", w},
          {"concavity_violations", sol.concavity_violations},
          {"evaluated_states", sol.evaluated_states},
          {"convex_at_t0", sol.convex_at_t0},
          {"warnings", sol.warnings}};
}

inline void write_lambda_csv(std::ostream& out, const LambdaTermStructure& ts) {
  out << "step,lambda_impl,loglik,boundary_flag\n" << std::setprecision(kCsvPrecision);
  for (Eigen::Index t = 0; t < ts.lambda_impl.size(); ++t)
    out << t << ',' << ts.lambda_impl(t) << ',' << ts.loglik(t) << ',' << (ts.boundary[t] ? 1 : 0) << '\n';
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return in;
}

}  // namespace qlbs::io
