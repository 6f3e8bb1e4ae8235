#include <sstream>

#include <gtest/gtest.h>

#include "qlbs/io.hpp"

using namespace qlbs;

namespace {

MarketParams short_market() {
  MarketParams m;
  m.dt = 0.25;
  return m;
}

}  // namespace

TEST(PathsCsv, RoundTripIsExact) {
  const PathSet p = simulate_paths(short_market(), 7, 3);
  std::stringstream buf;
  io::write_paths_csv(buf, p);
  const PathSet back = io::read_paths_csv(buf, short_market());
  EXPECT_TRUE((back.s.array() == p.s.array()).all());
  EXPECT_TRUE((back.x.array() == p.x.array()).all());
}

TEST(DatasetCsv, RoundTripWithAndWithoutRewards) {
  const PathSet p = simulate_paths(short_market(), 5, 4);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 4);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Random(5, 4);
  const Eigen::VectorXd payoff = put_payoff(p.s.col(4), 100);
  for (bool with_r : {true, false}) {
    const HedgeDataset d = make_dataset(p, a, with_r ? std::optional<Eigen::MatrixXd>(r) : std::nullopt, payoff);
    std::stringstream data_buf;
    std::stringstream payoff_buf;
    io::write_dataset_csv(data_buf, d);
    io::write_payoffs_csv(payoff_buf, payoff);
    const HedgeDataset back = io::read_dataset_csv(data_buf, payoff_buf);
    EXPECT_TRUE((back.x.array() == d.x.array()).all());
    EXPECT_TRUE((back.a.array() == d.a.array()).all());
    EXPECT_TRUE((back.terminal_payoff.array() == payoff.array()).all());
    ASSERT_EQ(back.r.has_value(), with_r);
    if (with_r) {
      EXPECT_TRUE((back.r->array() == r.array()).all());
    }
  }
}

TEST(DatasetCsv, SchemaErrors) {
  std::stringstream payoffs("path,payoff\n0,1\n1,2\n");
  std::stringstream bad_header("path,step,state,a\n0,0,1,2\n");
  EXPECT_THROW(io::read_dataset_csv(bad_header, payoffs), SchemaError);
  std::stringstream short_row("path,step,x,a\n0,0,1\n");
  EXPECT_THROW(io::read_dataset_csv(short_row, payoffs), SchemaError);
  std::stringstream not_number("path,step,x,a\n0,0,abc,1\n0,1,2,\n1,0,1,1\n1,1,2,\n");
  EXPECT_THROW(io::read_dataset_csv(not_number, payoffs), SchemaError);
  std::stringstream missing("path,step,x,a\n0,0,1,1\n0,1,2,\n1,0,1,1\n");
  EXPECT_THROW(io::read_dataset_csv(missing, payoffs), SchemaError);
  std::stringstream empty;
  EXPECT_THROW(io::read_dataset_csv(empty, payoffs), SchemaError);
}

TEST(PayoffsCsv, RejectsDuplicates) {
  std::stringstream dup("path,payoff\n0,1\n0,2\n");
  EXPECT_THROW(io::read_payoffs_csv(dup), SchemaError);
}

TEST(LambdaCsv, Columns) {
  LambdaTermStructure ts;
  ts.lambda_impl = Eigen::Vector2d(1e-3, 2e-3);
  ts.loglik = Eigen::Vector2d(-1.0, -2.0);
  ts.boundary = {false, true};
  std::stringstream out;
  io::write_lambda_csv(out, ts);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "step,lambda_impl,loglik,boundary_flag");
  std::getline(out, line);
  EXPECT_EQ(line, "0,0.001,-1,0");
  std::getline(out, line);
  EXPECT_EQ(line.back(), '1');
}

TEST(DpPathsCsv, OneRowPerPathAndStep) {
  const PathSet p = simulate_paths(short_market(), 6, 1);
  const auto basis = build_basis_for(p.x, 5);
  const auto sol = solve_dp(p, basis, EuropeanPut{}, RiskParams{});
  std::stringstream out;
  io::write_dp_paths_csv(out, sol);
  std::string line;
  int rows = -1;
  while (std::getline(out, line)) ++rows;
  EXPECT_EQ(rows, 6 * 5);
  const auto j = io::dp_summary_json(sol);
  EXPECT_EQ(j.at("price").get<double>(), sol.price);
  EXPECT_EQ(j.at("phi").size(), 4u);
}
