#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dvscar/mc_bench.hpp"

using namespace dvscar;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST(McBench, RelativeStatsMatchHandComputation) {
  RelativeStats s = relative_stats({0.1, -0.2, 0.4});
  EXPECT_NEAR(s.bias, 0.1, 1e-15);
  EXPECT_NEAR(s.mse, 0.07, 1e-15);
  EXPECT_NEAR(s.bias_se, 0.3 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(s.mse_se, std::sqrt(0.0063 / 3.0), 1e-15);
  EXPECT_GE(s.mse, s.bias * s.bias);

  RelativeStats one = relative_stats({0.25});
  EXPECT_EQ(one.bias, 0.25);
  EXPECT_EQ(one.mse, 0.0625);
  EXPECT_EQ(one.bias_se, 0.0);
  // Identical values: the MSE is exactly the squared bias.
  RelativeStats same = relative_stats(std::vector<double>(7, 0.3));
  EXPECT_EQ(same.mse, same.bias * same.bias);
}

TEST(McBench, EdgeIndexNotation) {
  EXPECT_EQ(edge_index({1, 1}), "12");
  EXPECT_EQ(edge_index({1, 3}), "34");
  EXPECT_EQ(edge_index({2, 1}), "13|2");
  EXPECT_EQ(edge_index({3, 1}), "14|23");
  EXPECT_EQ(edge_index({2, 2}), "24|3");
}

TEST(McBench, BuiltinScenariosAreValid) {
  for (const auto& name : builtin_scenario_names()) {
    auto s = builtin_scenario(name);
    ASSERT_TRUE(s) << name;
    EXPECT_NO_THROW(s->truth.validate()) << name;
    EXPECT_EQ(s->T, 1000u);
    EXPECT_EQ(s->R, 50u);
  }
  EXPECT_FALSE(builtin_scenario("table9"));

  auto t1 = builtin_scenario("table1-gauss-15");
  EXPECT_EQ(t1->truth.d(), 4u);
  EXPECT_EQ(t1->truth.parameter_count(), 18);
  EXPECT_EQ(*t1->truth.edge({3, 1}).scar, (ScarParams{0.5, 0.95, 0.15}));

  auto t2 = builtin_scenario("table2-clayton-05");
  EXPECT_EQ(t2->truth.max_tv_tree, 1);
  EXPECT_EQ(t2->truth.edge({1, 2}).family, Family::Clayton);
  EXPECT_EQ(t2->truth.edge({1, 2}).scar->sigma, 0.05);
  EXPECT_EQ(t2->truth.edge({2, 1}).mode, EdgeMode::Static);
  EXPECT_NEAR(t2->truth.edge({2, 2}).static_tau(), std::tanh(0.3), 1e-15);
  EXPECT_NEAR(t2->truth.edge({3, 1}).static_tau(), std::tanh(0.2), 1e-15);

  auto t3 = builtin_scenario("table3-mixed");
  EXPECT_EQ(t3->truth.d(), 3u);
  EXPECT_EQ(t3->truth.edge({1, 1}).family, Family::Clayton);
  EXPECT_EQ(t3->truth.edge({1, 2}).family, Family::Gumbel);
  EXPECT_EQ(t3->truth.edge({2, 1}).family, Family::Gaussian);
  EXPECT_EQ(t3->truth.edge({1, 2}).scar->phi, 0.95);
  EXPECT_EQ(t3->truth.edge({2, 1}).scar->phi, 0.85);

  EXPECT_EQ(builtin_scenario("independence")->truth.parameter_count(), 0);
}

TEST(McBench, IndependenceScenarioRunsWithoutFailures) {
  Scenario s = *builtin_scenario("independence");
  s.T = 60;
  s.R = 10;
  std::vector<std::size_t> progress;
  McOptions opt;
  opt.progress = [&](std::size_t done, std::size_t) { progress.push_back(done); };
  McReport rep = run_scenario(s, 5, opt);
  EXPECT_EQ(rep.failures, 0u);
  EXPECT_TRUE(rep.failure_rate_ok());
  EXPECT_EQ(rep.rows.size(), 6u);
  EXPECT_EQ(progress.size(), 10u);
  EXPECT_EQ(progress.back(), 10u);
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.mode, EdgeMode::Independence);
    EXPECT_FALSE(r.stats[0]);
    EXPECT_EQ(r.mean_loglik, 0.0);
  }
  s.R = 9;
  EXPECT_THROW(run_scenario(s, 5), std::invalid_argument);
}

TEST(McBench, StaticScenarioFromFileAndReport) {
  auto dir = std::filesystem::temp_directory_path() / "dvscar_mc_static";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "s.json").string();
  write_text_file(path, R"({"name": "static3", "T": 400, "R": 12, "ordering": ["1", "2", "3"],
    "edges": [
      {"tree": 1, "position": 1, "family": "N", "mode": "static", "parameters": {"theta": 0.6}},
      {"tree": 1, "position": 2, "family": "C", "mode": "static", "parameters": {"theta": 2.0}}]})");
  Scenario s = load_scenario(path);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(s.name, "static3");
  EXPECT_EQ(s.T, 400u);
  EXPECT_EQ(s.R, 12u);

  McOptions opt;
  opt.workers = 2;
  McReport rep = run_scenario(s, 1, opt);
  EXPECT_EQ(rep.failures, 0u);
  const McEdgeRow& r12 = rep.row({1, 1});
  EXPECT_EQ(r12.index, "12");
  EXPECT_NEAR(r12.truth[0], fisher(theta_to_tau(Family::Gaussian, 0.6)), 1e-15);
  ASSERT_TRUE(r12.stats[0]);
  EXPECT_FALSE(r12.stats[1]);
  EXPECT_LT(std::abs(r12.stats[0]->bias), 4.0 * r12.stats[0]->bias_se + 0.02);
  EXPECT_TRUE(std::isinf(r12.sn));
  EXPECT_GT(rep.row({1, 2}).mean_loglik, 0.0);
  EXPECT_EQ(rep.row({2, 1}).mode, EdgeMode::Independence);

  // Same seed, same report, whatever the worker count.
  opt.workers = 1;
  EXPECT_EQ(report_csv(run_scenario(s, 1, opt)), report_csv(rep));

  auto csv = lines(report_csv(rep));
  ASSERT_EQ(csv.size(), 4u);
  auto header = split(csv[0]);
  EXPECT_EQ(header.size(), 23u);
  EXPECT_EQ(header[0], "index");
  EXPECT_EQ(header[6], "rel_bias_mu");
  EXPECT_EQ(header[12], "rel_mse_mu");
  EXPECT_EQ(header.back(), "failures");
  for (std::size_t k = 1; k < csv.size(); ++k) EXPECT_EQ(split(csv[k]).size(), header.size()) << csv[k];
  auto row = split(csv[1]);
  EXPECT_EQ(row[0], "12");
  EXPECT_EQ(row[1], "N");
  EXPECT_EQ(row[2], "static");
  EXPECT_EQ(row[4], "");
  EXPECT_EQ(row[18], "Inf");
  EXPECT_EQ(row[21], "12");
}

TEST(McBench, TimeVaryingScenarioReportsLatentStatistics) {
  Scenario s = *builtin_scenario("table3-gauss");
  s.T = 120;
  s.R = 10;
  McOptions opt;
  opt.eis.n_traj = 20;
  McReport rep = run_scenario(s, 3, opt);
  EXPECT_TRUE(rep.failure_rate_ok());
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.mode, EdgeMode::TimeVarying);
    for (int p = 0; p < 3; ++p) {
      ASSERT_TRUE(r.stats[p]);
      EXPECT_GE(r.stats[p]->mse, r.stats[p]->bias * r.stats[p]->bias);
    }
    auto st = stationary_stats(*s.truth.edge(r.id).scar);
    EXPECT_EQ(r.sn, st.sn);
    EXPECT_EQ(r.avar, st.avar);
  }
}
