#include "sensel/knapsack.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "sensel/errors.hpp"
#include "sensel/service_level.hpp"
#include "test_util.hpp"

namespace sensel::knapsack {
namespace {

Instance make(std::vector<double> w, std::vector<std::vector<double>> v, std::vector<double> b) {
  Instance inst;
  inst.weights = Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  inst.thresholds = Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  inst.values.resize(inst.thresholds.size(), inst.weights.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v[i].size(); ++j) {
      inst.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j];
    }
  }
  return inst;
}

// Test-local reference: plain enumeration, cheapest feasible subset.
double brute_force_cost(const Instance& inst) {
  const auto n = static_cast<int>(inst.items());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    Vector sum = Vector::Zero(inst.resources());
    double w = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask >> j & 1U) {
        sum += inst.values.col(j);
        w += inst.weights(j);
      }
    }
    if (((inst.thresholds - sum).array() <= 0.0).all()) best = std::min(best, w);
  }
  return best;
}

Instance random_instance(std::mt19937_64& rng, int d, int n) {
  std::uniform_real_distribution<double> w(0.1, 5.0), v(0.0, 3.0), frac(0.1, 0.8);
  Instance inst;
  inst.weights.resize(n);
  inst.values.resize(d, n);
  inst.thresholds.resize(d);
  for (int j = 0; j < n; ++j) inst.weights(j) = w(rng);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < n; ++j) inst.values(i, j) = v(rng);
    inst.thresholds(i) = frac(rng) * inst.values.row(i).sum();
  }
  return inst;
}

TEST(Greedy, SmallExample) {
  const auto inst = make({1, 2, 3}, {{2, 0, 1}, {0, 2, 1}}, {1, 1});
  const auto sel = greedy_solve(inst);
  EXPECT_EQ(sel.chosen, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(sel.total_weight, 3.0);
  EXPECT_TRUE(sel.satisfied);
}

TEST(Greedy, SuboptimalExample) {
  const auto inst = make({1.5, 1, 1}, {{2, 2, 1}, {2, 1, 2}}, {2, 2});
  const auto greedy = greedy_solve(inst);
  EXPECT_EQ(greedy.chosen, (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(greedy.total_weight, 2.0);
  const auto exact = exact_solve(inst);
  EXPECT_EQ(exact.chosen, (std::vector<std::size_t>{0}));
  EXPECT_DOUBLE_EQ(exact.total_weight, 1.5);
}

TEST(Greedy, AlreadySatisfiedPicksNothing) {
  const auto inst = make({1, 1}, {{1, 1}, {1, 1}}, {0, -3});
  for (const auto& sel : {greedy_solve(inst), exact_solve(inst)}) {
    EXPECT_TRUE(sel.chosen.empty());
    EXPECT_EQ(sel.total_weight, 0.0);
    EXPECT_TRUE(sel.satisfied);
  }
}

TEST(Greedy, InfeasibleReturnsFullSet) {
  const auto inst = make({1, 2}, {{1, 1}, {0, 0}}, {1, 1});
  for (const auto& sel : {greedy_solve(inst), exact_solve(inst)}) {
    EXPECT_EQ(sel.chosen, (std::vector<std::size_t>{0, 1}));
    EXPECT_FALSE(sel.satisfied);
    EXPECT_DOUBLE_EQ(sel.residual_deficiency(1), 1.0);
  }
}

TEST(Greedy, ZeroWeightUsefulItemFirst) {
  const auto inst = make({2, 0, 1}, {{1, 0.5, 1}}, {1});
  std::vector<GreedyStep> trace;
  const auto sel = greedy_solve(inst, &trace);
  ASSERT_FALSE(trace.empty());
  EXPECT_EQ(trace.front().picked, 1u);
  EXPECT_TRUE(std::isinf(trace.front().efficiency(1)));
  EXPECT_TRUE(sel.satisfied);
}

TEST(Greedy, TiesBreakToLowestIndex) {
  const auto inst = make({1, 1, 1}, {{1, 1, 1}}, {1});
  EXPECT_EQ(greedy_solve(inst).chosen, (std::vector<std::size_t>{0}));
  EXPECT_EQ(exact_solve(inst).chosen, (std::vector<std::size_t>{0}));
}

TEST(Greedy, EmptyItemSet) {
  const auto inst = make({}, {{}}, {1});
  const auto sel = greedy_solve(inst);
  EXPECT_TRUE(sel.chosen.empty());
  EXPECT_FALSE(sel.satisfied);
  EXPECT_TRUE(exact_solve(inst).chosen.empty());
}

TEST(Greedy, Deterministic) {
  std::mt19937_64 rng(5);
  const auto inst = random_instance(rng, 4, 12);
  EXPECT_EQ(greedy_solve(inst), greedy_solve(inst));
  EXPECT_EQ(exact_solve(inst), exact_solve(inst));
}

TEST(Properties, GreedyNeverBeatsExactAndExactMatchesBruteForce) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dims(1, 4), items(1, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_instance(rng, dims(rng), items(rng));
    const auto greedy = greedy_solve(inst);
    const auto exact = exact_solve(inst);
    ASSERT_TRUE(exact.satisfied);
    ASSERT_TRUE(greedy.satisfied);
    EXPECT_NEAR(exact.total_weight, brute_force_cost(inst), 1e-12);
    EXPECT_GE(greedy.total_weight, exact.total_weight - 1e-12);
  }
}

TEST(Properties, DeficiencyNeverIncreases) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = random_instance(rng, 4, 10);
    std::vector<GreedyStep> trace;
    const auto sel = greedy_solve(inst, &trace);
    for (std::size_t s = 1; s < trace.size(); ++s) {
      EXPECT_TRUE((trace[s].deficiency.array() <= trace[s - 1].deficiency.array()).all());
    }
    if (!trace.empty()) {
      EXPECT_TRUE((sel.residual_deficiency.array() <= trace.back().deficiency.array()).all());
    }
    EXPECT_EQ(trace.size(), sel.chosen.size());
  }
}

TEST(Exact, BranchAndBoundMatchesExhaustive) {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, 3, 14);
    const auto a = exact_solve(inst, std::nullopt, ExactMode::kExhaustive);
    const auto b = exact_solve(inst, std::nullopt, ExactMode::kBranchAndBound);
    EXPECT_EQ(a.chosen, b.chosen);
    EXPECT_DOUBLE_EQ(a.total_weight, b.total_weight);
  }
}

TEST(Exact, LargeInstanceUsesBranchAndBound) {
  std::mt19937_64 rng(109);
  const auto inst = random_instance(rng, 4, 30);
  ExactStats stats;
  const auto sel = exact_solve(inst, std::nullopt, ExactMode::kAuto, &stats);
  EXPECT_TRUE(sel.satisfied);
  EXPECT_FALSE(stats.budget_exhausted);
  EXPECT_GT(stats.nodes, 0u);
  EXPECT_GE(greedy_solve(inst).total_weight, sel.total_weight - 1e-12);
}

TEST(Exact, NodeBudgetReturnsIncumbent) {
  std::mt19937_64 rng(113);
  const auto inst = random_instance(rng, 4, 30);
  ExactStats stats;
  const auto sel = exact_solve(inst, 5, ExactMode::kBranchAndBound, &stats);
  EXPECT_TRUE(stats.budget_exhausted);
  EXPECT_LE(stats.nodes, 6u);
  EXPECT_EQ(sel, evaluate(inst, sel.chosen));
}

TEST(Validate, RejectsBadInstances) {
  auto inst = make({1, 2}, {{1, 1}}, {1});
  inst.weights(0) = -1;
  EXPECT_THROW(greedy_solve(inst), InvalidInput);
  inst = make({1, 2}, {{1, 1}}, {1});
  inst.values(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(exact_solve(inst), InvalidInput);
  inst = make({1, 2}, {{1, 1}}, {1});
  inst.values.resize(2, 2);
  EXPECT_THROW(greedy_solve(inst), InvalidInput);
}

TEST(BuildInstance, OnboardPriorThresholds) {
  // b_i for a 0.5 m box at p = 0.95 over the onboard sensors on P0 = 0.05 I.
  const auto onboard = testing::onboard_sensors();
  const Vector thr = axis_thresholds(Vector::Constant(4, 0.5), 0.95, 4);
  const auto rsu = testing::sensor("RSU5", testing::rows_of({{1, 0, 0, 0}, {0, 1, 0, 0}}),
                                   0.01 * Matrix::Identity(2, 2), 2.0);
  const auto inst = build_instance(20.0 * Matrix::Identity(4, 4), onboard, std::vector{rsu}, thr);
  const Eigen::Vector4d expected(17.617582813791284, 17.617582813791284, 15.950916147124616,
                                 17.450916147124616);
  EXPECT_LE((inst.thresholds - expected).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(inst.weights(0), 2.0);
  EXPECT_NEAR(inst.values(0, 0), 100.0, 1e-10);
  EXPECT_NEAR(inst.values(2, 0), 0.0, 1e-12);
}

TEST(Parse, RoundTrip) {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 3, 7);
    EXPECT_EQ(parse_instance(format_instance(inst)), inst);
  }
}

TEST(Parse, CommentsAndWhitespace) {
  const auto inst = parse_instance("# header\n2 1\n 1.5\t2 # thresholds\n3 4 5\n");
  EXPECT_EQ(inst.items(), 1);
  EXPECT_EQ(inst.resources(), 2);
  EXPECT_EQ(inst.weights(0), 3.0);
  EXPECT_EQ(inst.values(1, 0), 5.0);
}

std::size_t parse_error_offset(std::string_view text) {
  try {
    parse_instance(text);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no ParseError for: " << text;
  return 0;
}

TEST(Parse, ErrorOffsets) {
  EXPECT_EQ(parse_error_offset("1 1\n1\n2 x\n"), 8u);
  EXPECT_EQ(parse_error_offset("0 1\n"), 0u);
  EXPECT_EQ(parse_error_offset("1 1\n1\n-2 1\n"), 6u);
  EXPECT_EQ(parse_error_offset("1 1\n1\n2 3\n4\n"), 10u);
  EXPECT_EQ(parse_error_offset("1 2\n1\n2 3\n"), 10u);
  EXPECT_EQ(parse_error_offset(""), 0u);
}

}  // namespace
}  // namespace sensel::knapsack
