#include "sensel/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sensel/errors.hpp"
#include "sensel/scenario.hpp"
#include "test_util.hpp"

namespace sensel::sim {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Dynamics, StraightLine) {
  const auto next = step_dynamics({0, 0, 0, 10}, {0, 0}, 0.05, 3.0);
  EXPECT_DOUBLE_EQ(next.px, 0.5);
  EXPECT_EQ(next.py, 0.0);
  EXPECT_EQ(next.psi, 0.0);
  EXPECT_EQ(next.nu, 10.0);
}

TEST(Dynamics, YawRateAndAcceleration) {
  const auto next = step_dynamics({0, 0, 0, 10}, {0.1, 2.0}, 0.05, 3.0);
  EXPECT_NEAR(next.psi, 0.016722445347575093, 1e-15);
  EXPECT_DOUBLE_EQ(next.nu, 10.1);
  const auto up = step_dynamics({1, 2, kPi / 2, 4}, {0, 0}, 0.5, 3.0);
  EXPECT_NEAR(up.px, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(up.py, 4.0);
}

TEST(Dynamics, YawWrapsAcrossPi) {
  const auto next = step_dynamics({0, 0, kPi - 0.001, 10}, {0.5, 0}, 0.05, 3.0);
  EXPECT_LT(next.psi, 0.0);
  EXPECT_GT(next.psi, -kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi + 0.25), -kPi + 0.25, 1e-12);
}

TEST(Dynamics, JacobianOnStraightLine) {
  const Matrix J = bicycle_jacobian({0, 0, 0, 10}, {0, 0}, 0.05, 3.0);
  Matrix expected = Matrix::Identity(4, 4);
  expected(0, 3) = 0.05;
  expected(1, 2) = 0.5;
  EXPECT_LE((J - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PurePursuit, StraightPathAhead) {
  const Path path({{0, 0}, {100, 0}});
  EXPECT_NEAR(pure_pursuit({10, 0, 0, 10}, path, 6.0, 3.0, 0.7), 0.0, 1e-15);
}

TEST(PurePursuit, SteersTowardThePath) {
  const Path path({{0, 0}, {100, 0}});
  EXPECT_LT(pure_pursuit({10, 1, 0, 10}, path, 6.0, 3.0, 0.7), 0.0);
  EXPECT_GT(pure_pursuit({10, -1, 0, 10}, path, 6.0, 3.0, 0.7), 0.0);
}

TEST(PurePursuit, CircleOfRadiusTen) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i <= 2000; ++i) {
    const double th = -kPi / 2 + i * 2 * kPi / 2000;
    pts.emplace_back(10 * std::cos(th), 10 + 10 * std::sin(th));
  }
  const Path circle(pts);
  const double delta = pure_pursuit({0, 0, 0, 10}, circle, 3.0, 3.0, 0.7);
  EXPECT_NEAR(delta, 0.2914567944778671, 1e-3);
}

TEST(PurePursuit, ClampsToLimit) {
  const Path path({{0, 0}, {100, 0}});
  EXPECT_DOUBLE_EQ(pure_pursuit({10, 0.5, 0, 10}, path, 1.0, 3.0, 0.3), -0.3);
  EXPECT_DOUBLE_EQ(pure_pursuit({10, -0.5, 0, 10}, path, 1.0, 3.0, 0.3), 0.3);
}

TEST(PurePursuit, ArcLengthQueriesExtrapolate) {
  const Path path({{0, 0}, {10, 0}});
  EXPECT_DOUBLE_EQ(path.length(), 10.0);
  EXPECT_DOUBLE_EQ(path.point_at(15)(0), 15.0);
  EXPECT_DOUBLE_EQ(path.point_at(-5)(0), -5.0);
  EXPECT_DOUBLE_EQ(path.project({4, 3}), 4.0);
  EXPECT_THROW(Path({{0, 0}}), InvalidInput);
}

TEST(SpeedControl, PiLaw) {
  const PiGains gains;
  const auto [a, integral] = pi_speed_control(9.0, 10.0, 0.0, 0.05, gains);
  EXPECT_DOUBLE_EQ(a, 3.0);
  EXPECT_DOUBLE_EQ(integral, 0.05);
  const auto [a2, i2] = pi_speed_control(10.0, 10.0, 2.0, 0.05, gains);
  EXPECT_DOUBLE_EQ(a2, 0.2);
  EXPECT_DOUBLE_EQ(i2, 2.0);
}

TEST(Measurements, NoiseStatisticsOfPositionRsu) {
  const auto rsu = testing::sensor("RSU5", testing::rows_of({{1, 0, 0, 0}, {0, 1, 0, 0}}),
                                   0.01 * Matrix::Identity(2, 2), 2.0);
  const VehicleState truth{5, -3, 0.2, 10};
  std::mt19937_64 rng(77);
  constexpr int kDraws = 100'000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < kDraws; ++i) {
    const Eigen::Vector2d e = synthesize_measurements(truth, {rsu}, rng)[0] - Eigen::Vector2d(5, -3);
    mean += e;
    cov += e * e.transpose();
  }
  mean /= kDraws;
  cov /= kDraws;
  EXPECT_LT(mean.norm(), 0.002);
  EXPECT_NEAR(cov(0, 0), 0.01, 0.0005);
  EXPECT_NEAR(cov(1, 1), 0.01, 0.0005);
  EXPECT_NEAR(cov(0, 1), 0.0, 0.0005);
}

TEST(Measurements, PsdSqrtOfSingularMatrix) {
  Matrix m(2, 2);
  m << 1, 1, 1, 1;
  const Matrix s = psd_sqrt(m);
  EXPECT_LE((s * s.transpose() - m).cwiseAbs().maxCoeff(), 1e-12);
}

ScenarioConfig corridor_config() {
  return load_config(SENSEL_SOURCE_DIR "/scenarios/rsu_corridor.json");
}

TEST(Scenario, ZeroHorizonProducesNothing) {
  auto cfg = corridor_config();
  cfg.horizon = 0;
  EXPECT_TRUE(run_scenario(cfg, Mode::kGreedy).empty());
}

TEST(Scenario, NoiselessRunTracksExactly) {
  auto cfg = corridor_config();
  cfg.horizon = 100;
  cfg.process_noise.setZero();
  cfg.sample_initial_error = false;
  for (auto& s : cfg.onboard) s.noise_cov *= 1e-10;
  const auto records = run_scenario(cfg, Mode::kOnboard);
  for (const auto& rec : records) {
    EXPECT_LT(rec.abs_error.maxCoeff(), 1e-3) << rec.t;
  }
}

TEST(Scenario, RecordsAreTimedAndLevelled) {
  const auto records = run_scenario(corridor_config(), Mode::kGreedy);
  ASSERT_EQ(records.size(), 400u);
  EXPECT_DOUBLE_EQ(records[0].t, 0.05);
  EXPECT_TRUE(records[0].transient);
  EXPECT_FALSE(records[10].transient);
  EXPECT_EQ(records[128].level, 1);  // t = 6.45
  EXPECT_EQ(records[129].level, 3);  // t = 6.50
  EXPECT_EQ(records[289].level, 2);  // t = 14.50
}

TEST(Scenario, RepeatedRunsAreBitIdentical) {
  const auto cfg = corridor_config();
  const auto a = run_scenario(cfg, Mode::kGreedy);
  const auto b = run_scenario(cfg, Mode::kGreedy);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(identical(a[k].estimate, b[k].estimate));
    EXPECT_EQ(a[k].truth, b[k].truth);
    EXPECT_EQ(a[k].selected_ids, b[k].selected_ids);
  }
}

TEST(Scenario, TruthIsolatedFromEstimatorWhenControllingOnTruth) {
  auto cfg = corridor_config();
  cfg.control_from_truth = true;
  const auto onboard = run_scenario(cfg, Mode::kOnboard);
  const auto greedy = run_scenario(cfg, Mode::kGreedy);
  for (std::size_t k = 0; k < onboard.size(); ++k) EXPECT_EQ(onboard[k].truth, greedy[k].truth);
}

TEST(Scenario, SeedChangesNoise) {
  auto cfg = corridor_config();
  cfg.horizon = 20;
  const auto a = run_scenario(cfg, Mode::kOnboard);
  cfg.seed += 1;
  const auto b = run_scenario(cfg, Mode::kOnboard);
  EXPECT_FALSE(a.back().truth == b.back().truth);
}

}  // namespace
}  // namespace sensel::sim
