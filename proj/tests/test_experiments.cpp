#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hef/experiments.hpp"

using namespace hef;

namespace {

SimConfig small_sim() {
  SimConfig c;
  c.grid = GridSpec(16, 16, 8, -0.5, 0.5, -0.5, 0.5);
  c.n_steps = 6;
  c.n_landmarks = 3;
  return c;
}

std::string fixture(const char* name) { return std::string(HEF_TEST_DATA) + "/" + name; }

}  // namespace

TEST(Simulator, NoiselessSquareLoopCloses) {
  SimConfig c = small_sim();
  c.steps_per_loop = 4;
  c.n_steps = 4;
  c.odom_sigma_trans = 0.0;
  c.odom_sigma_rot = 0.0;
  const Dataset d = simulate_range_world(c, 3);
  const Pose start(0.0, -c.radius, 0.0);
  Pose p = start;
  for (const auto& s : d.steps) {
    p = compose(p, s.u.as_pose());
    EXPECT_NEAR(p.x, s.gt.x, 1e-12);
    EXPECT_NEAR(p.y, s.gt.y, 1e-12);
    EXPECT_NEAR(std::hypot(s.gt.x, s.gt.y), c.radius, 1e-12);
  }
  EXPECT_NEAR(p.x, start.x, 1e-9);
  EXPECT_NEAR(p.y, start.y, 1e-9);
  EXPECT_NEAR(std::abs(angdiff(p.theta, start.theta)), 0.0, 1e-9);
}

TEST(Simulator, RoundRobinRangesAndLandmarkLine) {
  const SimConfig c = small_sim();
  const Dataset d = simulate_range_world(c, 0);
  ASSERT_EQ(d.map.landmarks.size(), 3u);
  EXPECT_DOUBLE_EQ(d.map.landmarks.front().x, -c.landmark_half_span);
  EXPECT_DOUBLE_EQ(d.map.landmarks.back().x, c.landmark_half_span);
  for (const auto& s : d.steps) {
    ASSERT_EQ(s.z.size(), 1u);
    EXPECT_EQ(*s.z[0].landmark_id, (s.t - 1) % 3);
    EXPECT_EQ(s.z[0].kind, MeasurementKind::Range);
  }
}

TEST(Simulator, DeterministicPerSeed) {
  const SimConfig c = small_sim();
  EXPECT_EQ(dataset_to_string(simulate_range_world(c, 11)), dataset_to_string(simulate_range_world(c, 11)));
  EXPECT_NE(dataset_to_string(simulate_range_world(c, 11)), dataset_to_string(simulate_range_world(c, 12)));
}

TEST(Simulator, RejectsBadConfig) {
  SimConfig c = small_sim();
  c.n_landmarks = 0;
  EXPECT_THROW(simulate_range_world(c, 0), std::invalid_argument);
  c = small_sim();
  c.radius = 0.6;
  EXPECT_THROW(simulate_range_world(c, 0), std::invalid_argument);
  EXPECT_THROW(sim_config_from_json({{"n_landmark", 3}}), std::invalid_argument);
}

TEST(Dataset, JsonLinesRoundTrip) {
  const Dataset d = simulate_range_world(small_sim(), 5);
  const std::string text = dataset_to_string(d);
  const Dataset e = dataset_from_string(text);
  EXPECT_EQ(dataset_to_string(e), text);
  ASSERT_EQ(e.steps.size(), d.steps.size());
  EXPECT_EQ(e.steps[2].z[0].value, d.steps[2].z[0].value);
  EXPECT_TRUE(e.grid == d.grid);
}

TEST(Dataset, TruncatedFileReportsLine) {
  const std::string text = dataset_to_string(simulate_range_world(small_sim(), 5));
  const std::string cut = text.substr(0, text.size() - 20);
  try {
    dataset_from_string(cut, "sim.jsonl");
    FAIL() << "truncated dataset accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("sim.jsonl:7"), std::string::npos) << e.what();
  }
}

TEST(Dataset, RejectsUnknownFieldsAndMissingHeader) {
  std::string text = dataset_to_string(simulate_range_world(small_sim(), 5));
  const auto pos = text.find("\"gt\"", text.find('\n'));
  std::string bad = text;
  bad.insert(pos, "\"extra\":1,");
  EXPECT_THROW(dataset_from_string(bad), std::invalid_argument);
  EXPECT_THROW(dataset_from_string(""), std::invalid_argument);
}

TEST(Dataset, GoldenFixture) {
  const Dataset d = load_dataset(fixture("golden_2step.jsonl"));
  EXPECT_TRUE(d.grid == GridSpec(16, 16, 8, -0.5, 0.5, -0.5, 0.5));
  ASSERT_EQ(d.steps.size(), 2u);
  ASSERT_EQ(d.map.landmarks.size(), 2u);
  EXPECT_DOUBLE_EQ(d.map.find(1).x, -0.5);
  EXPECT_DOUBLE_EQ(d.steps[0].z[0].value, 0.51);
  EXPECT_EQ(*d.steps[0].z[0].landmark_id, 0);
  EXPECT_EQ(d.steps[1].z[0].kind, MeasurementKind::Bearing);
  EXPECT_FALSE(d.steps[1].z[0].landmark_id.has_value());
  EXPECT_DOUBLE_EQ(d.steps[1].u.dtheta, std::numbers::pi / 2);
  EXPECT_EQ(d.meta.at("note"), "hand-written fixture");
  // region [−1, 1]² into [−0.5, 0.5]² with a 10% margin
  EXPECT_DOUBLE_EQ(d.transform().scale, 0.4);
}

TEST(MapTransform, RoundTripAndScaling) {
  const GridSpec g(20, 20, 8, -0.5, 0.5, -0.5, 0.5);
  const MapTransform mt = MapTransform::fit({2.0, 6.0, -1.0, 1.0}, g);
  EXPECT_DOUBLE_EQ(mt.scale, 0.8 * 0.25);
  const Pose p(3.3, 0.7, 2.0);
  const Pose q = mt.to_map(mt.to_grid(p));
  EXPECT_NEAR(q.x, p.x, 1e-12);
  EXPECT_NEAR(q.y, p.y, 1e-12);
  EXPECT_NEAR(q.theta, p.theta, 1e-12);
  const Pose c = mt.to_grid(Pose(4.0, 0.0, 0.0));
  EXPECT_NEAR(c.x, 0.0, 1e-15);
  Measurement z{MeasurementKind::Range, 1.0, 0, 0.1};
  EXPECT_DOUBLE_EQ(mt.to_grid(z).value, 0.2);
  EXPECT_DOUBLE_EQ(mt.to_grid(z).sigma, 0.02);
  z.kind = MeasurementKind::Bearing;
  EXPECT_DOUBLE_EQ(mt.to_grid(z).value, 1.0);
}

TEST(Prior, RectDensityUsesCellOverlap) {
  const GridSpec g(10, 10, 4, 0.0, 1.0, 0.0, 1.0);
  PriorSpec p;
  p.kind = PriorSpec::Kind::Rect;
  // cells are centred on 0.1k with half-width 0.05; [0.1, 0.3] covers half of cells 1 and 3
  p.rect = {0.1, 0.3, 0.1, 0.3, -0.1, 0.1};
  const DensityGrid d = p.density(g);
  EXPECT_NEAR(d.integral(), 1.0, 1e-12);
  EXPECT_NEAR(d.at(1, 2, 0) / d.at(2, 2, 0), 0.5, 1e-12);
  EXPECT_NEAR(d.at(2, 2, 1), 0.0, 1e-15);
}

TEST(Metrics, PerfectTrackGivesZeroAte) {
  const Dataset d = simulate_range_world(small_sim(), 1);
  std::vector<StepRecord> recs;
  for (const auto& s : d.steps) {
    StepRecord r;
    r.t = s.t;
    r.mode = r.mean = r.gt = s.gt;
    r.density_at_gt = 1.0 / d.grid.total_measure();
    recs.push_back(r);
  }
  const MetricsReport m = compute_metrics(recs, d);
  EXPECT_DOUBLE_EQ(m.ate_mode, 0.0);
  EXPECT_DOUBLE_EQ(m.ate_mean, 0.0);
  // uniform density on the unit box × S¹ is 1/(2π)
  EXPECT_NEAR(m.nll, std::log(2 * std::numbers::pi), 1e-12);
  recs.pop_back();
  EXPECT_THROW(compute_metrics(recs, d), std::invalid_argument);
}

TEST(Metrics, NllTermFloors) {
  EXPECT_NEAR(nll_term(0.0), -std::log(1e-12), 1e-9);
  EXPECT_NEAR(nll_term(1.0), 0.0, 1e-15);
}

TEST(Filters, ParseNames) {
  EXPECT_EQ(parse_filter("hef"), FilterKind::HEF);
  EXPECT_EQ(parse_filter("PF"), FilterKind::PF);
  EXPECT_STREQ(filter_name(FilterKind::HistF), "histf");
  EXPECT_THROW(parse_filter("ukf"), std::invalid_argument);
}

TEST(Runner, AllFiltersProduceNormalizedBeliefsAndDeterministicPf) {
  const Dataset d = simulate_range_world(small_sim(), 2);
  FilterParams p;
  p.n_particles = 2000;
  for (FilterKind k : {FilterKind::HEF, FilterKind::EKF, FilterKind::HistF, FilterKind::PF}) {
    int calls = 0;
    const RunResult r = run_filter(k, d, p, 9, nullptr, [&](int t, const DensityGrid& b) {
      EXPECT_EQ(t, calls++);
      EXPECT_NEAR(b.integral(), 1.0, 1e-6) << filter_name(k);
    });
    EXPECT_EQ(calls, 7);
    ASSERT_EQ(r.records.size(), d.steps.size());
    EXPECT_TRUE(std::isfinite(r.metrics.nll)) << filter_name(k);
    EXPECT_LT(r.metrics.ate_mean, 0.5) << filter_name(k);
  }
  const RunResult a = run_filter(FilterKind::PF, d, p, 4), b = run_filter(FilterKind::PF, d, p, 4);
  EXPECT_EQ(a.metrics.nll, b.metrics.nll);
  EXPECT_EQ(a.records.back().mean.x, b.records.back().mean.x);
}

TEST(Banana, ScenarioShape) {
  const Dataset d = banana_scenario(BananaConfig{});
  EXPECT_EQ(d.steps.size(), 5u);
  EXPECT_EQ(d.prior.kind, PriorSpec::Kind::Rect);
  EXPECT_NEAR(d.steps.back().gt.x, -0.35 + 0.5, 1e-12);
  BananaConfig far;
  far.n_steps = 20;
  EXPECT_THROW(banana_scenario(far), std::invalid_argument);
}
