#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "batchrl/bench.hpp"

using namespace batchrl;

namespace {

ThroughputReport synthetic(const std::vector<std::size_t>& es, double (*rate)(double)) {
  ThroughputReport r;
  r.env = "synthetic";
  for (std::size_t e : es) {
    ThroughputRow row;
    row.env = r.env;
    row.num_envs = e;
    row.steps_per_s = rate(static_cast<double>(e));
    r.rows.push_back(row);
  }
  return r;
}

BenchOptions quick(std::size_t steps = 1000) {
  BenchOptions o;
  o.steps = steps;
  o.warmup = 32;
  o.seed = 5;
  return o;
}

// The copy costs under 2% here, less than the spread of one paired
// measurement (an in-place vs in-place comparison scatters by about 3%), so
// speed checks use the geometric mean over fifteen pairs.
double mean_ratio(const std::string& env, std::size_t num_envs) {
  auto o = quick(300);
  o.repeats = 4;
  double log_sum = 0;
  for (int i = 0; i < 15; ++i) {
    const auto [in_place, copy] = measure_pair(env, num_envs, o);
    log_sum += std::log(in_place.steps_per_s / copy.steps_per_s);
  }
  return std::exp(log_sum / 15);
}

}  // namespace

TEST(Throughput, DummySmoke) {
  const auto rep = measure_throughput("dummy", {1}, quick());
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto& row = rep.rows[0];
  EXPECT_GT(row.steps_per_s, 0.0);
  EXPECT_EQ(row.times.transfer_s, 0.0);
  EXPECT_EQ(row.pipeline, Pipeline::InPlace);
  EXPECT_NEAR(row.steps_per_s, static_cast<double>(row.num_envs * row.steps) / row.wall_s, 1e-9 * row.steps_per_s);
}

TEST(Throughput, PhaseTimesCoverTheWallClock) {
  const auto rep = measure_throughput("cartpole", {64, 512}, quick());
  for (const auto& row : rep.rows) {
    const double frac = row.times.total() / row.wall_s;
    EXPECT_GE(frac, 0.9) << row.num_envs;
    EXPECT_LE(frac, 1.0 + 1e-9) << row.num_envs;
  }
}

TEST(Throughput, RepeatedRunsAgreeWithinTwentyPercent) {
  std::vector<double> rates;
  for (int i = 0; i < 3; ++i) rates.push_back(measure_throughput("cartpole", {256}, quick()).rows[0].steps_per_s);
  double mean = 0;
  for (double r : rates) mean += r / 3;
  for (double r : rates) EXPECT_NEAR(r, mean, 0.2 * mean);
}

TEST(Throughput, MemoryCapIsCheckedUpFront) {
  auto o = quick();
  o.memory_cap_bytes = 1 << 16;
  try {
    measure_throughput("cartpole", {16, 100000}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfMemoryBudget);
  }
  EXPECT_GT(estimate_batch_bytes("cartpole", 2000, o), 2 * estimate_batch_bytes("cartpole", 1000, o) - 4096);
}

TEST(Throughput, SameSeedSameChecksum) {
  const auto a = measure_throughput("cartpole", {32}, quick(200));
  const auto b = measure_throughput("cartpole", {32}, quick(200));
  EXPECT_EQ(a.rows[0].checksum, b.rows[0].checksum);
}

TEST(CopyBaseline, SlowerWithTransferAndSameTrajectories) {
  const auto o = quick();
  const auto in_place = run_pipeline("dummy", 256, o, Pipeline::InPlace);
  const auto copy = baseline_copy_pipeline("dummy", 256, o);
  EXPECT_EQ(copy.pipeline, Pipeline::Copy);
  EXPECT_GT(copy.times.transfer_s, 0.0);
  EXPECT_EQ(copy.checksum, in_place.checksum);
  // Speed is compared on one batch; separate batches differ by more than the copy costs.
  EXPECT_GT(mean_ratio("dummy", 256), 1.0);
}

TEST(CopyBaseline, ChecksumsMatchOnRealDynamics) {
  for (const char* env : {"cartpole", "acrobot", "surface"}) {
    const auto o = quick(300);
    EXPECT_EQ(run_pipeline(env, 48, o, Pipeline::InPlace).checksum, baseline_copy_pipeline(env, 48, o).checksum)
        << env;
  }
}

TEST(CopyBaseline, RatiosPerEnvCount) {
  ThroughputReport rep;
  rep.env = "dummy";
  for (std::size_t e : {16, 128}) {
    const auto [in_place, copy] = measure_pair("dummy", e, quick(100));
    rep.rows.push_back(in_place);
    rep.rows.push_back(copy);
  }
  const auto ratios = speedup_ratios(rep);
  ASSERT_EQ(ratios.size(), 2u);
  EXPECT_EQ(ratios[0].first, 16u);
  EXPECT_EQ(ratios[1].first, 128u);
  for (const auto& [e, r] : ratios) EXPECT_NEAR(r, rep.rows[e == 16 ? 0 : 2].steps_per_s / rep.rows[e == 16 ? 1 : 3].steps_per_s, 1e-12);
  for (std::size_t e : {16, 128}) EXPECT_GE(mean_ratio("dummy", e), 1.0) << e;
}

TEST(FitScaling, ExactLinearity) {
  const auto rep = synthetic({16, 64, 256, 1024, 4096}, [](double e) { return 1000 * e; });
  const auto fit = fit_scaling(rep);
  EXPECT_NEAR(fit.slope, 1.0, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  EXPECT_NEAR(std::exp(fit.intercept), 1000.0, 1e-6);
  EXPECT_EQ(fit.points, 5u);
  EXPECT_EQ(fit.knee_envs, 0u);
}

TEST(FitScaling, ConstantThroughputHasZeroSlope) {
  const auto rep = synthetic({16, 64, 256, 1024}, [](double) { return 5e5; });
  ScalingOptions o;
  o.knee_drop.reset();  // with knee detection every point past the first is saturated
  const auto fit = fit_scaling(rep, o);
  EXPECT_NEAR(fit.slope, 0.0, 1e-12);
  EXPECT_THROW(fit_scaling(rep), Error);
}

TEST(FitScaling, StopsAtTheKnee) {
  // Linear to 256, then flat: per-env throughput drops 75% at 1024.
  const auto rep = synthetic({4, 16, 64, 256, 1024, 4096}, [](double e) { return 100 * std::min(e, 256.0); });
  const auto fit = fit_scaling(rep);
  EXPECT_EQ(fit.knee_envs, 1024u);
  EXPECT_EQ(fit.points, 4u);
  EXPECT_NEAR(fit.slope, 1.0, 1e-12);
}

TEST(FitScaling, KneeIsMeasuredFromThePeak) {
  // Per-env throughput falls 5% per doubling; the cumulative drop passes 15% at E=16.
  const auto rep = synthetic({1, 2, 4, 8, 16}, [](double e) { return e * std::pow(0.95, std::log2(e)); });
  const auto fit = fit_scaling(rep);
  EXPECT_EQ(fit.knee_envs, 16u);
  EXPECT_EQ(fit.points, 4u);
}

TEST(FitScaling, TooFewPoints) {
  const auto rep = synthetic({16, 64, 256}, [](double e) { return e; });
  try {
    fit_scaling(rep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
}

TEST(FitScaling, IgnoresCopyRows) {
  auto rep = synthetic({1, 2, 4, 8}, [](double e) { return 10 * e; });
  auto copy = rep.rows[0];
  copy.pipeline = Pipeline::Copy;
  copy.steps_per_s = 1;
  rep.rows.push_back(copy);
  EXPECT_NEAR(fit_scaling(rep).slope, 1.0, 1e-12);
}

TEST(Report, CsvAndSvg) {
  const auto rep = measure_throughput("dummy", {1, 2, 4, 8}, quick(100));
  std::ostringstream csv;
  write_report_csv(csv, rep);
  const std::string s = csv.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "env,E,W,steps_per_s,inference_s,step_s,reset_s,train_s,transfer_s,pipeline");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
  EXPECT_NE(s.find("\ndummy,8,1,"), std::string::npos);

  std::ostringstream svg;
  write_scaling_svg(svg, rep, fit_scaling(rep, {std::nullopt, 4}));
  EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
}

TEST(CopyBaseline, PairedMeasurement) {
  auto o = quick(300);
  o.repeats = 6;
  const auto [in_place, copy] = measure_pair("dummy", 256, o);
  EXPECT_EQ(in_place.pipeline, Pipeline::InPlace);
  EXPECT_EQ(copy.pipeline, Pipeline::Copy);
  EXPECT_EQ(in_place.times.transfer_s, 0.0);
  EXPECT_GT(copy.times.transfer_s, 0.0);
  // Checksums are those of one pure block of each pipeline.
  EXPECT_EQ(in_place.checksum, copy.checksum);
  auto once = o;
  once.repeats = 1;
  EXPECT_EQ(in_place.checksum, run_pipeline("dummy", 256, once, Pipeline::InPlace).checksum);
}
