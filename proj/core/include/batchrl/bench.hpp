#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "batchrl/engine.hpp"

namespace batchrl {

enum class Pipeline { InPlace, Copy };
const char* to_string(Pipeline p) noexcept;

struct ThroughputRow {
  std::string env;
  std::size_t num_envs = 0;
  std::size_t lanes = 1;
  Pipeline pipeline = Pipeline::InPlace;
  std::size_t steps = 0;  // per replica
  double wall_s = 0;
  double steps_per_s = 0;  // num_envs * steps / wall_s
  PhaseTimes times;
  std::uint64_t checksum = 0;  // rollout buffer after the run
};

struct ThroughputReport {
  std::string env;
  std::size_t cores = 1;
  std::size_t lanes = 1;
  std::vector<ThroughputRow> rows;
};

struct BenchOptions {
  std::size_t steps = 1000;
  std::size_t warmup = 32;  // excluded from timing; at least one rollout horizon
  std::size_t horizon = 32;  // rollout buffer length; logging wraps around it
  /// Timed blocks of `steps` run back to back; the fastest one is reported.
  std::size_t repeats = 1;
  std::size_t lanes = 1;
  std::size_t num_agents = 1;
  std::size_t episode_length = 500;
  EnvParams params;
  std::uint64_t seed = 0;
  std::size_t memory_cap_bytes = std::size_t{2} << 30;
  /// Actions from this policy instead of uniform random ones.
  const Policy* policy = nullptr;
};

/// Bytes a batch of `num_envs` replicas would occupy (store plus rollout
/// buffer), extrapolated from a one-replica probe.
std::size_t estimate_batch_bytes(const std::string& env, std::size_t num_envs, const BenchOptions& options);

/// In-place throughput for each E: act, log, step, log, auto-reset with all
/// data resident in the store. transfer_s is zero by construction. Throws
/// OutOfMemoryBudget before allocating an E that would exceed the cap.
ThroughputReport measure_throughput(const std::string& env, const std::vector<std::size_t>& num_envs,
                                    const BenchOptions& options);

/// Same computation, but every step ships observations to a staging region
/// and back, and actions and step outcomes likewise, the way separate rollout
/// workers and a trainer would exchange them. Trajectories are unchanged.
ThroughputRow baseline_copy_pipeline(const std::string& env, std::size_t num_envs, const BenchOptions& options);

/// Throws OutOfMemoryBudget when `num_envs` replicas would exceed the cap.
void check_budget(const std::string& env, std::size_t num_envs, const BenchOptions& options);

/// Both pipelines timed on one batch, alternating blocks with staging off and
/// on, so memory layout and drift in machine load hit both alike. Checksums
/// come from a separate pure run of each pipeline. Returns {in_place, copy}.
std::pair<ThroughputRow, ThroughputRow> measure_pair(const std::string& env, std::size_t num_envs,
                                                     const BenchOptions& options);

/// One measurement of either pipeline.
ThroughputRow run_pipeline(const std::string& env, std::size_t num_envs, const BenchOptions& options,
                           Pipeline pipeline);

struct ScalingFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  std::size_t points = 0;
  std::size_t knee_envs = 0;  // first E past the knee, 0 if none
};

struct ScalingOptions {
  /// Fractional drop of per-replica throughput from its running peak that
  /// marks saturation; the fit stops before it. nullopt fits every point.
  std::optional<double> knee_drop = 0.15;
  std::size_t min_points = 4;
};

/// OLS of log(steps/s) against log(E) over the in-place rows before the knee.
/// Throws InsufficientPoints.
ScalingFit fit_scaling(const ThroughputReport& report, const ScalingOptions& options = {});

/// in-place steps/s over copy steps/s, per E present in both pipelines.
std::vector<std::pair<std::size_t, double>> speedup_ratios(const ThroughputReport& report);

/// env,E,W,steps_per_s,inference_s,step_s,reset_s,train_s,transfer_s,pipeline
void write_report_csv(std::ostream& out, const ThroughputReport& report);

/// Log-log chart of steps/s against E, one series per pipeline, plus the fit.
void write_scaling_svg(std::ostream& out, const ThroughputReport& report, const std::optional<ScalingFit>& fit);

}  // namespace batchrl
