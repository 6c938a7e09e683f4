#include "batchrl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

namespace batchrl {

const char* to_string(Pipeline p) noexcept { return p == Pipeline::InPlace ? "in_place" : "copy"; }

namespace {

using clock_type = std::chrono::steady_clock;

double between(clock_type::time_point a, clock_type::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

EnvBatchConfig batch_config(const std::string& env, std::size_t num_envs, const BenchOptions& o) {
  EnvBatchConfig c;
  c.env_name = env;
  c.num_envs = num_envs;
  c.num_agents = o.num_agents;
  c.episode_length = o.episode_length;
  c.params = o.params;
  c.seed = o.seed;
  return c;
}

/// Message-passing stand-in: arrays are serialized (id, length, bytes) into a
/// staging region, then parsed back out into the store.
class Staging {
 public:
  Staging(TensorStore& store, std::vector<ArrayId> ids) : store_(&store), ids_(std::move(ids)) {
    std::size_t bytes = 0;
    for (auto id : ids_) bytes += sizeof(std::uint32_t) + sizeof(std::uint64_t) + store.byte_size(id);
    region_.resize(bytes);
  }

  void ship() {
    std::byte* out = region_.data();
    for (auto id : ids_) {
      const std::uint64_t n = store_->byte_size(id);
      std::memcpy(out, &id.index, sizeof id.index);
      out += sizeof id.index;
      std::memcpy(out, &n, sizeof n);
      out += sizeof n;
      std::memcpy(out, store_->raw(id), n);
      out += n;
    }
    const std::byte* in = region_.data();
    const std::byte* end = out;
    while (in < end) {
      ArrayId id;
      std::uint64_t n = 0;
      std::memcpy(&id.index, in, sizeof id.index);
      in += sizeof id.index;
      std::memcpy(&n, in, sizeof n);
      in += sizeof n;
      std::memcpy(store_->bytes(id).data(), in, n);
      in += n;
    }
  }

 private:
  TensorStore* store_;
  std::vector<ArrayId> ids_;
  std::vector<std::byte> region_;
};

}  // namespace

std::size_t estimate_batch_bytes(const std::string& env, std::size_t num_envs, const BenchOptions& options) {
  TensorStore probe;
  EnvBatch batch(batch_config(env, 1, options), probe);
  probe.finalize();
  RolloutBuffer buffer(probe, std::max<std::size_t>(options.horizon, 1));
  const std::size_t shared = batch.base_params_bytes();
  return (probe.total_bytes() + buffer.total_bytes()) * num_envs + shared;
}

void check_budget(const std::string& env, std::size_t num_envs, const BenchOptions& options) {
  const std::size_t need = estimate_batch_bytes(env, num_envs, options);
  if (need > options.memory_cap_bytes)
    throw Error(ErrorCode::OutOfMemoryBudget, "E=" + std::to_string(num_envs) + " needs ~" + std::to_string(need) +
                                                  " bytes, cap is " + std::to_string(options.memory_cap_bytes));
}

namespace {

/// One batch that can be stepped either way: with staging off (in place) or
/// on (copy). Warm up once, then timed blocks of `steps` steps that continue
/// the same trajectory; each pipeline keeps its fastest block.
class PipelineRun {
 public:
  PipelineRun(const std::string& env, std::size_t num_envs, const BenchOptions& options, bool with_staging)
      : env_(env),
        options_(options),
        batch_(batch_config(env, num_envs, options), store_),
        pool_(std::max<std::size_t>(options.lanes, 1)) {
    store_.finalize();
    buffer_.emplace(store_, options.horizon);
    if (options.policy != nullptr) learned_.emplace(*options.policy);
    sampler_ = learned_ ? static_cast<ActionSampler*>(&*learned_) : &random_;
    ranges_ = batch_.lane_ranges(pool_.lanes());
    sampler_->prepare(batch_, ranges_);
    if (with_staging) {
      const auto id = [&](std::string_view n) { return store_.find(n); };
      to_trainer_obs_.emplace(store_, std::vector<ArrayId>{id(names::kObservations)});
      to_workers_.emplace(store_,
                          std::vector<ArrayId>{id(names::kActions), id(names::kLogProbs), id(names::kValues)});
      to_trainer_out_.emplace(store_, std::vector<ArrayId>{id(names::kRewards), id(names::kDones),
                                                           id(names::kTruncated), id(names::kTerminalValues)});
    }
    PhaseTimes discard;
    for (std::size_t i = 0; i < options.warmup; ++i) step(discard, with_staging);
  }

  /// Time one block of `pipeline`.
  void block(Pipeline pipeline) {
    const bool copy = pipeline == Pipeline::Copy;
    if (copy && !to_trainer_obs_) throw Error(ErrorCode::InvalidParams, "copy block on a run without staging");
    PhaseTimes times;
    const auto start = clock_type::now();
    for (std::size_t i = 0; i < options_.steps; ++i) step(times, copy);
    const double w = between(start, clock_type::now());
    auto& best = best_[copy];
    if (w < best.wall) best = {w, times};
  }

  ThroughputRow row(Pipeline pipeline) const {
    const auto& best = best_[pipeline == Pipeline::Copy];
    ThroughputRow r;
    r.env = env_;
    r.num_envs = batch_.num_envs();
    r.lanes = pool_.lanes();
    r.pipeline = pipeline;
    r.steps = options_.steps;
    r.wall_s = std::isfinite(best.wall) ? best.wall : 0.0;
    r.steps_per_s = r.wall_s > 0 ? static_cast<double>(r.num_envs * options_.steps) / r.wall_s : 0.0;
    r.times = best.times;
    r.checksum = buffer_->checksum();
    return r;
  }

 private:
  void step(PhaseTimes& acc, bool copy) {
    const auto c0 = clock_type::now();
    if (copy) to_trainer_obs_->ship();
    const auto c1 = clock_type::now();
    pool_.run([&](std::size_t lane) { sampler_->act(batch_, ranges_[lane], lane); });
    const auto c2 = clock_type::now();
    if (copy) to_workers_->ship();
    const auto c3 = clock_type::now();
    log_step(store_, *buffer_, t_, LogPoint::BeforeStep);
    pool_.run([&](std::size_t lane) { batch_.step_range(ranges_[lane], lane, sampler_); });
    const auto c4 = clock_type::now();
    if (copy) to_trainer_out_->ship();
    const auto c5 = clock_type::now();
    log_step(store_, *buffer_, t_, LogPoint::AfterStep);
    const auto c6 = clock_type::now();
    pool_.run([&](std::size_t lane) { batch_.reset_range(ranges_[lane]); });
    const auto c7 = clock_type::now();
    // In place there is nothing between c0/c1, c2/c3 and c4/c5 to time, so
    // those gaps go to the neighbouring phases instead of to transfer.
    if (copy) {
      acc.transfer_s += between(c0, c1) + between(c2, c3) + between(c4, c5);
      acc.inference_s += between(c1, c2);
      acc.step_s += between(c3, c4) + between(c5, c6);
    } else {
      acc.inference_s += between(c0, c2);
      acc.step_s += between(c2, c6);
    }
    acc.reset_s += between(c6, c7);
    t_ = (t_ + 1) % buffer_->horizon();
  }

  struct Best {
    double wall = std::numeric_limits<double>::infinity();
    PhaseTimes times;
  };

  std::string env_;
  BenchOptions options_;
  TensorStore store_;
  EnvBatch batch_;
  std::optional<RolloutBuffer> buffer_;
  LanePool pool_;
  RandomSampler random_;
  std::optional<PolicySampler> learned_;
  ActionSampler* sampler_ = nullptr;
  std::span<const LaneRange> ranges_;
  std::optional<Staging> to_trainer_obs_, to_workers_, to_trainer_out_;
  std::size_t t_ = 0;
  Best best_[2];  // in place, copy
};

void check_options(std::size_t num_envs, const BenchOptions& options) {
  if (num_envs == 0) throw Error(ErrorCode::InvalidParams, "num_envs must be >= 1");
  if (options.horizon == 0) throw Error(ErrorCode::InvalidParams, "horizon must be >= 1");
}

}  // namespace

ThroughputRow run_pipeline(const std::string& env, std::size_t num_envs, const BenchOptions& options,
                           Pipeline pipeline) {
  check_options(num_envs, options);
  check_budget(env, num_envs, options);
  PipelineRun run(env, num_envs, options, pipeline == Pipeline::Copy);
  for (std::size_t r = 0; r < std::max<std::size_t>(options.repeats, 1); ++r) run.block(pipeline);
  return run.row(pipeline);
}

std::pair<ThroughputRow, ThroughputRow> measure_pair(const std::string& env, std::size_t num_envs,
                                                     const BenchOptions& options) {
  check_options(num_envs, options);
  check_budget(env, num_envs, options);
  std::pair<ThroughputRow, ThroughputRow> rows;
  {
    PipelineRun shared(env, num_envs, options, true);
    for (std::size_t r = 0; r < std::max<std::size_t>(options.repeats, 1); ++r) {
      // ABBA order: neither pipeline always runs second.
      shared.block(r % 2 == 0 ? Pipeline::InPlace : Pipeline::Copy);
      shared.block(r % 2 == 0 ? Pipeline::Copy : Pipeline::InPlace);
    }
    rows = {shared.row(Pipeline::InPlace), shared.row(Pipeline::Copy)};
  }
  // The shared batch mixes both pipelines, so checksums come from a pure
  // untimed run of each.
  auto once = options;
  once.repeats = 1;
  for (auto* row : {&rows.first, &rows.second}) {
    PipelineRun pure(env, num_envs, once, row->pipeline == Pipeline::Copy);
    pure.block(row->pipeline);
    row->checksum = pure.row(row->pipeline).checksum;
  }
  return rows;
}

ThroughputReport measure_throughput(const std::string& env, const std::vector<std::size_t>& num_envs,
                                    const BenchOptions& options) {
  ThroughputReport report;
  report.env = env;
  report.cores = std::max(1u, std::thread::hardware_concurrency());
  report.lanes = std::max<std::size_t>(options.lanes, 1);
  // Check every E against the cap before spending time on any of them.
  for (std::size_t e : num_envs) check_budget(env, e, options);
  for (std::size_t e : num_envs) report.rows.push_back(run_pipeline(env, e, options, Pipeline::InPlace));
  return report;
}

ThroughputRow baseline_copy_pipeline(const std::string& env, std::size_t num_envs, const BenchOptions& options) {
  return run_pipeline(env, num_envs, options, Pipeline::Copy);
}

ScalingFit fit_scaling(const ThroughputReport& report, const ScalingOptions& options) {
  std::vector<const ThroughputRow*> rows;
  for (const auto& r : report.rows)
    if (r.pipeline == Pipeline::InPlace) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->num_envs < b->num_envs; });

  ScalingFit fit;
  std::size_t used = rows.size();
  if (options.knee_drop && !rows.empty()) {
    double peak = rows[0]->steps_per_s / static_cast<double>(rows[0]->num_envs);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double per_env = rows[i]->steps_per_s / static_cast<double>(rows[i]->num_envs);
      if (per_env < (1.0 - *options.knee_drop) * peak) {
        used = i;
        fit.knee_envs = rows[i]->num_envs;
        break;
      }
      peak = std::max(peak, per_env);
    }
  }
  if (used < std::max<std::size_t>(options.min_points, 2))
    throw Error(ErrorCode::InsufficientPoints, "scaling fit needs " + std::to_string(options.min_points) +
                                                   " pre-knee points, have " + std::to_string(used));

  double sx = 0, sy = 0;
  std::vector<double> xs(used), ys(used);
  for (std::size_t i = 0; i < used; ++i) {
    if (!(rows[i]->steps_per_s > 0))
      throw Error(ErrorCode::InvalidParams, "steps_per_s must be positive for a log-log fit");
    xs[i] = std::log(static_cast<double>(rows[i]->num_envs));
    ys[i] = std::log(rows[i]->steps_per_s);
    sx += xs[i];
    sy += ys[i];
  }
  const double n = static_cast<double>(used);
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < used; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw Error(ErrorCode::InsufficientPoints, "scaling fit needs distinct E values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < used; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  // A flat series is fitted exactly by slope 0.
  fit.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  fit.points = used;
  return fit;
}

std::vector<std::pair<std::size_t, double>> speedup_ratios(const ThroughputReport& report) {
  std::map<std::size_t, double> in_place, copy;
  for (const auto& r : report.rows) (r.pipeline == Pipeline::InPlace ? in_place : copy)[r.num_envs] = r.steps_per_s;
  std::vector<std::pair<std::size_t, double>> out;
  for (auto [e, sps] : in_place)
    if (auto it = copy.find(e); it != copy.end() && it->second > 0) out.emplace_back(e, sps / it->second);
  return out;
}

void write_report_csv(std::ostream& out, const ThroughputReport& report) {
  out << "env,E,W,steps_per_s,inference_s,step_s,reset_s,train_s,transfer_s,pipeline\n";
  const auto old = out.precision(10);
  for (const auto& r : report.rows)
    out << r.env << ',' << r.num_envs << ',' << r.lanes << ',' << r.steps_per_s << ',' << r.times.inference_s << ','
        << r.times.step_s << ',' << r.times.reset_s << ',' << r.times.train_s << ',' << r.times.transfer_s << ','
        << to_string(r.pipeline) << '\n';
  out.precision(old);
}

void write_scaling_svg(std::ostream& out, const ThroughputReport& report, const std::optional<ScalingFit>& fit) {
  constexpr double width = 640, height = 420, left = 70, right = 20, top = 30, bottom = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& r : report.rows) {
    if (r.steps_per_s <= 0) continue;
    xmin = std::min(xmin, std::log10(static_cast<double>(r.num_envs)));
    xmax = std::max(xmax, std::log10(static_cast<double>(r.num_envs)));
    ymin = std::min(ymin, std::log10(r.steps_per_s));
    ymax = std::max(ymax, std::log10(r.steps_per_s));
  }
  if (!(xmin <= xmax)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return left + (lx - xmin) / (xmax - xmin) * (width - left - right); };
  auto py = [&](double ly) { return height - bottom - (ly - ymin) / (ymax - ymin) * (height - top - bottom); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"18\">" << report.env << " throughput, W=" << report.lanes << "</text>\n";
  for (double d = xmin; d <= xmax; d += 1) {
    out << "<line x1=\"" << px(d) << "\" y1=\"" << top << "\" x2=\"" << px(d) << "\" y2=\"" << height - bottom
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << px(d) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">1e" << d
        << "</text>\n";
  }
  for (double d = ymin; d <= ymax; d += 1) {
    out << "<line x1=\"" << left << "\" y1=\"" << py(d) << "\" x2=\"" << width - right << "\" y2=\"" << py(d)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">replicas E</text>\n";
  out << "<text x=\"16\" y=\"" << (top + height - bottom) / 2 << "\" transform=\"rotate(-90 16 "
      << (top + height - bottom) / 2 << ")\" text-anchor=\"middle\">env steps / s</text>\n";

  for (Pipeline p : {Pipeline::InPlace, Pipeline::Copy}) {
    const char* colour = p == Pipeline::InPlace ? "#1f77b4" : "#d62728";
    std::vector<const ThroughputRow*> rows;
    for (const auto& r : report.rows)
      if (r.pipeline == p && r.steps_per_s > 0) rows.push_back(&r);
    if (rows.empty()) continue;
    std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->num_envs < b->num_envs; });
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (auto* r : rows)
      out << px(std::log10(static_cast<double>(r->num_envs))) << ',' << py(std::log10(r->steps_per_s)) << ' ';
    out << "\"/>\n";
    for (auto* r : rows)
      out << "<circle cx=\"" << px(std::log10(static_cast<double>(r->num_envs))) << "\" cy=\""
          << py(std::log10(r->steps_per_s)) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    out << "<text x=\"" << width - right - 4 << "\" y=\"" << (p == Pipeline::InPlace ? top + 14 : top + 30)
        << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << to_string(p) << "</text>\n";
  }
  if (fit) {
    // Fit line over the fitted E range, converted from natural logs.
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : report.rows) {
      if (r.pipeline != Pipeline::InPlace) continue;
      if (fit->knee_envs != 0 && r.num_envs >= fit->knee_envs) continue;
      lo = std::min(lo, std::log10(static_cast<double>(r.num_envs)));
      hi = std::max(hi, std::log10(static_cast<double>(r.num_envs)));
    }
    if (lo <= hi) {
      const double ln10 = std::log(10.0);
      auto y = [&](double lx) { return (fit->intercept + fit->slope * lx * ln10) / ln10; };
      out << "<line x1=\"" << px(lo) << "\" y1=\"" << py(y(lo)) << "\" x2=\"" << px(hi) << "\" y2=\"" << py(y(hi))
          << "\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
    }
    out << "<text x=\"" << left + 8 << "\" y=\"" << top + 14 << "\">slope " << fit->slope << ", R2 " << fit->r2
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace batchrl
