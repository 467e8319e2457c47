#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcurl/grid.hpp"
#include "vcurl/random.hpp"
#include "vcurl/scheduler.hpp"

namespace vcurl {

/// Two-skill learner. Success on a sample is
///   sigma(a (c_v - d_v)) * sigma(a (c_t - d_t)).
/// After each batch every axis moves toward d + stretch at rate
/// eta * mean_reward (d: mean batch difficulty on that axis). An axis whose d
/// is under `exercise_floor` then also decays by forget_rate, never below
/// forget_floor.
struct LearnerParams {
  double slope = 10.0;
  double learn_rate = 0.3;
  double stretch = 0.2;
  double forget_rate = 0.005;
  double exercise_floor = 0.25;
  double forget_floor = 0.25;

  void validate() const;
};

struct Competence {
  double visual = 0.0;
  double text = 0.0;

  friend bool operator==(const Competence&, const Competence&) = default;
};

double success_prob(const LearnerParams& p, const Competence& c, double d_visual, double d_text);

struct StepOutcome {
  std::vector<double> rewards;  // 0/1 per sample
  double mean_reward = 0.0;
  double mean_d_visual = 0.0;
  double mean_d_text = 0.0;
};

/// Draws one Bernoulli reward per sample at the current competence, then
/// applies the update described on LearnerParams.
StepOutcome train_step(const LearnerParams& p, Competence& c, std::span<const std::size_t> samples,
                       const CurriculumGrid& grid, Rng& rng);

/// Expected success over every sample of the grid.
double expected_reward(const LearnerParams& p, const Competence& c, const CurriculumGrid& grid);
/// Expected success over one bucket (0 for an empty bucket).
double expected_reward(const LearnerParams& p, const Competence& c, const CurriculumGrid& grid,
                       BucketIndex b);

enum class Strategy { wavefront, random, scalar_length, scalar_generation_sim };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

struct ExperimentConfig {
  Strategy strategy = Strategy::wavefront;
  std::vector<std::uint64_t> seeds{0};
  int steps = 2000;
  SchedulerConfig scheduler;  // seed is replaced by each run's seed
  LearnerParams learner;
  double beta = 0.04;      // KL coefficient of the logged objective
  double clip_eps = 0.2;
  double reward_threshold = 0.8;  // grid-wide expected reward
  int window = 50;                // trailing steps averaged for the threshold
  // Keep drawing revisit batches after every bucket is mastered instead of
  // ending the run (has no effect when revisit_prob is 0).
  bool continue_after_exhaustion = false;
  Competence probe{0.5, 0.5};  // frozen learner ordering scalar_generation_sim

  void validate() const;
};

struct TraceRecord {
  std::int64_t step = 0;
  BucketIndex bucket;  // stage index in `bucket.i` for the scalar arms
  bool is_revisit = false;
  double mean_reward = 0.0;
  double beta_eff = 0.0;
  double objective = 0.0;
  Competence competence;
  double grid_reward = 0.0;
};

std::string trace_to_json(const TraceRecord& r);

struct RunMetrics {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::wavefront;
  std::int64_t steps_run = 0;
  std::optional<std::int64_t> steps_to_threshold;
  std::optional<std::int64_t> exhausted_at;
  double final_mean_reward = 0.0;
  // Mean over the two basis buckets of (peak - final) expected reward.
  double forgetting_gap = 0.0;
  Competence final_competence;
  std::vector<TraceRecord> trace;
  std::vector<SchedulerEvent> events;
};

/// One seeded run that can be advanced step by step and checkpointed.
class SimulationRun {
 public:
  static constexpr const char* kSnapshotVersion = "vcurl-simrun/1";

  SimulationRun(const CurriculumGrid& grid, const ExperimentConfig& cfg, std::uint64_t seed);

  /// Advances one step; false once the run is finished (budget spent or,
  /// for the wavefront, curriculum exhausted).
  bool step();
  void run_to_end();
  bool finished() const noexcept { return finished_; }
  std::int64_t steps_done() const noexcept { return steps_done_; }
  const Competence& competence() const noexcept { return competence_; }
  const WavefrontScheduler* scheduler() const noexcept { return scheduler_ ? &*scheduler_ : nullptr; }

  /// Metrics so far; the trace and events are moved out when `take` is set.
  RunMetrics metrics(bool take = false);

  /// Serializes everything needed to continue bit-identically (trace and
  /// event history excluded). Throws CorruptSnapshot on restore.
  std::string snapshot() const;
  static SimulationRun restore(const std::string& text, const CurriculumGrid& grid,
                               const ExperimentConfig& cfg);

 private:
  void init_stages();
  std::vector<std::size_t> sample_from(const std::vector<std::size_t>& pool);

  const CurriculumGrid* grid_;
  ExperimentConfig cfg_;
  std::uint64_t seed_;
  Rng rng_;
  Competence competence_;
  std::optional<WavefrontScheduler> scheduler_;
  std::vector<std::vector<std::size_t>> stages_;  // scalar arms
  std::size_t stage_ = 0;
  double stage_lcs_ = 0.0;
  std::vector<BucketIndex> nonempty_;  // random arm
  std::int64_t steps_done_ = 0;
  bool finished_ = false;
  std::vector<double> recent_;  // trailing grid rewards, at most `window`
  std::optional<std::int64_t> steps_to_threshold_;
  std::optional<std::int64_t> exhausted_at_;
  double basis_peak_[2] = {0.0, 0.0};
  std::vector<TraceRecord> trace_;
  std::vector<SchedulerEvent> events_;
};

/// One run per seed (in parallel across seeds); results in seed order.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, const CurriculumGrid& grid,
                                       int workers = 0);

/// Median of steps_to_threshold, counting a run that never reached the
/// threshold as steps + 1.
double median_steps_to_threshold(std::span<const RunMetrics> runs, int steps);

struct ScoredId {
  std::string id;
  double value = 0.0;
};

struct BinStat {
  double center = 0.0;  // mean score within the bin
  double accuracy = 0.0;
  std::size_t n = 0;
};

/// Equal-population quantile bins over score (ties broken by id) with the
/// mean outcome per bin. Throws IdMismatch, ConfigInvalid.
std::vector<BinStat> correlate(std::span<const ScoredId> scores, std::span<const ScoredId> outcomes,
                               int bins = 20);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

struct SweepRow {
  int k = 0;
  std::vector<RunMetrics> runs;
  std::size_t violations = 0;  // trace-check violations over all runs
};

/// Rebuilds the grid for each K and runs the same experiment on it.
/// Throws ConfigInvalid for K < 2 or repeated values.
std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, std::span<const VisualScore> visual,
                              std::span<const TextScore> text, std::span<const int> ks,
                              double alpha = 0.5, int workers = 0);

struct SyntheticCorpus {
  std::vector<VisualScore> visual;
  std::vector<TextScore> text;
};

/// Raw proxy scores with realistic marginals (log-normal motion, bounded
/// entropy, signed surprisal); ids are s00000, s00001, ...
SyntheticCorpus make_synthetic_corpus(std::size_t n, std::uint64_t seed);

}  // namespace vcurl
