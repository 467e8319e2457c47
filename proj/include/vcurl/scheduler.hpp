#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vcurl/grid.hpp"
#include "vcurl/random.hpp"

namespace vcurl {

enum class Expansion { manhattan, manhattan_plus_diagonal };
enum class RevisitMode { structured, random };

std::string to_string(Expansion e);
std::string to_string(RevisitMode m);
Expansion parse_expansion(const std::string& name);
RevisitMode parse_revisit_mode(const std::string& name);

struct SchedulerConfig {
  double gamma = 0.9;         // LCS decay
  double threshold = 0.5;     // expansion gate, strict >
  double revisit_prob = 0.1;  // rho
  int batch_size = 16;
  std::uint64_t seed = 0;
  Expansion expansion = Expansion::manhattan;
  RevisitMode revisit = RevisitMode::structured;
  // When false a bucket that triggers expansion stays sampleable.
  bool retire_on_expand = true;

  /// Throws ConfigInvalid.
  void validate() const;
};

struct BatchPlan {
  BucketIndex bucket;
  std::vector<std::size_t> samples;  // indices into CurriculumGrid::samples()
  std::vector<std::string> sample_ids;
  bool is_revisit = false;
};

enum class EventKind { batch, revisit, lcs, expand, master };

std::string to_string(EventKind k);

/// One line of the scheduler event log.
///   batch/revisit: bucket drawn at `step`.
///   lcs:    update_lcs applied `reward`, leaving the bucket at `lcs`.
///   expand: `bucket` joined the wavefront because of `from` (reason
///           "start" for the initial (0,0), "lcs" or "empty" otherwise).
///   master: `bucket` left the frontier, reason "lcs" (with its `lcs`) or
///           "empty" (no samples, passed through).
struct SchedulerEvent {
  std::int64_t step = 0;
  EventKind kind = EventKind::batch;
  BucketIndex bucket;
  std::optional<BucketIndex> from;
  std::optional<double> reward;
  std::optional<double> lcs;
  std::string reason;

  friend bool operator==(const SchedulerEvent&, const SchedulerEvent&) = default;
};

std::string event_to_json(const SchedulerEvent& e);
SchedulerEvent event_from_json(const std::string& line);

/// Diagonal wavefront state machine over a fixed grid. Single writer.
class WavefrontScheduler {
 public:
  static constexpr const char* kSnapshotVersion = "vcurl-scheduler/1";

  /// Throws EmptyStartBucket when (0,0) holds no samples.
  WavefrontScheduler(const CurriculumGrid& grid, const SchedulerConfig& cfg);

  /// lcs <- gamma lcs + (1 - gamma) mean_reward. Throws InactiveBucket.
  void update_lcs(BucketIndex b, double mean_reward);

  /// Applies the expansion rule to every bucket of the current frontier
  /// whose LCS exceeds the threshold; newly added buckets are not
  /// re-examined in the same call. Returns the number of buckets mastered.
  int maybe_expand();

  /// Throws Exhausted when nothing is left to sample.
  BatchPlan next_batch(const CurriculumGrid& grid);

  bool exhausted() const noexcept { return active_.empty(); }
  const std::set<BucketIndex>& active() const noexcept { return active_; }
  const std::set<BucketIndex>& mastered() const noexcept { return mastered_; }
  double lcs(BucketIndex b) const { return lcs_.at(flat(b)); }
  const std::vector<double>& lcs_table() const noexcept { return lcs_; }
  std::int64_t step() const noexcept { return step_; }
  int k() const noexcept { return k_; }
  const SchedulerConfig& config() const noexcept { return cfg_; }
  /// Basis bucket the next structured revisit tries first.
  BucketIndex revisit_cursor() const noexcept;

  const std::vector<SchedulerEvent>& events() const noexcept { return events_; }
  void clear_events() { events_.clear(); }

  /// Single JSON document; the event log is not part of the snapshot.
  std::string snapshot() const;
  /// Throws CorruptSnapshot, including when the grid does not match.
  static WavefrontScheduler restore(const std::string& text, const CurriculumGrid& grid);

 private:
  WavefrontScheduler() = default;
  std::size_t flat(BucketIndex b) const noexcept { return static_cast<std::size_t>(b.i * k_ + b.j); }
  void add_bucket(BucketIndex b, std::optional<BucketIndex> from, const std::string& reason);
  std::optional<BucketIndex> pick_revisit();
  void emit(SchedulerEvent e) { events_.push_back(std::move(e)); }

  int k_ = 0;
  SchedulerConfig cfg_;
  std::vector<std::size_t> population_;
  std::set<BucketIndex> active_;
  std::set<BucketIndex> mastered_;
  std::vector<double> lcs_;
  std::int64_t step_ = 0;
  int cursor_ = 0;  // 0: perceptual basis (K-1, 0) first, 1: reasoning basis (0, K-1)
  Rng rng_;
  std::vector<SchedulerEvent> events_;
};

struct TraceCheckConfig {
  int k = 4;
  double gamma = 0.9;
  double threshold = 0.5;
  Expansion expansion = Expansion::manhattan;
  RevisitMode revisit = RevisitMode::structured;
  bool retire_on_expand = true;
};

struct TraceViolation {
  std::size_t event_index = 0;
  std::string message;
};

/// Replays an event log from scratch (recomputing every LCS from the logged
/// rewards) and reports each event inconsistent with the wavefront rules:
/// start at (0,0), gated expansion from a predecessor, monotone frontier,
/// revisits only to mastered basis buckets.
std::vector<TraceViolation> check_trace(const std::vector<SchedulerEvent>& events,
                                        const TraceCheckConfig& cfg);

}  // namespace vcurl
