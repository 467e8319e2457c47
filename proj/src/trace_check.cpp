#include <cmath>
#include <set>

#include "vcurl/scheduler.hpp"

namespace vcurl {

namespace {

std::string name(BucketIndex b) {
  return "(" + std::to_string(b.i) + "," + std::to_string(b.j) + ")";
}

bool is_predecessor(BucketIndex from, BucketIndex to, Expansion mode) {
  if (from.i == to.i - 1 && from.j == to.j) return true;
  if (from.i == to.i && from.j == to.j - 1) return true;
  return mode == Expansion::manhattan_plus_diagonal && from.i == to.i - 1 && from.j == to.j - 1;
}

}  // namespace

std::vector<TraceViolation> check_trace(const std::vector<SchedulerEvent>& events,
                                        const TraceCheckConfig& cfg) {
  std::vector<TraceViolation> out;
  const auto fail = [&](std::size_t idx, std::string msg) { out.push_back({idx, std::move(msg)}); };
  const auto in_grid = [&](BucketIndex b) { return b.i >= 0 && b.j >= 0 && b.i < cfg.k && b.j < cfg.k; };

  std::set<BucketIndex> active, mastered, passed_empty;
  std::vector<double> lcs(static_cast<std::size_t>(cfg.k * cfg.k), 0.0);
  const auto cell = [&](BucketIndex b) -> double& { return lcs[static_cast<std::size_t>(b.i * cfg.k + b.j)]; };
  bool started = false;
  std::int64_t last_step = 0;

  for (std::size_t n = 0; n < events.size(); ++n) {
    const auto& e = events[n];
    if (!in_grid(e.bucket)) {
      fail(n, "bucket " + name(e.bucket) + " outside the grid");
      continue;
    }
    if (e.step < last_step) fail(n, "step counter went backwards");
    last_step = e.step;
    if (!started && !(e.kind == EventKind::expand && e.reason == "start")) {
      fail(n, "event before the wavefront was started");
      continue;
    }

    switch (e.kind) {
      case EventKind::expand: {
        if (e.reason == "start") {
          if (started) fail(n, "second start event");
          if (!(e.bucket == BucketIndex{0, 0})) fail(n, "wavefront starts at " + name(e.bucket));
          started = true;
          active.insert(e.bucket);
          break;
        }
        if (active.count(e.bucket) || mastered.count(e.bucket)) {
          fail(n, name(e.bucket) + " added twice");
          break;
        }
        if (!e.from || !in_grid(*e.from)) {
          fail(n, name(e.bucket) + " added without a source bucket");
        } else if (!is_predecessor(*e.from, e.bucket, cfg.expansion)) {
          fail(n, name(e.bucket) + " is not a successor of " + name(*e.from));
        } else if (!mastered.count(*e.from)) {
          fail(n, name(e.bucket) + " added from unmastered " + name(*e.from));
        } else if (e.reason == "empty") {
          if (!passed_empty.count(*e.from)) fail(n, name(*e.from) + " was not passed as empty");
        } else if (!(cell(*e.from) > cfg.threshold)) {
          fail(n, name(e.bucket) + " added while LCS of " + name(*e.from) + " <= threshold");
        }
        active.insert(e.bucket);
        break;
      }
      case EventKind::master: {
        if (!active.count(e.bucket)) {
          fail(n, name(e.bucket) + " mastered while not active");
        } else if (e.reason == "empty") {
          passed_empty.insert(e.bucket);
        } else if (!(cell(e.bucket) > cfg.threshold)) {
          fail(n, name(e.bucket) + " mastered with LCS <= threshold");
        }
        if (e.reason == "empty" || cfg.retire_on_expand) active.erase(e.bucket);
        mastered.insert(e.bucket);
        break;
      }
      case EventKind::lcs: {
        if (!active.count(e.bucket) && !mastered.count(e.bucket)) {
          fail(n, "LCS update on inactive " + name(e.bucket));
        }
        if (!e.reward) {
          fail(n, "LCS update without a reward");
          break;
        }
        double& l = cell(e.bucket);
        l = cfg.gamma * l + (1.0 - cfg.gamma) * *e.reward;
        if (e.lcs && std::abs(*e.lcs - l) > 1e-12 * std::max(1.0, std::abs(l))) {
          fail(n, "logged LCS of " + name(e.bucket) + " disagrees with the replay");
        }
        break;
      }
      case EventKind::batch:
        if (!active.count(e.bucket)) fail(n, "batch from non-frontier bucket " + name(e.bucket));
        break;
      case EventKind::revisit: {
        if (!mastered.count(e.bucket)) fail(n, "revisit of unmastered " + name(e.bucket));
        const bool basis = e.bucket == BucketIndex{cfg.k - 1, 0} || e.bucket == BucketIndex{0, cfg.k - 1};
        if (cfg.revisit == RevisitMode::structured && !basis) {
          fail(n, "structured revisit of non-basis " + name(e.bucket));
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace vcurl
