#include "vcurl/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace vcurl {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kSchedulerStream = 0x5c4edu;

json bucket_json(BucketIndex b) { return json::array({b.i, b.j}); }

BucketIndex bucket_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

std::string to_string(Expansion e) {
  return e == Expansion::manhattan ? "manhattan" : "manhattan_plus_diagonal";
}

std::string to_string(RevisitMode m) { return m == RevisitMode::structured ? "structured" : "random"; }

Expansion parse_expansion(const std::string& name) {
  if (name == "manhattan") return Expansion::manhattan;
  if (name == "manhattan_plus_diagonal" || name == "diagonal") return Expansion::manhattan_plus_diagonal;
  throw Error(Errc::config_invalid, "unknown expansion mode '" + name + "'");
}

RevisitMode parse_revisit_mode(const std::string& name) {
  if (name == "structured") return RevisitMode::structured;
  if (name == "random") return RevisitMode::random;
  throw Error(Errc::config_invalid, "unknown revisit mode '" + name + "'");
}

void SchedulerConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(Errc::config_invalid, "gamma must lie in (0, 1)");
  if (!std::isfinite(threshold)) throw Error(Errc::config_invalid, "threshold must be finite");
  if (!(revisit_prob >= 0.0 && revisit_prob <= 1.0)) {
    throw Error(Errc::config_invalid, "revisit probability must lie in [0, 1]");
  }
  if (batch_size < 1) throw Error(Errc::config_invalid, "batch_size must be >= 1");
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::batch: return "batch";
    case EventKind::revisit: return "revisit";
    case EventKind::lcs: return "lcs";
    case EventKind::expand: return "expand";
    case EventKind::master: return "master";
  }
  return "?";
}

std::string event_to_json(const SchedulerEvent& e) {
  json j;
  j["step"] = e.step;
  j["event"] = to_string(e.kind);
  j["bucket"] = bucket_json(e.bucket);
  if (e.from) j["from"] = bucket_json(*e.from);
  if (e.reward) j["reward"] = *e.reward;
  if (e.lcs) j["lcs"] = *e.lcs;
  if (!e.reason.empty()) j["reason"] = e.reason;
  return j.dump();
}

SchedulerEvent event_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    SchedulerEvent e;
    e.step = j.at("step").get<std::int64_t>();
    const auto kind = j.at("event").get<std::string>();
    if (kind == "batch") e.kind = EventKind::batch;
    else if (kind == "revisit") e.kind = EventKind::revisit;
    else if (kind == "lcs") e.kind = EventKind::lcs;
    else if (kind == "expand") e.kind = EventKind::expand;
    else if (kind == "master") e.kind = EventKind::master;
    else throw Error(Errc::malformed_record, "unknown event kind '" + kind + "'");
    e.bucket = bucket_from(j.at("bucket"));
    if (j.contains("from")) e.from = bucket_from(j["from"]);
    if (j.contains("reward")) e.reward = j["reward"].get<double>();
    if (j.contains("lcs")) e.lcs = j["lcs"].get<double>();
    e.reason = j.value("reason", std::string{});
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::malformed_record, std::string("event: ") + ex.what());
  }
}

WavefrontScheduler::WavefrontScheduler(const CurriculumGrid& grid, const SchedulerConfig& cfg)
    : k_(grid.k()), cfg_(cfg) {
  cfg_.validate();
  if (k_ < 1) throw Error(Errc::config_invalid, "grid is empty");
  population_.resize(static_cast<std::size_t>(k_ * k_));
  for (int i = 0; i < k_; ++i) {
    for (int j = 0; j < k_; ++j) population_[flat({i, j})] = grid.population({i, j});
  }
  if (population_[0] == 0) throw Error(Errc::empty_start_bucket, "bucket (0,0) has no samples");
  lcs_.assign(population_.size(), 0.0);
  rng_ = derive_rng(cfg_.seed, kSchedulerStream);
  active_.insert({0, 0});
  emit({0, EventKind::expand, {0, 0}, std::nullopt, std::nullopt, std::nullopt, "start"});
}

BucketIndex WavefrontScheduler::revisit_cursor() const noexcept {
  return cursor_ == 0 ? BucketIndex{k_ - 1, 0} : BucketIndex{0, k_ - 1};
}

void WavefrontScheduler::update_lcs(BucketIndex b, double mean_reward) {
  if (b.i < 0 || b.j < 0 || b.i >= k_ || b.j >= k_ || (!active_.count(b) && !mastered_.count(b))) {
    throw Error(Errc::inactive_bucket,
                "(" + std::to_string(b.i) + "," + std::to_string(b.j) + ") is neither active nor mastered");
  }
  if (!std::isfinite(mean_reward)) throw Error(Errc::non_finite_input, "mean reward");
  double& l = lcs_[flat(b)];
  l = cfg_.gamma * l + (1.0 - cfg_.gamma) * mean_reward;
  emit({step_, EventKind::lcs, b, std::nullopt, mean_reward, l, {}});
}

void WavefrontScheduler::add_bucket(BucketIndex b, std::optional<BucketIndex> from,
                                    const std::string& reason) {
  if (b.i >= k_ || b.j >= k_ || active_.count(b) || mastered_.count(b)) return;
  emit({step_, EventKind::expand, b, from, std::nullopt, std::nullopt, reason});
  if (population_[flat(b)] > 0) {
    active_.insert(b);
    return;
  }
  // Nothing to learn here: pass straight through to the successors.
  mastered_.insert(b);
  emit({step_, EventKind::master, b, std::nullopt, std::nullopt, std::nullopt, "empty"});
  add_bucket({b.i + 1, b.j}, b, "empty");
  add_bucket({b.i, b.j + 1}, b, "empty");
  if (cfg_.expansion == Expansion::manhattan_plus_diagonal) add_bucket({b.i + 1, b.j + 1}, b, "empty");
}

int WavefrontScheduler::maybe_expand() {
  std::vector<BucketIndex> passing;
  for (const auto& b : active_) {
    if (lcs_[flat(b)] > cfg_.threshold && !mastered_.count(b)) passing.push_back(b);
  }
  for (const auto& b : passing) {
    mastered_.insert(b);
    if (cfg_.retire_on_expand) active_.erase(b);
    emit({step_, EventKind::master, b, std::nullopt, std::nullopt, lcs_[flat(b)], "lcs"});
    add_bucket({b.i + 1, b.j}, b, "lcs");
    add_bucket({b.i, b.j + 1}, b, "lcs");
    if (cfg_.expansion == Expansion::manhattan_plus_diagonal) add_bucket({b.i + 1, b.j + 1}, b, "lcs");
  }
  return static_cast<int>(passing.size());
}

std::optional<BucketIndex> WavefrontScheduler::pick_revisit() {
  const auto eligible = [&](BucketIndex b) {
    return mastered_.count(b) > 0 && population_[flat(b)] > 0;
  };
  if (cfg_.revisit == RevisitMode::structured) {
    const BucketIndex basis[2] = {{k_ - 1, 0}, {0, k_ - 1}};
    for (int t = 0; t < 2; ++t) {
      const int c = (cursor_ + t) % 2;
      if (eligible(basis[c])) {
        cursor_ = 1 - c;
        return basis[c];
      }
    }
    return std::nullopt;
  }
  std::vector<BucketIndex> pool;
  for (const auto& b : mastered_) {
    if (eligible(b)) pool.push_back(b);
  }
  if (pool.empty()) return std::nullopt;
  return pool[uniform_index(rng_, pool.size())];
}

BatchPlan WavefrontScheduler::next_batch(const CurriculumGrid& grid) {
  if (grid.k() != k_) throw Error(Errc::shape_mismatch, "grid does not match scheduler");
  BatchPlan plan;
  std::optional<BucketIndex> chosen;
  if (cfg_.revisit_prob > 0.0) {
    const bool want = uniform01(rng_) < cfg_.revisit_prob || active_.empty();
    if (want) chosen = pick_revisit();
    plan.is_revisit = chosen.has_value();
  }
  if (!chosen) {
    if (active_.empty()) throw Error(Errc::exhausted, "every bucket is mastered");
    auto it = active_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(uniform_index(rng_, active_.size())));
    chosen = *it;
  }
  plan.bucket = *chosen;

  // Partial Fisher-Yates: a uniform subset without replacement.
  std::vector<std::size_t> pool = grid.bucket(plan.bucket);
  const std::size_t m = std::min(pool.size(), static_cast<std::size_t>(cfg_.batch_size));
  for (std::size_t t = 0; t < m; ++t) {
    const auto r = t + uniform_index(rng_, pool.size() - t);
    std::swap(pool[t], pool[r]);
  }
  pool.resize(m);
  plan.samples = std::move(pool);
  plan.sample_ids.reserve(m);
  for (auto s : plan.samples) plan.sample_ids.push_back(grid.samples()[s].id);

  emit({step_, plan.is_revisit ? EventKind::revisit : EventKind::batch, plan.bucket, std::nullopt,
        std::nullopt, std::nullopt, {}});
  ++step_;
  return plan;
}

std::string WavefrontScheduler::snapshot() const {
  json doc;
  doc["version"] = kSnapshotVersion;
  doc["K"] = k_;
  doc["config"] = {{"gamma", cfg_.gamma},
                   {"threshold", cfg_.threshold},
                   {"revisit_prob", cfg_.revisit_prob},
                   {"batch_size", cfg_.batch_size},
                   {"seed", cfg_.seed},
                   {"expansion", to_string(cfg_.expansion)},
                   {"revisit", to_string(cfg_.revisit)},
                   {"retire_on_expand", cfg_.retire_on_expand}};
  doc["population"] = population_;
  json active = json::array();
  for (const auto& b : active_) active.push_back(bucket_json(b));
  json mastered = json::array();
  for (const auto& b : mastered_) mastered.push_back(bucket_json(b));
  doc["active"] = std::move(active);
  doc["mastered"] = std::move(mastered);
  doc["lcs"] = lcs_;
  doc["step"] = step_;
  doc["cursor"] = cursor_;
  doc["rng"] = rng_to_string(rng_);
  return doc.dump();
}

WavefrontScheduler WavefrontScheduler::restore(const std::string& text, const CurriculumGrid& grid) {
  WavefrontScheduler s;
  try {
    const json doc = json::parse(text);
    if (doc.at("version").get<std::string>() != kSnapshotVersion) {
      throw Error(Errc::corrupt_snapshot, "unsupported snapshot version");
    }
    s.k_ = doc.at("K").get<int>();
    const auto& c = doc.at("config");
    s.cfg_.gamma = c.at("gamma").get<double>();
    s.cfg_.threshold = c.at("threshold").get<double>();
    s.cfg_.revisit_prob = c.at("revisit_prob").get<double>();
    s.cfg_.batch_size = c.at("batch_size").get<int>();
    s.cfg_.seed = c.at("seed").get<std::uint64_t>();
    s.cfg_.expansion = parse_expansion(c.at("expansion").get<std::string>());
    s.cfg_.revisit = parse_revisit_mode(c.at("revisit").get<std::string>());
    s.cfg_.retire_on_expand = c.at("retire_on_expand").get<bool>();
    s.cfg_.validate();
    s.population_ = doc.at("population").get<std::vector<std::size_t>>();
    for (const auto& b : doc.at("active")) s.active_.insert(bucket_from(b));
    for (const auto& b : doc.at("mastered")) s.mastered_.insert(bucket_from(b));
    s.lcs_ = doc.at("lcs").get<std::vector<double>>();
    s.step_ = doc.at("step").get<std::int64_t>();
    s.cursor_ = doc.at("cursor").get<int>();
    if (!rng_from_string(doc.at("rng").get<std::string>(), s.rng_)) {
      throw Error(Errc::corrupt_snapshot, "rng state");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt_snapshot, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::corrupt_snapshot) throw;
    throw Error(Errc::corrupt_snapshot, e.detail());
  }
  const std::size_t cells = static_cast<std::size_t>(s.k_) * static_cast<std::size_t>(s.k_);
  if (s.k_ != grid.k() || s.population_.size() != cells || s.lcs_.size() != cells ||
      (s.cursor_ != 0 && s.cursor_ != 1) || s.step_ < 0) {
    throw Error(Errc::corrupt_snapshot, "snapshot does not describe this grid");
  }
  for (int i = 0; i < s.k_; ++i) {
    for (int j = 0; j < s.k_; ++j) {
      if (s.population_[s.flat({i, j})] != grid.population({i, j})) {
        throw Error(Errc::corrupt_snapshot, "bucket populations differ from the grid");
      }
    }
  }
  for (const auto* set : {&s.active_, &s.mastered_}) {
    for (const auto& b : *set) {
      if (!grid.contains(b)) throw Error(Errc::corrupt_snapshot, "bucket out of range");
    }
  }
  return s;
}

}  // namespace vcurl
