#include "vcurl/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <numeric>
#include <set>

#include <omp.h>

#include <json.hpp>

#include "vcurl/rlcore.hpp"

namespace vcurl {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kRunStream = 0x51a1u;
constexpr std::uint64_t kCorpusStream = 0xc0u;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Bernoulli KL between the success distributions of two learners on one sample.
double bernoulli_kl(double p, double q) {
  const double lp[2] = {std::log(p), std::log1p(-p)};
  const double lq[2] = {std::log(q), std::log1p(-q)};
  return kl_divergence(lp, lq);
}

json opt_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::int64_t> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::int64_t>();
}

}  // namespace

void LearnerParams::validate() const {
  if (!(slope > 0.0)) throw Error(Errc::config_invalid, "slope must be > 0");
  if (!(learn_rate >= 0.0) || !(stretch >= 0.0) || !(forget_rate >= 0.0)) {
    throw Error(Errc::config_invalid, "learner rates must be >= 0");
  }
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(exercise_floor) || !in_unit(forget_floor)) {
    throw Error(Errc::config_invalid, "learner floors must lie in [0, 1]");
  }
}

double success_prob(const LearnerParams& p, const Competence& c, double d_visual, double d_text) {
  return sigmoid(p.slope * (c.visual - d_visual)) * sigmoid(p.slope * (c.text - d_text));
}

StepOutcome train_step(const LearnerParams& p, Competence& c, std::span<const std::size_t> samples,
                       const CurriculumGrid& grid, Rng& rng) {
  StepOutcome out;
  if (samples.empty()) return out;
  out.rewards.reserve(samples.size());
  for (auto s : samples) {
    const auto& x = grid.samples().at(s);
    out.rewards.push_back(bernoulli(rng, success_prob(p, c, x.d_visual, x.d_text)) ? 1.0 : 0.0);
    out.mean_d_visual += x.d_visual;
    out.mean_d_text += x.d_text;
  }
  const auto n = static_cast<double>(samples.size());
  out.mean_reward = std::accumulate(out.rewards.begin(), out.rewards.end(), 0.0) / n;
  out.mean_d_visual /= n;
  out.mean_d_text /= n;

  const auto update = [&](double& skill, double d) {
    skill += p.learn_rate * out.mean_reward * std::max(0.0, d + p.stretch - skill);
    if (d < p.exercise_floor && skill > p.forget_floor) {
      skill = std::max(p.forget_floor, skill - p.forget_rate);
    }
    skill = std::clamp(skill, 0.0, 1.0);
  };
  update(c.visual, out.mean_d_visual);
  update(c.text, out.mean_d_text);
  return out;
}

double expected_reward(const LearnerParams& p, const Competence& c, const CurriculumGrid& grid) {
  if (grid.samples().empty()) return 0.0;
  double sum = 0.0;
  for (const auto& x : grid.samples()) sum += success_prob(p, c, x.d_visual, x.d_text);
  return sum / static_cast<double>(grid.samples().size());
}

double expected_reward(const LearnerParams& p, const Competence& c, const CurriculumGrid& grid,
                       BucketIndex b) {
  const auto& members = grid.bucket(b);
  if (members.empty()) return 0.0;
  double sum = 0.0;
  for (auto s : members) {
    const auto& x = grid.samples()[s];
    sum += success_prob(p, c, x.d_visual, x.d_text);
  }
  return sum / static_cast<double>(members.size());
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::wavefront: return "wavefront";
    case Strategy::random: return "random";
    case Strategy::scalar_length: return "scalar_length";
    case Strategy::scalar_generation_sim: return "scalar_generation_sim";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : {Strategy::wavefront, Strategy::random, Strategy::scalar_length,
                 Strategy::scalar_generation_sim}) {
    if (to_string(s) == name) return s;
  }
  throw Error(Errc::config_invalid, "unknown strategy '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw Error(Errc::config_invalid, "at least one seed is required");
  if (steps < 0) throw Error(Errc::config_invalid, "steps must be >= 0");
  if (window < 1) throw Error(Errc::config_invalid, "window must be >= 1");
  if (!std::isfinite(reward_threshold)) throw Error(Errc::config_invalid, "reward threshold");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(Errc::config_invalid, "beta must be >= 0");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error(Errc::config_invalid, "clip_eps must lie in (0, 1)");
  scheduler.validate();
  learner.validate();
}

std::string trace_to_json(const TraceRecord& r) {
  json j;
  j["step"] = r.step;
  j["bucket"] = {r.bucket.i, r.bucket.j};
  j["revisit"] = r.is_revisit;
  j["mean_reward"] = r.mean_reward;
  j["beta_eff"] = r.beta_eff;
  j["objective"] = r.objective;
  j["c_visual"] = r.competence.visual;
  j["c_text"] = r.competence.text;
  j["grid_reward"] = r.grid_reward;
  return j.dump();
}

SimulationRun::SimulationRun(const CurriculumGrid& grid, const ExperimentConfig& cfg, std::uint64_t seed)
    : grid_(&grid), cfg_(cfg), seed_(seed), rng_(derive_rng(seed, kRunStream)) {
  cfg_.validate();
  if (grid.samples().empty()) throw Error(Errc::config_invalid, "grid has no samples");
  switch (cfg_.strategy) {
    case Strategy::wavefront: {
      SchedulerConfig sc = cfg_.scheduler;
      sc.seed = seed;
      scheduler_.emplace(grid, sc);
      events_ = scheduler_->events();
      scheduler_->clear_events();
      break;
    }
    case Strategy::random:
      for (int i = 0; i < grid.k(); ++i) {
        for (int j = 0; j < grid.k(); ++j) {
          if (grid.population({i, j}) > 0) nonempty_.push_back({i, j});
        }
      }
      break;
    case Strategy::scalar_length:
    case Strategy::scalar_generation_sim:
      init_stages();
      break;
  }
}

void SimulationRun::init_stages() {
  // K^2 equal-population stages ordered by one scalar difficulty.
  const auto& samples = grid_->samples();
  std::vector<double> key(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& x = samples[s];
    key[s] = cfg_.strategy == Strategy::scalar_length
                 ? 0.5 * (x.d_visual + x.d_text)
                 : 1.0 - success_prob(cfg_.learner, cfg_.probe, x.d_visual, x.d_text);
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Samples are id-sorted, so a stable sort breaks ties by id.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  const std::size_t n = order.size();
  const std::size_t count = std::min(n, static_cast<std::size_t>(grid_->k() * grid_->k()));
  for (std::size_t t = 0; t < count; ++t) {
    stages_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(t * n / count),
                         order.begin() + static_cast<std::ptrdiff_t>((t + 1) * n / count));
  }
}

std::vector<std::size_t> SimulationRun::sample_from(const std::vector<std::size_t>& pool_in) {
  std::vector<std::size_t> pool = pool_in;
  const std::size_t m = std::min(pool.size(), static_cast<std::size_t>(cfg_.scheduler.batch_size));
  for (std::size_t t = 0; t < m; ++t) std::swap(pool[t], pool[t + uniform_index(rng_, pool.size() - t)]);
  pool.resize(m);
  return pool;
}

bool SimulationRun::step() {
  if (finished_) return false;
  if (steps_done_ >= cfg_.steps) {
    finished_ = true;
    return false;
  }

  TraceRecord rec;
  rec.step = steps_done_;
  std::vector<std::size_t> batch;
  switch (cfg_.strategy) {
    case Strategy::wavefront: {
      const bool keep_going = cfg_.continue_after_exhaustion && cfg_.scheduler.revisit_prob > 0.0;
      if (scheduler_->exhausted() && !keep_going) {
        finished_ = true;
        return false;
      }
      try {
        auto plan = scheduler_->next_batch(*grid_);
        rec.bucket = plan.bucket;
        rec.is_revisit = plan.is_revisit;
        batch = std::move(plan.samples);
      } catch (const Error& e) {
        if (e.code() != Errc::exhausted) throw;
        finished_ = true;
        return false;
      }
      break;
    }
    case Strategy::random:
      rec.bucket = nonempty_[uniform_index(rng_, nonempty_.size())];
      batch = sample_from(grid_->bucket(rec.bucket));
      break;
    case Strategy::scalar_length:
    case Strategy::scalar_generation_sim:
      rec.bucket = {static_cast<int>(stage_), 0};
      batch = sample_from(stages_[stage_]);
      break;
  }

  // KL of the rollout policy against the untrained reference learner.
  double kl = 0.0;
  const Competence reference{};
  for (auto s : batch) {
    const auto& x = grid_->samples()[s];
    kl += bernoulli_kl(success_prob(cfg_.learner, competence_, x.d_visual, x.d_text),
                       success_prob(cfg_.learner, reference, x.d_visual, x.d_text));
  }
  if (!batch.empty()) kl /= static_cast<double>(batch.size());

  const auto outcome = train_step(cfg_.learner, competence_, batch, *grid_, rng_);
  rec.mean_reward = outcome.mean_reward;
  if (outcome.rewards.size() >= 2) {
    RewardGroup g;
    g.rewards = outcome.rewards;
    g.beta = cfg_.beta;
    g.clip_eps = cfg_.clip_eps;
    rec.beta_eff = kl_gate(g);
    // Rollouts are on-policy, so every importance ratio is 1.
    PolicyEval pe;
    pe.logp_new.assign(g.rewards.size(), 0.0);
    pe.logp_old.assign(g.rewards.size(), 0.0);
    rec.objective = grpo_objective(pe, g, kl);
  }

  switch (cfg_.strategy) {
    case Strategy::wavefront:
      scheduler_->update_lcs(rec.bucket, outcome.mean_reward);
      scheduler_->maybe_expand();
      for (auto& e : scheduler_->events()) events_.push_back(e);
      scheduler_->clear_events();
      if (scheduler_->exhausted() && !exhausted_at_) exhausted_at_ = steps_done_ + 1;
      break;
    case Strategy::scalar_length:
    case Strategy::scalar_generation_sim: {
      const double g = cfg_.scheduler.gamma;
      stage_lcs_ = g * stage_lcs_ + (1.0 - g) * outcome.mean_reward;
      if (stage_lcs_ > cfg_.scheduler.threshold && stage_ + 1 < stages_.size()) {
        ++stage_;
        stage_lcs_ = 0.0;
      }
      break;
    }
    case Strategy::random:
      break;
  }

  rec.competence = competence_;
  rec.grid_reward = expected_reward(cfg_.learner, competence_, *grid_);
  recent_.push_back(rec.grid_reward);
  if (recent_.size() > static_cast<std::size_t>(cfg_.window)) recent_.erase(recent_.begin());
  if (!steps_to_threshold_ && recent_.size() == static_cast<std::size_t>(cfg_.window)) {
    const double mean = std::accumulate(recent_.begin(), recent_.end(), 0.0) / cfg_.window;
    if (mean >= cfg_.reward_threshold) steps_to_threshold_ = steps_done_ + 1;
  }
  const int k = grid_->k();
  const BucketIndex basis[2] = {{k - 1, 0}, {0, k - 1}};
  for (int b = 0; b < 2; ++b) {
    basis_peak_[b] = std::max(basis_peak_[b], expected_reward(cfg_.learner, competence_, *grid_, basis[b]));
  }
  trace_.push_back(rec);
  ++steps_done_;
  return true;
}

void SimulationRun::run_to_end() {
  while (step()) {
  }
}

RunMetrics SimulationRun::metrics(bool take) {
  RunMetrics m;
  m.seed = seed_;
  m.strategy = cfg_.strategy;
  m.steps_run = steps_done_;
  m.steps_to_threshold = steps_to_threshold_;
  m.exhausted_at = exhausted_at_;
  m.final_competence = competence_;
  m.final_mean_reward = expected_reward(cfg_.learner, competence_, *grid_);
  const int k = grid_->k();
  const BucketIndex basis[2] = {{k - 1, 0}, {0, k - 1}};
  double gap = 0.0;
  int counted = 0;
  for (int b = 0; b < 2; ++b) {
    if (grid_->population(basis[b]) == 0) continue;
    gap += basis_peak_[b] - expected_reward(cfg_.learner, competence_, *grid_, basis[b]);
    ++counted;
  }
  m.forgetting_gap = counted ? gap / counted : 0.0;
  if (take) {
    m.trace = std::move(trace_);
    m.events = std::move(events_);
    trace_.clear();
    events_.clear();
  } else {
    m.trace = trace_;
    m.events = events_;
  }
  return m;
}

std::string SimulationRun::snapshot() const {
  json doc;
  doc["version"] = kSnapshotVersion;
  doc["strategy"] = to_string(cfg_.strategy);
  doc["seed"] = seed_;
  doc["steps_done"] = steps_done_;
  doc["finished"] = finished_;
  doc["competence"] = {competence_.visual, competence_.text};
  doc["rng"] = rng_to_string(rng_);
  doc["scheduler"] = scheduler_ ? json(scheduler_->snapshot()) : json(nullptr);
  doc["stage"] = stage_;
  doc["stage_lcs"] = stage_lcs_;
  doc["recent"] = recent_;
  doc["steps_to_threshold"] = opt_json(steps_to_threshold_);
  doc["exhausted_at"] = opt_json(exhausted_at_);
  doc["basis_peak"] = {basis_peak_[0], basis_peak_[1]};
  return doc.dump();
}

SimulationRun SimulationRun::restore(const std::string& text, const CurriculumGrid& grid,
                                     const ExperimentConfig& cfg) {
  json doc;
  try {
    doc = json::parse(text);
    if (doc.at("version").get<std::string>() != kSnapshotVersion) {
      throw Error(Errc::corrupt_snapshot, "unsupported run snapshot version");
    }
    if (parse_strategy(doc.at("strategy").get<std::string>()) != cfg.strategy) {
      throw Error(Errc::corrupt_snapshot, "snapshot strategy differs from the configuration");
    }
    SimulationRun run(grid, cfg, doc.at("seed").get<std::uint64_t>());
    run.steps_done_ = doc.at("steps_done").get<std::int64_t>();
    run.finished_ = doc.at("finished").get<bool>();
    run.competence_ = {doc.at("competence").at(0).get<double>(), doc.at("competence").at(1).get<double>()};
    if (!rng_from_string(doc.at("rng").get<std::string>(), run.rng_)) {
      throw Error(Errc::corrupt_snapshot, "rng state");
    }
    if (run.scheduler_) {
      run.scheduler_ = WavefrontScheduler::restore(doc.at("scheduler").get<std::string>(), grid);
      run.events_.clear();
    }
    run.stage_ = doc.at("stage").get<std::size_t>();
    if (!run.stages_.empty() && run.stage_ >= run.stages_.size()) {
      throw Error(Errc::corrupt_snapshot, "stage index out of range");
    }
    run.stage_lcs_ = doc.at("stage_lcs").get<double>();
    run.recent_ = doc.at("recent").get<std::vector<double>>();
    run.steps_to_threshold_ = opt_from(doc.at("steps_to_threshold"));
    run.exhausted_at_ = opt_from(doc.at("exhausted_at"));
    run.basis_peak_[0] = doc.at("basis_peak").at(0).get<double>();
    run.basis_peak_[1] = doc.at("basis_peak").at(1).get<double>();
    return run;
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt_snapshot, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::corrupt_snapshot) throw;
    throw Error(Errc::corrupt_snapshot, e.detail());
  }
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, const CurriculumGrid& grid,
                                       int workers) {
  cfg.validate();
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<RunMetrics> out(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(seeds.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    try {
      SimulationRun run(grid, cfg, seeds[static_cast<std::size_t>(s)]);
      run.run_to_end();
      out[static_cast<std::size_t>(s)] = run.metrics(true);
    } catch (...) {
      errors[static_cast<std::size_t>(s)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double median_steps_to_threshold(std::span<const RunMetrics> runs, int steps) {
  if (runs.empty()) return 0.0;
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(static_cast<double>(r.steps_to_threshold.value_or(steps + 1)));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<BinStat> correlate(std::span<const ScoredId> scores, std::span<const ScoredId> outcomes,
                               int bins) {
  if (bins < 2) throw Error(Errc::config_invalid, "bins must be >= 2");
  std::map<std::string, double> outcome;
  for (const auto& o : outcomes) {
    if (!outcome.emplace(o.id, o.value).second) throw Error(Errc::duplicate_id, o.id);
  }
  std::set<std::string> seen;
  for (const auto& s : scores) {
    if (!seen.insert(s.id).second) throw Error(Errc::duplicate_id, s.id);
    if (!outcome.count(s.id)) throw Error(Errc::id_mismatch, s.id + " has no outcome");
  }
  if (seen.size() != outcome.size()) throw Error(Errc::id_mismatch, "outcomes cover ids without scores");
  const std::size_t n = scores.size();
  if (n < static_cast<std::size_t>(bins)) throw Error(Errc::config_invalid, "fewer samples than bins");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].value != scores[b].value) return scores[a].value < scores[b].value;
    return scores[a].id < scores[b].id;
  });
  std::vector<BinStat> out(static_cast<std::size_t>(bins));
  const auto nb = static_cast<std::size_t>(bins);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t lo = b * n / nb, hi = (b + 1) * n / nb;
    double sum_score = 0.0, sum_out = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
      sum_score += scores[order[t]].value;
      sum_out += outcome.at(scores[order[t]].id);
    }
    const auto cnt = static_cast<double>(hi - lo);
    out[b] = {sum_score / cnt, sum_out / cnt, hi - lo};
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::length_mismatch, "spearman inputs differ in length");
  if (x.size() < 2) return 0.0;
  const auto rx = quantile_normalize(x);
  const auto ry = quantile_normalize(y);
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, std::span<const VisualScore> visual,
                              std::span<const TextScore> text, std::span<const int> ks, double alpha,
                              int workers) {
  std::set<int> seen;
  for (int k : ks) {
    if (k < 2 || k > kMaxGridSide) throw Error(Errc::config_invalid, "K must lie in [2, 8]");
    if (!seen.insert(k).second) throw Error(Errc::config_invalid, "K=" + std::to_string(k) + " repeated");
  }
  std::vector<SweepRow> rows;
  for (int k : ks) {
    const auto grid = build_grid(visual, text, k, alpha);
    SweepRow row;
    row.k = k;
    row.runs = run_experiment(cfg, grid, workers);
    if (cfg.strategy == Strategy::wavefront) {
      TraceCheckConfig tc;
      tc.k = k;
      tc.gamma = cfg.scheduler.gamma;
      tc.threshold = cfg.scheduler.threshold;
      tc.expansion = cfg.scheduler.expansion;
      tc.revisit = cfg.scheduler.revisit;
      tc.retire_on_expand = cfg.scheduler.retire_on_expand;
      for (const auto& r : row.runs) row.violations += check_trace(r.events, tc).size();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

SyntheticCorpus make_synthetic_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng = derive_rng(seed, kCorpusStream);
  SyntheticCorpus c;
  c.visual.reserve(n);
  c.text.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", s);
    const double flow = std::exp(0.75 * standard_normal(rng));
    const double ent = std::clamp(4.0 + 1.5 * standard_normal(rng), 0.0, 8.0);
    const double cog = 3.0 * standard_normal(rng);
    c.visual.push_back({id, flow, ent});
    c.text.push_back({id, cog});
  }
  return c;
}

}  // namespace vcurl
