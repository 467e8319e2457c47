// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <iostream>
#include <sstream>

#include "support/fixtures.hpp"
#include "vcurl/cli.hpp"
#include "vcurl/grid.hpp"
#include "vcurl/rlcore.hpp"
#include "vcurl/scheduler.hpp"
#include "vcurl/simharness.hpp"
#include "vcurl/visual.hpp"

using namespace vcurl;
namespace vt = vcurl::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& fn) {
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %2d %s  %s: %s\n", id, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
  std::fflush(stdout);
  failures += !v.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ criteria

Verdict flow_oracle() {
  const auto t0 = Clock::now();
  int ok = 0;
  for (int c = 0; c < 20; ++c) {
    const int s = 1 + c % 3;
    const auto [a, b] = vt::shifted_pair(64, s, static_cast<std::uint64_t>(c));
    const double m = vt::interior_magnitude(estimate_flow(a, b, FlowConfig{}), 8);
    ok += std::abs(m - s) <= 0.2 * s;
  }
  const double secs = seconds_since(t0);
  return {ok >= 18 && secs < 5.0, fmt("%d/20 within 20%% of the shift, %.3f s", ok, secs)};
}

Verdict entropy_analytics() {
  GrayFrame zero(16, 16, 0), flat(16, 16, 7), half(16, 16, 0), all(16, 16);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 16; ++c) half.at(r, c) = 40;
  }
  for (int v = 0; v < 256; ++v) all.at(v / 16, v % 16) = static_cast<std::uint8_t>(v);
  const auto h = [&](const GrayFrame& x) { return diff_entropy(diff_distribution(frame_diff(zero, x))); };
  const double e0 = h(flat), e1 = h(half), e8 = h(all);
  const bool ok = std::abs(e0) <= 1e-6 && std::abs(e1 - 1.0) <= 1e-6 && std::abs(e8 - 8.0) <= 1e-6;
  return {ok, fmt("degenerate %.9f, two bins %.9f, uniform %.9f bits", e0, e1, e8)};
}

Verdict quantile_normalization() {
  Rng rng = derive_rng(3, 3);
  std::vector<double> x(10000);
  for (auto& v : x) v = standard_normal(rng);
  const auto q = quantile_normalize(x);
  auto sorted = q;
  std::sort(sorted.begin(), sorted.end());
  bool exact = true;
  for (std::size_t i = 0; i < sorted.size(); ++i) exact &= sorted[i] == static_cast<double>(i + 1) / 10000.0;

  int invariant = 0;
  for (int t = 0; t < 50; ++t) {
    const double a = 0.1 + 2.0 * uniform01(rng), b = 3.0 * standard_normal(rng);
    std::vector<double> y;
    for (double v : x) y.push_back(t % 2 ? a * v + b : std::exp(a * v / 3.0) + v * v * v);
    invariant += quantile_normalize(y) == q;
  }
  const auto tie = quantile_normalize(std::vector<double>{5, 5, 1});
  const bool tie_ok = std::abs(tie[0] - 0.8333) <= 1e-4 && std::abs(tie[1] - 0.8333) <= 1e-4 &&
                      std::abs(tie[2] - 0.3333) <= 1e-4;
  return {exact && invariant == 50 && tie_ok,
          fmt("exact ranks %s, %d/50 transforms invariant, tie case [%.4f %.4f %.4f]", exact ? "yes" : "no",
              invariant, tie[0], tie[1], tie[2])};
}

Verdict grid_marginals() {
  Rng rng = derive_rng(16, 4);
  std::vector<VisualScore> v;
  std::vector<TextScore> t;
  for (int s = 0; s < 16; ++s) {
    const std::string id = "m" + std::to_string(s);
    // Flow and entropy share an ordering so the fused axis stays distinct.
    const double base = s + 0.5 * uniform01(rng);
    v.push_back({id, base, base / 4.0});
    t.push_back({id, standard_normal(rng)});
  }
  const auto g = build_grid(v, t, 4);
  bool ok = true;
  std::string rows;
  for (int level = 0; level < 4; ++level) {
    std::size_t row = 0, col = 0;
    for (int o = 0; o < 4; ++o) {
      row += g.population({level, o});
      col += g.population({o, level});
    }
    ok &= row == 4 && col == 4;
    rows += fmt("%s%zu/%zu", level ? " " : "", row, col);
  }
  return {ok, "visual/text level populations " + rows};
}

Verdict scheduler_gating() {
  std::size_t violations = 0, expansions = 0, runs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int k = 2 + static_cast<int>(seed % 4);
    const auto corpus = make_synthetic_corpus(240, seed);
    const auto grid = build_grid(corpus.visual, corpus.text, k);
    ExperimentConfig cfg;
    cfg.seeds = {seed};
    cfg.steps = 1500;
    cfg.scheduler.revisit_prob = (seed % 3) * 0.1;
    cfg.scheduler.expansion = seed % 2 ? Expansion::manhattan_plus_diagonal : Expansion::manhattan;
    cfg.scheduler.revisit = seed % 5 == 0 ? RevisitMode::random : RevisitMode::structured;
    const auto run = run_experiment(cfg, grid, 1).at(0);
    TraceCheckConfig tc;
    tc.k = k;
    tc.gamma = cfg.scheduler.gamma;
    tc.threshold = cfg.scheduler.threshold;
    tc.expansion = cfg.scheduler.expansion;
    tc.revisit = cfg.scheduler.revisit;
    tc.retire_on_expand = cfg.scheduler.retire_on_expand;
    violations += check_trace(run.events, tc).size();
    for (const auto& e : run.events) expansions += e.kind == EventKind::expand;
    ++runs;
  }
  return {violations == 0 && runs == 100,
          fmt("%zu seeded runs, %zu expansion events replayed, %zu violations", runs, expansions, violations)};
}

Verdict lcs_arithmetic() {
  std::vector<ScoredSample> samples(1);
  samples[0].id = "only";
  samples[0].d_visual = samples[0].d_text = 0.1;
  samples[0].bucket = {0, 0};
  const CurriculumGrid g(2, 0.5, std::move(samples));
  WavefrontScheduler s(g, SchedulerConfig{});
  double worst = 0.0;
  for (int t = 1; t <= 100; ++t) {
    s.update_lcs({0, 0}, 1.0);
    worst = std::max(worst, std::abs(s.lcs({0, 0}) - (1.0 - std::pow(0.9, t))));
  }
  return {worst <= 1e-12, fmt("max |LCS - (1 - 0.9^t)| over t <= 100 is %.3g", worst)};
}

Verdict grpo_advantages() {
  RewardGroup g;
  g.rewards = {1, 0, 0, 1};
  const auto a = group_advantages(g);
  const double want[] = {1, -1, -1, 1};
  double err = 0.0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(a[i] - want[i]));
  RewardGroup same;
  same.rewards = {0.5, 0.5, 0.5, 0.5};
  bool zeros = true;
  for (double x : group_advantages(same)) zeros &= x == 0.0;
  const bool gate = kl_gate(same) == 0.0 && kl_gate(g) == 0.04;
  const bool beta = RewardGroup{}.beta == 0.04 && ExperimentConfig{}.beta == 0.04;
  return {err <= 1e-6 && zeros && gate && beta,
          fmt("max error %.2g, all-equal zeros %s, gated beta %s, default beta 0.04 %s", err, zeros ? "yes" : "no",
              gate ? "yes" : "no", beta ? "yes" : "no")};
}

Verdict gradient_check() {
  Rng rng = derive_rng(81, 81);
  int open_ok = 0, closed_ok = 0, open_n = 0, closed_n = 0;
  for (int t = 0; (open_n < 100 || closed_n < 100) && t < 10000; ++t) {
    const bool open = t % 2 == 0;
    GradientCase c;
    const int g = 2 + static_cast<int>(uniform_index(rng, 7));
    for (int i = 0; i < g; ++i) {
      c.actions.push_back(static_cast<int>(uniform_index(rng, 2)));
      c.group.rewards.push_back(open ? static_cast<double>(uniform_index(rng, 2)) : 1.0);
    }
    if (open) {
      c.group.rewards[0] = 1.0;
      c.group.rewards[1] = 0.0;
    }
    c.group.beta = 0.04 + uniform01(rng);
    c.old_policy.theta = 2.0 * standard_normal(rng);
    c.ref_policy.theta = 2.0 * standard_normal(rng);
    const double theta = c.old_policy.theta + 0.5 * standard_normal(rng);
    const double h = 1e-6;
    // Points within a step of a clip boundary sit on a kink; draw again.
    bool kink = false;
    for (int a : c.actions) {
      const auto ratio = [&](double th) { return std::exp(TwoActionPolicy{th}.logp(a) - c.old_policy.logp(a)); };
      for (double edge : {1.0 - c.group.clip_eps, 1.0 + c.group.clip_eps}) {
        kink |= (ratio(theta - 2 * h) - edge) * (ratio(theta + 2 * h) - edge) <= 0.0;
      }
    }
    if (kink) continue;
    const double num = (grpo_objective_at(c, theta + h) - grpo_objective_at(c, theta - h)) / (2 * h);
    const double ana = grpo_objective_gradient(c, theta);
    const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3});
    if (open) {
      ++open_n;
      open_ok += rel <= 1e-5;
    } else {
      ++closed_n;
      closed_ok += rel <= 1e-5;
    }
  }
  return {open_n >= 100 && closed_n >= 100 && open_ok == open_n && closed_ok == closed_n,
          fmt("gate open %d/%d, gate closed %d/%d within 1e-5 relative", open_ok, open_n, closed_ok, closed_n)};
}

// Shared by the ordering and revisiting criteria: 20 seeds, default learner.
struct SeedRuns {
  RunMetrics wavefront, scalar, random, no_revisit, random_revisit;
};

std::vector<SeedRuns> seed_runs;
double seed_runs_seconds = 0.0;

void ensure_seed_runs() {
  if (!seed_runs.empty()) return;
  const auto t0 = Clock::now();
  seed_runs.resize(20);
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < 20; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto corpus = make_synthetic_corpus(480, seed);
    const auto grid = build_grid(corpus.visual, corpus.text, 4);
    const auto run = [&](Strategy st, double rho, RevisitMode mode) {
      ExperimentConfig cfg;
      cfg.seeds = {seed};
      cfg.strategy = st;
      cfg.scheduler.revisit_prob = rho;
      cfg.scheduler.revisit = mode;
      return run_experiment(cfg, grid, 1).at(0);
    };
    auto& r = seed_runs[static_cast<std::size_t>(s)];
    r.wavefront = run(Strategy::wavefront, 0.1, RevisitMode::structured);
    r.scalar = run(Strategy::scalar_length, 0.1, RevisitMode::structured);
    r.random = run(Strategy::random, 0.1, RevisitMode::structured);
    r.no_revisit = run(Strategy::wavefront, 0.0, RevisitMode::structured);
    r.random_revisit = run(Strategy::wavefront, 0.1, RevisitMode::random);
  }
  seed_runs_seconds = seconds_since(t0);
}

Verdict qualitative_ordering() {
  ensure_seed_runs();
  const int steps = ExperimentConfig{}.steps;
  std::vector<RunMetrics> w, s, r;
  int wins = 0;
  for (const auto& x : seed_runs) {
    w.push_back(x.wavefront);
    s.push_back(x.scalar);
    r.push_back(x.random);
    wins += x.wavefront.steps_to_threshold.value_or(steps + 1) < x.random.steps_to_threshold.value_or(steps + 1);
  }
  const double mw = median_steps_to_threshold(w, steps), ms = median_steps_to_threshold(s, steps),
               mr = median_steps_to_threshold(r, steps);
  return {mw < ms && ms < mr && wins >= 16 && seed_runs_seconds < 120.0,
          fmt("median steps to threshold wavefront %.1f < scalar_length %.1f < random %.1f; wavefront beats random "
              "in %d/20 seeds; %.1f s",
              mw, ms, mr, wins, seed_runs_seconds)};
}

Verdict revisiting_ablation() {
  ensure_seed_runs();
  int ge = 0, wins = 0, ties = 0, losses = 0, between = 0, saturated = 0;
  for (const auto& x : seed_runs) {
    saturated += x.wavefront.final_competence.visual == 1.0 && x.no_revisit.final_competence.visual == 1.0;
    const double sv = x.wavefront.final_competence.visual, nv = x.no_revisit.final_competence.visual,
                 rv = x.random_revisit.final_competence.visual;
    ge += sv >= nv;
    wins += sv > nv;
    ties += sv == nv;
    losses += sv < nv;
    between += std::min(sv, nv) <= rv && rv <= std::max(sv, nv);
  }
  return {ge >= 18 && between >= 12,
          fmt("structured >= none in %d/20 seeds (strict wins %d, ties %d, losses %d); random replay between in "
              "%d/20; both arms end at c_visual = 1 in %d/20",
              ge, wins, ties, losses, between, saturated)};
}

Verdict k_sweep() {
  const auto corpus = make_synthetic_corpus(480, 11);
  ExperimentConfig cfg;
  cfg.seeds = {0, 1, 2, 3, 4};
  const std::vector<int> ks{3, 4, 5};
  const auto rows = sweep_k(cfg, corpus.visual, corpus.text, ks);
  std::size_t violations = 0;
  std::string table;
  for (const auto& row : rows) {
    violations += row.violations;
    double reward = 0.0;
    for (const auto& r : row.runs) reward += r.final_mean_reward;
    table += fmt(" [K=%d median %.1f reward %.3f violations %zu]", row.k,
                 median_steps_to_threshold(row.runs, cfg.steps), reward / static_cast<double>(row.runs.size()),
                 row.violations);
  }
  return {rows.size() == 3 && violations == 0, "report" + table};
}

// ---------------------------------------------------------------- CLI checks

int quiet_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vcurl");
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old);
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_dirs(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
  if (names_a != names_b) return false;
  files = names_a.size();
  for (const auto& n : names_a) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

Verdict determinism() {
  vt::TempDir dir("acceptance");
  const auto d = dir.path().string();
  if (quiet_cli({"synth-scores", "--out", d, "--n", "300", "--seed", "5"}) ||
      quiet_cli({"build-grid", "--visual", d + "/visual.jsonl", "--text", d + "/text.jsonl", "--out",
                 d + "/grid.json"})) {
    return {false, "setup commands failed"};
  }
  const std::vector<std::string> train{"train-sim", "--grid", d + "/grid.json", "--strategy",
                                       "wavefront,random,scalar_length", "--seed", "3", "--runs", "4"};
  auto first = train, second = train;
  first.insert(first.end(), {"--out", d + "/run1", "--workers", "1"});
  second.insert(second.end(), {"--out", d + "/run2", "--workers", "4"});
  if (quiet_cli(first) || quiet_cli(second)) return {false, "train-sim failed"};
  std::size_t train_files = 0;
  const bool train_same = same_dirs(dir / "run1", dir / "run2", train_files);

  // Scoring: a small clip corpus scored with 1 and 8 workers.
  std::vector<SampleManifestEntry> entries;
  for (int s = 0; s < 6; ++s) {
    const std::string id = "v" + std::to_string(s);
    fs::create_directories(dir / id);
    for (int t = 0; t < 3; ++t) {
      write_pgm(dir / id / ("f" + std::to_string(t) + ".pgm"),
                vt::shifted_pair(48, (s + t) % 3, static_cast<std::uint64_t>(s)).second);
    }
    entries.push_back({id, id, "what happens in clip " + std::to_string(s) + "?", "something moves"});
  }
  {
    std::ofstream m(dir / "manifest.jsonl");
    write_manifest(m, entries);
  }
  bool score_same = true;
  for (const char* cmd : {"score-visual", "score-text"}) {
    std::string outs[2];
    int w = 0;
    for (const char* workers : {"1", "8"}) {
      const std::string out = d + "/" + cmd + workers + ".jsonl";
      std::vector<std::string> args{cmd, "--manifest", d + "/manifest.jsonl", "--out", out};
      if (std::string(cmd) == "score-visual") {
        args.insert(args.end(), {"--workers", workers});
      } else {
        args.push_back("--nll-builtin");
      }
      if (quiet_cli(args)) return {false, std::string(cmd) + " failed"};
      outs[w++] = slurp(out);
    }
    score_same &= outs[0] == outs[1] && !outs[0].empty();
  }
  return {train_same && score_same && train_files > 0,
          fmt("train-sim reruns identical over %zu files: %s; scoring identical across worker counts: %s",
              train_files, train_same ? "yes" : "no", score_same ? "yes" : "no")};
}

Verdict planted_difficulty() {
  const auto corpus = make_synthetic_corpus(4000, 13);
  const auto grid = build_grid(corpus.visual, corpus.text, 4);
  const LearnerParams learner;
  const Competence frozen{0.5, 0.5};
  Rng rng = derive_rng(13, 0x0c);
  std::vector<ScoredId> scores, outcomes;
  for (const auto& s : grid.samples()) {
    scores.push_back({s.id, s.d_visual});
    outcomes.push_back({s.id, bernoulli(rng, success_prob(learner, frozen, s.d_visual, s.d_text)) ? 1.0 : 0.0});
  }
  const auto bins = correlate(scores, outcomes, 20);
  std::vector<double> index, acc;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    index.push_back(static_cast<double>(b));
    acc.push_back(bins[b].accuracy);
  }
  const double rho = spearman(index, acc);
  return {rho <= -0.8, fmt("Spearman(bin, accuracy) = %.4f over %zu bins (first %.3f, last %.3f)", rho, bins.size(),
                           acc.front(), acc.back())};
}

}  // namespace

int main() {
  setenv("CURL_LOG", "error", 1);
  const auto t0 = Clock::now();
  report(1, "flow oracle", flow_oracle);
  report(2, "entropy analytics", entropy_analytics);
  report(3, "quantile normalization", quantile_normalization);
  report(4, "grid marginals", grid_marginals);
  report(5, "scheduler gating", scheduler_gating);
  report(6, "LCS arithmetic", lcs_arithmetic);
  report(7, "GRPO advantages", grpo_advantages);
  report(8, "gradient check", gradient_check);
  report(9, "qualitative ordering", qualitative_ordering);
  report(10, "revisiting ablation", revisiting_ablation);
  report(11, "K sweep", k_sweep);
  report(12, "determinism", determinism);
  report(13, "planted difficulty", planted_difficulty);
  std::printf("%d/13 criteria passed in %.1f s\n", 13 - failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
