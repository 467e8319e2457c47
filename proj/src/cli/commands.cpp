#include "vcurl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vcurl/grid.hpp"
#include "vcurl/scheduler.hpp"

namespace vcurl::cli {

using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static const auto log = [] {
    auto l = spdlog::get("vcurl");
    if (!l) l = spdlog::stderr_color_mt("vcurl");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::info);
    if (const char* env = std::getenv("CURL_LOG")) {
      const auto level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; only accept "off" when spelled out.
      if (level != spdlog::level::off || std::string(env) == "off") l->set_level(level);
    }
    return l;
  }();
  return log;
}

int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string full(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  return out;
}

template <class Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception&) {
      throw Error(Errc::malformed_record, path.string() + " line " + std::to_string(no));
    }
    if (!obj.is_object()) throw Error(Errc::malformed_record, path.string() + " line " + std::to_string(no));
    fn(obj, no);
  }
}

template <class T>
T field(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::missing_field, std::string(key) + " (line " + std::to_string(line) + ")");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::malformed_record, std::string(key) + " (line " + std::to_string(line) + ")");
  }
}

void write_failures(const fs::path& out, std::vector<SampleFailure> failures) {
  std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  auto f = open_out(failures_path(out));
  for (const auto& e : failures) {
    f << json{{"id", e.id}, {"code", std::string(to_string(e.code))}, {"detail", e.detail}}.dump() << '\n';
    logger()->warn("sample {} failed: {} {}", e.id, to_string(e.code), e.detail);
  }
}

// ---------------------------------------------------------------- score-visual

struct ScoreVisualOpts {
  std::string manifest, out;
  std::string backend = "farneback";
  int workers = 0;
  bool verbose = false;
};

int cmd_score_visual(const ScoreVisualOpts& o) {
  FlowConfig flow;
  flow.backend = parse_flow_backend(o.backend);
  flow.validate();
  const fs::path manifest = o.manifest;
  const auto entries = load_manifest(manifest);
  const std::size_t n = entries.size();
  std::vector<std::optional<VisualProxies>> results(n);
  std::vector<std::optional<SampleFailure>> failed(n);
  std::vector<std::exception_ptr> crashed(n);
  const int threads = resolve_workers(o.workers);
  logger()->info("score-visual: {} samples, {} workers, {} flow", n, threads, o.backend);

  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto seq = load_frames(resolve_frames_dir(manifest, e), e.id);
      results[static_cast<std::size_t>(i)] = score_visual(seq, flow, ExecPolicy::serial);
      const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      logger()->debug("{}: {} frames in {:.1f} ms", e.id, seq.count(), ms);
    } catch (const Error& err) {
      failed[static_cast<std::size_t>(i)] = SampleFailure{e.id, err.code(), err.detail()};
    } catch (...) {
      crashed[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& c : crashed) {
    if (c) std::rethrow_exception(c);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return entries[a].id < entries[b].id; });
  auto out = open_out(o.out);
  std::vector<SampleFailure> failures;
  std::size_t written = 0;
  for (auto i : order) {
    if (failed[i]) {
      failures.push_back(*failed[i]);
      continue;
    }
    const auto& r = *results[i];
    json rec = {{"id", entries[i].id}, {"phi_flow", r.phi_flow}, {"phi_ent", r.phi_ent}};
    if (o.verbose) {
      rec["motion"] = r.per_frame_motion;
      rec["entropy"] = r.per_frame_entropy;
    }
    out << rec.dump() << '\n';
    ++written;
  }
  write_failures(o.out, failures);
  logger()->info("score-visual: wrote {} records, {} failures", written, failures.size());
  return kOk;
}

// ------------------------------------------------------------------ score-text

struct ScoreTextOpts {
  std::string manifest, out, nll_file;
  bool builtin = false;
  int order = 2;
  double smoothing = 0.5;
};

int cmd_score_text(const ScoreTextOpts& o) {
  auto entries = load_manifest(o.manifest);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  TextScoreReport report;
  if (o.builtin) {
    const auto provider = BuiltinNllProvider::train(entries, o.order, o.smoothing);
    logger()->info("score-text: built-in {}-gram LM, vocabulary {}", o.order, provider.model().vocab_size());
    report = score_corpus(entries, provider);
  } else {
    const auto provider = FileNllProvider::load(o.nll_file);
    logger()->info("score-text: {} provider pairs from {}", provider.size(), o.nll_file);
    report = score_corpus(entries, provider);
  }
  std::sort(report.scores.begin(), report.scores.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  auto out = open_out(o.out);
  for (const auto& s : report.scores) out << json{{"id", s.id}, {"s_cog", s.s_cog}}.dump() << '\n';
  write_failures(o.out, report.failures);
  logger()->info("score-text: wrote {} records, {} failures", report.scores.size(), report.failures.size());
  return kOk;
}

// ------------------------------------------------------------------ build-grid

struct BuildGridOpts {
  std::string visual, text, out;
  int k = 4;
  double alpha = 0.5;
};

void print_populations(const CurriculumGrid& g) {
  std::cout << "bucket populations (rows: visual level, columns: cognitive level)\n";
  for (int i = 0; i < g.k(); ++i) {
    for (int j = 0; j < g.k(); ++j) std::cout << (j ? "\t" : "") << g.population({i, j});
    std::cout << '\n';
  }
}

int cmd_build_grid(const BuildGridOpts& o) {
  const auto visual = load_visual_scores(o.visual);
  const auto text = load_text_scores(o.text);
  const auto grid = build_grid(visual, text, o.k, o.alpha);
  auto out = open_out(o.out);
  write_grid(out, grid);
  logger()->info("build-grid: {} samples into {}x{} buckets", grid.samples().size(), grid.k(), grid.k());
  print_populations(grid);
  return kOk;
}

// ------------------------------------------------------------ experiment flags

struct ExperimentOpts {
  std::vector<std::string> strategies{"wavefront"};
  std::uint64_t seed = 0;
  int runs = 1;
  int steps = 2000;
  double gamma = 0.9;
  double threshold = 0.5;
  double rho = 0.1;
  double beta = 0.04;
  double clip_eps = 0.2;
  int batch = 16;
  std::string expansion = "manhattan";
  std::string revisit = "structured";
  bool keep_frontier = false;
  bool continue_after = false;
  double reward_threshold = 0.8;
  int window = 50;
  int workers = 0;
};

void add_experiment_flags(CLI::App* cmd, ExperimentOpts& o, bool many_strategies) {
  if (many_strategies) {
    cmd->add_option("--strategy", o.strategies, "wavefront, random, scalar_length, scalar_generation_sim")
        ->delimiter(',');
  } else {
    cmd->add_option("--strategy", o.strategies[0], "curriculum strategy");
  }
  cmd->add_option("--seed", o.seed, "first seed");
  cmd->add_option("--runs", o.runs, "number of consecutive seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", o.steps, "step budget per run")->check(CLI::NonNegativeNumber);
  cmd->add_option("--gamma", o.gamma, "LCS decay");
  cmd->add_option("--threshold", o.threshold, "LCS expansion threshold");
  cmd->add_option("--rho", o.rho, "revisit probability");
  cmd->add_option("--beta", o.beta, "KL coefficient");
  cmd->add_option("--clip-eps", o.clip_eps, "ratio clip");
  cmd->add_option("--batch", o.batch, "samples per batch");
  cmd->add_option("--expansion", o.expansion, "manhattan or manhattan_plus_diagonal");
  cmd->add_option("--revisit", o.revisit, "structured or random");
  cmd->add_flag("--keep-frontier", o.keep_frontier, "mastered buckets stay sampleable");
  cmd->add_flag("--continue-after-exhaustion", o.continue_after, "keep revisiting once all buckets are mastered");
  cmd->add_option("--reward-threshold", o.reward_threshold, "grid reward defining steps_to_threshold");
  cmd->add_option("--window", o.window, "trailing window for the reward threshold");
  cmd->add_option("--workers", o.workers, "parallel runs (0: all cores)")->check(CLI::NonNegativeNumber);
}

ExperimentConfig make_config(const ExperimentOpts& o, Strategy strategy) {
  ExperimentConfig c;
  c.strategy = strategy;
  c.seeds.clear();
  for (int r = 0; r < o.runs; ++r) c.seeds.push_back(o.seed + static_cast<std::uint64_t>(r));
  c.steps = o.steps;
  c.scheduler.gamma = o.gamma;
  c.scheduler.threshold = o.threshold;
  c.scheduler.revisit_prob = o.rho;
  c.scheduler.batch_size = o.batch;
  c.scheduler.expansion = parse_expansion(o.expansion);
  c.scheduler.revisit = parse_revisit_mode(o.revisit);
  c.scheduler.retire_on_expand = !o.keep_frontier;
  c.beta = o.beta;
  c.clip_eps = o.clip_eps;
  c.continue_after_exhaustion = o.continue_after;
  c.reward_threshold = o.reward_threshold;
  c.window = o.window;
  c.validate();
  return c;
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const auto& n : names) {
    const auto s = parse_strategy(n);
    if (std::find(out.begin(), out.end(), s) != out.end()) throw UsageError("strategy " + n + " given twice");
    out.push_back(s);
  }
  if (out.empty()) throw UsageError("no strategy given");
  return out;
}

std::string opt_text(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : "NA"; }

// ------------------------------------------------------------------- train-sim

struct TrainSimOpts {
  std::string grid, out;
  ExperimentOpts exp;
  std::int64_t stop_after = -1;
  bool resume = false;
};

std::string run_stem(Strategy s, std::uint64_t seed) {
  return to_string(s) + "_seed" + std::to_string(seed);
}

void write_summary(const fs::path& dir, const std::vector<RunMetrics>& runs) {
  auto f = open_out(dir / "summary.tsv");
  f << "strategy\tseed\tsteps_run\tsteps_to_threshold\texhausted_at\tfinal_reward\tforgetting_gap\tc_visual\tc_text\n";
  for (const auto& m : runs) {
    f << to_string(m.strategy) << '\t' << m.seed << '\t' << m.steps_run << '\t' << opt_text(m.steps_to_threshold)
      << '\t' << opt_text(m.exhausted_at) << '\t' << full(m.final_mean_reward) << '\t' << full(m.forgetting_gap)
      << '\t' << full(m.final_competence.visual) << '\t' << full(m.final_competence.text) << '\n';
  }
}

int cmd_train_sim(const TrainSimOpts& o) {
  const auto grid = load_grid(o.grid);
  const auto strategies = parse_strategies(o.exp.strategies);
  std::vector<ExperimentConfig> configs;
  for (auto s : strategies) configs.push_back(make_config(o.exp, s));
  const fs::path dir = o.out;
  fs::create_directories(dir);

  struct Job {
    std::size_t config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    for (auto seed : configs[c].seeds) jobs.push_back({c, seed});
  }
  std::vector<RunMetrics> metrics(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const int threads = resolve_workers(o.exp.workers);
  logger()->info("train-sim: {} runs over a {}x{} grid, {} workers", jobs.size(), grid.k(), grid.k(), threads);

  const auto nj = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t t = 0; t < nj; ++t) {
    const auto& job = jobs[static_cast<std::size_t>(t)];
    const auto& cfg = configs[job.config];
    const auto stem = run_stem(cfg.strategy, job.seed);
    const auto snap_path = dir / ("snapshot_" + stem + ".json");
    try {
      std::optional<SimulationRun> run;
      if (o.resume) {
        std::ifstream in(snap_path);
        if (!in) throw Error(Errc::io, "no snapshot " + snap_path.string());
        std::stringstream text;
        text << in.rdbuf();
        run.emplace(SimulationRun::restore(text.str(), grid, cfg));
      } else {
        run.emplace(grid, cfg, job.seed);
      }
      const auto mode = o.resume ? std::ios::app : std::ios::trunc;
      std::ofstream trace(dir / ("trace_" + stem + ".jsonl"), std::ios::binary | mode);
      std::optional<std::ofstream> events;
      if (cfg.strategy == Strategy::wavefront) events.emplace(dir / ("events_" + stem + ".jsonl"), std::ios::binary | mode);
      if (!trace || (events && !*events)) throw Error(Errc::io, "cannot write run files for " + stem);

      const auto flush = [&] {
        auto m = run->metrics(true);
        for (const auto& r : m.trace) trace << trace_to_json(r) << '\n';
        if (events) {
          for (const auto& e : m.events) *events << event_to_json(e) << '\n';
        }
        return m;
      };
      bool paused = false;
      while (!run->finished()) {
        if (o.stop_after >= 0 && run->steps_done() >= o.stop_after) {
          paused = true;
          break;
        }
        if (!run->step()) break;
        if (run->steps_done() % 256 == 0) flush();
      }
      auto m = flush();
      // With --stop-after every run leaves a snapshot, finished or not, so
      // --resume can pick up the whole set.
      if (paused || o.stop_after >= 0) {
        auto snap = open_out(snap_path);
        snap << run->snapshot() << '\n';
      } else {
        fs::remove(snap_path);
      }
      metrics[static_cast<std::size_t>(t)] = std::move(m);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  write_summary(dir, metrics);
  std::cout << "strategy\truns\tmedian_steps_to_threshold\tmean_final_reward\tmean_c_visual\n";
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<RunMetrics> group;
    for (std::size_t t = 0; t < jobs.size(); ++t) {
      if (jobs[t].config == c) group.push_back(metrics[t]);
    }
    double reward = 0.0, cv = 0.0;
    for (const auto& m : group) {
      reward += m.final_mean_reward;
      cv += m.final_competence.visual;
    }
    const auto n = static_cast<double>(group.size());
    std::cout << to_string(configs[c].strategy) << '\t' << group.size() << '\t'
              << fmt6(median_steps_to_threshold(group, configs[c].steps)) << '\t' << fmt6(reward / n) << '\t'
              << fmt6(cv / n) << '\n';
  }
  return kOk;
}

// ------------------------------------------------------------------- correlate

struct CorrelateOpts {
  std::string scores, grid, outcomes, out;
  std::string field = "score";
  std::string axis = "visual";
  int bins = 20;
};

int cmd_correlate(const CorrelateOpts& o) {
  std::vector<ScoredId> scores;
  if (!o.grid.empty()) {
    const auto grid = load_grid(o.grid);
    for (const auto& s : grid.samples()) scores.push_back({s.id, o.axis == "visual" ? s.d_visual : s.d_text});
  } else {
    scores = load_scored_ids(o.scores, o.field);
  }
  const auto outcomes = load_scored_ids(o.outcomes, "outcome");
  const auto bins = correlate(scores, outcomes, o.bins);

  std::vector<double> index, accuracy;
  std::ostringstream table;
  table << "bin\tcenter\taccuracy\tn\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    table << b << '\t' << fmt6(bins[b].center) << '\t' << fmt6(bins[b].accuracy) << '\t' << bins[b].n << '\n';
    index.push_back(static_cast<double>(b));
    accuracy.push_back(bins[b].accuracy);
  }
  const double rho = spearman(index, accuracy);
  std::cout << table.str() << "spearman(bin, accuracy)\t" << fmt6(rho) << '\n';
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    f << "bin\tcenter\taccuracy\tn\n";
    for (std::size_t b = 0; b < bins.size(); ++b) {
      f << b << '\t' << full(bins[b].center) << '\t' << full(bins[b].accuracy) << '\t' << bins[b].n << '\n';
    }
  }
  return kOk;
}

// --------------------------------------------------------------------- sweep-k

struct SweepOpts {
  std::string visual, text, out;
  std::vector<int> ks{3, 4, 5};
  double alpha = 0.5;
  ExperimentOpts exp;
};

int cmd_sweep_k(const SweepOpts& o) {
  const auto visual = load_visual_scores(o.visual);
  const auto text = load_text_scores(o.text);
  const auto cfg = make_config(o.exp, parse_strategy(o.exp.strategies.at(0)));
  const auto rows = sweep_k(cfg, visual, text, o.ks, o.alpha, o.exp.workers);

  std::ostringstream report;
  report << "K\truns\tmedian_steps_to_threshold\tmean_final_reward\tmean_exhausted_at\tviolations\n";
  std::size_t violations = 0;
  for (const auto& r : rows) {
    double reward = 0.0, exhausted = 0.0;
    int n_exhausted = 0;
    for (const auto& m : r.runs) {
      reward += m.final_mean_reward;
      if (m.exhausted_at) {
        exhausted += static_cast<double>(*m.exhausted_at);
        ++n_exhausted;
      }
    }
    report << r.k << '\t' << r.runs.size() << '\t' << fmt6(median_steps_to_threshold(r.runs, cfg.steps)) << '\t'
           << fmt6(reward / static_cast<double>(r.runs.size())) << '\t'
           << (n_exhausted ? fmt6(exhausted / n_exhausted) : std::string("NA")) << '\t' << r.violations << '\n';
    violations += r.violations;
  }
  std::cout << report.str();
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    f << report.str();
  }
  if (violations) {
    std::cerr << "error code=InvariantViolation detail=\"" << violations << " scheduler trace violations\"\n";
    return kData;
  }
  return kOk;
}

// ---------------------------------------------------------------- synthetic data

struct SynthOpts {
  std::string out_dir;
  std::size_t n = 480;
  std::uint64_t seed = 0;
};

int cmd_synth_scores(const SynthOpts& o) {
  const auto corpus = make_synthetic_corpus(o.n, o.seed);
  const fs::path dir = o.out_dir;
  auto v = open_out(dir / "visual.jsonl");
  for (const auto& s : corpus.visual) v << json{{"id", s.id}, {"phi_flow", s.phi_flow}, {"phi_ent", s.phi_ent}}.dump() << '\n';
  auto t = open_out(dir / "text.jsonl");
  for (const auto& s : corpus.text) t << json{{"id", s.id}, {"s_cog", s.s_cog}}.dump() << '\n';
  logger()->info("synth-scores: {} samples into {}", o.n, dir.string());
  return kOk;
}

struct SynthOutcomesOpts {
  std::string grid, out;
  std::uint64_t seed = 0;
  double c_visual = 0.5, c_text = 0.5;
};

int cmd_synth_outcomes(const SynthOutcomesOpts& o) {
  const auto grid = load_grid(o.grid);
  const LearnerParams lp;
  const Competence c{o.c_visual, o.c_text};
  Rng rng = derive_rng(o.seed, 0x0c);
  auto f = open_out(o.out);
  for (const auto& s : grid.samples()) {
    const bool ok = bernoulli(rng, success_prob(lp, c, s.d_visual, s.d_text));
    f << json{{"id", s.id}, {"outcome", ok ? 1 : 0}}.dump() << '\n';
  }
  return kOk;
}

void report_error(std::string_view code, const std::string& detail) {
  std::cerr << "error code=" << code << " detail=" << json(detail).dump() << '\n';
}

}  // namespace

fs::path failures_path(const fs::path& out) {
  auto p = out;
  p += ".failures.jsonl";
  return p;
}

std::vector<VisualScore> load_visual_scores(const fs::path& path) {
  std::vector<VisualScore> out;
  for_each_record(path, [&](const json& obj, std::size_t line) {
    out.push_back({field<std::string>(obj, "id", line), field<double>(obj, "phi_flow", line),
                   field<double>(obj, "phi_ent", line)});
  });
  return out;
}

std::vector<TextScore> load_text_scores(const fs::path& path) {
  std::vector<TextScore> out;
  for_each_record(path, [&](const json& obj, std::size_t line) {
    out.push_back({field<std::string>(obj, "id", line), field<double>(obj, "s_cog", line)});
  });
  return out;
}

std::vector<ScoredId> load_scored_ids(const fs::path& path, const std::string& name) {
  std::vector<ScoredId> out;
  for_each_record(path, [&](const json& obj, std::size_t line) {
    out.push_back({field<std::string>(obj, "id", line), field<double>(obj, name.c_str(), line)});
  });
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"vcurl: two-axis video curriculum toolkit", "vcurl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vcurl 1.0");

  ScoreVisualOpts sv;
  auto* c_sv = app.add_subcommand("score-visual", "motion and difference-entropy proxies per sample");
  c_sv->add_option("--manifest", sv.manifest, "sample manifest (JSON lines)")->required();
  c_sv->add_option("--out", sv.out, "score file")->required();
  c_sv->add_option("--flow-backend", sv.backend, "farneback or horn_schunck");
  c_sv->add_option("--workers", sv.workers, "parallel samples (0: all cores)")->check(CLI::NonNegativeNumber);
  c_sv->add_flag("--verbose", sv.verbose, "include per-frame arrays");

  ScoreTextOpts st;
  auto* c_st = app.add_subcommand("score-text", "calibrated surprisal per sample");
  c_st->add_option("--manifest", st.manifest, "sample manifest (JSON lines)")->required();
  c_st->add_option("--out", st.out, "score file")->required();
  auto* nll_file = c_st->add_option("--nll-file", st.nll_file, "provider pairs {id, nll_conditional, nll_unconditional}");
  auto* nll_builtin = c_st->add_flag("--nll-builtin", st.builtin, "train the built-in n-gram LM on the corpus");
  nll_file->excludes(nll_builtin);
  nll_builtin->excludes(nll_file);
  c_st->add_option("--order", st.order, "n-gram order of the built-in LM")->check(CLI::PositiveNumber);
  c_st->add_option("--smoothing", st.smoothing, "add-k constant of the built-in LM");

  BuildGridOpts bg;
  auto* c_bg = app.add_subcommand("build-grid", "quantile-normalize and bucket scored samples");
  c_bg->add_option("--visual", bg.visual, "visual score file")->required();
  c_bg->add_option("--text", bg.text, "text score file")->required();
  c_bg->add_option("--out", bg.out, "grid file")->required();
  c_bg->add_option("--k", bg.k, "grid side")->check(CLI::Range(1, kMaxGridSide));
  c_bg->add_option("--alpha", bg.alpha, "flow weight in the visual axis")->check(CLI::Range(0.0, 1.0));

  TrainSimOpts ts;
  auto* c_ts = app.add_subcommand("train-sim", "simulate curriculum training on a grid");
  c_ts->add_option("--grid", ts.grid, "grid file")->required();
  c_ts->add_option("--out", ts.out, "output directory")->required();
  add_experiment_flags(c_ts, ts.exp, true);
  c_ts->add_option("--stop-after", ts.stop_after, "pause every run at this step and write snapshots");
  c_ts->add_flag("--resume", ts.resume, "continue runs from the snapshots in --out");

  CorrelateOpts co;
  auto* c_co = app.add_subcommand("correlate", "bin accuracy against a difficulty score");
  auto* co_scores = c_co->add_option("--scores", co.scores, "score records");
  auto* co_grid = c_co->add_option("--grid", co.grid, "take scores from a grid file");
  co_scores->excludes(co_grid);
  c_co->add_option("--field", co.field, "score field of --scores");
  c_co->add_option("--axis", co.axis, "grid axis: visual or text")->check(CLI::IsMember({"visual", "text"}));
  c_co->add_option("--outcomes", co.outcomes, "records {id, outcome}")->required();
  c_co->add_option("--bins", co.bins, "quantile bins");
  c_co->add_option("--out", co.out, "TSV table");

  SweepOpts sk;
  auto* c_sk = app.add_subcommand("sweep-k", "rerun an experiment across grid sizes");
  c_sk->add_option("--visual", sk.visual, "visual score file")->required();
  c_sk->add_option("--text", sk.text, "text score file")->required();
  c_sk->add_option("--k", sk.ks, "grid sides, comma separated")->delimiter(',');
  c_sk->add_option("--alpha", sk.alpha, "flow weight")->check(CLI::Range(0.0, 1.0));
  c_sk->add_option("--out", sk.out, "TSV report");
  add_experiment_flags(c_sk, sk.exp, false);

  SynthOpts sy;
  auto* c_sy = app.add_subcommand("synth-scores", "write a synthetic visual/text score corpus");
  c_sy->add_option("--out", sy.out_dir, "output directory")->required();
  c_sy->add_option("--n", sy.n, "samples")->check(CLI::PositiveNumber);
  c_sy->add_option("--seed", sy.seed, "seed");

  SynthOutcomesOpts so;
  auto* c_so = app.add_subcommand("synth-outcomes", "draw 0/1 outcomes from a frozen synthetic learner");
  c_so->add_option("--grid", so.grid, "grid file")->required();
  c_so->add_option("--out", so.out, "outcome records")->required();
  c_so->add_option("--seed", so.seed, "seed");
  c_so->add_option("--c-visual", so.c_visual, "learner visual competence");
  c_so->add_option("--c-text", so.c_text, "learner text competence");

  try {
    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("Usage", e.what());
    return kUsage;
  }

  try {
    if (*c_sv) return cmd_score_visual(sv);
    if (*c_st) {
      if (!st.builtin && st.nll_file.empty()) throw UsageError("one of --nll-file or --nll-builtin is required");
      return cmd_score_text(st);
    }
    if (*c_bg) return cmd_build_grid(bg);
    if (*c_ts) {
      if (ts.resume && ts.stop_after >= 0) throw UsageError("--resume and --stop-after are exclusive");
      return cmd_train_sim(ts);
    }
    if (*c_co) {
      if (co.scores.empty() && co.grid.empty()) throw UsageError("one of --scores or --grid is required");
      return cmd_correlate(co);
    }
    if (*c_sk) return cmd_sweep_k(sk);
    if (*c_sy) return cmd_synth_scores(sy);
    if (*c_so) return cmd_synth_outcomes(so);
  } catch (const UsageError& e) {
    report_error("Usage", e.what());
    return kUsage;
  } catch (const Error& e) {
    report_error(to_string(e.code()), e.detail());
    return e.code() == Errc::config_invalid ? kUsage : kData;
  } catch (const fs::filesystem_error& e) {
    report_error(to_string(Errc::io), e.what());
    return kData;
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return kInternal;
  }
  report_error("Usage", "no command");
  return kUsage;
}

}  // namespace vcurl::cli
