#include "vcurl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace vcurl {

using json = nlohmann::json;

std::vector<double> quantile_normalize(std::span<const double> scores) {
  const std::size_t n = scores.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(Errc::non_finite_input, "score at position " + std::to_string(i));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> out(n);
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    // 1-based ranks lo+1..hi share their mean.
    const double rank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t t = lo; t < hi; ++t) out[order[t]] = rank / static_cast<double>(n);
    lo = hi;
  }
  return out;
}

BucketIndex assign_bucket(double d_visual, double d_text, int k) {
  if (k < 1) throw Error(Errc::config_invalid, "K must be >= 1");
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(d_visual) || !in_unit(d_text)) {
    throw Error(Errc::out_of_range, "difficulties must lie in [0, 1]");
  }
  // Right-closed levels (l/K, (l+1)/K]; the slack absorbs rounding in r/N * K.
  const auto level = [k](double d) {
    return std::clamp(static_cast<int>(std::ceil(d * k - 1e-9)) - 1, 0, k - 1);
  };
  return {level(d_visual), level(d_text)};
}

CurriculumGrid::CurriculumGrid(int k, double alpha, std::vector<ScoredSample> samples)
    : k_(k), alpha_(alpha), samples_(std::move(samples)) {
  if (k < 1 || k > kMaxGridSide) throw Error(Errc::config_invalid, "K must lie in [1, 8]");
  std::sort(samples_.begin(), samples_.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.id < b.id; });
  buckets_.assign(static_cast<std::size_t>(k * k), {});
  for (std::size_t s = 0; s < samples_.size(); ++s) {
    if (s > 0 && samples_[s].id == samples_[s - 1].id) throw Error(Errc::duplicate_id, samples_[s].id);
    if (!contains(samples_[s].bucket)) throw Error(Errc::out_of_range, samples_[s].id + ": bucket");
    buckets_[flat(samples_[s].bucket)].push_back(s);
  }
}

CurriculumGrid build_grid(std::span<const VisualScore> visual, std::span<const TextScore> text,
                          int k, double alpha) {
  if (k < 1 || k > kMaxGridSide) throw Error(Errc::config_invalid, "K must lie in [1, 8]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::out_of_range, "alpha must lie in [0, 1]");

  std::map<std::string, const VisualScore*> vis;
  for (const auto& v : visual) {
    if (!vis.emplace(v.id, &v).second) throw Error(Errc::duplicate_id, v.id);
  }
  std::map<std::string, const TextScore*> txt;
  for (const auto& t : text) {
    if (!txt.emplace(t.id, &t).second) throw Error(Errc::duplicate_id, t.id);
  }
  for (const auto& [id, _] : vis) {
    if (!txt.count(id)) throw Error(Errc::id_mismatch, id + " has no text score");
  }
  for (const auto& [id, _] : txt) {
    if (!vis.count(id)) throw Error(Errc::id_mismatch, id + " has no visual score");
  }

  std::vector<ScoredSample> samples;
  samples.reserve(vis.size());
  std::vector<double> flow, ent, cog;
  for (const auto& [id, v] : vis) {
    samples.push_back({id, v->phi_flow, v->phi_ent, txt.at(id)->s_cog, 0.0, 0.0, {}});
    flow.push_back(v->phi_flow);
    ent.push_back(v->phi_ent);
    cog.push_back(txt.at(id)->s_cog);
  }
  const auto q_flow = quantile_normalize(flow);
  const auto q_ent = quantile_normalize(ent);
  const auto q_cog = quantile_normalize(cog);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    samples[s].d_visual = fuse_visual(q_flow[s], q_ent[s], alpha);
    samples[s].d_text = q_cog[s];
    samples[s].bucket = assign_bucket(samples[s].d_visual, samples[s].d_text, k);
  }
  return CurriculumGrid(k, alpha, std::move(samples));
}

void write_grid(std::ostream& out, const CurriculumGrid& grid) {
  json doc;
  doc["K"] = grid.k();
  doc["alpha"] = grid.alpha();
  json buckets = json::array();
  for (int i = 0; i < grid.k(); ++i) {
    for (int j = 0; j < grid.k(); ++j) {
      json ids = json::array();
      for (auto s : grid.bucket({i, j})) ids.push_back(grid.samples()[s].id);
      buckets.push_back(std::move(ids));
    }
  }
  doc["buckets"] = std::move(buckets);
  json samples = json::array();
  for (const auto& s : grid.samples()) {
    samples.push_back({{"id", s.id},
                       {"d_visual", s.d_visual},
                       {"d_text", s.d_text},
                       {"bucket", {s.bucket.i, s.bucket.j}},
                       {"phi_flow", s.phi_flow},
                       {"phi_ent", s.phi_ent},
                       {"s_cog", s.s_cog}});
  }
  doc["samples"] = std::move(samples);
  out << doc.dump() << '\n';
}

CurriculumGrid read_grid(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
    const int k = doc.at("K").get<int>();
    const double alpha = doc.at("alpha").get<double>();
    std::vector<ScoredSample> samples;
    for (const auto& s : doc.at("samples")) {
      ScoredSample x;
      x.id = s.at("id").get<std::string>();
      x.d_visual = s.at("d_visual").get<double>();
      x.d_text = s.at("d_text").get<double>();
      x.bucket = {s.at("bucket").at(0).get<int>(), s.at("bucket").at(1).get<int>()};
      x.phi_flow = s.value("phi_flow", 0.0);
      x.phi_ent = s.value("phi_ent", 0.0);
      x.s_cog = s.value("s_cog", 0.0);
      samples.push_back(std::move(x));
    }
    return CurriculumGrid(k, alpha, std::move(samples));
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_record, std::string("grid document: ") + e.what());
  }
}

CurriculumGrid load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open grid file " + path.string());
  return read_grid(in);
}

}  // namespace vcurl
