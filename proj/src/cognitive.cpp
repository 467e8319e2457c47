#include "vcurl/cognitive.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>

#include <json.hpp>

namespace vcurl {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char ch : text) {
    if (ch >= 0x80 || std::isalnum(ch)) {
      word.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
    } else if (std::isspace(ch)) {
      flush();
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(ch));
    }
  }
  flush();
  return tokens;
}

NgramLm::NgramLm(int order, double k) : order_(order), k_(k) {
  if (order < 1) throw Error(Errc::config_invalid, "n-gram order must be >= 1");
  if (!(k > 0.0)) throw Error(Errc::config_invalid, "add-k constant must be > 0");
}

void NgramLm::add_vocabulary(std::span<const std::string> tokens) {
  for (const auto& t : tokens) {
    if (index_.emplace(t, static_cast<int>(vocab_.size())).second) vocab_.push_back(t);
  }
}

int NgramLm::token_id(const std::string& token) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  if (auto it = index_.find(kUnk); it != index_.end()) return it->second;
  throw Error(Errc::out_of_range, "token '" + token + "' not in vocabulary");
}

std::string NgramLm::context_key(std::span<const std::string> history) const {
  // Last n-1 tokens, left-padded with <s>, joined by a unit separator.
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  std::string key;
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t missing = need > history.size() ? need - history.size() : 0;
    const std::string& tok = i < missing ? std::string(kBos)
                                         : (index_.count(history[history.size() - need + i])
                                                ? history[history.size() - need + i]
                                                : std::string(kUnk));
    key += tok;
    key.push_back('\x1f');
  }
  return key;
}

void NgramLm::train(std::span<const std::vector<std::string>> sentences) {
  const std::string unk = kUnk;
  add_vocabulary(std::span<const std::string>(&unk, 1));
  for (const auto& s : sentences) add_vocabulary(s);
  for (const auto& s : sentences) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      const auto key = context_key(std::span<const std::string>(s.data(), t));
      ++counts_[key][token_id(s[t])];
      ++totals_[key];
    }
  }
}

double NgramLm::prob(std::span<const std::string> history, const std::string& token) const {
  if (vocab_.empty()) throw Error(Errc::config_invalid, "language model has no vocabulary");
  const int id = token_id(token);
  const auto key = context_key(history);
  double c = 0.0, total = 0.0;
  if (auto it = totals_.find(key); it != totals_.end()) {
    total = static_cast<double>(it->second);
    const auto& row = counts_.at(key);
    if (auto jt = row.find(id); jt != row.end()) c = static_cast<double>(jt->second);
  }
  return (c + k_) / (total + k_ * static_cast<double>(vocab_.size()));
}

double NgramLm::sequence_nll(std::span<const std::string> context,
                             std::span<const std::string> target) const {
  if (target.empty()) throw Error(Errc::empty_target, "target sequence is empty");
  std::vector<std::string> history(context.begin(), context.end());
  double nll = 0.0;
  for (const auto& w : target) {
    nll -= std::log(prob(history, w));
    history.push_back(w);
  }
  return nll;
}

BuiltinNllProvider BuiltinNllProvider::train(std::span<const SampleManifestEntry> entries,
                                             int order, double k) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(2 * entries.size());
  for (const auto& e : entries) {
    auto q = tokenize(e.question);
    auto a = tokenize(e.answer);
    sentences.push_back(a);
    q.insert(q.end(), a.begin(), a.end());
    sentences.push_back(std::move(q));
  }
  NgramLm lm(order, k);
  lm.train(sentences);
  return BuiltinNllProvider(std::move(lm));
}

NllPair BuiltinNllProvider::evaluate(const NllRequest& request) const {
  const auto q = tokenize(request.question);
  const auto a = tokenize(request.answer);
  if (a.empty()) throw Error(Errc::empty_target, request.id + ": answer has no tokens");
  return {request.id, lm_.sequence_nll(q, a), lm_.sequence_nll({}, a)};
}

FileNllProvider FileNllProvider::parse(std::istream& in) {
  using json = nlohmann::json;
  FileNllProvider p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(Errc::malformed_record, "line " + std::to_string(line_no));
    }
    for (const char* key : {"id", "nll_conditional", "nll_unconditional"}) {
      if (!obj.is_object() || !obj.contains(key)) {
        throw Error(Errc::missing_field, std::string(key) + " (line " + std::to_string(line_no) + ")");
      }
    }
    if (!obj["id"].is_string() || !obj["nll_conditional"].is_number() ||
        !obj["nll_unconditional"].is_number()) {
      throw Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": field types");
    }
    NllPair pair{obj["id"].get<std::string>(), obj["nll_conditional"].get<double>(),
                 obj["nll_unconditional"].get<double>()};
    if (!p.pairs_.emplace(pair.id, pair).second) throw Error(Errc::duplicate_id, pair.id);
  }
  return p;
}

FileNllProvider FileNllProvider::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open NLL file " + path.string());
  return parse(in);
}

NllPair FileNllProvider::evaluate(const NllRequest& request) const {
  auto it = pairs_.find(request.id);
  if (it == pairs_.end()) throw Error(Errc::provider_missing_id, request.id);
  return it->second;
}

double calibrated_surprisal(double cond_nll, double uncond_nll) {
  if (!std::isfinite(cond_nll) || !std::isfinite(uncond_nll)) {
    throw Error(Errc::non_finite_input, "NLL values must be finite");
  }
  return cond_nll - uncond_nll;
}

TextScoreReport score_corpus(std::span<const SampleManifestEntry> entries,
                             const NllProvider& provider) {
  TextScoreReport report;
  for (const auto& e : entries) {
    try {
      const auto pair = provider.evaluate({e.id, e.question, e.answer});
      report.scores.push_back({e.id, calibrated_surprisal(pair.nll_conditional,
                                                          pair.nll_unconditional)});
    } catch (const Error& err) {
      report.failures.push_back({e.id, err.code(), err.detail()});
    }
  }
  return report;
}

}  // namespace vcurl
