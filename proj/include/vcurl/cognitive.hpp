#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcurl/error.hpp"
#include "vcurl/ingest.hpp"

namespace vcurl {

/// Lower-cases ASCII letters; runs of letters/digits (and any non-ASCII
/// bytes) form words, every other non-space character is its own token.
std::vector<std::string> tokenize(const std::string& text);

/// Add-k smoothed n-gram model: p(w | h) = (c(h, w) + k) / (c(h) + k V).
/// Histories shorter than n-1 are left-padded with "<s>". Tokens outside
/// the vocabulary map to "<unk>" when it is part of the vocabulary.
class NgramLm {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kUnk = "<unk>";

  explicit NgramLm(int order = 2, double k = 0.5);

  void add_vocabulary(std::span<const std::string> tokens);
  /// Counts every n-gram of each sentence and grows the vocabulary
  /// (including "<unk>").
  void train(std::span<const std::vector<std::string>> sentences);

  double prob(std::span<const std::string> history, const std::string& token) const;

  /// sum_t -ln p(w_t | last n-1 tokens of context ++ w_<t). Natural log.
  double sequence_nll(std::span<const std::string> context,
                      std::span<const std::string> target) const;

  int order() const noexcept { return order_; }
  double smoothing() const noexcept { return k_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }

 private:
  int token_id(const std::string& token) const;
  std::string context_key(std::span<const std::string> history) const;

  int order_;
  double k_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, std::unordered_map<int, std::uint64_t>> counts_;
  std::unordered_map<std::string, std::uint64_t> totals_;
};

struct NllRequest {
  std::string id;
  std::string question;
  std::string answer;
};

/// Conditional (answer given question) and unconditional answer NLL in
/// one consistent unit.
struct NllPair {
  std::string id;
  double nll_conditional = 0.0;
  double nll_unconditional = 0.0;
};

class NllProvider {
 public:
  virtual ~NllProvider() = default;
  virtual NllPair evaluate(const NllRequest& request) const = 0;
};

/// Bigram (by default) model trained on the corpus' own text: every
/// question+answer and every answer alone is one training sentence.
class BuiltinNllProvider final : public NllProvider {
 public:
  explicit BuiltinNllProvider(NgramLm lm) : lm_(std::move(lm)) {}
  static BuiltinNllProvider train(std::span<const SampleManifestEntry> entries, int order = 2,
                                  double k = 0.5);

  NllPair evaluate(const NllRequest& request) const override;
  const NgramLm& model() const noexcept { return lm_; }

 private:
  NgramLm lm_;
};

/// Externally computed NLLs read from line-delimited
/// {id, nll_conditional, nll_unconditional} records.
class FileNllProvider final : public NllProvider {
 public:
  static FileNllProvider parse(std::istream& in);
  static FileNllProvider load(const fs::path& path);

  NllPair evaluate(const NllRequest& request) const override;
  std::size_t size() const noexcept { return pairs_.size(); }

 private:
  std::unordered_map<std::string, NllPair> pairs_;
};

/// Conditional minus unconditional NLL; negative values are kept.
double calibrated_surprisal(double cond_nll, double uncond_nll);

struct TextScore {
  std::string id;
  double s_cog = 0.0;
};

struct TextScoreReport {
  std::vector<TextScore> scores;
  std::vector<SampleFailure> failures;
};

/// One score per entry in input order; provider errors are recorded per id.
TextScoreReport score_corpus(std::span<const SampleManifestEntry> entries,
                             const NllProvider& provider);

}  // namespace vcurl
