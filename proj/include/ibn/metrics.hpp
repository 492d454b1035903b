#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ibn::metrics {

using Tokens = std::vector<std::string>;

// Lowercases, splits on whitespace and emits every punctuation character as
// its own token: "Hello, world!" -> {"hello", ",", "world", "!"}.
Tokens tokenize(std::string_view text);

struct TokenPair {
  Tokens candidate;
  Tokens reference;
};

// ---- BLEU -------------------------------------------------------------------

struct BleuConfig {
  int max_n = 2;
  std::vector<double> weights{0.5, 0.5};

  static BleuConfig bleu2() { return {}; }
  static BleuConfig bleu4() { return {4, {0.25, 0.25, 0.25, 0.25}}; }
  void check() const;  // throws CONFIG_INVALID
};

struct NgramPrecision {
  std::int64_t clipped_matches = 0;
  std::int64_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(clipped_matches) / total; }
};

struct BleuComponents {
  std::vector<NgramPrecision> precisions;  // index n-1
  std::int64_t candidate_length = 0;
  std::int64_t reference_length = 0;
  double brevity_penalty = 1.0;
  double score = 0.0;
};

// Corpus-level BLEU: clipped n-gram counts and lengths are pooled over all
// pairs before the precisions and brevity penalty are formed. No smoothing;
// a zero precision on any positively weighted order gives score 0.
BleuComponents corpus_bleu(std::span<const TokenPair> pairs, const BleuConfig& cfg = BleuConfig::bleu2());

// Single-pair BLEU under the same rules (the corpus of one).
double sentence_bleu(const Tokens& candidate, const Tokens& reference, const BleuConfig& cfg = BleuConfig::bleu2());

// ---- METEOR -----------------------------------------------------------------

enum class MatchStage { kExact, kStem };

inline const std::vector<MatchStage>& default_stages() {
  static const std::vector<MatchStage> stages{MatchStage::kExact, MatchStage::kStem};
  return stages;
}

struct MeteorMatch {
  std::size_t candidate_index;
  std::size_t reference_index;
  MatchStage stage;
};

struct MeteorAlignment {
  std::size_t matches = 0;  // M
  std::size_t chunks = 0;   // C
  double precision = 0.0;
  double recall = 0.0;
  double f_mean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
  std::vector<MeteorMatch> alignment;  // sorted by candidate index
};

// Counts chunks in an alignment: maximal runs adjacent in both sequences.
std::size_t count_chunks(std::vector<MeteorMatch> alignment);

MeteorAlignment meteor_sentence(const Tokens& candidate, const Tokens& reference,
                                const std::vector<MatchStage>& stages = default_stages());

// ---- ROUGE-L ----------------------------------------------------------------

struct RougeResult {
  std::size_t lcs_len = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f_measure = 0.0;
};

std::size_t lcs_length(const Tokens& a, const Tokens& b);

RougeResult rouge_l(const Tokens& candidate, const Tokens& reference, bool stemming = true, double beta = 1.0);

// Porter (1980) suffix stripper, following the reference implementation.
std::string stem(std::string_view word);

// ---- aggregation ------------------------------------------------------------

struct ScoreStats {
  std::size_t n = 0;
  double mu = 0.0;
  double sigma = 0.0;  // sample standard deviation (n-1)
};

ScoreStats aggregate_stats(std::span<const double> scores);

ScoreStats meteor_corpus_average(std::span<const TokenPair> pairs,
                                 const std::vector<MatchStage>& stages = default_stages());

// ---- benchmark corpus -------------------------------------------------------

struct CorpusRow {
  std::string agent_type;
  std::string model;
  std::string candidate;
  std::string reference;
};

// One JSON object per line; blank lines are skipped. Throws CORPUS_INVALID
// with detail {"line": n} (1-based) on the first malformed line.
std::vector<CorpusRow> parse_corpus(std::string_view jsonl);

enum class MetricKind { kBleu2, kMeteor, kRougeL };

std::string to_string(MetricKind m);
MetricKind parse_metric_kind(std::string_view s);  // "bleu2" | "meteor" | "rougeL"

// {"metric": ..., "groups": [{"agent_type","model","n","mu","sigma"}, ...]}
// Groups are sorted by (agent_type, model). For bleu2, mu is the corpus-level
// score of the group and sigma the sample spread of per-sentence BLEU-2.
nlohmann::json metric_report(std::span<const CorpusRow> rows, MetricKind metric);

}  // namespace ibn::metrics
