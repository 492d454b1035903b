#include "ibn/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "ibn/error.hpp"

namespace ibn::metrics {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

// ---- BLEU -------------------------------------------------------------------

void BleuConfig::check() const {
  if (max_n < 1) throw Error(errc::kConfigInvalid, "max_n must be >= 1");
  if (weights.size() != static_cast<std::size_t>(max_n)) {
    throw Error(errc::kConfigInvalid, "need exactly max_n weights");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(errc::kConfigInvalid, "weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error(errc::kConfigInvalid, "weights must sum to 1");
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;

NgramCounts count_ngrams(const Tokens& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuComponents corpus_bleu(std::span<const TokenPair> pairs, const BleuConfig& cfg) {
  cfg.check();
  if (pairs.empty()) throw Error(errc::kEmptyCorpus, "BLEU needs at least one pair");

  BleuComponents out;
  out.precisions.resize(static_cast<std::size_t>(cfg.max_n));
  for (const auto& pair : pairs) {
    if (pair.candidate.empty() || pair.reference.empty()) {
      throw Error(errc::kEmptyInput, "BLEU candidate and reference must be non-empty");
    }
    out.candidate_length += static_cast<std::int64_t>(pair.candidate.size());
    out.reference_length += static_cast<std::int64_t>(pair.reference.size());
    for (int n = 1; n <= cfg.max_n; ++n) {
      const auto cand = count_ngrams(pair.candidate, static_cast<std::size_t>(n));
      const auto ref = count_ngrams(pair.reference, static_cast<std::size_t>(n));
      auto& p = out.precisions[static_cast<std::size_t>(n - 1)];
      for (const auto& [gram, count] : cand) {
        p.total += count;
        const auto it = ref.find(gram);
        if (it != ref.end()) p.clipped_matches += std::min(count, it->second);
      }
    }
  }

  const double c = static_cast<double>(out.candidate_length);
  const double r = static_cast<double>(out.reference_length);
  out.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);

  double log_sum = 0.0;
  for (std::size_t i = 0; i < out.precisions.size(); ++i) {
    if (cfg.weights[i] == 0.0) continue;
    const double p = out.precisions[i].value();
    if (p == 0.0) {
      out.score = 0.0;
      return out;
    }
    log_sum += cfg.weights[i] * std::log(p);
  }
  out.score = out.brevity_penalty * std::exp(log_sum);
  return out;
}

double sentence_bleu(const Tokens& candidate, const Tokens& reference, const BleuConfig& cfg) {
  const TokenPair pair{candidate, reference};
  return corpus_bleu(std::span<const TokenPair>(&pair, 1), cfg).score;
}

// ---- METEOR -----------------------------------------------------------------

std::size_t count_chunks(std::vector<MeteorMatch> alignment) {
  if (alignment.empty()) return 0;
  std::sort(alignment.begin(), alignment.end(),
            [](const MeteorMatch& a, const MeteorMatch& b) { return a.candidate_index < b.candidate_index; });
  std::size_t chunks = 1;
  for (std::size_t i = 1; i < alignment.size(); ++i) {
    const auto& prev = alignment[i - 1];
    const auto& cur = alignment[i];
    if (cur.candidate_index != prev.candidate_index + 1 || cur.reference_index != prev.reference_index + 1) {
      ++chunks;
    }
  }
  return chunks;
}

namespace {

// Above this many complete alignments the exact search gives way to the
// greedy aligner.
constexpr std::size_t kExactSearchBudget = 20000;

class MeteorAligner {
 public:
  MeteorAligner(const Tokens& cand, const Tokens& ref, const std::vector<MatchStage>& stages)
      : cand_(cand), ref_(ref), stages_(stages) {
    for (auto stage : stages_) {
      cand_keys_.push_back(keys(cand_, stage));
      ref_keys_.push_back(keys(ref_, stage));
    }
  }

  std::vector<MeteorMatch> align() {
    std::vector<int> cand_used(cand_.size(), -1);
    std::vector<int> ref_used(ref_.size(), -1);
    std::vector<MeteorMatch> current;
    leaves_ = 0;
    best_.reset();
    if (search_stage(0, cand_used, ref_used, current) && best_) return best_->alignment;
    return greedy();
  }

 private:
  struct Best {
    std::vector<MeteorMatch> alignment;
    std::size_t chunks;
  };

  static std::vector<std::string> keys(const Tokens& toks, MatchStage stage) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(stage == MatchStage::kExact ? t : stem(t));
    return out;
  }

  // Per stage: for every key shared by unmatched tokens on both sides, the
  // unmatched positions in each sequence.
  struct KeyGroup {
    std::vector<std::size_t> cand_pos;
    std::vector<std::size_t> ref_pos;
  };

  std::vector<KeyGroup> groups_for(std::size_t s, const std::vector<int>& cand_used,
                                   const std::vector<int>& ref_used) const {
    std::map<std::string, KeyGroup> by_key;
    for (std::size_t i = 0; i < cand_.size(); ++i) {
      if (cand_used[i] < 0) by_key[cand_keys_[s][i]].cand_pos.push_back(i);
    }
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if (ref_used[j] < 0) {
        auto it = by_key.find(ref_keys_[s][j]);
        if (it != by_key.end()) it->second.ref_pos.push_back(j);
      }
    }
    std::vector<KeyGroup> out;
    for (auto& [k, g] : by_key) {
      if (!g.ref_pos.empty()) out.push_back(std::move(g));
    }
    return out;
  }

  // Returns false once the search budget is exhausted.
  bool search_stage(std::size_t s, std::vector<int>& cand_used, std::vector<int>& ref_used,
                    std::vector<MeteorMatch>& current) {
    if (s == stages_.size()) {
      if (++leaves_ > kExactSearchBudget) return false;
      const auto c = count_chunks(current);
      if (!best_ || c < best_->chunks) best_ = Best{current, c};
      return true;
    }
    const auto groups = groups_for(s, cand_used, ref_used);
    return search_group(s, groups, 0, cand_used, ref_used, current);
  }

  // Enumerates every maximum-cardinality injection within each key group:
  // the smaller side is matched completely, each of its positions against a
  // distinct position of the larger side.
  bool search_group(std::size_t s, const std::vector<KeyGroup>& groups, std::size_t g, std::vector<int>& cand_used,
                    std::vector<int>& ref_used, std::vector<MeteorMatch>& current) {
    if (g == groups.size()) return search_stage(s + 1, cand_used, ref_used, current);
    const auto& grp = groups[g];
    const bool cand_small = grp.cand_pos.size() <= grp.ref_pos.size();
    const auto& small = cand_small ? grp.cand_pos : grp.ref_pos;
    const auto& large = cand_small ? grp.ref_pos : grp.cand_pos;
    std::vector<bool> taken(large.size(), false);
    return assign(s, groups, g, small, large, 0, taken, cand_small, cand_used, ref_used, current);
  }

  bool assign(std::size_t s, const std::vector<KeyGroup>& groups, std::size_t g, const std::vector<std::size_t>& small,
              const std::vector<std::size_t>& large, std::size_t idx, std::vector<bool>& taken, bool cand_small,
              std::vector<int>& cand_used, std::vector<int>& ref_used, std::vector<MeteorMatch>& current) {
    if (idx == small.size()) return search_group(s, groups, g + 1, cand_used, ref_used, current);
    for (std::size_t t = 0; t < large.size(); ++t) {
      if (taken[t]) continue;
      const std::size_t ci = cand_small ? small[idx] : large[t];
      const std::size_t rj = cand_small ? large[t] : small[idx];
      taken[t] = true;
      cand_used[ci] = static_cast<int>(rj);
      ref_used[rj] = static_cast<int>(ci);
      current.push_back({ci, rj, stages_[s]});
      const bool ok = assign(s, groups, g, small, large, idx + 1, taken, cand_small, cand_used, ref_used, current);
      current.pop_back();
      cand_used[ci] = -1;
      ref_used[rj] = -1;
      taken[t] = false;
      if (!ok) return false;
    }
    return true;
  }

  // Left-to-right: extend the running chunk when possible, otherwise pick the
  // reference position whose next two tokens best continue the candidate.
  std::vector<MeteorMatch> greedy() const {
    std::vector<int> cand_used(cand_.size(), -1);
    std::vector<int> ref_used(ref_.size(), -1);
    std::vector<MeteorMatch> out;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const auto& ck = cand_keys_[s];
      const auto& rk = ref_keys_[s];
      for (std::size_t i = 0; i < cand_.size(); ++i) {
        if (cand_used[i] >= 0) continue;
        std::vector<std::size_t> options;
        for (std::size_t j = 0; j < ref_.size(); ++j) {
          if (ref_used[j] < 0 && rk[j] == ck[i]) options.push_back(j);
        }
        if (options.empty()) continue;
        std::size_t pick = options.front();
        int best_score = -1;
        for (auto j : options) {
          int score = 0;
          if (i > 0 && cand_used[i - 1] >= 0 && static_cast<std::size_t>(cand_used[i - 1]) + 1 == j) score += 4;
          for (std::size_t d = 1; d <= 2; ++d) {
            if (i + d >= cand_.size() || j + d >= ref_.size()) break;
            if (cand_used[i + d] >= 0 || ref_used[j + d] >= 0 || ck[i + d] != rk[j + d]) break;
            ++score;
          }
          if (score > best_score) {
            best_score = score;
            pick = j;
          }
        }
        cand_used[i] = static_cast<int>(pick);
        ref_used[pick] = static_cast<int>(i);
        out.push_back({i, pick, stages_[s]});
      }
    }
    return out;
  }

  const Tokens& cand_;
  const Tokens& ref_;
  const std::vector<MatchStage>& stages_;
  std::vector<std::vector<std::string>> cand_keys_;
  std::vector<std::vector<std::string>> ref_keys_;
  std::optional<Best> best_;
  std::size_t leaves_ = 0;
};

}  // namespace

MeteorAlignment meteor_sentence(const Tokens& candidate, const Tokens& reference,
                                const std::vector<MatchStage>& stages) {
  if (candidate.empty() || reference.empty()) {
    throw Error(errc::kEmptyInput, "METEOR candidate and reference must be non-empty");
  }
  MeteorAligner aligner(candidate, reference, stages);
  MeteorAlignment out;
  out.alignment = aligner.align();
  std::sort(out.alignment.begin(), out.alignment.end(),
            [](const MeteorMatch& a, const MeteorMatch& b) { return a.candidate_index < b.candidate_index; });
  out.matches = out.alignment.size();
  if (out.matches == 0) return out;

  out.chunks = count_chunks(out.alignment);
  const double m = static_cast<double>(out.matches);
  out.precision = m / static_cast<double>(candidate.size());
  out.recall = m / static_cast<double>(reference.size());
  out.f_mean = 10.0 * out.precision * out.recall / (out.recall + 9.0 * out.precision);
  const double frag = static_cast<double>(out.chunks) / m;
  out.penalty = 0.5 * frag * frag * frag;
  out.score = out.f_mean * (1.0 - out.penalty);
  return out;
}

ScoreStats meteor_corpus_average(std::span<const TokenPair> pairs, const std::vector<MatchStage>& stages) {
  if (pairs.empty()) throw Error(errc::kEmptyCorpus, "METEOR average needs at least one pair");
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) scores.push_back(meteor_sentence(p.candidate, p.reference, stages).score);
  return aggregate_stats(scores);
}

// ---- ROUGE-L ----------------------------------------------------------------

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeResult rouge_l(const Tokens& candidate, const Tokens& reference, bool stemming, double beta) {
  if (candidate.empty() || reference.empty()) {
    throw Error(errc::kEmptyInput, "ROUGE-L candidate and reference must be non-empty");
  }
  if (!(beta > 0)) throw Error(errc::kConfigInvalid, "beta must be positive");
  RougeResult out;
  if (stemming) {
    Tokens c;
    Tokens r;
    for (const auto& t : candidate) c.push_back(stem(t));
    for (const auto& t : reference) r.push_back(stem(t));
    out.lcs_len = lcs_length(c, r);
  } else {
    out.lcs_len = lcs_length(candidate, reference);
  }
  const double lcs = static_cast<double>(out.lcs_len);
  out.recall = lcs / static_cast<double>(reference.size());
  out.precision = lcs / static_cast<double>(candidate.size());
  if (out.recall == 0.0 && out.precision == 0.0) return out;
  const double b2 = beta * beta;
  out.f_measure = (1.0 + b2) * out.precision * out.recall / (out.recall + b2 * out.precision);
  return out;
}

// ---- aggregation ------------------------------------------------------------

ScoreStats aggregate_stats(std::span<const double> scores) {
  if (scores.empty()) throw Error(errc::kEmptyCorpus, "no scores to aggregate");
  ScoreStats out;
  out.n = scores.size();
  out.mu = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double s : scores) ss += (s - out.mu) * (s - out.mu);
    out.sigma = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

// ---- benchmark corpus -------------------------------------------------------

std::vector<CorpusRow> parse_corpus(std::string_view jsonl) {
  std::vector<CorpusRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    const auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? jsonl.size() + 1 : nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    auto bad = [&](const std::string& why) {
      return Error(errc::kCorpusInvalid, "line " + std::to_string(line_no) + ": " + why, {{"line", line_no}});
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw bad("not valid JSON");
    }
    if (!j.is_object()) throw bad("expected a JSON object");
    CorpusRow row;
    for (auto [key, dst] : {std::pair{"agent_type", &row.agent_type}, std::pair{"model", &row.model},
                            std::pair{"candidate", &row.candidate}, std::pair{"reference", &row.reference}}) {
      const auto it = j.find(key);
      if (it == j.end() || !it->is_string()) throw bad(std::string("missing string field '") + key + "'");
      *dst = it->get<std::string>();
    }
    if (tokenize(row.candidate).empty() || tokenize(row.reference).empty()) {
      throw bad("candidate and reference must contain at least one token");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kBleu2: return "bleu2";
    case MetricKind::kMeteor: return "meteor";
    case MetricKind::kRougeL: return "rougeL";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view s) {
  if (s == "bleu2") return MetricKind::kBleu2;
  if (s == "meteor") return MetricKind::kMeteor;
  if (s == "rougeL") return MetricKind::kRougeL;
  throw Error(errc::kConfigInvalid, "unknown metric '" + std::string(s) + "'");
}

nlohmann::json metric_report(std::span<const CorpusRow> rows, MetricKind metric) {
  std::map<std::pair<std::string, std::string>, std::vector<TokenPair>> groups;
  for (const auto& row : rows) {
    groups[{row.agent_type, row.model}].push_back({tokenize(row.candidate), tokenize(row.reference)});
  }

  nlohmann::json out_groups = nlohmann::json::array();
  for (const auto& [key, pairs] : groups) {
    std::vector<double> scores;
    scores.reserve(pairs.size());
    for (const auto& p : pairs) {
      switch (metric) {
        case MetricKind::kBleu2: scores.push_back(sentence_bleu(p.candidate, p.reference)); break;
        case MetricKind::kMeteor: scores.push_back(meteor_sentence(p.candidate, p.reference).score); break;
        case MetricKind::kRougeL: scores.push_back(rouge_l(p.candidate, p.reference, true, 1.0).f_measure); break;
      }
    }
    auto stats = aggregate_stats(scores);
    if (metric == MetricKind::kBleu2) stats.mu = corpus_bleu(pairs).score;
    out_groups.push_back({{"agent_type", key.first},
                          {"model", key.second},
                          {"n", stats.n},
                          {"mu", stats.mu},
                          {"sigma", stats.sigma}});
  }
  nlohmann::json report{{"metric", to_string(metric)}, {"groups", out_groups}};
  if (metric == MetricKind::kMeteor) report["match_stages"] = {"exact", "stem"};
  if (metric == MetricKind::kRougeL) report["stemming"] = true;
  return report;
}

}  // namespace ibn::metrics
