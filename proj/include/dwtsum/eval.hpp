#pragma once

// ROUGE-L, METEOR-lite, semantic fidelity and compression ratio.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/embedding.hpp"
#include "dwtsum/error.hpp"
#include "dwtsum/summarizer.hpp"
#include "dwtsum/text.hpp"

namespace dwtsum {

using TokenSpan = std::span<const std::string>;

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline std::size_t lcs_length(TokenSpan a, TokenSpan b) {
  if (a.empty() || b.empty()) return 0;
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

inline double harmonic_f1(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Tokens are expected to be metric-normalized (see tokenize_whitespace).
inline RougeScore rouge_l(TokenSpan candidate, TokenSpan reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  RougeScore s;
  s.precision = lcs / static_cast<double>(candidate.size());
  s.recall = lcs / static_cast<double>(reference.size());
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

// ---------------------------------------------------------------------------
// METEOR-lite: exact and suffix-stem unigram matching, no synonymy.

/// Strips one of -ing, -ed, -es, -s when enough of the word remains.
inline std::string light_stem(std::string_view w) {
  auto ends = [&](std::string_view suf) { return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf; };
  if (ends("ing") && w.size() > 5) return std::string(w.substr(0, w.size() - 3));
  if (ends("ed") && w.size() > 4) return std::string(w.substr(0, w.size() - 2));
  if (ends("es") && w.size() > 4) return std::string(w.substr(0, w.size() - 2));
  if (ends("s") && !ends("ss") && w.size() > 3) return std::string(w.substr(0, w.size() - 1));
  return std::string(w);
}

struct MeteorBreakdown {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Greedy one-to-one alignment: candidate tokens left to right take the first
/// free reference token that matches exactly; a second pass does the same for
/// stem matches. Returns the aligned reference position per candidate token.
inline std::vector<std::optional<std::size_t>> meteor_alignment(TokenSpan candidate, TokenSpan reference) {
  std::vector<std::optional<std::size_t>> align(candidate.size());
  std::vector<bool> used(reference.size(), false);
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (!used[j] && candidate[i] == reference[j]) {
        align[i] = j;
        used[j] = true;
        break;
      }
    }
  }
  std::vector<std::string> ref_stems;
  ref_stems.reserve(reference.size());
  for (const auto& r : reference) ref_stems.push_back(light_stem(r));
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i]) continue;
    const auto stem = light_stem(candidate[i]);
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (!used[j] && stem == ref_stems[j]) {
        align[i] = j;
        used[j] = true;
        break;
      }
    }
  }
  return align;
}

/// A chunk is a maximal run of aligned candidate tokens that are adjacent in
/// the candidate and map to adjacent, increasing reference positions.
inline MeteorBreakdown meteor_lite_breakdown(TokenSpan candidate, TokenSpan reference) {
  MeteorBreakdown b;
  const auto align = meteor_alignment(candidate, reference);
  std::optional<std::size_t> prev_i;
  std::optional<std::size_t> prev_j;
  for (std::size_t i = 0; i < align.size(); ++i) {
    if (!align[i]) continue;
    ++b.matches;
    const bool continues = prev_i && *prev_i + 1 == i && *prev_j + 1 == *align[i];
    if (!continues) ++b.chunks;
    prev_i = i;
    prev_j = align[i];
  }
  if (b.matches == 0) return b;
  const auto m = static_cast<double>(b.matches);
  b.precision = m / static_cast<double>(candidate.size());
  b.recall = m / static_cast<double>(reference.size());
  b.fmean = 10.0 * b.precision * b.recall / (b.recall + 9.0 * b.precision);
  const double frag = static_cast<double>(b.chunks) / m;
  b.penalty = 0.5 * frag * frag * frag;
  b.score = b.fmean * (1.0 - b.penalty);
  return b;
}

inline double meteor_lite(TokenSpan candidate, TokenSpan reference) {
  return meteor_lite_breakdown(candidate, reference).score;
}

// ---------------------------------------------------------------------------
// Fidelity

/// 100 x cosine between a document vector and a summary vector.
inline double fidelity(std::span<const double> document_embedding, std::span<const double> summary_embedding) {
  if (document_embedding.size() != summary_embedding.size()) {
    throw Error(ErrorKind::dimension_mismatch, "fidelity: embeddings differ in dimension (" +
                                                   std::to_string(document_embedding.size()) + " vs " +
                                                   std::to_string(summary_embedding.size()) + ")");
  }
  const double aa = dot(document_embedding, document_embedding);
  const double bb = dot(summary_embedding, summary_embedding);
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorKind::zero_vector, "fidelity: zero embedding vector");
  const double c = dot(document_embedding, summary_embedding) / std::sqrt(aa * bb);
  return 100.0 * std::clamp(c, -1.0, 1.0);
}

/// Pooled embedding of a free-text passage: segmented, embedded per sentence,
/// mean-pooled.
inline std::vector<double> embed_text(std::string_view text, EmbeddingProvider& provider) {
  std::vector<std::string> sentences;
  for (auto& s : segment_sentences(text)) sentences.push_back(std::move(s.text));
  return embed_document(provider.embed(sentences));
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::string doc_id;
  std::optional<RougeScore> rouge;
  std::optional<double> meteor;
  std::optional<double> fidelity_pct;
  std::optional<std::string> fidelity_error;
  double compression_ratio_pct = 0.0;
};

inline EvalReport evaluate(const Document& document, std::string_view summary_text,
                           const std::optional<std::string>& reference, EmbeddingProvider& provider) {
  const auto summary_tokens = tokenize_whitespace(summary_text);
  if (summary_tokens.raw.empty()) {
    throw Error(ErrorKind::degenerate_input, "summary for '" + document.doc_id + "' is empty");
  }
  EvalReport r;
  r.doc_id = document.doc_id;
  r.compression_ratio_pct = compression_ratio_pct(summary_tokens.raw.size(), count_tokens(document.raw_text));
  if (reference) {
    const auto ref_tokens = tokenize_whitespace(*reference);
    r.rouge = rouge_l(summary_tokens.normalized, ref_tokens.normalized);
    r.meteor = meteor_lite(summary_tokens.normalized, ref_tokens.normalized);
  }
  try {
    const auto doc_vec = embed_document(provider.embed(sentence_texts(document)));
    const auto sum_vec = embed_text(summary_text, provider);
    r.fidelity_pct = fidelity(doc_vec, sum_vec);
  } catch (const Error& e) {
    r.fidelity_error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return r;
}

inline EvalReport evaluate(const Document& document, std::string_view summary_text,
                           const std::optional<std::string>& reference, const ProviderConfig& config) {
  auto provider = make_provider(config);
  return evaluate(document, summary_text, reference, *provider);
}

/// Macro averages; each metric averages over the reports where it is present.
struct EvalAggregate {
  std::size_t documents = 0;
  std::optional<RougeScore> rouge;
  std::optional<double> meteor;
  std::optional<double> fidelity_pct;
  std::optional<double> compression_ratio_pct;
};

inline EvalAggregate aggregate(std::span<const EvalReport> reports) {
  EvalAggregate a;
  a.documents = reports.size();
  RougeScore rsum;
  std::size_t rn = 0, mn = 0, fn = 0;
  double msum = 0.0, fsum = 0.0, csum = 0.0;
  for (const auto& r : reports) {
    if (r.rouge) {
      rsum.precision += r.rouge->precision;
      rsum.recall += r.rouge->recall;
      rsum.f1 += r.rouge->f1;
      ++rn;
    }
    if (r.meteor) {
      msum += *r.meteor;
      ++mn;
    }
    if (r.fidelity_pct) {
      fsum += *r.fidelity_pct;
      ++fn;
    }
    csum += r.compression_ratio_pct;
  }
  if (rn > 0) {
    const auto d = static_cast<double>(rn);
    a.rouge = RougeScore{rsum.precision / d, rsum.recall / d, rsum.f1 / d};
  }
  if (mn > 0) a.meteor = msum / static_cast<double>(mn);
  if (fn > 0) a.fidelity_pct = fsum / static_cast<double>(fn);
  if (!reports.empty()) a.compression_ratio_pct = csum / static_cast<double>(reports.size());
  return a;
}

namespace detail {
template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline nlohmann::json rouge_json(const std::optional<RougeScore>& r) {
  if (!r) return nullptr;
  return {{"precision", r->precision}, {"recall", r->recall}, {"f1", r->f1}};
}
}  // namespace detail

/// bertscore and factual_consistency are reserved for scores merged in by
/// external tooling and are always null here.
inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"doc_id", r.doc_id},
                      {"rouge_l", detail::rouge_json(r.rouge)},
                      {"meteor_lite", detail::opt(r.meteor)},
                      {"fidelity_pct", detail::opt(r.fidelity_pct)},
                      {"compression_ratio_pct", r.compression_ratio_pct},
                      {"bertscore", nullptr},
                      {"factual_consistency", nullptr}};
  if (r.fidelity_error) j["fidelity_error"] = *r.fidelity_error;
  return j;
}

inline nlohmann::json to_json(const EvalAggregate& a) {
  return {{"documents", a.documents},
          {"rouge_l", detail::rouge_json(a.rouge)},
          {"meteor_lite", detail::opt(a.meteor)},
          {"fidelity_pct", detail::opt(a.fidelity_pct)},
          {"compression_ratio_pct", detail::opt(a.compression_ratio_pct)}};
}

}  // namespace dwtsum
