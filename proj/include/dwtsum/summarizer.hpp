#pragma once

// Embed -> matrix DWT -> coefficient-to-sentence mapping -> summary assembly.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/embedding.hpp"
#include "dwtsum/error.hpp"
#include "dwtsum/matrix.hpp"
#include "dwtsum/text.hpp"
#include "dwtsum/wavelet.hpp"

namespace dwtsum {

enum class DetailSource { coarsest_level, pooled_all_levels };

inline std::string_view to_string(DetailSource s) {
  return s == DetailSource::coarsest_level ? "coarsest_level" : "pooled_all_levels";
}

inline DetailSource parse_detail_source(std::string_view text) {
  if (text == "coarsest_level") return DetailSource::coarsest_level;
  if (text == "pooled_all_levels") return DetailSource::pooled_all_levels;
  throw Error(ErrorKind::config, "unknown detail source '" + std::string(text) + "'");
}

struct DecompositionPlan {
  int levels = 0;  // 0: derive from target_compression_pct and document length
  double target_compression_pct = 75.0;
  WaveletFamily family{2};
  BoundaryMode boundary = BoundaryMode::periodic;
  double detail_fraction = 0.25;
  DetailSource detail_source = DetailSource::coarsest_level;

  void validate() const {
    if (levels < 0) throw Error(ErrorKind::config, "plan levels must be >= 1 (or 0 for automatic)");
    if (!(detail_fraction >= 0.0 && detail_fraction <= 1.0)) {
      throw Error(ErrorKind::config, "detail_fraction must lie in [0, 1]");
    }
    if (levels == 0 && !(target_compression_pct >= 50.0 && target_compression_pct <= 95.0)) {
      throw Error(ErrorKind::config, "target compression must lie in [50, 95]");
    }
  }
};

/// Deepest level a summary plan may use for n sentences: floor(log2 n) - 1.
inline int max_plan_level(std::size_t n) { return std::max(0, max_level(n) - 1); }

/// Smallest L with 100 (1 - 2^-L) >= target, clamped to [1, floor(log2 n) - 1].
inline int choose_level(std::size_t n_sentences, double target_compression_pct) {
  if (n_sentences < 4) {
    throw Error(ErrorKind::degenerate_input,
                "document too short for decomposition (" + std::to_string(n_sentences) + " sentences, need 4)");
  }
  if (!(target_compression_pct >= 50.0 && target_compression_pct <= 95.0)) {
    throw Error(ErrorKind::config, "target compression must lie in [50, 95]");
  }
  int level = 1;
  while (100.0 * (1.0 - std::ldexp(1.0, -level)) < target_compression_pct) ++level;
  return std::clamp(level, 1, max_plan_level(n_sentences));
}

/// Fills in `levels` for a concrete document and checks it fits.
inline DecompositionPlan resolve_plan(DecompositionPlan plan, std::size_t n_sentences) {
  plan.validate();
  if (plan.levels == 0) {
    plan.levels = choose_level(n_sentences, plan.target_compression_pct);
    return plan;
  }
  const int max = max_plan_level(n_sentences);
  if (plan.levels > max) {
    throw Error(ErrorKind::level_overflow, "level " + std::to_string(plan.levels) + " too deep for " +
                                               std::to_string(n_sentences) + " sentences; max level is " +
                                               std::to_string(max));
  }
  return plan;
}

enum class Provenance { approximation, detail };

inline std::string_view to_string(Provenance p) { return p == Provenance::approximation ? "approximation" : "detail"; }

struct SentencePick {
  std::size_t index = 0;
  double score = 0.0;
};

struct SelectedSentence {
  std::size_t index = 0;
  Provenance provenance = Provenance::approximation;
  double score = 0.0;
};

struct ApproximationMapping {
  std::vector<SentencePick> picks;  // unique indices, ascending
  std::vector<std::string> warnings;
};

/// Index of the sentence row with maximal cosine to `query`; lowest index on ties.
inline SentencePick nearest_sentence(std::span<const double> query, const Matrix& sentences) {
  SentencePick best{0, -2.0};
  for (std::size_t i = 0; i < sentences.rows(); ++i) {
    const double s = cosine(query, sentences.row(i));
    if (s > best.score) best = {i, s};
  }
  return best;
}

/// Each cA row, rescaled by 2^(-L/2) to undo the low-pass gain, is matched to
/// the sentence with maximal cosine similarity. Repeated matches collapse to
/// one pick carrying the highest score; zero-norm rows are skipped.
inline ApproximationMapping map_approximation(const Matrix& approx, const EmbeddingMatrix& embeddings, int levels) {
  if (approx.rows() == 0) throw Error(ErrorKind::degenerate_input, "map_approximation: no approximation rows");
  if (approx.cols() != embeddings.dim()) {
    throw Error(ErrorKind::dimension_mismatch, "approximation rows and embeddings differ in dimension");
  }
  const double gain = 1.0 / std::sqrt(std::ldexp(1.0, levels));
  ApproximationMapping out;
  std::map<std::size_t, double> best;
  std::vector<double> scaled(approx.cols());
  for (std::size_t r = 0; r < approx.rows(); ++r) {
    const auto row = approx.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) scaled[c] = row[c] * gain;
    if (norm2(scaled) < 1e-12) {
      out.warnings.push_back("approximation row " + std::to_string(r) + " has zero norm; skipped");
      continue;
    }
    const auto pick = nearest_sentence(scaled, embeddings.rows);
    auto [it, inserted] = best.try_emplace(pick.index, pick.score);
    if (!inserted) it->second = std::max(it->second, pick.score);
  }
  for (const auto& [index, score] : best) out.picks.push_back({index, score});
  return out;
}

inline constexpr double kDetailNormFloor = 1e-10;

/// Detail rows ranked by L2 norm, strongest first. Each entry is
/// (detail matrix position in the pyramid, row).
struct DetailCandidate {
  std::size_t matrix = 0;
  std::size_t row = 0;
  double norm = 0.0;
};

inline std::vector<DetailCandidate> rank_detail_rows(const MatrixPyramid& pyramid, DetailSource source) {
  std::vector<DetailCandidate> out;
  const std::size_t count = source == DetailSource::coarsest_level ? std::min<std::size_t>(1, pyramid.details.size())
                                                                    : pyramid.details.size();
  for (std::size_t m = 0; m < count; ++m) {
    const auto& det = pyramid.details[m];
    for (std::size_t r = 0; r < det.rows(); ++r) {
      const double n = norm2(det.row(r));
      if (n > kDetailNormFloor) out.push_back({m, r, n});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DetailCandidate& a, const DetailCandidate& b) { return a.norm > b.norm; });
  return out;
}

/// Sentence carrying a detail direction: maximal |<u, x_i - mean>| where u is
/// the unit detail row. Lowest index on ties.
inline SentencePick map_detail_row(std::span<const double> detail_row, const Matrix& sentences,
                                   std::span<const double> mean) {
  const double n = norm2(detail_row);
  SentencePick best{0, -1.0};
  for (std::size_t i = 0; i < sentences.rows(); ++i) {
    const auto x = sentences.row(i);
    double proj = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) proj += detail_row[c] * (x[c] - mean[c]);
    const double s = std::abs(proj) / n;
    if (s > best.score) best = {i, s};
  }
  return best;
}

inline std::vector<double> row_mean(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  for (auto& x : mean) x /= static_cast<double>(std::max<std::size_t>(1, m.rows()));
  return mean;
}

/// Up to ceil(detail_fraction * |cA rows|) salient detail sentences. Candidates
/// whose sentence is already taken are passed over for the next candidate.
inline std::vector<SentencePick> select_details(const MatrixPyramid& pyramid, const EmbeddingMatrix& embeddings,
                                                const DecompositionPlan& plan,
                                                const std::vector<SentencePick>& approximation = {}) {
  const auto quota = static_cast<std::size_t>(
      std::ceil(plan.detail_fraction * static_cast<double>(pyramid.approx.rows()) - 1e-12));
  std::vector<SentencePick> out;
  if (quota == 0) return out;

  std::set<std::size_t> taken;
  for (const auto& p : approximation) taken.insert(p.index);
  const auto mean = row_mean(embeddings.rows);
  for (const auto& cand : rank_detail_rows(pyramid, plan.detail_source)) {
    if (out.size() >= quota) break;
    const auto pick = map_detail_row(pyramid.details[cand.matrix].row(cand.row), embeddings.rows, mean);
    if (!taken.insert(pick.index).second) continue;
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

struct SummaryResult {
  std::string doc_id;
  std::vector<SelectedSentence> selected;
  std::string summary_text;
  double compression_ratio_pct = 0.0;
  DecompositionPlan plan;
  bool degenerate = false;
  std::vector<std::string> warnings;

  std::vector<std::string> sentences_with(const Document& doc, Provenance p) const {
    std::vector<std::string> out;
    for (const auto& s : selected) {
      if (s.provenance == p) out.push_back(doc.sentences[s.index].text);
    }
    return out;
  }
};

inline double compression_ratio_pct(std::size_t summary_tokens, std::size_t document_tokens) {
  if (document_tokens == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(summary_tokens) / static_cast<double>(document_tokens));
}

inline SummaryResult assemble_summary(const std::vector<SentencePick>& approximation,
                                      const std::vector<SentencePick>& details, const Document& document,
                                      const DecompositionPlan& plan = {}) {
  if (approximation.empty()) {
    throw Error(ErrorKind::pipeline, "no approximation sentences were selected");
  }
  std::map<std::size_t, SelectedSentence> merged;
  for (const auto& p : approximation) {
    auto [it, inserted] = merged.try_emplace(p.index, SelectedSentence{p.index, Provenance::approximation, p.score});
    if (!inserted) it->second.score = std::max(it->second.score, p.score);
  }
  for (const auto& p : details) merged.try_emplace(p.index, SelectedSentence{p.index, Provenance::detail, p.score});

  SummaryResult r;
  r.doc_id = document.doc_id;
  r.plan = plan;
  for (const auto& [index, sel] : merged) {
    if (index >= document.sentences.size()) {
      throw Error(ErrorKind::pipeline, "selected sentence index " + std::to_string(index) + " out of range");
    }
    if (!r.summary_text.empty()) r.summary_text += ' ';
    r.summary_text += document.sentences[index].text;
    r.selected.push_back(sel);
  }
  r.compression_ratio_pct = compression_ratio_pct(count_tokens(r.summary_text), count_tokens(document.raw_text));
  return r;
}

inline std::vector<std::string> sentence_texts(const Document& doc) {
  std::vector<std::string> out;
  out.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) out.push_back(s.text);
  return out;
}

/// Everything summarize computes, kept for inspection (cmd_decompose).
struct PipelineTrace {
  DecompositionPlan plan;
  EmbeddingMatrix embeddings;
  MatrixPyramid pyramid;
  ApproximationMapping approximation;
  std::vector<SentencePick> details;
};

template <typename F>
decltype(auto) run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

inline PipelineTrace trace_pipeline(const Document& document, const DecompositionPlan& requested,
                                    EmbeddingProvider& provider) {
  PipelineTrace t;
  const std::size_t n = document.sentences.size();
  t.plan = run_stage("plan", [&] { return resolve_plan(requested, n); });
  t.embeddings = run_stage("embed", [&] {
    auto m = provider.embed(sentence_texts(document));
    if (m.size() != n) throw Error(ErrorKind::shape, "provider returned " + std::to_string(m.size()) + " rows for " + std::to_string(n) + " sentences");
    return m;
  });
  t.pyramid = run_stage("transform", [&] {
    return dwt_matrix(t.embeddings.rows, make_filter(t.plan.family), t.plan.levels, t.plan.boundary);
  });
  t.approximation = run_stage("map_approximation", [&] {
    return map_approximation(t.pyramid.approx, t.embeddings, t.plan.levels);
  });
  t.details = run_stage("select_details", [&] {
    return select_details(t.pyramid, t.embeddings, t.plan, t.approximation.picks);
  });
  return t;
}

inline SummaryResult identity_summary(const Document& document, const DecompositionPlan& plan) {
  std::vector<SentencePick> all;
  for (std::size_t i = 0; i < document.sentences.size(); ++i) all.push_back({i, 1.0});
  auto r = assemble_summary(all, {}, document, plan);
  r.degenerate = true;
  return r;
}

inline SummaryResult summarize(const Document& document, const DecompositionPlan& plan, EmbeddingProvider& provider) {
  if (document.sentences.empty()) {
    throw Error(ErrorKind::empty_document, "document '" + document.doc_id + "' has no sentences", "segment");
  }
  plan.validate();
  if (document.sentences.size() < 4) return identity_summary(document, plan);
  auto t = trace_pipeline(document, plan, provider);
  auto r = run_stage("assemble", [&] { return assemble_summary(t.approximation.picks, t.details, document, t.plan); });
  r.warnings = std::move(t.approximation.warnings);
  return r;
}

inline SummaryResult summarize(const Document& document, const DecompositionPlan& plan, const ProviderConfig& config) {
  auto provider = run_stage("embed", [&] { return make_provider(config); });
  return summarize(document, plan, *provider);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const DecompositionPlan& p) {
  nlohmann::json j = {{"levels", p.levels},
                      {"wavelet", p.family.id()},
                      {"boundary", to_string(p.boundary)},
                      {"detail_fraction", p.detail_fraction},
                      {"detail_source", to_string(p.detail_source)}};
  if (p.levels == 0) j["target_compression_pct"] = p.target_compression_pct;
  return j;
}

inline nlohmann::json to_json(const SummaryResult& r) {
  nlohmann::json indices = nlohmann::json::array();
  for (const auto& s : r.selected) {
    indices.push_back({{"i", s.index}, {"provenance", to_string(s.provenance)}, {"score", s.score}});
  }
  nlohmann::json j = {{"doc_id", r.doc_id},
                      {"indices", indices},
                      {"summary", r.summary_text},
                      {"compression_ratio_pct", r.compression_ratio_pct},
                      {"plan", to_json(r.plan)},
                      {"degenerate", r.degenerate}};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

}  // namespace dwtsum
