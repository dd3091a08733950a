#pragma once

// Corpus-level commands behind the CLI. Each returns the process exit code:
// 0 full success, 1 unusable input or configuration, 2 partial failure with
// per-record errors written in-line.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/config.hpp"
#include "dwtsum/embedding.hpp"
#include "dwtsum/error.hpp"
#include "dwtsum/eval.hpp"
#include "dwtsum/llm.hpp"
#include "dwtsum/summarizer.hpp"
#include "dwtsum/text.hpp"
#include "dwtsum/wavelet.hpp"

namespace dwtsum {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitPartial = 2 };

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results keep input order.
template <typename T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

inline nlohmann::json error_json(const Error& e) {
  nlohmann::json j = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  if (!e.stage().empty()) j["stage"] = e.stage();
  return j;
}

inline nlohmann::json error_record(const std::string& doc_id, std::optional<std::size_t> line, const Error& e) {
  nlohmann::json j;
  j["doc_id"] = doc_id.empty() ? nlohmann::json(nullptr) : nlohmann::json(doc_id);
  if (line) j["line"] = *line;
  j["error"] = error_json(e);
  return j;
}

namespace detail {

inline void write_lines(std::ostream& out, const std::vector<nlohmann::json>& lines) {
  for (const auto& l : lines) out << l.dump() << '\n';
}

inline PromptTemplate prompt_template_for(const RunConfig& config) {
  return config.prompt_template_path.empty() ? PromptTemplate::builtin()
                                             : PromptTemplate::load(config.prompt_template_path);
}

inline std::optional<std::vector<CorpusEntry>> read_corpus_or_report(const std::string& path, std::ostream& err) {
  try {
    return read_corpus(path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return std::nullopt;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// summarize

struct SummarizeOutcome {
  nlohmann::json record;
  bool ok = false;
};

inline int cmd_summarize(const std::string& corpus_path, const RunConfig& config, std::ostream& out,
                         std::ostream& err) {
  std::unique_ptr<EmbeddingProvider> provider;
  std::optional<LlmClient> llm;
  std::optional<PromptTemplate> tmpl;
  try {
    config.validate();
    provider = make_provider(config.provider);
    llm.emplace(config.llm);
    tmpl = detail::prompt_template_for(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  auto entries = detail::read_corpus_or_report(corpus_path, err);
  if (!entries) return kExitFailure;

  const auto echo = to_json(config);
  const auto results = parallel_map<SummarizeOutcome>(entries->size(), config.jobs, [&](std::size_t i) {
    const auto& entry = (*entries)[i];
    if (entry.error) return SummarizeOutcome{error_record(entry.doc_id, entry.line, *entry.error), false};
    const auto& doc = *entry.document;
    try {
      const auto summary = summarize(doc, config.plan, *provider);
      auto record = to_json(summary);
      const auto generated = run_stage("generate", [&] {
        return llm->generate(build_prompt(summary, doc, config.domain, *tmpl));
      });
      record["generated"] = {{"text", generated.text},
                             {"mode", generated.offline ? "offline" : "online"},
                             {"usage", generated.usage}};
      record["config"] = echo;
      return SummarizeOutcome{std::move(record), true};
    } catch (const Error& e) {
      return SummarizeOutcome{error_record(doc.doc_id, entry.line, e), false};
    }
  });

  bool all_ok = true;
  for (const auto& r : results) {
    out << r.record.dump() << '\n';
    all_ok = all_ok && r.ok;
  }
  return all_ok ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// decompose

inline nlohmann::json matches_json(const std::vector<std::optional<SentencePick>>& matches) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t r = 0; r < matches.size(); ++r) {
    if (matches[r]) {
      arr.push_back({{"row", r}, {"i", matches[r]->index}, {"score", matches[r]->score}});
    } else {
      arr.push_back({{"row", r}, {"i", nullptr}, {"score", nullptr}});
    }
  }
  return arr;
}

inline std::vector<double> row_energies(const Matrix& m) {
  std::vector<double> e(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) e[r] = dot(m.row(r), m.row(r));
  return e;
}

/// Coefficient shapes, per-row energies and nearest-sentence matches for one
/// document. The level limit here is the transform's own floor(log2 n).
inline nlohmann::json decompose_document(const Document& doc, const RunConfig& config, EmbeddingProvider& provider) {
  const std::size_t n = doc.sentences.size();
  DecompositionPlan plan = config.plan;
  if (plan.levels == 0) plan.levels = run_stage("plan", [&] { return choose_level(n, plan.target_compression_pct); });
  const auto embeddings = run_stage("embed", [&] { return provider.embed(sentence_texts(doc)); });
  const auto filter = make_filter(plan.family);
  const auto pyramid = run_stage("transform", [&] { return dwt_matrix(embeddings.rows, filter, plan.levels, plan.boundary); });

  const double gain = 1.0 / std::sqrt(std::ldexp(1.0, plan.levels));
  std::vector<std::optional<SentencePick>> approx_matches;
  std::vector<double> scaled(pyramid.approx.cols());
  for (std::size_t r = 0; r < pyramid.approx.rows(); ++r) {
    const auto row = pyramid.approx.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) scaled[c] = row[c] * gain;
    if (norm2(scaled) < 1e-12) {
      approx_matches.emplace_back();
    } else {
      approx_matches.emplace_back(nearest_sentence(scaled, embeddings.rows));
    }
  }

  const auto mean = row_mean(embeddings.rows);
  nlohmann::json details = nlohmann::json::array();
  for (std::size_t m = 0; m < pyramid.details.size(); ++m) {
    const auto& det = pyramid.details[m];
    std::vector<std::optional<SentencePick>> matches;
    for (std::size_t r = 0; r < det.rows(); ++r) {
      if (norm2(det.row(r)) > kDetailNormFloor) {
        matches.emplace_back(map_detail_row(det.row(r), embeddings.rows, mean));
      } else {
        matches.emplace_back();
      }
    }
    details.push_back({{"level", pyramid.detail_level(m)},
                       {"shape", {det.rows(), det.cols()}},
                       {"row_energy", row_energies(det)},
                       {"matches", matches_json(matches)}});
  }

  return {{"doc_id", doc.doc_id},
          {"n_sentences", n},
          {"dim", embeddings.dim()},
          {"plan", to_json(plan)},
          {"approx",
           {{"shape", {pyramid.approx.rows(), pyramid.approx.cols()}},
            {"row_energy", row_energies(pyramid.approx)},
            {"matches", matches_json(approx_matches)}}},
          {"details", details},
          {"config", to_json(config)}};
}

/// `input` is either a corpus JSONL file (all documents, or only `doc_id`) or
/// a plain-text document.
inline int cmd_decompose(const std::string& input, const std::optional<std::string>& doc_id, const RunConfig& config,
                         std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    auto provider = make_provider(config.provider);
    std::vector<Document> docs;
    const bool jsonl = input.size() >= 6 && input.substr(input.size() - 6) == ".jsonl";
    if (jsonl) {
      for (auto& d : load_corpus(input)) {
        if (!doc_id || d.doc_id == *doc_id) docs.push_back(std::move(d));
      }
      if (doc_id && docs.empty()) throw Error(ErrorKind::config, "no document with doc_id '" + *doc_id + "'");
    } else {
      std::ifstream in(input);
      if (!in) throw Error(ErrorKind::io, "cannot read document '" + input + "'");
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      docs.push_back(make_document(doc_id.value_or(input), std::move(text)));
    }
    std::vector<nlohmann::json> lines;
    for (const auto& d : docs) lines.push_back(decompose_document(d, config, *provider));
    detail::write_lines(out, lines);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalOutcome {
  nlohmann::json record;
  std::optional<EvalReport> report;
};

/// Scores every summary record against its corpus document (joined on doc_id).
/// Per-document reports go to `out`; the macro aggregate to `aggregate_out`.
inline int cmd_evaluate(const std::string& summaries_path, const std::string& corpus_path, const RunConfig& config,
                        std::ostream& out, std::ostream& aggregate_out, std::ostream& err) {
  std::unique_ptr<EmbeddingProvider> provider;
  try {
    config.provider.validate();
    provider = make_provider(config.provider);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  std::ifstream summaries(summaries_path);
  if (!summaries) {
    err << "error: cannot read summaries '" << summaries_path << "'\n";
    return kExitFailure;
  }
  auto corpus = detail::read_corpus_or_report(corpus_path, err);
  if (!corpus) return kExitFailure;
  std::map<std::string, const Document*> by_id;
  for (const auto& e : *corpus) {
    if (e.document) by_id.emplace(e.document->doc_id, &*e.document);
  }

  struct SummaryLine {
    std::size_t line = 0;
    std::string doc_id;
    std::string summary;
    std::optional<Error> error;
  };
  std::vector<SummaryLine> lines;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(summaries, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    SummaryLine s;
    s.line = line_no;
    try {
      const auto j = nlohmann::json::parse(raw);
      if (j.contains("doc_id") && j["doc_id"].is_string()) s.doc_id = j["doc_id"].get<std::string>();
      if (j.contains("error")) {
        s.error = Error(ErrorKind::pipeline, "summary record carries an upstream error: " + j["error"].dump());
      } else if (!j.contains("summary") || !j["summary"].is_string() || s.doc_id.empty()) {
        s.error = Error(ErrorKind::parse, "summaries line " + std::to_string(line_no) + ": needs string fields doc_id and summary");
      } else {
        s.summary = j["summary"].get<std::string>();
      }
    } catch (const nlohmann::json::parse_error& e) {
      s.error = Error(ErrorKind::parse, "summaries line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    lines.push_back(std::move(s));
  }

  const auto echo = to_json(config);
  const auto outcomes = parallel_map<EvalOutcome>(lines.size(), config.jobs, [&](std::size_t i) {
    const auto& s = lines[i];
    if (s.error) return EvalOutcome{error_record(s.doc_id, s.line, *s.error), std::nullopt};
    const auto it = by_id.find(s.doc_id);
    if (it == by_id.end()) {
      return EvalOutcome{error_record(s.doc_id, s.line, Error(ErrorKind::config, "doc_id '" + s.doc_id + "' not found in corpus")),
                         std::nullopt};
    }
    try {
      auto report = evaluate(*it->second, s.summary, it->second->reference, *provider);
      auto j = to_json(report);
      j["config"] = echo;
      return EvalOutcome{std::move(j), std::move(report)};
    } catch (const Error& e) {
      return EvalOutcome{error_record(s.doc_id, s.line, e), std::nullopt};
    }
  });

  std::vector<EvalReport> reports;
  bool all_ok = true;
  for (const auto& o : outcomes) {
    out << o.record.dump() << '\n';
    if (o.report) {
      reports.push_back(*o.report);
    } else {
      all_ok = false;
    }
  }
  aggregate_out << nlohmann::json{{"aggregate", to_json(aggregate(reports))}, {"errors", outcomes.size() - reports.size()}, {"config", echo}}.dump()
                << '\n';
  return all_ok ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// sweep-levels

struct SweepRow {
  int level = 0;
  std::size_t documents = 0;
  std::vector<nlohmann::json> skipped;
  std::vector<nlohmann::json> errors;
  EvalAggregate scores;
};

inline nlohmann::json to_json(const SweepRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"level", r.level},
          {"documents", r.documents},
          {"mean_compression_pct", opt(r.scores.compression_ratio_pct)},
          {"mean_fidelity_pct", opt(r.scores.fidelity_pct)},
          {"mean_rouge_l", r.scores.rouge ? nlohmann::json(r.scores.rouge->f1) : nlohmann::json(nullptr)},
          {"mean_meteor_lite", opt(r.scores.meteor)},
          {"skipped", r.skipped},
          {"errors", r.errors}};
}

inline std::vector<SweepRow> sweep_levels(const std::vector<CorpusEntry>& corpus, const std::vector<int>& levels,
                                          const RunConfig& config, EmbeddingProvider& provider) {
  struct DocOutcome {
    std::optional<EvalReport> report;
    std::optional<nlohmann::json> skipped;
    std::optional<nlohmann::json> error;
  };
  std::vector<SweepRow> rows;
  for (int level : levels) {
    DecompositionPlan plan = config.plan;
    plan.levels = level;
    const auto outcomes = parallel_map<DocOutcome>(corpus.size(), config.jobs, [&](std::size_t i) {
      const auto& entry = corpus[i];
      if (entry.error) return DocOutcome{std::nullopt, std::nullopt, error_record(entry.doc_id, entry.line, *entry.error)};
      const auto& doc = *entry.document;
      const std::size_t n = doc.sentences.size();
      if (n < 4 || level > max_plan_level(n)) {
        return DocOutcome{std::nullopt,
                          nlohmann::json{{"doc_id", doc.doc_id},
                                         {"reason", "level " + std::to_string(level) + " infeasible for " +
                                                        std::to_string(n) + " sentences"}},
                          std::nullopt};
      }
      try {
        const auto summary = summarize(doc, plan, provider);
        return DocOutcome{evaluate(doc, summary.summary_text, doc.reference, provider), std::nullopt, std::nullopt};
      } catch (const Error& e) {
        return DocOutcome{std::nullopt, std::nullopt, error_record(doc.doc_id, entry.line, e)};
      }
    });
    SweepRow row;
    row.level = level;
    std::vector<EvalReport> reports;
    for (const auto& o : outcomes) {
      if (o.report) reports.push_back(*o.report);
      if (o.skipped) row.skipped.push_back(*o.skipped);
      if (o.error) row.errors.push_back(*o.error);
    }
    row.documents = reports.size();
    row.scores = aggregate(reports);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline int cmd_sweep_levels(const std::string& corpus_path, const std::vector<int>& levels, const RunConfig& config,
                            std::ostream& out, std::ostream& err) {
  std::unique_ptr<EmbeddingProvider> provider;
  try {
    config.validate();
    if (levels.empty()) throw Error(ErrorKind::config, "sweep-levels needs at least one level");
    for (int l : levels) {
      if (l < 1) throw Error(ErrorKind::config, "sweep levels must be >= 1");
    }
    provider = make_provider(config.provider);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  auto corpus = detail::read_corpus_or_report(corpus_path, err);
  if (!corpus) return kExitFailure;

  const auto rows = sweep_levels(*corpus, levels, config, *provider);
  const auto echo = to_json(config);
  bool all_ok = true;
  for (const auto& r : rows) {
    auto j = to_json(r);
    j["config"] = echo;
    out << j.dump() << '\n';
    all_ok = all_ok && r.errors.empty();
  }
  return all_ok ? kExitOk : kExitPartial;
}

}  // namespace dwtsum
