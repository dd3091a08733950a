// dwtsum: multiresolution document summarization from the command line.
//
//   dwtsum summarize    CORPUS.jsonl [flags]
//   dwtsum decompose    DOC.txt|CORPUS.jsonl [--doc-id ID] [flags]
//   dwtsum evaluate     SUMMARIES.jsonl CORPUS.jsonl [flags]
//   dwtsum sweep-levels CORPUS.jsonl --levels 1,2,3 [flags]

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dwtsum/dwtsum.hpp"

namespace {

struct SharedFlags {
  std::string config_path;
  std::string provider;
  std::size_t dim = 0;
  std::string wavelet;
  int levels = 0;
  double target_compression = 0.0;
  double detail_fraction = 0.0;
  std::string detail_source;
  std::string boundary;
  std::string domain;
  bool offline = false;
  int jobs = 1;
  std::string out;
};

struct OptionHandles {
  CLI::Option* provider = nullptr;
  CLI::Option* dim = nullptr;
  CLI::Option* wavelet = nullptr;
  CLI::Option* levels = nullptr;
  CLI::Option* target = nullptr;
  CLI::Option* fraction = nullptr;
  CLI::Option* source = nullptr;
  CLI::Option* boundary = nullptr;
  CLI::Option* domain = nullptr;
  CLI::Option* jobs = nullptr;
};

OptionHandles add_shared(CLI::App& cmd, SharedFlags& f, bool single_level) {
  OptionHandles h;
  cmd.add_option("--config", f.config_path, "key = value configuration file");
  h.provider = cmd.add_option("--provider", f.provider, "embedding provider")
                   ->check(CLI::IsMember({"deterministic", "file_cache", "http"}));
  h.dim = cmd.add_option("--dim", f.dim, "deterministic embedding dimension");
  h.wavelet = cmd.add_option("--wavelet", f.wavelet, "Daubechies family, db1..db8");
  if (single_level) {
    h.levels = cmd.add_option("--levels", f.levels, "decomposition depth L");
    h.target = cmd.add_option("--target-compression", f.target_compression,
                              "choose L from a compression target in percent [50, 95]");
    h.levels->excludes(h.target);
  }
  h.fraction = cmd.add_option("--detail-fraction", f.detail_fraction, "detail sentences per approximation row");
  h.source = cmd.add_option("--detail-source", f.detail_source, "coarsest_level or pooled_all_levels");
  h.boundary = cmd.add_option("--boundary", f.boundary, "signal extension")
                   ->check(CLI::IsMember({"periodic", "symmetric"}));
  h.domain = cmd.add_option("--domain", f.domain, "prompt domain: clinical, legal, generic");
  cmd.add_flag("--offline", f.offline, "never touch the network");
  h.jobs = cmd.add_option("--jobs", f.jobs, "documents processed in parallel");
  cmd.add_option("--out", f.out, "output path (default: stdout)");
  return h;
}

dwtsum::RunConfig build_config(const SharedFlags& f, const OptionHandles& h) {
  dwtsum::RunConfig c;
  if (!f.config_path.empty()) dwtsum::load_config_file(c, f.config_path);
  if (h.provider->count()) c.provider.kind = dwtsum::parse_provider_kind(f.provider);
  if (h.dim->count()) c.provider.dim = f.dim;
  if (h.wavelet->count()) c.plan.family = dwtsum::WaveletFamily::parse(f.wavelet);
  if (h.levels && h.levels->count()) c.plan.levels = f.levels;
  if (h.target && h.target->count()) {
    c.plan.levels = 0;
    c.plan.target_compression_pct = f.target_compression;
  }
  if (h.fraction->count()) c.plan.detail_fraction = f.detail_fraction;
  if (h.source->count()) c.plan.detail_source = dwtsum::parse_detail_source(f.detail_source);
  if (h.boundary->count()) c.plan.boundary = dwtsum::parse_boundary(f.boundary);
  if (h.domain->count()) c.domain = dwtsum::parse_domain_tag(f.domain);
  if (h.jobs->count()) c.jobs = f.jobs;
  if (f.offline) {
    c.llm.offline = true;
    if (c.provider.kind == dwtsum::ProviderKind::http) {
      throw dwtsum::Error(dwtsum::ErrorKind::config, "--offline cannot be combined with the http provider");
    }
    c.provider.endpoint_url.clear();
  }
  return c;
}

/// Output stream for --out, or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw dwtsum::Error(dwtsum::ErrorKind::io, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiresolution (wavelet) summarization of long documents"};
  app.require_subcommand(1);

  SharedFlags sum_flags, dec_flags, eval_flags, sweep_flags;

  std::string sum_corpus;
  auto* summarize = app.add_subcommand("summarize", "summarize every document of a JSONL corpus");
  summarize->add_option("corpus", sum_corpus, "corpus JSONL")->required();
  const auto sum_h = add_shared(*summarize, sum_flags, true);

  std::string dec_input;
  std::string dec_doc_id;
  auto* decompose = app.add_subcommand("decompose", "dump coefficient shapes, energies and sentence matches");
  decompose->add_option("input", dec_input, "plain-text document or corpus JSONL")->required();
  auto* dec_doc_opt = decompose->add_option("--doc-id", dec_doc_id, "document to inspect within a corpus");
  const auto dec_h = add_shared(*decompose, dec_flags, true);

  std::string eval_summaries, eval_corpus, eval_aggregate;
  auto* evaluate = app.add_subcommand("evaluate", "score summaries against corpus documents and references");
  evaluate->add_option("summaries", eval_summaries, "summaries JSONL (doc_id, summary)")->required();
  evaluate->add_option("corpus", eval_corpus, "corpus JSONL")->required();
  evaluate->add_option("--aggregate-out", eval_aggregate, "aggregate JSON path (default: <out>.aggregate.json)");
  const auto eval_h = add_shared(*evaluate, eval_flags, false);

  std::string sweep_corpus;
  std::vector<int> sweep_levels;
  auto* sweep = app.add_subcommand("sweep-levels", "summarize and evaluate a corpus at several depths");
  sweep->add_option("corpus", sweep_corpus, "corpus JSONL")->required();
  sweep->add_option("--levels", sweep_levels, "comma-separated depths")->delimiter(',')->required();
  const auto sweep_h = add_shared(*sweep, sweep_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (summarize->parsed()) {
      const auto cfg = build_config(sum_flags, sum_h);
      Sink sink(sum_flags.out);
      return dwtsum::cmd_summarize(sum_corpus, cfg, sink.stream(), std::cerr);
    }
    if (decompose->parsed()) {
      const auto cfg = build_config(dec_flags, dec_h);
      Sink sink(dec_flags.out);
      std::optional<std::string> id;
      if (dec_doc_opt->count()) id = dec_doc_id;
      return dwtsum::cmd_decompose(dec_input, id, cfg, sink.stream(), std::cerr);
    }
    if (evaluate->parsed()) {
      const auto cfg = build_config(eval_flags, eval_h);
      Sink sink(eval_flags.out);
      std::string agg_path = eval_aggregate;
      if (agg_path.empty() && !eval_flags.out.empty()) agg_path = eval_flags.out + ".aggregate.json";
      Sink agg(agg_path);
      return dwtsum::cmd_evaluate(eval_summaries, eval_corpus, cfg, sink.stream(), agg.stream(), std::cerr);
    }
    if (sweep->parsed()) {
      const auto cfg = build_config(sweep_flags, sweep_h);
      Sink sink(sweep_flags.out);
      return dwtsum::cmd_sweep_levels(sweep_corpus, sweep_levels, cfg, sink.stream(), std::cerr);
    }
  } catch (const dwtsum::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dwtsum::kExitFailure;
  }
  return dwtsum::kExitFailure;
}
