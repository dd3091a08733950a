#pragma once

// Hybrid mode: the DWT selection is packed into a two-section prompt and sent
// to a chat-completion endpoint. Offline mode returns the extractive summary,
// so the extractive and hybrid paths share one call site.

#include <fstream>
#include <map>
#include <memory>
#include <semaphore>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/error.hpp"
#include "dwtsum/http.hpp"
#include "dwtsum/summarizer.hpp"
#include "dwtsum/text.hpp"

namespace dwtsum {

enum class DomainTag { clinical, legal, generic };

inline std::string_view to_string(DomainTag t) {
  switch (t) {
    case DomainTag::clinical: return "clinical";
    case DomainTag::legal: return "legal";
    case DomainTag::generic: return "generic";
  }
  return "generic";
}

inline DomainTag parse_domain_tag(std::string_view text) {
  if (text == "clinical") return DomainTag::clinical;
  if (text == "legal") return DomainTag::legal;
  if (text == "generic") return DomainTag::generic;
  throw Error(ErrorKind::config, "unknown domain tag '" + std::string(text) + "'");
}

/// Named text blocks parsed from a template listing.
class PromptTemplate {
 public:
  static PromptTemplate parse(std::string_view listing) {
    PromptTemplate t;
    std::istringstream in{std::string(listing)};
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
      if (!line.empty() && line.front() == '#') continue;
      if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
        current = line.substr(1, line.size() - 2);
        t.sections_[current];
        continue;
      }
      if (current.empty()) continue;
      auto& body = t.sections_[current];
      if (!body.empty()) body += '\n';
      body += line;
    }
    for (const char* required : {"system", "skeleton_header", "details_header", "instruction.clinical",
                                 "instruction.legal", "instruction.generic"}) {
      if (t.sections_.count(required) == 0) {
        throw Error(ErrorKind::config, std::string("prompt template is missing section [") + required + "]");
      }
    }
    return t;
  }

  static const PromptTemplate& builtin() {
    static const PromptTemplate t = parse(
#include "dwtsum/prompt_template.inc"
    );
    return t;
  }

  static PromptTemplate load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read prompt template '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  const std::string& section(const std::string& name) const { return sections_.at(name); }

 private:
  std::map<std::string, std::string> sections_;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<std::string> skeleton_sentences;  // document order
  std::vector<std::string> detail_sentences;    // document order
  std::string extractive_text;                  // all picks in document order
  DomainTag domain_tag = DomainTag::generic;
  std::size_t token_budget_hint = 0;
};

inline PromptBundle build_prompt(const SummaryResult& summary, const Document& document, DomainTag domain,
                                 const PromptTemplate& tmpl = PromptTemplate::builtin()) {
  PromptBundle b;
  b.domain_tag = domain;
  b.skeleton_sentences = summary.sentences_with(document, Provenance::approximation);
  b.detail_sentences = summary.sentences_with(document, Provenance::detail);
  if (b.skeleton_sentences.empty()) {
    throw Error(ErrorKind::pipeline, "cannot build a prompt without skeleton sentences");
  }
  b.extractive_text = summary.summary_text;
  b.system_text = tmpl.section("system");

  std::string user = tmpl.section("skeleton_header") + "\n";
  for (const auto& s : b.skeleton_sentences) user += "- " + s + "\n";
  if (!b.detail_sentences.empty()) {
    user += "\n" + tmpl.section("details_header") + "\n";
    for (const auto& s : b.detail_sentences) user += "- " + s + "\n";
  }
  user += "\n" + tmpl.section("instruction." + std::string(to_string(domain)));
  b.user_text = std::move(user);
  b.token_budget_hint = count_tokens(b.extractive_text);
  return b;
}

struct LlmClientConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string auth_token_env_var;
  double temperature = 0.0;
  int max_output_tokens = 512;
  int timeout_ms = 60000;
  int max_retries = 2;
  int retry_backoff_ms = 500;
  int max_in_flight = 4;
  bool offline = true;

  void validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(ErrorKind::config, "temperature must lie in [0, 2]");
    if (offline) return;
    if (endpoint_url.empty()) throw Error(ErrorKind::config, "online generation needs an endpoint URL");
    if (model_name.empty()) throw Error(ErrorKind::config, "online generation needs a model name");
    if (timeout_ms <= 0) throw Error(ErrorKind::config, "timeout_ms must be positive");
    if (max_output_tokens <= 0) throw Error(ErrorKind::config, "max_output_tokens must be positive");
    if (max_retries < 0) throw Error(ErrorKind::config, "max_retries must be non-negative");
    if (max_in_flight < 1) throw Error(ErrorKind::config, "max_in_flight must be >= 1");
    http::parse_url(endpoint_url);
  }
};

struct GeneratedSummary {
  std::string text;
  bool offline = true;
  nlohmann::json usage;  // null offline
  int attempts = 0;
};

inline nlohmann::json chat_request(const PromptBundle& bundle, const LlmClientConfig& config) {
  return {{"model", config.model_name},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", bundle.system_text}},
                                  {{"role", "user"}, {"content", bundle.user_text}}})},
          {"temperature", config.temperature},
          {"max_tokens", config.max_output_tokens}};
}

class LlmClient {
 public:
  explicit LlmClient(LlmClientConfig config)
      : config_(std::move(config)), slots_(std::make_unique<std::counting_semaphore<1024>>(config_.max_in_flight)) {
    config_.validate();
  }

  GeneratedSummary generate(const PromptBundle& bundle) const {
    if (config_.offline) return {bundle.extractive_text, true, nullptr, 0};

    const auto bearer = http::bearer_from_env(config_.auth_token_env_var);
    slots_->acquire();
    http::Response res;
    try {
      res = http::post_json(config_.endpoint_url, chat_request(bundle, config_), bearer,
                            {config_.timeout_ms, config_.max_retries, config_.retry_backoff_ms});
    } catch (...) {
      slots_->release();
      throw;
    }
    slots_->release();

    std::string text;
    try {
      text = res.body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, std::string("malformed chat completion: ") + e.what());
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorKind::empty_completion, "chat completion returned no text");
    }
    return {std::move(text), false, res.body.value("usage", nlohmann::json()), res.attempts};
  }

  const LlmClientConfig& config() const noexcept { return config_; }

 private:
  LlmClientConfig config_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

inline GeneratedSummary generate(const PromptBundle& bundle, const LlmClientConfig& config) {
  return LlmClient(config).generate(bundle);
}

}  // namespace dwtsum
