#pragma once

// Run configuration: a flat `key = value` file with dotted keys, overridden by
// command-line flags. The effective configuration is echoed into outputs.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dwtsum/embedding.hpp"
#include "dwtsum/error.hpp"
#include "dwtsum/llm.hpp"
#include "dwtsum/summarizer.hpp"

namespace dwtsum {

struct RunConfig {
  ProviderConfig provider;
  DecompositionPlan plan;
  LlmClientConfig llm;
  DomainTag domain = DomainTag::generic;
  std::string prompt_template_path;
  int jobs = 1;
  std::uint64_t seed = 0;

  void set(std::string_view key, std::string_view value);
  void validate() const {
    provider.validate();
    plan.validate();
    llm.validate();
    if (jobs < 1) throw Error(ErrorKind::config, "run.jobs must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::config, "invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

// from_chars for double is unavailable in some standard libraries.
inline double parse_real(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const std::string s(value);
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "invalid value '" + std::string(value) + "' for " + std::string(key));
  }
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error(ErrorKind::config, "invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

}  // namespace detail

inline void RunConfig::set(std::string_view key, std::string_view value) {
  using detail::parse_bool;
  using detail::parse_number;
  using detail::parse_real;
  const std::string v(value);

  if (key == "provider.kind") provider.kind = parse_provider_kind(value);
  else if (key == "provider.dim") provider.dim = parse_number<std::size_t>(key, value);
  else if (key == "provider.endpoint_url") provider.endpoint_url = v;
  else if (key == "provider.auth_token_env") provider.auth_token_env_var = v;
  else if (key == "provider.model") provider.model_name = v;
  else if (key == "provider.timeout_ms") provider.timeout_ms = parse_number<int>(key, value);
  else if (key == "provider.max_retries") provider.max_retries = parse_number<int>(key, value);
  else if (key == "provider.retry_backoff_ms") provider.retry_backoff_ms = parse_number<int>(key, value);
  else if (key == "provider.batch_size") provider.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "provider.max_in_flight") provider.max_in_flight = parse_number<int>(key, value);
  else if (key == "provider.cache_path") provider.cache_path = v;
  else if (key == "provider.normalize") provider.normalize_rows = parse_bool(key, value);
  else if (key == "plan.wavelet") plan.family = WaveletFamily::parse(value);
  else if (key == "plan.levels") plan.levels = parse_number<int>(key, value);
  else if (key == "plan.target_compression") {
    plan.target_compression_pct = parse_real(key, value);
    plan.levels = 0;
  }
  else if (key == "plan.detail_fraction") plan.detail_fraction = parse_real(key, value);
  else if (key == "plan.detail_source") plan.detail_source = parse_detail_source(value);
  else if (key == "plan.boundary") plan.boundary = parse_boundary(value);
  else if (key == "llm.endpoint_url") llm.endpoint_url = v;
  else if (key == "llm.model") llm.model_name = v;
  else if (key == "llm.auth_token_env") llm.auth_token_env_var = v;
  else if (key == "llm.temperature") llm.temperature = parse_real(key, value);
  else if (key == "llm.max_output_tokens") llm.max_output_tokens = parse_number<int>(key, value);
  else if (key == "llm.timeout_ms") llm.timeout_ms = parse_number<int>(key, value);
  else if (key == "llm.max_retries") llm.max_retries = parse_number<int>(key, value);
  else if (key == "llm.retry_backoff_ms") llm.retry_backoff_ms = parse_number<int>(key, value);
  else if (key == "llm.max_in_flight") llm.max_in_flight = parse_number<int>(key, value);
  else if (key == "llm.offline") llm.offline = parse_bool(key, value);
  else if (key == "llm.domain") domain = parse_domain_tag(value);
  else if (key == "llm.prompt_template") prompt_template_path = v;
  else if (key == "run.jobs") jobs = parse_number<int>(key, value);
  else if (key == "run.seed") seed = parse_number<std::uint64_t>(key, value);
  else throw Error(ErrorKind::config, "unknown configuration key '" + std::string(key) + "'");
}

/// Applies a `key = value` listing. Blank lines and '#' comments are ignored.
inline void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin = "config") {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, origin + " line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(detail::trim(trimmed.substr(0, eq)), detail::trim(trimmed.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::config, origin + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read config file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(config, text, path);
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json provider = {{"kind", to_string(c.provider.kind)}, {"normalize", c.provider.normalize_rows}};
  switch (c.provider.kind) {
    case ProviderKind::deterministic:
      provider["dim"] = c.provider.dim;
      break;
    case ProviderKind::file_cache:
      provider["cache_path"] = c.provider.cache_path;
      [[fallthrough]];
    case ProviderKind::http:
      provider["endpoint_url"] = c.provider.endpoint_url;
      provider["model"] = c.provider.model_name;
      provider["auth_token_env"] = c.provider.auth_token_env_var;
      provider["timeout_ms"] = c.provider.timeout_ms;
      provider["max_retries"] = c.provider.max_retries;
      provider["batch_size"] = c.provider.batch_size;
      break;
  }
  nlohmann::json llm = {{"offline", c.llm.offline}, {"domain", to_string(c.domain)}};
  if (!c.llm.offline) {
    llm["endpoint_url"] = c.llm.endpoint_url;
    llm["model"] = c.llm.model_name;
    llm["auth_token_env"] = c.llm.auth_token_env_var;
    llm["temperature"] = c.llm.temperature;
    llm["max_output_tokens"] = c.llm.max_output_tokens;
  }
  if (!c.prompt_template_path.empty()) llm["prompt_template"] = c.prompt_template_path;
  return {{"provider", provider}, {"plan", to_json(c.plan)}, {"llm", llm}, {"run", {{"seed", c.seed}}}};
}

}  // namespace dwtsum
