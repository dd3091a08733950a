#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/error.hpp"
#include "dwtsum/http.hpp"
#include "dwtsum/matrix.hpp"
#include "dwtsum/utf8.hpp"

namespace dwtsum {

/// One row per sentence, in document order.
struct EmbeddingMatrix {
  Matrix rows;
  std::string provider_id;
  bool normalized = false;

  std::size_t size() const noexcept { return rows.rows(); }
  std::size_t dim() const noexcept { return rows.cols(); }
};

enum class ProviderKind { deterministic, file_cache, http };

inline std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::deterministic: return "deterministic";
    case ProviderKind::file_cache: return "file_cache";
    case ProviderKind::http: return "http";
  }
  return "unknown";
}

inline ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "deterministic") return ProviderKind::deterministic;
  if (text == "file_cache") return ProviderKind::file_cache;
  if (text == "http") return ProviderKind::http;
  throw Error(ErrorKind::config, "unknown provider kind '" + std::string(text) + "'");
}

struct ProviderConfig {
  ProviderKind kind = ProviderKind::deterministic;
  std::size_t dim = 64;  // deterministic only

  // http, and file_cache fallback when endpoint_url is set
  std::string endpoint_url;
  std::string auth_token_env_var;
  std::string model_name;
  int timeout_ms = 30000;
  int max_retries = 3;
  int retry_backoff_ms = 250;
  std::size_t batch_size = 64;
  int max_in_flight = 4;

  std::string cache_path;  // file_cache
  bool normalize_rows = true;

  void validate() const {
    if (kind == ProviderKind::deterministic && dim < 8) {
      throw Error(ErrorKind::config, "deterministic provider needs dim >= 8, got " + std::to_string(dim));
    }
    if (timeout_ms <= 0) throw Error(ErrorKind::config, "timeout_ms must be positive");
    if (max_retries < 0) throw Error(ErrorKind::config, "max_retries must be non-negative");
    if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be positive");
    if (max_in_flight < 1) throw Error(ErrorKind::config, "max_in_flight must be >= 1");
    if (kind == ProviderKind::http && endpoint_url.empty()) {
      throw Error(ErrorKind::config, "http provider needs an endpoint URL");
    }
    if (kind == ProviderKind::file_cache && cache_path.empty()) {
      throw Error(ErrorKind::config, "file_cache provider needs a cache path");
    }
  }
};

// ---------------------------------------------------------------------------
// Hashing

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

/// Hex content hash of a sentence, the cache key component.
inline std::string content_hash(std::string_view text) { return hex64(fnv1a64(text)); }

// ---------------------------------------------------------------------------
// Deterministic hashing embedder

/// Signed feature hashing of lowercase character trigrams. Each trigram's
/// FNV-1a hash picks bucket `hash mod dim`; the popcount parity of the hash
/// picks the sign. The result is L2-normalized; a sentence with no trigrams
/// (or a fully cancelled accumulation) maps to the first basis vector.
inline std::vector<double> deterministic_embed(std::string_view sentence, std::size_t dim) {
  if (dim < 8) throw Error(ErrorKind::config, "deterministic embedding needs dim >= 8");
  std::vector<char32_t> cps = utf8::decode(sentence);
  for (auto& cp : cps) cp = utf8::ascii_lower(cp);

  std::vector<double> v(dim, 0.0);
  std::string gram;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    gram.clear();
    for (std::size_t k = 0; k < 3; ++k) utf8::append(gram, cps[i + k]);
    const std::uint64_t h = fnv1a64(gram);
    const double sign = (std::popcount(h) % 2 == 0) ? 1.0 : -1.0;
    v[h % dim] += sign;
  }
  const double n = norm2(v);
  if (n == 0.0) {
    v.assign(dim, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= n;
  return v;
}

inline void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm2(row);
    if (n == 0.0) continue;
    for (auto& x : row) x /= n;
  }
}

/// Mean-pooled, L2-normalized document vector.
inline std::vector<double> embed_document(const EmbeddingMatrix& matrix) {
  if (matrix.size() == 0) throw Error(ErrorKind::degenerate_input, "embed_document: empty matrix");
  std::vector<double> mean(matrix.dim(), 0.0);
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    const auto row = matrix.rows.row(r);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  for (auto& x : mean) x /= static_cast<double>(matrix.size());
  const double n = norm2(mean);
  if (n < 1e-9) {
    throw Error(ErrorKind::zero_vector, "document embedding has near-zero norm and cannot be normalized");
  }
  for (auto& x : mean) x /= n;
  return mean;
}

// ---------------------------------------------------------------------------
// Embedding cache

/// JSONL-backed vector store keyed by (provider, model, content hash).
/// Writes are serialized; re-inserting a key with a different dimension is an
/// error rather than an overwrite.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::string path) : path_(std::move(path)) { load(); }

  std::optional<std::vector<double>> find(const std::string& provider, const std::string& model,
                                          const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({provider, model, key});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& provider, const std::string& model, const std::string& key,
              const std::vector<double>& vector) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.try_emplace({provider, model, key}, vector);
    if (!inserted) {
      if (it->second.size() != vector.size()) {
        throw Error(ErrorKind::dimension_mismatch,
                    "cache key " + key + " already holds a " + std::to_string(it->second.size()) +
                        "-dim vector; refusing " + std::to_string(vector.size()) + "-dim write");
      }
      return;
    }
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorKind::io, "cannot append to embedding cache '" + path_ + "'");
    out << record(provider, model, key, vector).dump() << '\n';
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  static nlohmann::json record(const std::string& provider, const std::string& model,
                               const std::string& key, const std::vector<double>& vector) {
    return {{"key", key}, {"provider", provider}, {"model", model}, {"dim", vector.size()}, {"vector", vector}};
  }

 private:
  void load() {
    std::ifstream in(path_);
    if (!in) return;  // a missing cache file is an empty cache
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        auto vec = j.at("vector").get<std::vector<double>>();
        if (vec.size() != j.at("dim").get<std::size_t>()) {
          throw Error(ErrorKind::dimension_mismatch, "declared dim does not match vector length");
        }
        const Key k{j.at("provider").get<std::string>(), j.at("model").get<std::string>(),
                    j.at("key").get<std::string>()};
        auto [it, inserted] = entries_.try_emplace(k, std::move(vec));
        if (!inserted && it->second.size() != j.at("dim").get<std::size_t>()) {
          throw Error(ErrorKind::dimension_mismatch, "conflicting dimensions for key " + std::get<2>(k));
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, "embedding cache '" + path_ + "' line " + std::to_string(line_no) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(e.kind(), "embedding cache '" + path_ + "' line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  using Key = std::tuple<std::string, std::string, std::string>;
  std::string path_;
  mutable std::mutex mu_;
  std::map<Key, std::vector<double>> entries_;
};

// ---------------------------------------------------------------------------
// Providers

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual EmbeddingMatrix embed(const std::vector<std::string>& sentences) = 0;
};

class DeterministicProvider final : public EmbeddingProvider {
 public:
  explicit DeterministicProvider(std::size_t dim) : dim_(dim) {
    if (dim < 8) throw Error(ErrorKind::config, "deterministic provider needs dim >= 8");
  }

  std::string id() const override { return "deterministic-trigram-" + std::to_string(dim_); }

  EmbeddingMatrix embed(const std::vector<std::string>& sentences) override {
    if (sentences.empty()) throw Error(ErrorKind::degenerate_input, "no sentences to embed");
    EmbeddingMatrix out{Matrix(sentences.size(), dim_), id(), true};
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto v = deterministic_embed(sentences[i], dim_);
      std::copy(v.begin(), v.end(), out.rows.row(i).begin());
    }
    return out;
  }

 private:
  std::size_t dim_;
};

/// Embedding endpoint speaking {"model", "input"} -> {"data": [{"index", "embedding"}]}.
class HttpProvider final : public EmbeddingProvider {
 public:
  explicit HttpProvider(ProviderConfig config)
      : config_(std::move(config)), slots_(std::make_unique<std::counting_semaphore<1024>>(config_.max_in_flight)) {
    http::parse_url(config_.endpoint_url);
  }

  std::string id() const override { return "http:" + config_.model_name; }

  EmbeddingMatrix embed(const std::vector<std::string>& sentences) override {
    if (sentences.empty()) throw Error(ErrorKind::degenerate_input, "no sentences to embed");
    const auto bearer = http::bearer_from_env(config_.auth_token_env_var);
    const http::RetryPolicy policy{config_.timeout_ms, config_.max_retries, config_.retry_backoff_ms};

    std::vector<std::vector<double>> rows(sentences.size());
    std::size_t dim = 0;
    for (std::size_t start = 0; start < sentences.size(); start += config_.batch_size) {
      const std::size_t stop = std::min(sentences.size(), start + config_.batch_size);
      nlohmann::json payload = {{"model", config_.model_name},
                                {"input", std::vector<std::string>(sentences.begin() + static_cast<std::ptrdiff_t>(start),
                                                                   sentences.begin() + static_cast<std::ptrdiff_t>(stop))}};
      slots_->acquire();
      http::Response res;
      try {
        res = http::post_json(config_.endpoint_url, payload, bearer, policy);
      } catch (...) {
        slots_->release();
        throw;
      }
      slots_->release();
      dim = absorb(res.body, start, stop, rows, dim);
    }

    EmbeddingMatrix out{Matrix(sentences.size(), dim), id(), false};
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), out.rows.row(i).begin());
    if (config_.normalize_rows) {
      normalize_rows(out.rows);
      out.normalized = true;
    }
    return out;
  }

 private:
  static std::size_t absorb(const nlohmann::json& body, std::size_t start, std::size_t stop,
                            std::vector<std::vector<double>>& rows, std::size_t dim) {
    try {
      const auto& data = body.at("data");
      for (const auto& item : data) {
        const auto index = item.at("index").get<std::size_t>();
        if (index >= stop - start) throw Error(ErrorKind::parse, "embedding index " + std::to_string(index) + " out of range");
        auto vec = item.at("embedding").get<std::vector<double>>();
        if (vec.empty()) throw Error(ErrorKind::parse, "empty embedding vector");
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim) {
          throw Error(ErrorKind::dimension_mismatch, "embedding endpoint returned " + std::to_string(vec.size()) +
                                                         "-dim vector, expected " + std::to_string(dim));
        }
        for (double x : vec) {
          if (!std::isfinite(x)) throw Error(ErrorKind::parse, "non-finite embedding component");
        }
        rows[start + index] = std::move(vec);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, std::string("malformed embedding response: ") + e.what());
    }
    for (std::size_t i = start; i < stop; ++i) {
      if (rows[i].empty()) throw Error(ErrorKind::parse, "embedding response is missing index " + std::to_string(i - start));
    }
    return dim;
  }

  ProviderConfig config_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

/// Serves vectors from the cache file; on a miss, fetches through the http
/// provider when an endpoint is configured and records the result.
class FileCacheProvider final : public EmbeddingProvider {
 public:
  static constexpr const char* kSourceProvider = "http";

  explicit FileCacheProvider(ProviderConfig config) : config_(std::move(config)), cache_(config_.cache_path) {
    if (!config_.endpoint_url.empty()) fallback_ = std::make_unique<HttpProvider>(config_);
  }

  std::string id() const override { return "file_cache:" + config_.model_name; }

  EmbeddingMatrix embed(const std::vector<std::string>& sentences) override {
    if (sentences.empty()) throw Error(ErrorKind::degenerate_input, "no sentences to embed");
    std::vector<std::vector<double>> rows(sentences.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      auto hit = cache_.find(kSourceProvider, config_.model_name, content_hash(sentences[i]));
      if (hit) {
        rows[i] = std::move(*hit);
      } else {
        missing.push_back(i);
      }
    }
    if (!missing.empty()) {
      if (!fallback_) {
        throw Error(ErrorKind::cache_miss, "embedding cache miss for sentence hash " +
                                               content_hash(sentences[missing.front()]) + " (model '" +
                                               config_.model_name + "')");
      }
      std::vector<std::string> batch;
      for (auto i : missing) batch.push_back(sentences[i]);
      const auto fetched = fallback_->embed(batch);
      for (std::size_t k = 0; k < missing.size(); ++k) {
        const auto row = fetched.rows.row(k);
        rows[missing[k]].assign(row.begin(), row.end());
        cache_.insert(kSourceProvider, config_.model_name, content_hash(batch[k]), rows[missing[k]]);
      }
    }
    const std::size_t dim = rows.front().size();
    EmbeddingMatrix out{Matrix(sentences.size(), dim), id(), false};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim) {
        throw Error(ErrorKind::dimension_mismatch, "cached vectors have inconsistent dimensions");
      }
      std::copy(rows[i].begin(), rows[i].end(), out.rows.row(i).begin());
    }
    if (config_.normalize_rows) {
      normalize_rows(out.rows);
      out.normalized = true;
    }
    return out;
  }

 private:
  ProviderConfig config_;
  EmbeddingCache cache_;
  std::unique_ptr<HttpProvider> fallback_;
};

inline std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  switch (config.kind) {
    case ProviderKind::deterministic: return std::make_unique<DeterministicProvider>(config.dim);
    case ProviderKind::file_cache: return std::make_unique<FileCacheProvider>(config);
    case ProviderKind::http: return std::make_unique<HttpProvider>(config);
  }
  throw Error(ErrorKind::config, "unknown provider kind");
}

inline EmbeddingMatrix embed_sentences(const std::vector<std::string>& sentences, const ProviderConfig& config) {
  return make_provider(config)->embed(sentences);
}

}  // namespace dwtsum
