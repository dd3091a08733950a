#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dwtsum {

enum class ErrorKind {
  config,
  degenerate_input,
  shape,
  level_overflow,
  empty_document,
  parse,
  io,
  cache_miss,
  dimension_mismatch,
  zero_vector,
  transport,
  empty_completion,
  pipeline,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::shape: return "shape";
    case ErrorKind::level_overflow: return "level_overflow";
    case ErrorKind::empty_document: return "empty_document";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::cache_miss: return "cache_miss";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::zero_vector: return "zero_vector";
    case ErrorKind::transport: return "transport";
    case ErrorKind::empty_completion: return "empty_completion";
    case ErrorKind::pipeline: return "pipeline";
  }
  return "unknown";
}

/// Library-wide exception. `stage` is filled in by the summarizer pipeline
/// when an error crosses a stage boundary (segment, embed, transform, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {})
      : std::runtime_error(message), kind_(kind), stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const { return Error(kind_, what(), std::move(stage)); }

 private:
  ErrorKind kind_;
  std::string stage_;
};

}  // namespace dwtsum
