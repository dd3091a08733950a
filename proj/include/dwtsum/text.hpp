#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwtsum/error.hpp"
#include "dwtsum/utf8.hpp"

namespace dwtsum {

struct SentenceRecord {
  std::size_t index = 0;
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source, end exclusive
  std::size_t end = 0;
};

struct Document {
  std::string doc_id;
  std::string raw_text;
  std::vector<SentenceRecord> sentences;
  std::optional<std::string> reference;
};

// ---------------------------------------------------------------------------
// Abbreviations

using AbbreviationSet = std::unordered_set<std::string>;

inline AbbreviationSet parse_abbreviations(std::string_view listing) {
  AbbreviationSet out;
  std::istringstream in{std::string(listing)};
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string entry = line.substr(first, last - first + 1);
    std::transform(entry.begin(), entry.end(), entry.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(std::move(entry));
  }
  return out;
}

inline std::string_view default_abbreviation_listing() {
  static constexpr std::string_view listing =
#include "dwtsum/abbreviations.inc"
      ;
  return listing;
}

inline const AbbreviationSet& default_abbreviations() {
  static const AbbreviationSet set = parse_abbreviations(default_abbreviation_listing());
  return set;
}

inline AbbreviationSet load_abbreviations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read abbreviation list '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_abbreviations(buf.str());
}

// ---------------------------------------------------------------------------
// Segmentation

namespace detail {

inline bool is_space_at(std::string_view s, std::size_t pos, std::size_t* width = nullptr) {
  std::size_t p = pos;
  const char32_t cp = utf8::next(s, p);
  if (width) *width = p - pos;
  return utf8::is_space(cp);
}

inline std::size_t skip_space(std::string_view s, std::size_t pos) {
  std::size_t w = 0;
  while (pos < s.size() && is_space_at(s, pos, &w)) pos += w;
  return pos;
}

inline bool is_closer(char c) { return c == ')' || c == ']' || c == '"' || c == '\''; }
inline bool is_opener(char c) { return c == '(' || c == '[' || c == '"' || c == '\''; }

inline bool starts_sentence(std::string_view s, std::size_t pos) {
  if (pos < s.size() && is_opener(s[pos])) ++pos;
  if (pos >= s.size()) return false;
  const auto c = static_cast<unsigned char>(s[pos]);
  return std::isupper(c) || std::isdigit(c);
}

// The word ending at the period at `dot` (exclusive), bounded on the left by
// whitespace or `floor`.
inline std::string word_before(std::string_view s, std::size_t floor, std::size_t dot) {
  std::size_t b = dot;
  while (b > floor) {
    const auto c = static_cast<unsigned char>(s[b - 1]);
    if (std::isspace(c)) break;
    --b;
  }
  while (b < dot && (is_opener(s[b]) || s[b] == '-')) ++b;
  std::string w(s.substr(b, dot - b));
  std::transform(w.begin(), w.end(), w.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return w;
}

inline bool is_abbreviation(std::string_view s, std::size_t floor, std::size_t dot,
                            const AbbreviationSet& abbreviations) {
  const std::string w = word_before(s, floor, dot);
  if (w.empty()) return false;
  // Initials such as "J. Smith".
  if (w.size() == 1 && std::isalpha(static_cast<unsigned char>(w[0]))) return true;
  return abbreviations.count(w) > 0;
}

inline std::size_t trim_right(std::string_view s, std::size_t begin, std::size_t end) {
  while (end > begin) {
    // Step back over one code point.
    std::size_t p = end - 1;
    while (p > begin && (static_cast<unsigned char>(s[p]) & 0xC0) == 0x80) --p;
    if (!is_space_at(s, p)) break;
    end = p;
  }
  return end;
}

}  // namespace detail

/// Rule-based sentence splitter. A sentence ends at '.', '!' or '?' (plus any
/// closing quotes or brackets) when followed by whitespace and then an
/// uppercase letter or digit. Periods after known abbreviations and single
/// letter initials never end a sentence.
inline std::vector<SentenceRecord> segment_sentences(std::string_view text,
                                                     const AbbreviationSet& abbreviations) {
  std::size_t start = detail::skip_space(text, 0);
  if (start >= text.size()) {
    throw Error(ErrorKind::empty_document, "document is empty or whitespace-only");
  }

  std::vector<SentenceRecord> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    e = detail::trim_right(text, b, e);
    if (e <= b) return;
    SentenceRecord r;
    r.index = out.size();
    r.begin = b;
    r.end = e;
    r.text = std::string(text.substr(b, e - b));
    out.push_back(std::move(r));
  };

  std::size_t i = start;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (detail::is_closer(text[j]) || text[j] == '.' || text[j] == '!' ||
                               text[j] == '?')) {
      ++j;
    }
    if (j >= text.size() || !detail::is_space_at(text, j)) {
      i = j;
      continue;
    }
    const std::size_t k = detail::skip_space(text, j);
    if (k >= text.size()) break;
    if (!detail::starts_sentence(text, k) ||
        (c == '.' && j == i + 1 && detail::is_abbreviation(text, start, i, abbreviations))) {
      i = j;
      continue;
    }
    emit(start, j);
    start = k;
    i = k;
  }
  emit(start, text.size());
  return out;
}

inline std::vector<SentenceRecord> segment_sentences(std::string_view text) {
  return segment_sentences(text, default_abbreviations());
}

// ---------------------------------------------------------------------------
// Tokenization

struct Tokens {
  std::vector<std::string> raw;         // whitespace tokens, verbatim
  std::vector<std::string> normalized;  // lowercased, edge punctuation stripped, empties dropped
};

inline std::string normalize_token(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
  std::string out(token.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) {
    return ch < 0x80 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch);
  });
  return out;
}

inline Tokens tokenize_whitespace(std::string_view text) {
  Tokens t;
  std::size_t pos = 0;
  while (pos < text.size()) {
    pos = detail::skip_space(text, pos);
    if (pos >= text.size()) break;
    std::size_t end = pos;
    std::size_t w = 0;
    while (end < text.size() && !detail::is_space_at(text, end, &w)) {
      std::size_t p = end;
      utf8::next(text, p);
      end = p;
    }
    t.raw.emplace_back(text.substr(pos, end - pos));
    pos = end;
  }
  for (const auto& tok : t.raw) {
    auto norm = normalize_token(tok);
    if (!norm.empty()) t.normalized.push_back(std::move(norm));
  }
  return t;
}

inline std::size_t count_tokens(std::string_view text) { return tokenize_whitespace(text).raw.size(); }

// ---------------------------------------------------------------------------
// Corpus I/O

inline Document make_document(std::string doc_id, std::string text,
                              std::optional<std::string> reference = std::nullopt) {
  Document d;
  d.doc_id = std::move(doc_id);
  d.raw_text = std::move(text);
  d.sentences = segment_sentences(d.raw_text);
  d.reference = std::move(reference);
  return d;
}

/// One corpus line: either a parsed document or the reason it was rejected.
struct CorpusEntry {
  std::size_t line = 0;  // 1-based
  std::optional<Document> document;
  std::optional<Error> error;
  std::string doc_id;  // best effort, also set for rejected lines when known
};

inline CorpusEntry parse_corpus_line(const std::string& line, std::size_t line_no) {
  CorpusEntry entry;
  entry.line = line_no;
  const std::string where = "corpus line " + std::to_string(line_no) + ": ";
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw Error(ErrorKind::parse, where + "expected a JSON object");
    if (j.contains("doc_id") && j["doc_id"].is_string()) entry.doc_id = j["doc_id"].get<std::string>();
    for (const char* field : {"doc_id", "text"}) {
      if (!j.contains(field)) throw Error(ErrorKind::parse, where + "missing required field \"" + field + "\"");
      if (!j[field].is_string()) throw Error(ErrorKind::parse, where + "field \"" + field + "\" must be a string");
    }
    std::optional<std::string> reference;
    if (j.contains("reference") && !j["reference"].is_null()) {
      if (!j["reference"].is_string()) throw Error(ErrorKind::parse, where + "field \"reference\" must be a string");
      reference = j["reference"].get<std::string>();
    }
    try {
      entry.document = make_document(entry.doc_id, j["text"].get<std::string>(), std::move(reference));
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what(), "segment");
    }
  } catch (const nlohmann::json::parse_error& e) {
    entry.error = Error(ErrorKind::parse, where + "malformed JSON (" + e.what() + ")");
  } catch (const Error& e) {
    entry.error = e;
  }
  return entry;
}

/// Lenient reader: every non-blank line yields an entry.
inline std::vector<CorpusEntry> read_corpus(std::istream& in) {
  std::vector<CorpusEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_corpus_line(line, line_no));
  }
  return out;
}

inline std::vector<CorpusEntry> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read corpus '" + path + "'");
  return read_corpus(in);
}

/// Strict reader: the first bad line throws.
inline std::vector<Document> load_corpus(const std::string& path) {
  std::vector<Document> docs;
  for (auto& e : read_corpus(path)) {
    if (e.error) throw *e.error;
    docs.push_back(std::move(*e.document));
  }
  return docs;
}

}  // namespace dwtsum
