#pragma once

// Query token sequences, boundary vectors and the pipe-delimited
// annotation format ("long sleeve|summer|dress").

#include <cctype>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qseg/common.hpp"

namespace qseg {

struct QueryTokens {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const QueryTokens&) const = default;

  std::string joined() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out += ' ';
      out += tokens[i];
    }
    return out;
  }
};

// One break decision per gap between adjacent tokens: breaks.size() == N-1.
struct Segmentation {
  std::vector<bool> breaks;

  std::size_t size() const { return breaks.size(); }
  bool operator==(const Segmentation&) const = default;

  std::size_t break_count() const {
    std::size_t n = 0;
    for (bool b : breaks) n += b ? 1 : 0;
    return n;
  }
};

struct AnnotatedQuery {
  QueryTokens query;
  std::vector<Segmentation> annotations;
  std::optional<Segmentation> gold;
};

namespace detail {

inline bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
    case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
    case 0x200A: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
    case 0x3000:
      return true;
    default:
      return false;
  }
}

// Decodes the codepoint starting at s[i] and advances i past it.
// Malformed bytes are returned as-is so messy log data still tokenizes.
inline char32_t decode_utf8(const std::string& s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0) { len = 4; cp = b0 & 0x07u; }
  else if (b0 >= 0xE0) { len = 3; cp = b0 & 0x0Fu; }
  else if (b0 >= 0xC0) { len = 2; cp = b0 & 0x1Fu; }
  if (len == 1 || i + len > s.size()) { ++i; return b0; }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0u) != 0x80u) { ++i; return b0; }
    cp = (cp << 6) | (bk & 0x3Fu);
  }
  i += len;
  return cp;
}

}  // namespace detail

// Lowercases (ASCII) and splits on runs of Unicode whitespace.
inline QueryTokens tokenize(const std::string& raw) {
  QueryTokens out;
  std::string current;
  std::size_t i = 0;
  while (i < raw.size()) {
    const std::size_t start = i;
    const char32_t cp = detail::decode_utf8(raw, i);
    if (detail::is_unicode_space(cp)) {
      if (!current.empty()) {
        out.tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.append(raw, start, i - start);
    }
  }
  if (!current.empty()) out.tokens.push_back(std::move(current));
  for (std::string& t : out.tokens) t = lowercase_ascii(std::move(t));
  if (out.tokens.empty()) throw EmptyQuery("query has no tokens");
  return out;
}

// Parses "long sleeve|summer|dress" into tokens plus break vector.
inline std::pair<QueryTokens, Segmentation> parse_annotated_line(const std::string& line) {
  const std::vector<std::string> parts = split_on_char(line, '|');
  QueryTokens query;
  Segmentation seg;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    QueryTokens segment_tokens;
    try {
      segment_tokens = tokenize(parts[s]);
    } catch (const EmptyQuery&) {
      throw MalformedLine("empty segment in annotated line: '" + line + "'");
    }
    if (s > 0) {
      seg.breaks.push_back(true);  // break at the segment join
    }
    for (std::size_t t = 0; t < segment_tokens.size(); ++t) {
      if (t > 0) seg.breaks.push_back(false);
      query.tokens.push_back(segment_tokens.tokens[t]);
    }
  }
  return {std::move(query), std::move(seg)};
}

// Joins segment tokens with spaces and segments with '|'.
inline std::string format_segmented(const QueryTokens& query, const Segmentation& seg) {
  if (seg.size() + 1 != query.size()) {
    throw LengthMismatch("break vector length " + std::to_string(seg.size()) +
                         " does not match token count " + std::to_string(query.size()));
  }
  std::string out = query.tokens.empty() ? std::string() : query.tokens[0];
  for (std::size_t i = 1; i < query.size(); ++i) {
    out += seg.breaks[i - 1] ? '|' : ' ';
    out += query.tokens[i];
  }
  return out;
}

// Token spans of each segment, left to right.
inline std::vector<std::pair<std::size_t, std::size_t>> segment_spans(
    const QueryTokens& query, const Segmentation& seg) {
  if (seg.size() + 1 != query.size()) {
    throw LengthMismatch("break vector does not match token count");
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t start = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg.breaks[i]) {
      spans.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  spans.emplace_back(start, query.size());
  return spans;
}

inline bool is_blank_line(const std::string& line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// One query per line; blank lines skipped.
inline std::vector<QueryTokens> read_raw_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open raw query log: " + path);
  std::vector<QueryTokens> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank_line(line)) continue;
    out.push_back(tokenize(line));
  }
  return out;
}

// Annotated file: one query per line, one or more TAB-separated annotator
// columns, each a pipe-delimited segmentation of the same token sequence.
inline std::vector<AnnotatedQuery> read_annotated_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotated file: " + path);
  std::vector<AnnotatedQuery> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank_line(line)) continue;
    const std::vector<std::string> columns = split_on_char(line, '\t');
    AnnotatedQuery aq;
    try {
      for (std::size_t c = 0; c < columns.size(); ++c) {
        auto [query, seg] = parse_annotated_line(columns[c]);
        if (c == 0) {
          aq.query = std::move(query);
        } else if (query != aq.query) {
          throw MalformedLine("annotator columns disagree on tokens");
        }
        aq.annotations.push_back(std::move(seg));
      }
    } catch (const Error& e) {
      throw MalformedLine(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(aq));
  }
  return out;
}

inline void write_annotated_file(const std::string& path,
                                 const std::vector<AnnotatedQuery>& queries) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write annotated file: " + path);
  for (const AnnotatedQuery& aq : queries) {
    if (aq.gold.has_value()) {
      out << format_segmented(aq.query, *aq.gold) << '\n';
    } else {
      for (std::size_t c = 0; c < aq.annotations.size(); ++c) {
        if (c > 0) out << '\t';
        out << format_segmented(aq.query, aq.annotations[c]);
      }
      out << '\n';
    }
  }
}

inline void write_raw_log(const std::string& path, const std::vector<QueryTokens>& queries) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write raw query log: " + path);
  for (const QueryTokens& q : queries) out << q.joined() << '\n';
}

}  // namespace qseg
