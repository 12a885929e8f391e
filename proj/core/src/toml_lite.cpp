// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/toml_lite.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "hybridmesh/errors.hpp"

namespace hybridmesh::toml {

namespace {

bool is_bare(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  Json run() {
    Json root = Json::object();
    target_ = &root;
    while (true) {
      skip_blank();
      if (eof()) break;
      if (peek() == '[') {
        header(root);
      } else {
        key_value();
      }
    }
    return root;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  Json* target_ = nullptr;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line_);
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  char take() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  // Skips spaces and tabs on the current line.
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  // Skips whitespace, newlines, and comments.
  void skip_blank() {
    while (!eof()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        take();
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  // After a header or key/value, only whitespace or a comment may remain.
  void expect_eol() {
    skip_ws();
    if (eof()) return;
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
    if (eof()) return;
    if (peek() == '\r') take();
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    take();
  }

  std::string key_token() {
    skip_ws();
    if (eof()) fail("expected a key");
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string k;
    while (!eof() && is_bare(peek())) k.push_back(take());
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_path() {
    std::vector<std::string> path;
    path.push_back(key_token());
    skip_ws();
    while (!eof() && peek() == '.') {
      take();
      path.push_back(key_token());
      skip_ws();
    }
    return path;
  }

  // Walks `path` from the root, descending into the last element of any
  // array-of-tables along the way, creating tables as needed.
  Json* descend(Json& root, const std::vector<std::string>& path,
                std::size_t count) {
    Json* cur = &root;
    for (std::size_t i = 0; i < count; ++i) {
      Json& slot = (*cur)[path[i]];
      if (slot.is_null()) slot = Json::object();
      if (slot.is_array()) {
        if (slot.empty()) fail("empty table array '" + path[i] + "'");
        cur = &slot.back();
      } else if (slot.is_object()) {
        cur = &slot;
      } else {
        fail("'" + path[i] + "' is not a table");
      }
    }
    return cur;
  }

  void header(Json& root) {
    take();  // '['
    bool array = !eof() && peek() == '[';
    if (array) take();
    std::vector<std::string> path = dotted_path();
    skip_ws();
    if (eof() || take() != ']') fail("unterminated table header");
    if (array) {
      if (eof() || take() != ']') fail("expected ']]'");
    }
    expect_eol();

    Json* parent = descend(root, path, path.size() - 1);
    Json& slot = (*parent)[path.back()];
    if (array) {
      if (slot.is_null()) slot = Json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is not a table array");
      slot.push_back(Json::object());
      target_ = &slot.back();
    } else {
      if (slot.is_null()) slot = Json::object();
      if (!slot.is_object()) fail("'" + path.back() + "' redefined");
      target_ = &slot;
    }
  }

  void key_value() {
    std::string key = key_token();
    skip_ws();
    if (!eof() && peek() == '.') fail("dotted keys are not supported");
    if (eof() || take() != '=') fail("expected '=' after key '" + key + "'");
    skip_ws();
    Json value = parse_value();
    expect_eol();
    if (target_->contains(key)) fail("duplicate key '" + key + "'");
    (*target_)[key] = std::move(value);
  }

  Json parse_value() {
    if (eof()) fail("expected a value");
    char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') return array_value();
    if (c == '{') fail("inline tables are not supported");
    return scalar_value();
  }

  std::string string_value() {
    char quote = take();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated string");
      char c = take();
      if (c == quote) break;
      if (c == '\n') fail("newline in string");
      if (quote == '"' && c == '\\') {
        if (eof()) fail("unterminated escape");
        char e = take();
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail("unsupported escape");
        }
      } else {
        out.push_back(c);
      }
    }
    return out;
  }

  Json array_value() {
    take();  // '['
    Json arr = Json::array();
    while (true) {
      skip_blank();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        take();
        break;
      }
      arr.push_back(parse_value());
      skip_blank();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        take();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    return arr;
  }

  Json scalar_value() {
    std::string tok;
    while (!eof()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',' ||
          c == ']' || c == '#') {
        break;
      }
      tok.push_back(take());
    }
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf") {
      return std::numeric_limits<double>::infinity();
    }
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (tok == "nan" || tok == "+nan" || tok == "-nan") {
      fail("nan is not a valid configuration value");
    }

    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    bool floaty = digits.find('.') != std::string::npos ||
                  digits.find('e') != std::string::npos ||
                  digits.find('E') != std::string::npos;
    const char* s = digits.c_str();
    char* end = nullptr;
    if (!floaty) {
      long long v = std::strtoll(s, &end, 10);
      if (end == s + digits.size() && end != s) {
        return static_cast<std::int64_t>(v);
      }
    }
    double d = std::strtod(s, &end);
    if (end == s + digits.size() && end != s) return d;
    fail("cannot parse value '" + tok + "'");
  }
};

}  // namespace

Json parse(const std::string& text) { return Parser(text).run(); }

Json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace hybridmesh::toml
