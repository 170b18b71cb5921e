#pragma once

// Tokenizer and statement splitter for the reference backend's SQL subset.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "tdump/error.hpp"

namespace tdump::sql {

enum class TokenKind { kIdent, kQuotedIdent, kString, kHexString, kNumber, kPunct, kEnd };

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;  // identifiers lower-cased unless quoted; strings unescaped
};

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<Token> tokenize(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::kQueryFailed, why + " near offset " + std::to_string(i));
  };
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
      auto end = sql.find("*/", i + 2);
      if (end == std::string_view::npos) fail("unterminated comment");
      i = end + 2;
    } else if ((c == 'x' || c == 'X') && i + 1 < sql.size() && sql[i + 1] == '\'') {
      auto end = sql.find('\'', i + 2);
      if (end == std::string_view::npos) fail("unterminated hex literal");
      out.push_back({TokenKind::kHexString, std::string(sql.substr(i + 2, end - i - 2))});
      i = end + 1;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < sql.size() &&
             (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_' || sql[j] == '$')) {
        ++j;
      }
      out.push_back({TokenKind::kIdent, lower(sql.substr(i, j - i))});
      i = j;
    } else if (c == '\'' || c == '"') {
      std::string text;
      std::size_t j = i + 1;
      while (true) {
        if (j >= sql.size()) fail("unterminated quoted text");
        if (sql[j] == c) {
          if (j + 1 < sql.size() && sql[j + 1] == c) {
            text += c;
            j += 2;
            continue;
          }
          break;
        }
        text += sql[j++];
      }
      out.push_back({c == '\'' ? TokenKind::kString : TokenKind::kQuotedIdent, std::move(text)});
      i = j + 1;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+' || c == '.') && i + 1 < sql.size() &&
                (std::isdigit(static_cast<unsigned char>(sql[i + 1])) || sql[i + 1] == '.'))) {
      std::size_t j = i + 1;
      while (j < sql.size()) {
        const char d = sql[j];
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '.') {
          ++j;
        } else if ((d == 'e' || d == 'E') && j + 1 < sql.size()) {
          j += (sql[j + 1] == '-' || sql[j + 1] == '+') ? 2 : 1;
        } else {
          break;
        }
      }
      out.push_back({TokenKind::kNumber, std::string(sql.substr(i, j - i))});
      i = j;
    } else if (std::string_view("(),;?*.=").find(c) != std::string_view::npos) {
      out.push_back({TokenKind::kPunct, std::string(1, c)});
      ++i;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({TokenKind::kEnd, {}});
  return out;
}

/// Splits a script on top-level `;`, ignoring semicolons in quotes and comments.
inline std::vector<std::string> split_statements(std::string_view script) {
  std::vector<std::string> out;
  std::string current;
  char quote = 0;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const char c = script[i];
    if (quote) {
      current += c;
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
      current += c;
    } else if (c == '-' && i + 1 < script.size() && script[i + 1] == '-') {
      while (i < script.size() && script[i] != '\n') ++i;
      current += '\n';
    } else if (c == '/' && i + 1 < script.size() && script[i + 1] == '*') {
      auto end = script.find("*/", i + 2);
      i = end == std::string_view::npos ? script.size() : end + 1;
      current += ' ';
    } else if (c == ';') {
      out.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  out.push_back(std::move(current));
  std::erase_if(out,
                [](const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; });
  return out;
}

/// Cursor over a token list with small helpers for keyword-driven parsing.
class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  Token take() {
    Token t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }
  bool at_keyword(std::string_view kw) const { return peek().kind == TokenKind::kIdent && peek().text == kw; }
  bool at_punct(char p) const { return peek().kind == TokenKind::kPunct && peek().text[0] == p; }
  bool accept_keyword(std::string_view kw) {
    if (!at_keyword(kw)) return false;
    take();
    return true;
  }
  bool accept_punct(char p) {
    if (!at_punct(p)) return false;
    take();
    return true;
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected '" + std::string(kw) + "'");
  }
  void expect_punct(char p) {
    if (!accept_punct(p)) fail(std::string("expected '") + p + "'");
  }
  std::string identifier() {
    const auto& t = peek();
    if (t.kind != TokenKind::kIdent && t.kind != TokenKind::kQuotedIdent) fail("expected identifier");
    return take().text;
  }
  std::size_t unsigned_number() {
    const auto& t = peek();
    if (t.kind != TokenKind::kNumber || t.text.find_first_not_of("0123456789") != std::string::npos) {
      fail("expected unsigned integer");
    }
    return std::stoul(take().text);
  }
  void expect_end() {
    accept_punct(';');
    if (peek().kind != TokenKind::kEnd) fail("unexpected trailing tokens");
  }

  [[noreturn]] void fail(const std::string& why) const {
    std::string near = peek().kind == TokenKind::kEnd ? "end of statement" : "'" + peek().text + "'";
    throw Error(ErrorCode::kQueryFailed, why + " at " + near);
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace tdump::sql
