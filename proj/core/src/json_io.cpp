#include "ergae/json_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace ergae {

namespace {

enum class Tok { kLBrace, kRBrace, kLBracket, kRBracket, kColon, kComma, kString, kLiteral, kEnd };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t line;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    if (pos_ >= text_.size()) return {Tok::kEnd, {}, line_};
    const char c = text_[pos_];
    const std::size_t start = pos_;
    auto single = [&](Tok k) {
      ++pos_;
      return Token{k, text_.substr(start, 1), line_};
    };
    switch (c) {
      case '{':
        return single(Tok::kLBrace);
      case '}':
        return single(Tok::kRBrace);
      case '[':
        return single(Tok::kLBracket);
      case ']':
        return single(Tok::kRBracket);
      case ':':
        return single(Tok::kColon);
      case ',':
        return single(Tok::kComma);
      case '"': {
        const std::size_t line = line_;
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') {
          if (text_[pos_] == '\\') ++pos_;
          if (pos_ < text_.size() && text_[pos_] == '\n') ++line_;
          ++pos_;
        }
        if (pos_ >= text_.size()) throw JsonParseError("unterminated string", line);
        ++pos_;
        return {Tok::kString, text_.substr(start, pos_ - start), line};
      }
      default:
        break;
    }
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '{' || d == '}' || d == '[' || d == ']' || d == ':' ||
          d == ',' || d == '"') {
        break;
      }
      ++pos_;
    }
    return {Tok::kLiteral, text_.substr(start, pos_ - start), line_};
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { advance(); }

  bool at_end() const { return cur_.kind == Tok::kEnd; }

  void skip_commas() {
    while (cur_.kind == Tok::kComma) advance();
  }

  Json value() {
    switch (cur_.kind) {
      case Tok::kLBrace:
        return object();
      case Tok::kLBracket:
        return array();
      case Tok::kString: {
        Json v = decode(cur_);
        advance();
        return v;
      }
      case Tok::kLiteral: {
        Json v = decode(cur_);
        advance();
        return v;
      }
      case Tok::kEnd:
        throw JsonParseError("unexpected end of input", cur_.line);
      default:
        throw JsonParseError("unexpected '" + std::string(cur_.text) + "'", cur_.line);
    }
  }

 private:
  Json object() {
    advance();  // '{'
    Json obj = Json::object();
    for (;;) {
      skip_commas();
      if (cur_.kind == Tok::kRBrace) {
        advance();
        return obj;
      }
      if (cur_.kind != Tok::kString) {
        throw JsonParseError("expected object key, found '" + std::string(cur_.text) + "'", cur_.line);
      }
      const std::size_t key_line = cur_.line;
      std::string key = decode(cur_).get<std::string>();
      advance();
      if (cur_.kind != Tok::kColon) throw JsonParseError("expected ':' after key \"" + key + "\"", cur_.line);
      advance();
      if (obj.contains(key)) throw JsonParseError("duplicate key \"" + key + "\"", key_line);
      obj[key] = value();
    }
  }

  Json array() {
    advance();  // '['
    Json arr = Json::array();
    for (;;) {
      skip_commas();
      if (cur_.kind == Tok::kRBracket) {
        advance();
        return arr;
      }
      arr.push_back(value());
    }
  }

  static Json decode(const Token& t) {
    try {
      return Json::parse(t.text);
    } catch (const nlohmann::json::exception&) {
      throw JsonParseError("invalid token '" + std::string(t.text) + "'", t.line);
    }
  }

  void advance() { cur_ = lexer_.next(); }

  Lexer lexer_;
  Token cur_{Tok::kEnd, {}, 0};
};

}  // namespace

Json parse_relaxed_json(std::string_view text) {
  Parser p(text);
  p.skip_commas();
  Json v = p.value();
  p.skip_commas();
  if (!p.at_end()) throw JsonParseError("trailing content after document", 0);
  return v;
}

std::vector<Json> parse_relaxed_json_stream(std::string_view text) {
  Parser p(text);
  std::vector<Json> out;
  for (;;) {
    p.skip_commas();
    if (p.at_end()) break;
    out.push_back(p.value());
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace ergae
