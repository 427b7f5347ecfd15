#include <cctype>
#include <cstdlib>
#include <map>
#include <set>
#include <vector>

#include "rulemon/error.hpp"
#include "rulemon/rule/ast.hpp"

namespace rulemon::rule {
namespace {

enum class Tok { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, Colon, Bang, Amp, Pipe, Arrow, Equals, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line, column, end_line, end_column;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::Ident: return "'" + t.text + "'";
    case Tok::Number: return "number " + t.text;
    case Tok::End: return "end of input";
    default: return "'" + t.text + "'";
  }
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  const auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char ch = src[i];
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      advance(1);
      continue;
    }
    Token t{Tok::End, "", 0.0, line, col, line, col};
    std::size_t len = 1;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      while (i + len < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i + len])) || src[i + len] == '_')) {
        ++len;
      }
      t.kind = Tok::Ident;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      const std::string rest(src.substr(i));
      char* end = nullptr;
      t.number = std::strtod(rest.c_str(), &end);
      len = static_cast<std::size_t>(end - rest.c_str());
      if (len == 0) throw ParseError("malformed number", line, col);
      t.kind = Tok::Number;
    } else {
      switch (ch) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case ',': t.kind = Tok::Comma; break;
        case ':': t.kind = Tok::Colon; break;
        case '!': t.kind = Tok::Bang; break;
        case '&': t.kind = Tok::Amp; break;
        case '|': t.kind = Tok::Pipe; break;
        case '=': t.kind = Tok::Equals; break;
        case '-':
          if (i + 1 < src.size() && src[i + 1] == '>') {
            t.kind = Tok::Arrow;
            len = 2;
            break;
          }
          [[fallthrough]];
        default:
          throw ParseError(std::string("unexpected character '") + ch + "'", line, col);
      }
    }
    t.text = std::string(src.substr(i, len));
    advance(len);
    t.end_line = line;
    t.end_column = col;
    out.push_back(std::move(t));
  }
  out.push_back({Tok::End, "", 0.0, line, col, line, col});
  return out;
}

const std::set<std::string> kReserved = {"forall", "exists", "in", "closeby", "denoise", "nbh", "P"};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  FormulaPtr run() {
    auto f = formula();
    if (peek().kind != Tok::End) fail("expected end of rule, found " + describe(peek()));
    if (free_.size() > 1) {
      const auto& [name, tok] = *std::next(free_order_.begin());
      throw ParseError("unbound variable '" + name + "' (only one free variable is allowed, '" +
                           free_order_.front().first + "' is already free)",
                       tok.line, tok.column);
    }
    for (const auto& [name, tok] : binders_) {
      if (free_.count(name)) {
        throw ParseError("variable '" + name + "' is used both free and bound", tok.line, tok.column);
      }
    }
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  bool peek_word(const char* w) const { return peek().kind == Tok::Ident && peek().text == w; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().line, peek().column); }

  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what + ", found " + describe(peek()));
    return take();
  }

  SourceSpan span_from(const Token& first) const {
    const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
    return {first.line, first.column, last.end_line, last.end_column};
  }

  void use_var(const Token& t) {
    for (const auto& s : scope_)
      if (s == t.text) return;
    if (!free_.count(t.text)) {
      free_.insert(t.text);
      free_order_.emplace_back(t.text, t);
    }
  }

  std::string variable() {
    const Token& t = expect(Tok::Ident, "variable");
    if (kReserved.count(t.text)) {
      throw ParseError("'" + t.text + "' is reserved and cannot name a variable", t.line, t.column);
    }
    use_var(t);
    return t.text;
  }

  // formula := quant | impl
  FormulaPtr formula() {
    if (peek_word("forall") || peek_word("exists")) return quant();
    return impl();
  }

  FormulaPtr quant() {
    const Token& first = take();
    const Quantifier q = first.text == "forall" ? Quantifier::ForAll : Quantifier::Exists;
    const Token& var = expect(Tok::Ident, "variable after quantifier");
    if (kReserved.count(var.text)) {
      throw ParseError("'" + var.text + "' is reserved and cannot name a variable", var.line, var.column);
    }
    for (const auto& s : scope_) {
      if (s == var.text) throw ParseError("variable '" + var.text + "' is already bound", var.line, var.column);
    }
    if (!peek_word("in")) fail("expected 'in', found " + describe(peek()));
    take();
    Domain d = domain();
    expect(Tok::Colon, "':'");
    scope_.push_back(var.text);
    binders_.emplace_back(var.text, var);
    auto body = formula();
    scope_.pop_back();
    return Formula::quantified(q, var.text, std::move(d), std::move(body), span_from(first));
  }

  Domain domain() {
    const Token& t = expect(Tok::Ident, "quantifier domain");
    Domain d;
    if (t.text == "P") return d;
    if (t.text == "nbh") {
      expect(Tok::LParen, "'('");
      d.kind = Domain::Kind::Neighborhood;
      d.center = variable();
      std::map<std::string, double> named;
      while (accept(Tok::Comma)) named_param(named);
      expect(Tok::RParen, "')'");
      if (const auto it = named.find("self"); it != named.end()) {
        if (it->second != 0.0 && it->second != 1.0) throw ParseError("self must be 0 or 1", t.line, t.column);
        d.include_self = it->second == 1.0;
        named.erase(it);
      }
      d.closeby = closeby_from(named, t);
      return d;
    }
    if (kReserved.count(t.text)) {
      throw ParseError("'" + t.text + "' cannot name a region", t.line, t.column);
    }
    d.kind = Domain::Kind::Region;
    d.name = t.text;
    return d;
  }

  // impl := or ("->" ("[" S|R "]")? formula)?
  FormulaPtr impl() {
    const Token& first = peek();
    auto lhs = disj();
    if (!accept(Tok::Arrow)) return lhs;
    std::optional<ImplicationStyle> style;
    if (accept(Tok::LBracket)) {
      const Token& s = expect(Tok::Ident, "implication style S or R");
      if (s.text == "S") {
        style = ImplicationStyle::S;
      } else if (s.text == "R") {
        style = ImplicationStyle::R;
      } else {
        throw ParseError("implication style must be S or R", s.line, s.column);
      }
      expect(Tok::RBracket, "']'");
    }
    auto rhs = formula();
    return Formula::implication(std::move(lhs), std::move(rhs), style, span_from(first));
  }

  FormulaPtr disj() {
    const Token& first = peek();
    auto lhs = conj();
    while (accept(Tok::Pipe)) lhs = Formula::disjunction(std::move(lhs), conj(), span_from(first));
    return lhs;
  }

  FormulaPtr conj() {
    const Token& first = peek();
    auto lhs = unary();
    while (accept(Tok::Amp)) lhs = Formula::conjunction(std::move(lhs), unary(), span_from(first));
    return lhs;
  }

  // unary := "!" unary | quant | atom
  FormulaPtr unary() {
    const Token& first = peek();
    if (accept(Tok::Bang)) return Formula::negation(unary(), span_from(first));
    if (peek_word("forall") || peek_word("exists")) return quant();
    return atom();
  }

  void named_param(std::map<std::string, double>& out) {
    const Token& name = expect(Tok::Ident, "parameter name");
    expect(Tok::Equals, "'='");
    const Token& value = expect(Tok::Number, "number");
    if (!out.emplace(name.text, value.number).second) {
      throw ParseError("parameter '" + name.text + "' given twice", name.line, name.column);
    }
  }

  static int integer(double v, const char* what, const Token& at) {
    if (v != static_cast<double>(static_cast<int>(v)) || v < 0) {
      throw ParseError(std::string(what) + " must be a non-negative integer", at.line, at.column);
    }
    return static_cast<int>(v);
  }

  static CloseByParams closeby_from(std::map<std::string, double> named, const Token& at) {
    static const std::set<std::string> known = {"sigma", "r", "ksize", "window", "cut"};
    for (const auto& [k, v] : named) {
      if (!known.count(k)) throw ParseError("unknown closeby parameter '" + k + "'", at.line, at.column);
    }
    const auto get = [&](const char* k) -> std::optional<double> {
      const auto it = named.find(k);
      return it == named.end() ? std::nullopt : std::optional<double>(it->second);
    };
    try {
      if (named.count("r") && named.count("ksize")) {
        throw ParseError("give either r or ksize, not both", at.line, at.column);
      }
      std::optional<int> radius;
      if (auto r = get("r")) radius = integer(*r, "r", at);
      if (auto k = get("ksize")) {
        const int ks = integer(*k, "ksize", at);
        if (ks % 2 == 0) throw ParseError("ksize must be odd", at.line, at.column);
        radius = (ks - 1) / 2;
      }
      if (auto w = get("window")) {
        if (named.size() != 1) throw ParseError("window cannot be combined with other parameters", at.line, at.column);
        return CloseByParams::square_window(integer(*w, "window", at));
      }
      if (auto s = get("sigma")) return CloseByParams::gaussian(*s, radius, get("cut").value_or(0.1));
      if (named.count("cut")) throw ParseError("cut needs sigma", at.line, at.column);
      if (radius) return CloseByParams::l1_radius(*radius);
      return CloseByParams::trivial();
    } catch (const UsageError& e) {
      throw ParseError(e.what(), at.line, at.column);
    }
  }

  // atom := IDENT "(" args ")" | "(" formula ")"
  FormulaPtr atom() {
    const Token& first = peek();
    if (accept(Tok::LParen)) {
      auto f = formula();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (first.kind != Tok::Ident) fail("expected predicate, '!', '(' or quantifier, found " + describe(first));
    const Token& name = take();
    expect(Tok::LParen, "'(' after predicate name");
    if (name.text == "closeby") {
      auto p = variable();
      expect(Tok::Comma, "','");
      auto q = variable();
      std::map<std::string, double> named;
      while (accept(Tok::Comma)) named_param(named);
      expect(Tok::RParen, "')'");
      return Formula::close_by(std::move(p), std::move(q), closeby_from(std::move(named), name), span_from(first));
    }
    if (name.text == "denoise") {
      auto body = formula();
      double t = 0.005;
      if (accept(Tok::Comma)) {
        std::map<std::string, double> named;
        named_param(named);
        if (!named.count("t")) throw ParseError("denoise takes only the parameter t", name.line, name.column);
        t = named["t"];
        if (!(t >= 0.0 && t <= 1.0)) throw ParseError("denoise threshold must lie in [0,1]", name.line, name.column);
      }
      expect(Tok::RParen, "')'");
      return Formula::denoised(std::move(body), t, span_from(first));
    }
    if (name.text == "in") {
      auto v = variable();
      expect(Tok::Comma, "','");
      const Token& region = expect(Tok::Ident, "region name");
      if (kReserved.count(region.text)) {
        throw ParseError("'" + region.text + "' cannot name a region", region.line, region.column);
      }
      expect(Tok::RParen, "')'");
      return Formula::membership(std::move(v), region.text, span_from(first));
    }
    if (kReserved.count(name.text)) {
      throw ParseError("'" + name.text + "' cannot be used as a predicate", name.line, name.column);
    }
    auto v = variable();
    expect(Tok::RParen, "')'");
    return Formula::predicate(name.text, std::move(v), span_from(first));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::string> scope_;
  std::set<std::string> free_;
  std::vector<std::pair<std::string, Token>> free_order_;
  std::vector<std::pair<std::string, Token>> binders_;
};

}  // namespace

FormulaPtr parse(std::string_view text) { return Parser(lex(text)).run(); }

}  // namespace rulemon::rule
