#include "polarred/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <numbers>
#include <unordered_map>

namespace polarred {

// ---------------------------------------------------------------------------
// Error types live here since the expression layer is the first user.

namespace {
std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}
}  // namespace

SyntaxError::SyntaxError(std::size_t offset, std::vector<std::string> expected, const std::string& found)
    : Error("syntax error at byte " + std::to_string(offset) + ": expected one of {" + join(expected) +
            "}, found " + found),
      offset_(offset),
      expected_(std::move(expected)) {}

UnknownFunction::UnknownFunction(std::size_t offset, const std::string& name)
    : Error("unknown function '" + name + "' at byte " + std::to_string(offset)), offset_(offset), name_(name) {}

UnknownIdentifier::UnknownIdentifier(std::size_t offset, const std::string& name)
    : Error("unknown identifier '" + name + "' at byte " + std::to_string(offset)), offset_(offset), name_(name) {}

DomainError::DomainError(const std::string& what, std::size_t begin, std::size_t end, const std::string& subexpr)
    : Error(what + " in '" + subexpr + "' (bytes " + std::to_string(begin) + ".." + std::to_string(end) + ")"),
      begin_(begin),
      end_(end),
      subexpr_(subexpr) {}

InputError::InputError(const std::string& where, const std::string& message)
    : Error(where + ": " + message), where_(where) {}

// ---------------------------------------------------------------------------

namespace {

const std::unordered_map<std::string_view, ExprKind>& function_table() {
  static const std::unordered_map<std::string_view, ExprKind> table = {
      {"sin", ExprKind::Sin}, {"cos", ExprKind::Cos},   {"tan", ExprKind::Tan},    {"exp", ExprKind::Exp},
      {"log", ExprKind::Log}, {"sqrt", ExprKind::Sqrt}, {"atan2", ExprKind::Atan2}};
  return table;
}

const char* function_name(ExprKind k) {
  switch (k) {
    case ExprKind::Sin: return "sin";
    case ExprKind::Cos: return "cos";
    case ExprKind::Tan: return "tan";
    case ExprKind::Exp: return "exp";
    case ExprKind::Log: return "log";
    case ExprKind::Sqrt: return "sqrt";
    case ExprKind::Atan2: return "atan2";
    default: return "";
  }
}

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::size_t begin, end;
  double number = 0.0;
  std::string_view text;
};

std::string describe(const Token& t) {
  if (t.kind == Tok::End) return "end of input";
  return "'" + std::string(t.text) + "'";
}

}  // namespace

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  Expr parse_all() {
    Expr e = sum();
    if (tok_.kind != Tok::End) fail({"operator", "end of input"});
    return e;
  }

 private:
  using NodePtr = std::shared_ptr<Expr::Node>;

  static Expr wrap(NodePtr n) { return Expr(std::move(n)); }

  static Expr make(ExprKind k, std::size_t b, std::size_t e, std::vector<Expr> args = {}) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->begin = b;
    n->end = e;
    n->args = std::move(args);
    return wrap(n);
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError(tok_.begin, std::move(expected), describe(tok_));
  }

  void advance() {
    std::size_t i = pos_;
    while (i < src_.size() && (src_[i] == ' ' || src_[i] == '\t' || src_[i] == '\n' || src_[i] == '\r')) ++i;
    tok_ = Token{Tok::End, i, i, 0.0, {}};
    if (i >= src_.size()) {
      pos_ = i;
      return;
    }
    const char c = src_[i];
    auto single = [&](Tok k) {
      tok_ = Token{k, i, i + 1, 0.0, src_.substr(i, 1)};
      pos_ = i + 1;
    };
    switch (c) {
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '*': return single(Tok::Star);
      case '/': return single(Tok::Slash);
      case '^': return single(Tok::Caret);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      if (j < src_.size() && src_[j] == '.') {
        ++j;
        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      }
      if (j == i + 1 && c == '.') {
        tok_ = Token{Tok::End, i, i + 1, 0.0, src_.substr(i, 1)};
        fail({"number"});
      }
      if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
          while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
          j = k;
        }
      }
      double v = 0.0;
      const auto res = std::from_chars(src_.data() + i, src_.data() + j, v);
      tok_ = Token{Tok::Number, i, j, v, src_.substr(i, j - i)};
      if (res.ec != std::errc() || res.ptr != src_.data() + j || !std::isfinite(v)) fail({"finite number"});
      pos_ = j;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
      tok_ = Token{Tok::Ident, i, j, 0.0, src_.substr(i, j - i)};
      pos_ = j;
      return;
    }
    tok_ = Token{Tok::End, i, i + 1, 0.0, src_.substr(i, 1)};
    fail({"number", "identifier", "operator", "'('", "')'", "','"});
  }

  Expr sum() {
    Expr lhs = product();
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      const ExprKind k = tok_.kind == Tok::Plus ? ExprKind::Add : ExprKind::Sub;
      advance();
      Expr rhs = product();
      lhs = make(k, lhs.begin(), rhs.end(), {lhs, rhs});
    }
    return lhs;
  }

  Expr product() {
    Expr lhs = unary();
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
      const ExprKind k = tok_.kind == Tok::Star ? ExprKind::Mul : ExprKind::Div;
      advance();
      Expr rhs = unary();
      lhs = make(k, lhs.begin(), rhs.end(), {lhs, rhs});
    }
    return lhs;
  }

  Expr unary() {
    if (tok_.kind == Tok::Minus) {
      const std::size_t b = tok_.begin;
      advance();
      Expr arg = unary();
      return make(ExprKind::Neg, b, arg.end(), {arg});
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (tok_.kind == Tok::Caret) {
      advance();
      Expr exponent = unary();
      return make(ExprKind::Pow, base.begin(), exponent.end(), {base, exponent});
    }
    return base;
  }

  Expr primary() {
    const Token t = tok_;
    switch (t.kind) {
      case Tok::Number: {
        advance();
        Expr e = make(ExprKind::Number, t.begin, t.end);
        std::const_pointer_cast<Expr::Node>(e.node_)->value = t.number;
        return e;
      }
      case Tok::Ident: {
        advance();
        if (tok_.kind == Tok::LParen) return call(t);
        if (t.text == "pi") {
          Expr e = make(ExprKind::Pi, t.begin, t.end);
          std::const_pointer_cast<Expr::Node>(e.node_)->value = std::numbers::pi;
          return e;
        }
        Expr e = make(ExprKind::Variable, t.begin, t.end);
        std::const_pointer_cast<Expr::Node>(e.node_)->name = std::string(t.text);
        return e;
      }
      case Tok::LParen: {
        advance();
        Expr inner = sum();
        if (tok_.kind != Tok::RParen) fail({"')'"});
        advance();
        return inner;
      }
      default:
        fail({"number", "identifier", "'('", "'-'"});
    }
  }

  Expr call(const Token& name) {
    const auto& table = function_table();
    const auto it = table.find(name.text);
    if (it == table.end()) throw UnknownFunction(name.begin, std::string(name.text));
    advance();  // '('
    std::vector<Expr> args;
    args.push_back(sum());
    const std::size_t want = it->second == ExprKind::Atan2 ? 2 : 1;
    while (args.size() < want) {
      if (tok_.kind != Tok::Comma) fail({"','"});
      advance();
      args.push_back(sum());
    }
    if (tok_.kind != Tok::RParen) fail({"')'"});
    const std::size_t end = tok_.end;
    advance();
    return make(it->second, name.begin, end, std::move(args));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_{Tok::End, 0, 0, 0.0, {}};
};

// ---------------------------------------------------------------------------

namespace {
const std::string kEmpty;
}

const std::string& Expr::source() const { return source_ ? *source_ : kEmpty; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const Expr::Node& x = *a.node_;
  const Expr::Node& y = *b.node_;
  if (x.kind != y.kind || x.args.size() != y.args.size()) return false;
  if (x.kind == ExprKind::Number && x.value != y.value) return false;
  if (x.kind == ExprKind::Variable && x.name != y.name) return false;
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!(x.args[i] == y.args[i])) return false;
  return true;
}

Expr Expr::number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Number;
  n->value = v;
  return Expr(n);
}

Expr Expr::pi() {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Pi;
  n->value = std::numbers::pi;
  return Expr(n);
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Variable;
  n->name = std::move(name);
  return Expr(n);
}

Expr Expr::unary(ExprKind kind, Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = {std::move(arg)};
  return Expr(n);
}

Expr Expr::binary(ExprKind kind, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = {std::move(lhs), std::move(rhs)};
  return Expr(n);
}

Expr parse(std::string_view source) {
  Parser p(source);
  Expr e = p.parse_all();
  return Expr(e.node_, std::make_shared<const std::string>(source));
}

// ---------------------------------------------------------------------------
// Printing

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

int precedence(ExprKind k) {
  switch (k) {
    case ExprKind::Add:
    case ExprKind::Sub: return 1;
    case ExprKind::Mul:
    case ExprKind::Div: return 2;
    case ExprKind::Neg: return 3;
    case ExprKind::Pow: return 4;
    default: return 5;
  }
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& e, bool parens, std::string& out) {
  if (parens) out += '(';
  print(e, out);
  if (parens) out += ')';
}

void print(const Expr& e, std::string& out) {
  const ExprKind k = e.kind();
  const int p = precedence(k);
  switch (k) {
    case ExprKind::Number: {
      // Literals are nonnegative after parsing; a negative built literal prints
      // as a parenthesized negation so it re-parses to Neg(Number).
      if (e.value() < 0 || (e.value() == 0 && std::signbit(e.value()))) {
        out += "(-" + format_number(-e.value()) + ")";
      } else {
        out += format_number(e.value());
      }
      return;
    }
    case ExprKind::Pi: out += "pi"; return;
    case ExprKind::Variable: out += e.name(); return;
    case ExprKind::Neg:
      out += '-';
      print_child(e.args()[0], precedence(e.args()[0].kind()) < 3, out);
      return;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div: {
      const char* op = k == ExprKind::Add ? " + " : k == ExprKind::Sub ? " - " : k == ExprKind::Mul ? "*" : "/";
      print_child(e.args()[0], precedence(e.args()[0].kind()) < p, out);
      out += op;
      print_child(e.args()[1], precedence(e.args()[1].kind()) <= p, out);
      return;
    }
    case ExprKind::Pow: {
      const Expr& base = e.args()[0];
      const bool base_parens = precedence(base.kind()) <= p || (base.kind() == ExprKind::Number && base.value() < 0);
      print_child(base, base_parens, out);
      out += '^';
      print_child(e.args()[1], precedence(e.args()[1].kind()) < 3, out);
      return;
    }
    default: {
      out += function_name(k);
      out += '(';
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        if (i) out += ", ";
        print(e.args()[i], out);
      }
      out += ')';
      return;
    }
  }
}

void collect_variables(const Expr& e, std::vector<std::string>& names) {
  if (e.kind() == ExprKind::Variable) {
    if (std::find(names.begin(), names.end(), e.name()) == names.end()) names.push_back(e.name());
    return;
  }
  for (const Expr& a : e.args()) collect_variables(a, names);
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::string canonical_source(std::string_view source) { return to_string(parse(source)); }

bool is_constant(const Expr& e) { return free_variables(e).empty(); }

std::vector<std::string> free_variables(const Expr& e) {
  std::vector<std::string> names;
  collect_variables(e, names);
  return names;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

struct Compiler {
  const std::vector<std::string>& vars;
  std::size_t depth = 0, max_depth = 0;

  template <class Instr>
  void emit(const Expr& e, std::vector<Instr>& prog, std::vector<Expr>& subexprs) {
    for (const Expr& a : e.args()) emit(a, prog, subexprs);
    Instr in{};
    in.op = e.kind();
    in.expr_id = static_cast<std::uint32_t>(subexprs.size());
    subexprs.push_back(e);
    switch (e.kind()) {
      case ExprKind::Number:
      case ExprKind::Pi:
        in.value = e.value();
        push();
        break;
      case ExprKind::Variable: {
        const auto it = std::find(vars.begin(), vars.end(), e.name());
        if (it == vars.end()) throw UnknownIdentifier(e.begin(), e.name());
        in.index = static_cast<std::uint32_t>(it - vars.begin());
        push();
        break;
      }
      default:
        // n-ary ops pop their arguments and push one result.
        depth -= e.args().size() - 1;
        break;
    }
    prog.push_back(in);
  }

  void push() {
    ++depth;
    max_depth = std::max(max_depth, depth);
  }
};

}  // namespace

ScalarField::ScalarField(Expr expr, std::vector<std::string> variables)
    : expr_(std::move(expr)), variables_(std::make_shared<const std::vector<std::string>>(std::move(variables))) {
  Compiler c{*variables_};
  c.emit(expr_, program_, subexprs_);
  depth_ = c.max_depth;
  constant_ = std::none_of(program_.begin(), program_.end(), [](const Instr& i) { return i.op == ExprKind::Variable; });
}

void ScalarField::domain_error(const char* what, std::uint32_t expr_id) const {
  const Expr& sub = subexprs_.at(expr_id);
  throw DomainError(what, sub.begin(), sub.end(), to_string(sub));
}

Dual<double> ScalarField::evaluate_dual(std::span<const double> x, std::size_t width) const {
  std::array<Dual<double>, kMaxPartials * 2> small;
  std::vector<Dual<double>> big;
  Dual<double>* xs = small.data();
  if (x.size() > small.size()) {
    big.resize(x.size());
    xs = big.data();
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    xs[i] = i < width ? Dual<double>::variable(x[i], i, width) : Dual<double>(x[i]);
  return evaluate<Dual<double>>(std::span<const Dual<double>>(xs, x.size()));
}

}  // namespace polarred
