#include "mmrt/condition.hpp"

#include <cctype>
#include <limits>
#include <sstream>

namespace mmrt::cond {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ExprPtr box(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      overloaded{
          [&](const IntLit& x) { return x.value == std::get<IntLit>(b.node).value; },
          [&](const BoolLit& x) { return x.value == std::get<BoolLit>(b.node).value; },
          [&](const Count& x) { return x.ref == std::get<Count>(b.node).ref; },
          [&](const Time& x) { return x.ref == std::get<Time>(b.node).ref; },
          [&](const Taken& x) { return x.ref == std::get<Taken>(b.node).ref; },
          [&](const Now&) { return true; },
          [&](const Arith& x) {
            const auto& y = std::get<Arith>(b.node);
            return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
          },
          [&](const Compare& x) {
            const auto& y = std::get<Compare>(b.node);
            return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
          },
          [&](const Logic& x) {
            const auto& y = std::get<Logic>(b.node);
            return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
          },
          [&](const Not& x) { return *x.operand == *std::get<Not>(b.node).operand; },
      },
      a.node);
}

Expr lit(std::int64_t v) { return {IntLit{v}}; }
Expr boolean(bool v) { return {BoolLit{v}}; }
Expr count(TransitionRef ref) { return {Count{std::move(ref)}}; }
Expr time(TransitionRef ref) { return {Time{std::move(ref)}}; }
Expr taken(TransitionRef ref) { return {Taken{std::move(ref)}}; }
Expr now() { return {Now{}}; }
Expr arith(ArithOp op, Expr lhs, Expr rhs) { return {Arith{op, box(std::move(lhs)), box(std::move(rhs))}}; }
Expr compare(CmpOp op, Expr lhs, Expr rhs) {
  return {Compare{op, box(std::move(lhs)), box(std::move(rhs))}};
}
Expr logic(LogicOp op, Expr lhs, Expr rhs) { return {Logic{op, box(std::move(lhs)), box(std::move(rhs))}}; }
Expr negate(Expr operand) { return {Not{box(std::move(operand))}}; }

Type type_of(const Expr& e) {
  auto expect = [](const Expr& sub, Type want, const char* where) {
    if (type_of(sub) != want) {
      throw Error("ERR_TYPE", std::string(where) + " expects " +
                                  (want == Type::Int ? "integer" : "boolean") + " operands");
    }
  };
  return std::visit(
      overloaded{
          [](const IntLit&) { return Type::Int; },
          [](const BoolLit&) { return Type::Bool; },
          [](const Count&) { return Type::Int; },
          [](const Time&) { return Type::Int; },
          [](const Taken&) { return Type::Bool; },
          [](const Now&) { return Type::Int; },
          [&](const Arith& x) {
            expect(*x.lhs, Type::Int, "arithmetic");
            expect(*x.rhs, Type::Int, "arithmetic");
            return Type::Int;
          },
          [&](const Compare& x) {
            expect(*x.lhs, Type::Int, "comparison");
            expect(*x.rhs, Type::Int, "comparison");
            return Type::Bool;
          },
          [&](const Logic& x) {
            expect(*x.lhs, Type::Bool, x.op == LogicOp::And ? "'and'" : "'or'");
            expect(*x.rhs, Type::Bool, x.op == LogicOp::And ? "'and'" : "'or'");
            return Type::Bool;
          },
          [&](const Not& x) {
            expect(*x.operand, Type::Bool, "'not'");
            return Type::Bool;
          },
      },
      e.node);
}

void check_condition(const Expr& e) {
  if (type_of(e) != Type::Bool) throw Error("ERR_TYPE", "condition must be boolean");
}

std::vector<TransitionRef> references(const Expr& e) {
  std::vector<TransitionRef> out;
  auto walk = [&out](const auto& self, const Expr& x) -> void {
    std::visit(overloaded{
                   [&](const Count& c) { out.push_back(c.ref); },
                   [&](const Time& c) { out.push_back(c.ref); },
                   [&](const Taken& c) { out.push_back(c.ref); },
                   [&](const Arith& c) {
                     self(self, *c.lhs);
                     self(self, *c.rhs);
                   },
                   [&](const Compare& c) {
                     self(self, *c.lhs);
                     self(self, *c.rhs);
                   },
                   [&](const Logic& c) {
                     self(self, *c.lhs);
                     self(self, *c.rhs);
                   },
                   [&](const Not& c) { self(self, *c.operand); },
                   [](const auto&) {},
               },
               x.node);
  };
  walk(walk, e);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Int, Ident, LParen, RParen, Dot, Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, Eq, Ne, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
};

class Parser {
 public:
  Parser(std::string_view text, const SourceSpan& origin) : text_(text), origin_(origin) { lex(); }

  Expr parse() {
    Expr e = parse_or();
    if (peek().kind != Tok::End) fail(peek(), "unexpected '" + peek().text + "'");
    try {
      check_condition(e);
    } catch (const Error& err) {
      throw Error(err.code(), err.what(), span_at(0));
    }
    return e;
  }

 private:
  SourceSpan span_at(std::size_t offset) const {
    SourceSpan s = origin_;
    if (s.line == 0) {
      s.line = 1;
      s.column = 1;
    }
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++s.line;
        s.column = 1;
      } else {
        ++s.column;
      }
    }
    return s;
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    std::ostringstream os;
    os << msg << " at " << span_at(t.offset);
    throw Error("ERR_SYNTAX", os.str(), span_at(t.offset));
  }

  void lex() {
    std::size_t i = 0;
    auto push = [&](Tok k, std::size_t len) {
      toks_.push_back({k, std::string(text_.substr(i, len)), i});
      i += len;
    };
    while (i < text_.size()) {
      char c = text_[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t j = i;
        while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
        push(Tok::Int, j - i);
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) ++j;
        push(Tok::Ident, j - i);
        continue;
      }
      auto next_is = [&](char n) { return i + 1 < text_.size() && text_[i + 1] == n; };
      switch (c) {
        case '(': push(Tok::LParen, 1); break;
        case ')': push(Tok::RParen, 1); break;
        case '.': push(Tok::Dot, 1); break;
        case '+': push(Tok::Plus, 1); break;
        case '-': push(Tok::Minus, 1); break;
        case '*': push(Tok::Star, 1); break;
        case '/': push(Tok::Slash, 1); break;
        case '<': next_is('=') ? push(Tok::Le, 2) : push(Tok::Lt, 1); break;
        case '>': next_is('=') ? push(Tok::Ge, 2) : push(Tok::Gt, 1); break;
        case '=':
          if (!next_is('=')) fail({Tok::End, "=", i}, "expected '=='");
          push(Tok::Eq, 2);
          break;
        case '!':
          if (!next_is('=')) fail({Tok::End, "!", i}, "expected '!='");
          push(Tok::Ne, 2);
          break;
        default:
          fail({Tok::End, std::string(1, c), i}, std::string("unexpected character '") + c + "'");
      }
    }
    toks_.push_back({Tok::End, "<end>", text_.size()});
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool at_keyword(std::string_view kw, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == kw;
  }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(peek(), std::string("expected ") + what + ", found '" + peek().text + "'");
    take();
  }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (at_keyword("or")) {
      take();
      lhs = logic(LogicOp::Or, std::move(lhs), parse_and());
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_cmp();
    while (at_keyword("and")) {
      take();
      lhs = logic(LogicOp::And, std::move(lhs), parse_cmp());
    }
    return lhs;
  }

  Expr parse_cmp() {
    if (at_keyword("not")) {
      take();
      return negate(parse_cmp());
    }
    if (at_keyword("taken") && peek(1).kind == Tok::LParen) {
      take();
      return taken(parse_call_ref());
    }
    if (at_keyword("true") || at_keyword("false")) return boolean(take().text == "true");

    Expr lhs = parse_sum();
    std::optional<CmpOp> op;
    switch (peek().kind) {
      case Tok::Lt: op = CmpOp::Lt; break;
      case Tok::Le: op = CmpOp::Le; break;
      case Tok::Gt: op = CmpOp::Gt; break;
      case Tok::Ge: op = CmpOp::Ge; break;
      case Tok::Eq: op = CmpOp::Eq; break;
      case Tok::Ne: op = CmpOp::Ne; break;
      default: break;
    }
    if (!op) return lhs;
    take();
    return compare(*op, std::move(lhs), parse_sum());
  }

  Expr parse_sum() {
    Expr lhs = parse_term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      ArithOp op = take().kind == Tok::Plus ? ArithOp::Add : ArithOp::Sub;
      lhs = arith(op, std::move(lhs), parse_term());
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_atom();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      ArithOp op = take().kind == Tok::Star ? ArithOp::Mul : ArithOp::Div;
      lhs = arith(op, std::move(lhs), parse_atom());
    }
    return lhs;
  }

  Expr parse_atom() {
    const Token& t = peek();
    if (t.kind == Tok::Int) return lit(parse_int(take(), false));
    if (t.kind == Tok::Minus && peek(1).kind == Tok::Int) {
      take();
      return lit(parse_int(take(), true));
    }
    if (t.kind == Tok::LParen) {
      take();
      Expr inner = parse_or();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (t.kind == Tok::Ident) {
      if (t.text == "now") {
        take();
        return now();
      }
      if ((t.text == "count" || t.text == "time") && peek(1).kind == Tok::LParen) {
        bool is_count = take().text == "count";
        TransitionRef ref = parse_call_ref();
        return is_count ? count(std::move(ref)) : time(std::move(ref));
      }
    }
    fail(t, "expected operand, found '" + t.text + "'");
  }

  TransitionRef parse_call_ref() {
    expect(Tok::LParen, "'('");
    if (peek().kind != Tok::Ident) fail(peek(), "expected operation name");
    TransitionRef ref;
    ref.operation = take().text;
    expect(Tok::Dot, "'.'");
    if (peek().kind != Tok::Ident) fail(peek(), "expected status or target name");
    ref.label = take().text;
    expect(Tok::RParen, "')'");
    return ref;
  }

  std::int64_t parse_int(const Token& t, bool negative) const {
    std::uint64_t v = 0;
    constexpr std::uint64_t limit = std::uint64_t{1} << 63;
    for (char c : t.text) {
      std::uint64_t d = static_cast<std::uint64_t>(c - '0');
      if (v > (limit - d) / 10) fail(t, "integer literal out of range");
      v = v * 10 + d;
    }
    if (negative) return v == limit ? std::numeric_limits<std::int64_t>::min() : -static_cast<std::int64_t>(v);
    if (v == limit) fail(t, "integer literal out of range");
    return static_cast<std::int64_t>(v);
  }

  std::string_view text_;
  SourceSpan origin_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// Binding strength used by the printer; mirrors the grammar levels.
int level(const Expr& e) {
  return std::visit(overloaded{
                        [](const Logic& x) { return x.op == LogicOp::Or ? 1 : 2; },
                        [](const Compare&) { return 3; },
                        [](const Not&) { return 3; },
                        [](const Taken&) { return 3; },
                        [](const BoolLit&) { return 3; },
                        [](const Arith& x) { return (x.op == ArithOp::Add || x.op == ArithOp::Sub) ? 4 : 5; },
                        [](const auto&) { return 6; },
                    },
                    e.node);
}

const char* op_text(ArithOp op) {
  switch (op) {
    case ArithOp::Add: return "+";
    case ArithOp::Sub: return "-";
    case ArithOp::Mul: return "*";
    case ArithOp::Div: return "/";
  }
  return "?";
}

const char* op_text(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
  }
  return "?";
}

void print_to(std::ostream& os, const Expr& e);

void print_operand(std::ostream& os, const Expr& e, bool parens) {
  if (parens) os << '(';
  print_to(os, e);
  if (parens) os << ')';
}

void print_to(std::ostream& os, const Expr& e) {
  std::visit(overloaded{
                 [&](const IntLit& x) { os << x.value; },
                 [&](const BoolLit& x) { os << (x.value ? "true" : "false"); },
                 [&](const Count& x) { os << "count(" << x.ref.str() << ')'; },
                 [&](const Time& x) { os << "time(" << x.ref.str() << ')'; },
                 [&](const Taken& x) { os << "taken(" << x.ref.str() << ')'; },
                 [&](const Now&) { os << "now"; },
                 [&](const Arith& x) {
                   int me = level(e);
                   print_operand(os, *x.lhs, level(*x.lhs) < me);
                   os << ' ' << op_text(x.op) << ' ';
                   print_operand(os, *x.rhs, level(*x.rhs) <= me);
                 },
                 [&](const Compare& x) {
                   print_operand(os, *x.lhs, level(*x.lhs) < 4);
                   os << ' ' << op_text(x.op) << ' ';
                   print_operand(os, *x.rhs, level(*x.rhs) < 4);
                 },
                 [&](const Logic& x) {
                   int me = level(e);
                   print_operand(os, *x.lhs, level(*x.lhs) < me);
                   os << (x.op == LogicOp::And ? " and " : " or ");
                   print_operand(os, *x.rhs, level(*x.rhs) <= me);
                 },
                 [&](const Not& x) {
                   os << "not ";
                   print_operand(os, *x.operand, level(*x.operand) < 3);
                 },
             },
             e.node);
}

// ---------------------------------------------------------------------------
// Evaluation

class Evaluator {
 public:
  Evaluator(const InfoView& info, std::int64_t now) : info_(info), now_(now) {}

  std::int64_t integer(const Expr& e) const {
    return std::visit(overloaded{
                          [](const IntLit& x) { return x.value; },
                          [&](const Count& x) {
                            auto c = lookup(x.ref).count;
                            if (c > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
                              throw Error("ERR_OVERFLOW", "count(" + x.ref.str() + ") exceeds 64-bit range");
                            }
                            return static_cast<std::int64_t>(c);
                          },
                          [&](const Time& x) {
                            auto i = lookup(x.ref);
                            return i.taken ? i.time : std::int64_t{0};
                          },
                          [&](const Now&) { return now_; },
                          [&](const Arith& x) { return apply(x.op, integer(*x.lhs), integer(*x.rhs)); },
                          [](const auto&) -> std::int64_t { throw Error("ERR_TYPE", "expected integer"); },
                      },
                      e.node);
  }

  bool truth(const Expr& e) const {
    return std::visit(overloaded{
                          [](const BoolLit& x) { return x.value; },
                          [&](const Taken& x) { return lookup(x.ref).taken; },
                          [&](const Compare& x) {
                            std::int64_t l = integer(*x.lhs);
                            std::int64_t r = integer(*x.rhs);
                            switch (x.op) {
                              case CmpOp::Lt: return l < r;
                              case CmpOp::Le: return l <= r;
                              case CmpOp::Gt: return l > r;
                              case CmpOp::Ge: return l >= r;
                              case CmpOp::Eq: return l == r;
                              case CmpOp::Ne: return l != r;
                            }
                            return false;
                          },
                          [&](const Logic& x) {
                            bool l = truth(*x.lhs);
                            if (x.op == LogicOp::And) return l && truth(*x.rhs);
                            return l || truth(*x.rhs);
                          },
                          [&](const Not& x) { return !truth(*x.operand); },
                          [](const auto&) -> bool { throw Error("ERR_TYPE", "expected boolean"); },
                      },
                      e.node);
  }

 private:
  TransitionInfo lookup(const TransitionRef& ref) const {
    auto i = info_.lookup(ref);
    if (!i) throw Error("ERR_UNRESOLVED_REF", "unresolved transition reference " + ref.str());
    return *i;
  }

  static std::int64_t apply(ArithOp op, std::int64_t l, std::int64_t r) {
    std::int64_t out = 0;
    bool overflow = false;
    switch (op) {
      case ArithOp::Add: overflow = __builtin_add_overflow(l, r, &out); break;
      case ArithOp::Sub: overflow = __builtin_sub_overflow(l, r, &out); break;
      case ArithOp::Mul: overflow = __builtin_mul_overflow(l, r, &out); break;
      case ArithOp::Div:
        if (r == 0) throw Error("ERR_DIV_ZERO", "division by zero");
        if (l == std::numeric_limits<std::int64_t>::min() && r == -1) overflow = true;
        else out = l / r;
        break;
    }
    if (overflow) throw Error("ERR_OVERFLOW", "integer overflow");
    return out;
  }

  const InfoView& info_;
  std::int64_t now_;
};

}  // namespace

Expr parse_condition(std::string_view text, const SourceSpan& origin) { return Parser(text, origin).parse(); }

std::string print(const Expr& e) {
  std::ostringstream os;
  print_to(os, e);
  return os.str();
}

bool evaluate(const Expr& e, const InfoView& info, std::int64_t now) {
  return Evaluator(info, now).truth(e);
}

}  // namespace mmrt::cond
