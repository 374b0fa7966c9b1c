#pragma once

// Condition language for Decision branches.
//
// A condition is an integer/boolean expression over the execution
// information the interpreter keeps per transition:
//
//   count(Op.label)   executions of Op since that transition was last taken
//   time(Op.label)    clock value when it was last taken (0 if never)
//   taken(Op.label)   whether it has ever been taken
//   now               the runtime clock
//
// `label` is the status for ModelOp/MegamodelCall sources and the target
// operation id for Initial/Decision sources. Conditions never see model
// payloads; evaluation goes through InfoView only.

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmrt/error.hpp"

namespace mmrt::cond {

struct TransitionRef {
  std::string operation;
  std::string label;

  std::string str() const { return operation + "." + label; }
  auto operator<=>(const TransitionRef&) const = default;
};

enum class ArithOp { Add, Sub, Mul, Div };
enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class LogicOp { And, Or };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct IntLit {
  std::int64_t value = 0;
};
struct BoolLit {
  bool value = false;
};
struct Count {
  TransitionRef ref;
};
struct Time {
  TransitionRef ref;
};
struct Taken {
  TransitionRef ref;
};
struct Now {};
struct Arith {
  ArithOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Compare {
  CmpOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Logic {
  LogicOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Not {
  ExprPtr operand;
};

/// Immutable expression node. Children are shared, so copies are cheap.
struct Expr {
  using Node = std::variant<IntLit, BoolLit, Count, Time, Taken, Now, Arith, Compare, Logic, Not>;
  Node node;
};

bool operator==(const Expr& a, const Expr& b);

// Builders.
Expr lit(std::int64_t v);
Expr boolean(bool v);
Expr count(TransitionRef ref);
Expr time(TransitionRef ref);
Expr taken(TransitionRef ref);
Expr now();
Expr arith(ArithOp op, Expr lhs, Expr rhs);
Expr compare(CmpOp op, Expr lhs, Expr rhs);
Expr logic(LogicOp op, Expr lhs, Expr rhs);
Expr negate(Expr operand);

enum class Type { Int, Bool };

/// Infers the type of `e`; throws Error(ERR_TYPE) on an ill-typed subtree.
Type type_of(const Expr& e);

/// Throws Error(ERR_TYPE) unless `e` is well-typed with a boolean root.
void check_condition(const Expr& e);

/// All transition references in `e`, in left-to-right order (duplicates kept).
std::vector<TransitionRef> references(const Expr& e);

/// Parses condition text. Errors are ERR_SYNTAX / ERR_TYPE with a span
/// relative to `origin` (line 1, column 1 by default).
Expr parse_condition(std::string_view text, const SourceSpan& origin = {});

/// Canonical text. parse_condition(print(e)) == e for every well-typed e.
std::string print(const Expr& e);

struct TransitionInfo {
  std::uint64_t count = 0;
  std::int64_t time = 0;
  bool taken = false;

  bool operator==(const TransitionInfo&) const = default;
};

class InfoView {
 public:
  virtual ~InfoView() = default;
  virtual std::optional<TransitionInfo> lookup(const TransitionRef& ref) const = 0;
};

class MapInfoView final : public InfoView {
 public:
  std::map<TransitionRef, TransitionInfo> entries;

  std::optional<TransitionInfo> lookup(const TransitionRef& ref) const override {
    auto it = entries.find(ref);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
};

/// Evaluates a boolean condition with checked 64-bit arithmetic. Throws
/// ERR_DIV_ZERO, ERR_OVERFLOW, ERR_UNRESOLVED_REF or ERR_TYPE. `and`/`or`
/// short-circuit.
bool evaluate(const Expr& e, const InfoView& info, std::int64_t now);

}  // namespace mmrt::cond
