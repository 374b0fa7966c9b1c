#pragma once

// Abstract syntax of megamodels.
//
// A megamodel is a control-flow graph of operations over named runtime
// models. Element ids (models, operations, transitions) share one namespace
// per megamodel. Source spans are carried for diagnostics only and never take
// part in equality.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mmrt/condition.hpp"
#include "mmrt/error.hpp"

namespace mmrt {

enum class PayloadKind { Opaque, Megamodel };

struct ModelDecl {
  std::string id;
  std::string name;  // human-readable, defaults to id
  std::vector<std::string> stereotypes;
  PayloadKind payload_kind = PayloadKind::Opaque;
  std::optional<std::string> megamodel_ref;
  SourceSpan span;
};

enum class UseMode { Read, Write, Annotate };

struct ModelUse {
  std::string model;
  UseMode mode = UseMode::Read;
};

enum class StepKind { Monitor, Analyze, Plan, Execute, Other };

struct InitialOp {};
struct FinalOp {};
struct DecisionOp {};

struct ModelOp {
  std::string behavior;
  StepKind step = StepKind::Other;
  std::vector<ModelUse> uses;
  std::vector<std::string> statuses;
};

struct MegamodelCall {
  std::string callee;
  std::string entry;
  /// callee final id -> outgoing status of the call, in declaration order.
  std::vector<std::pair<std::string, std::string>> final_mapping;

  std::optional<std::string> status_for(std::string_view final_id) const;
};

struct Operation {
  using Kind = std::variant<InitialOp, FinalOp, DecisionOp, ModelOp, MegamodelCall>;

  std::string id;
  std::string name;
  Kind kind;
  SourceSpan span;

  bool is_initial() const { return std::holds_alternative<InitialOp>(kind); }
  bool is_final() const { return std::holds_alternative<FinalOp>(kind); }
  bool is_decision() const { return std::holds_alternative<DecisionOp>(kind); }
  const ModelOp* model_op() const { return std::get_if<ModelOp>(&kind); }
  const MegamodelCall* call() const { return std::get_if<MegamodelCall>(&kind); }
  /// Status-labelled sources: ModelOps and MegamodelCalls.
  bool has_statuses() const { return model_op() != nullptr || call() != nullptr; }
};

struct Transition {
  std::string id;
  std::string source;
  std::string target;
  std::optional<std::string> status;
  std::optional<cond::Expr> condition;
  bool is_default = false;
  SourceSpan span;
};

struct MegamodelDef {
  std::string name;
  std::vector<ModelDecl> models;
  std::vector<Operation> operations;
  std::vector<Transition> transitions;
  SourceSpan span;

  const Operation* find_operation(std::string_view id) const;
  Operation* find_operation(std::string_view id);
  const Transition* find_transition(std::string_view id) const;
  Transition* find_transition(std::string_view id);
  const ModelDecl* find_model(std::string_view id) const;

  /// Outgoing transitions of `op` in declaration order.
  std::vector<const Transition*> outgoing(std::string_view op) const;

  /// Resolves a condition reference: the transition leaving `ref.operation`
  /// whose status (status-labelled sources) or target (others) equals
  /// `ref.label`. Null if there is not exactly one.
  const Transition* resolve(const cond::TransitionRef& ref) const;
};

/// Megamodels known by name; the lookup scope for calls and megamodel-typed
/// models.
using Catalog = std::map<std::string, MegamodelDef, std::less<>>;

/// The label a condition uses to refer to `t` (see MegamodelDef::resolve).
std::string transition_label(const MegamodelDef& def, const Transition& t);

/// Default transition id, `source.label`.
std::string derived_transition_id(const MegamodelDef& def, const Transition& t);

std::string_view to_string(StepKind k);
std::string_view to_string(UseMode m);
std::optional<StepKind> step_kind_from(std::string_view s);

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string code;  // E_* identifier
  std::string element;
  std::string message;
  SourceSpan span;
};

using ValidationReport = std::vector<Diagnostic>;

/// Checks every structural well-formedness rule. Problems are returned as
/// diagnostics, in a deterministic order; the function never throws.
/// References to other megamodels are looked up in `catalog`, and `def`
/// itself is visible under its own name.
ValidationReport validate(const MegamodelDef& def, const Catalog& catalog);

/// Every code validate() can emit.
const std::vector<std::string>& diagnostic_codes();

/// Isomorphism under element ids: list order, spans and derived ordering are
/// irrelevant; everything else must match.
bool structural_equals(const MegamodelDef& a, const MegamodelDef& b);

/// Expands every MegamodelCall into a copy of the callee graph (recursively).
/// Copied elements keep their ids unless that would collide, in which case
/// they get a `<call>__` prefix. Throws ERR_RECURSIVE_CALL on call cycles,
/// ERR_UNKNOWN_MEGAMODEL for unresolved callees, and ERR_INLINE_UNSUPPORTED
/// when a condition refers to a call exit that has no unique counterpart.
MegamodelDef inline_calls(const MegamodelDef& def, const Catalog& catalog);

}  // namespace mmrt
