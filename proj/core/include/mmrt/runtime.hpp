#pragma once

// Megamodel interpreter.
//
// Each registered megamodel owns exactly one ExecutionContext, reused by
// every run and every call site. Execution is synchronous and
// single-threaded: ModelOps run to completion, MegamodelCalls run the callee
// to one of its finals before the caller continues, and a megamodel that is
// already on the call stack cannot be entered again.
//
// Per-transition bookkeeping: when a transition is taken its count becomes 0,
// its time becomes the current clock and it is marked taken; every sibling
// leaving the same source gets count + 1. Counts survive across runs.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmrt/clock.hpp"
#include "mmrt/condition.hpp"
#include "mmrt/metamodel.hpp"
#include "mmrt/repository.hpp"
#include "mmrt/trace.hpp"

namespace mmrt {

/// ERR_INVALID, carrying the diagnostics that caused the rejection.
class InvalidDefinition : public Error {
 public:
  explicit InvalidDefinition(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct ExecutionContext {
  std::string megamodel;
  std::optional<std::string> current;
  std::map<std::string, cond::TransitionInfo, std::less<>> info;  // by transition id
  bool active = false;
};

class Runtime;

/// Access to one model as declared by the running operation. Mutation is
/// checked against the declared use mode and faults with ERR_ACCESS_MODE.
class ModelAccess {
 public:
  ModelAccess(Runtime& rt, std::string model_id, std::string handle, UseMode mode)
      : rt_(&rt), model_id_(std::move(model_id)), handle_(std::move(handle)), mode_(mode) {}

  const std::string& model_id() const { return model_id_; }
  const std::string& handle() const { return handle_; }
  UseMode mode() const { return mode_; }

  const nlohmann::json& content() const;
  const nlohmann::json& annotations() const;
  std::uint64_t version() const;

  /// Write mode only.
  void replace_content(nlohmann::json content);
  /// Write or Annotate mode.
  void replace_annotations(nlohmann::json annotations);

 private:
  Runtime* rt_;
  std::string model_id_;
  std::string handle_;
  UseMode mode_;
};

class Adaptation;

/// A megamodel used as a model: the live definition of `target`, readable by
/// any declared use and adaptable through a Write use.
class MegamodelAccess {
 public:
  MegamodelAccess(Runtime& rt, std::string target, bool writable)
      : rt_(&rt), target_(std::move(target)), writable_(writable) {}

  const std::string& target() const { return target_; }
  const MegamodelDef& definition() const;
  const ExecutionContext& context() const;

  /// Read-only access to a model as bound inside the target megamodel.
  ModelAccess model(std::string_view model_id) const;

  void replace_model(std::string_view model_id, std::string_view handle);
  void set_condition(std::string_view transition_id, const cond::Expr& expr);
  void rewire(std::string_view transition_id, std::string_view new_target);
  Adaptation adapt();

 private:
  void require_write() const;

  Runtime* rt_;
  std::string target_;
  bool writable_;
};

/// What a behavior sees while its ModelOp executes.
class OperationContext {
 public:
  OperationContext(Runtime& rt, std::string megamodel, std::string operation, std::int64_t clock);

  const std::string& megamodel() const { return megamodel_; }
  const std::string& operation() const { return operation_; }
  std::int64_t clock() const { return clock_; }

  bool uses(std::string_view model_id) const;
  /// Access with the strongest mode declared for `model_id`; faults with
  /// ERR_UNDECLARED_MODEL if the operation does not use it.
  ModelAccess model(std::string_view model_id);
  /// For megamodel-typed models.
  MegamodelAccess megamodel_model(std::string_view model_id);
  /// Repository handle the model is currently bound to.
  std::string handle_of(std::string_view model_id) const;

 private:
  std::optional<UseMode> declared_mode(std::string_view model_id) const;

  Runtime& rt_;
  std::string megamodel_;
  std::string operation_;
  std::int64_t clock_;
};

using Behavior = std::function<std::string(OperationContext&)>;

struct RunOptions {
  std::uint64_t max_steps = 1'000'000;
};

/// A batch of structural and binding changes to one megamodel. commit()
/// applies all steps to a copy, validates the result (and every megamodel
/// that depends on it) and either installs it or throws, leaving the runtime
/// untouched.
class Adaptation {
 public:
  Adaptation(Runtime& rt, std::string target);

  Adaptation& replace_model(std::string model_id, std::string handle);
  Adaptation& set_condition(std::string transition_id, cond::Expr expr);
  Adaptation& rewire(std::string transition_id, std::string new_target);
  Adaptation& add_operation(Operation op);
  Adaptation& add_transition(Transition t);
  Adaptation& remove_operation(std::string op_id);
  Adaptation& remove_transition(std::string transition_id);

  void commit();

 private:
  friend class Runtime;
  struct Draft;
  using Step = std::function<void(Draft&)>;

  Runtime& rt_;
  std::string target_;
  std::vector<Step> steps_;
};

class Runtime {
 public:
  explicit Runtime(std::unique_ptr<Clock> clock = std::make_unique<WallClock>());
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Throws ERR_DUPLICATE_NAME or InvalidDefinition.
  void register_megamodel(MegamodelDef def);
  /// Registers mutually referencing megamodels together.
  void register_all(std::vector<MegamodelDef> defs);

  void bind_behavior(std::string key, Behavior behavior);

  /// Throws ERR_REENTRANT if a run is in progress, ERR_UNKNOWN_MEGAMODEL or
  /// ERR_UNKNOWN_ENTRY before starting. Runtime faults end the run and are
  /// reported in the result.
  RunResult run(std::string_view megamodel, std::string_view entry, const RunOptions& options = {});

  bool contains(std::string_view megamodel) const;
  const MegamodelDef& definition(std::string_view megamodel) const;
  const ExecutionContext& context(std::string_view megamodel) const;
  std::string binding(std::string_view megamodel, std::string_view model_id) const;
  Catalog catalog() const;
  std::vector<std::string> names() const;

  ModelRepository& repository() { return repo_; }
  const ModelRepository& repository() const { return repo_; }
  Clock& clock() { return *clock_; }

  void adapt_replace_model(std::string_view megamodel, std::string_view model_id, std::string_view handle);
  void adapt_set_condition(std::string_view megamodel, std::string_view transition_id, const cond::Expr& expr);
  void adapt_rewire(std::string_view megamodel, std::string_view transition_id, std::string_view new_target);
  void adapt_add_operation(std::string_view megamodel, Operation op, std::vector<Transition> transitions);
  void adapt_remove_operation(std::string_view megamodel, std::string_view op_id);
  Adaptation adapt(std::string_view megamodel);

  /// Called after every emitted event; the runtime is in a consistent state.
  void set_observer(std::function<void(const TraceEvent&)> observer) { observer_ = std::move(observer); }

  /// Adaptation events emitted while no run was in progress.
  const std::vector<TraceEvent>& idle_events() const { return idle_events_; }

  bool running() const { return running_; }

 private:
  friend class Adaptation;
  friend class ModelAccess;
  friend class OperationContext;

  struct Entry {
    MegamodelDef def;
    std::map<std::string, std::string, std::less<>> bindings;  // model id -> handle or megamodel name
    ExecutionContext ctx;
  };

  struct Fault {
    std::string code;
    std::string message;
    std::string megamodel;
    std::optional<std::string> op;
  };

  Entry& entry(std::string_view megamodel);
  const Entry& entry(std::string_view megamodel) const;
  Entry make_entry(MegamodelDef def);

  std::string execute(const std::string& megamodel, const std::string& entry_op, std::uint64_t& steps,
                      const RunOptions& options);
  std::string invoke(Entry& e, const Operation& op, const ModelOp& mop);
  bool evaluate_condition(const Entry& e, const cond::Expr& expr);
  void take(Entry& e, const Transition& t);
  void emit(TraceKind kind, const std::string& megamodel, std::optional<std::string> op = std::nullopt,
            std::optional<std::string> status = std::nullopt);

  std::unique_ptr<Clock> clock_;
  ModelRepository repo_;
  std::map<std::string, Entry, std::less<>> megamodels_;
  std::map<std::string, Behavior, std::less<>> behaviors_;
  std::function<void(const TraceEvent&)> observer_;
  std::vector<TraceEvent>* trace_ = nullptr;
  std::vector<TraceEvent> idle_events_;
  std::uint64_t seq_ = 0;
  std::uint64_t idle_seq_ = 0;
  bool running_ = false;
};

}  // namespace mmrt
