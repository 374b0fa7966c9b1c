#include "mmrt/runtime.hpp"

#include <algorithm>
#include <set>

namespace mmrt {

namespace {

std::string summarize(const ValidationReport& report) {
  std::string msg = "invalid megamodel:";
  for (const auto& d : report) msg += " " + d.code + "(" + d.element + ")";
  return msg;
}

int strength(UseMode m) {
  switch (m) {
    case UseMode::Read: return 0;
    case UseMode::Annotate: return 1;
    case UseMode::Write: return 2;
  }
  return 0;
}

}  // namespace

InvalidDefinition::InvalidDefinition(ValidationReport report)
    : Error("ERR_INVALID", summarize(report)), report_(std::move(report)) {}

// ---------------------------------------------------------------------------
// Model access

const nlohmann::json& ModelAccess::content() const { return rt_->repo_.get(handle_).content; }
const nlohmann::json& ModelAccess::annotations() const { return rt_->repo_.get(handle_).annotations; }
std::uint64_t ModelAccess::version() const { return rt_->repo_.version(handle_); }

void ModelAccess::replace_content(nlohmann::json content) {
  if (mode_ != UseMode::Write) {
    throw Error("ERR_ACCESS_MODE", "model '" + model_id_ + "' is not writable by this operation");
  }
  rt_->repo_.replace_content(handle_, std::move(content));
}

void ModelAccess::replace_annotations(nlohmann::json annotations) {
  if (mode_ == UseMode::Read) {
    throw Error("ERR_ACCESS_MODE", "model '" + model_id_ + "' is read-only for this operation");
  }
  rt_->repo_.replace_annotations(handle_, std::move(annotations));
}

const MegamodelDef& MegamodelAccess::definition() const { return rt_->definition(target_); }
const ExecutionContext& MegamodelAccess::context() const { return rt_->context(target_); }

ModelAccess MegamodelAccess::model(std::string_view model_id) const {
  const ModelDecl* decl = definition().find_model(model_id);
  if (decl == nullptr || decl->payload_kind != PayloadKind::Opaque) {
    throw Error("ERR_UNKNOWN_ELEMENT", target_ + " has no opaque model '" + std::string(model_id) + "'");
  }
  return ModelAccess(*rt_, std::string(model_id), rt_->binding(target_, model_id), UseMode::Read);
}

void MegamodelAccess::require_write() const {
  if (!writable_) throw Error("ERR_ACCESS_MODE", "megamodel '" + target_ + "' is not writable by this operation");
}

void MegamodelAccess::replace_model(std::string_view model_id, std::string_view handle) {
  require_write();
  rt_->adapt_replace_model(target_, model_id, handle);
}

void MegamodelAccess::set_condition(std::string_view transition_id, const cond::Expr& expr) {
  require_write();
  rt_->adapt_set_condition(target_, transition_id, expr);
}

void MegamodelAccess::rewire(std::string_view transition_id, std::string_view new_target) {
  require_write();
  rt_->adapt_rewire(target_, transition_id, new_target);
}

Adaptation MegamodelAccess::adapt() {
  require_write();
  return rt_->adapt(target_);
}

OperationContext::OperationContext(Runtime& rt, std::string megamodel, std::string operation, std::int64_t clock)
    : rt_(rt), megamodel_(std::move(megamodel)), operation_(std::move(operation)), clock_(clock) {}

std::optional<UseMode> OperationContext::declared_mode(std::string_view model_id) const {
  const Operation* op = rt_.definition(megamodel_).find_operation(operation_);
  const ModelOp* mop = op != nullptr ? op->model_op() : nullptr;
  if (mop == nullptr) return std::nullopt;
  std::optional<UseMode> mode;
  for (const auto& use : mop->uses) {
    if (use.model == model_id && (!mode || strength(use.mode) > strength(*mode))) mode = use.mode;
  }
  return mode;
}

bool OperationContext::uses(std::string_view model_id) const { return declared_mode(model_id).has_value(); }

ModelAccess OperationContext::model(std::string_view model_id) {
  auto mode = declared_mode(model_id);
  if (!mode) {
    throw Error("ERR_UNDECLARED_MODEL", operation_ + " does not declare a use of '" + std::string(model_id) + "'");
  }
  const ModelDecl* decl = rt_.definition(megamodel_).find_model(model_id);
  if (decl == nullptr || decl->payload_kind != PayloadKind::Opaque) {
    throw Error("ERR_ACCESS_MODE", "'" + std::string(model_id) + "' is a megamodel; use megamodel_model()");
  }
  return ModelAccess(rt_, std::string(model_id), rt_.binding(megamodel_, model_id), *mode);
}

MegamodelAccess OperationContext::megamodel_model(std::string_view model_id) {
  auto mode = declared_mode(model_id);
  if (!mode) {
    throw Error("ERR_UNDECLARED_MODEL", operation_ + " does not declare a use of '" + std::string(model_id) + "'");
  }
  const ModelDecl* decl = rt_.definition(megamodel_).find_model(model_id);
  if (decl == nullptr || decl->payload_kind != PayloadKind::Megamodel) {
    throw Error("ERR_ACCESS_MODE", "'" + std::string(model_id) + "' is not a megamodel");
  }
  return MegamodelAccess(rt_, rt_.binding(megamodel_, model_id), *mode == UseMode::Write);
}

std::string OperationContext::handle_of(std::string_view model_id) const { return rt_.binding(megamodel_, model_id); }

// ---------------------------------------------------------------------------
// Adaptation batches

struct Adaptation::Draft {
  MegamodelDef def;
  std::map<std::string, std::string, std::less<>> bindings;
  const ExecutionContext& ctx;
  const ModelRepository& repo;
  std::vector<std::string> bumped;
  std::vector<std::pair<std::string, std::string>> events;  // element, description

  bool is_current(std::string_view op) const { return ctx.active && ctx.current && *ctx.current == op; }

  Transition& transition(std::string_view id) {
    Transition* t = def.find_transition(id);
    if (t == nullptr) throw Error("ERR_UNKNOWN_ELEMENT", def.name + " has no transition '" + std::string(id) + "'");
    return *t;
  }

  void guard_source(const Transition& t) const {
    if (is_current(t.source)) {
      throw Error("ERR_ACTIVE_ELEMENT", "'" + t.source + "' is executing in " + def.name);
    }
  }
};

Adaptation::Adaptation(Runtime& rt, std::string target) : rt_(rt), target_(std::move(target)) {}

Adaptation& Adaptation::replace_model(std::string model_id, std::string handle) {
  steps_.push_back([model_id, handle](Draft& d) {
    const ModelDecl* m = d.def.find_model(model_id);
    if (m == nullptr) throw Error("ERR_UNKNOWN_ELEMENT", d.def.name + " has no model '" + model_id + "'");
    if (m->payload_kind != PayloadKind::Opaque) {
      throw Error("ERR_UNKNOWN_ELEMENT", "'" + model_id + "' is a megamodel, not a replaceable model");
    }
    if (!d.repo.contains(handle)) throw Error("ERR_UNKNOWN_ELEMENT", "unknown model handle '" + handle + "'");
    d.bindings[model_id] = handle;
    d.bumped.push_back(handle);
    d.events.emplace_back(model_id, "replace_model " + model_id + " -> " + handle);
  });
  return *this;
}

Adaptation& Adaptation::set_condition(std::string transition_id, cond::Expr expr) {
  steps_.push_back([transition_id, expr](Draft& d) {
    Transition& t = d.transition(transition_id);
    d.guard_source(t);
    cond::check_condition(expr);
    for (const auto& ref : cond::references(expr)) {
      if (d.def.resolve(ref) == nullptr) {
        throw Error("ERR_UNRESOLVED_REF", "condition refers to unknown transition " + ref.str());
      }
    }
    t.condition = expr;
    d.events.emplace_back(transition_id, "set_condition " + transition_id + " [" + cond::print(expr) + "]");
  });
  return *this;
}

Adaptation& Adaptation::rewire(std::string transition_id, std::string new_target) {
  steps_.push_back([transition_id, new_target](Draft& d) {
    Transition& t = d.transition(transition_id);
    d.guard_source(t);
    d.events.emplace_back(transition_id, "rewire " + transition_id + ": " + t.target + " -> " + new_target);
    t.target = new_target;
  });
  return *this;
}

Adaptation& Adaptation::add_operation(Operation op) {
  steps_.push_back([op](Draft& d) {
    d.def.operations.push_back(op);
    d.events.emplace_back(op.id, "add_operation " + op.id);
  });
  return *this;
}

Adaptation& Adaptation::add_transition(Transition t) {
  steps_.push_back([t](Draft& d) mutable {
    if (const Operation* src = d.def.find_operation(t.source); src != nullptr && d.is_current(t.source)) {
      throw Error("ERR_ACTIVE_ELEMENT", "'" + src->id + "' is executing in " + d.def.name);
    }
    if (t.id.empty()) t.id = derived_transition_id(d.def, t);
    d.events.emplace_back(t.id, "add_transition " + t.id);
    d.def.transitions.push_back(std::move(t));
  });
  return *this;
}

Adaptation& Adaptation::remove_operation(std::string op_id) {
  steps_.push_back([op_id](Draft& d) {
    if (d.def.find_operation(op_id) == nullptr) {
      throw Error("ERR_UNKNOWN_ELEMENT", d.def.name + " has no operation '" + op_id + "'");
    }
    if (d.is_current(op_id)) throw Error("ERR_ACTIVE_ELEMENT", "'" + op_id + "' is executing in " + d.def.name);
    auto& ops = d.def.operations;
    ops.erase(std::remove_if(ops.begin(), ops.end(), [&](const Operation& o) { return o.id == op_id; }), ops.end());
    auto& ts = d.def.transitions;
    ts.erase(std::remove_if(ts.begin(), ts.end(),
                            [&](const Transition& t) { return t.source == op_id || t.target == op_id; }),
             ts.end());
    d.events.emplace_back(op_id, "remove_operation " + op_id);
  });
  return *this;
}

Adaptation& Adaptation::remove_transition(std::string transition_id) {
  steps_.push_back([transition_id](Draft& d) {
    d.guard_source(d.transition(transition_id));
    auto& ts = d.def.transitions;
    ts.erase(std::remove_if(ts.begin(), ts.end(), [&](const Transition& t) { return t.id == transition_id; }), ts.end());
    d.events.emplace_back(transition_id, "remove_transition " + transition_id);
  });
  return *this;
}

void Adaptation::commit() {
  Runtime::Entry& e = rt_.entry(target_);
  Draft d{e.def, e.bindings, e.ctx, rt_.repo_, {}, {}};
  for (const auto& step : steps_) step(d);

  Catalog scope = rt_.catalog();
  scope[target_] = d.def;
  ValidationReport report = validate(d.def, scope);
  for (const auto& [name, other] : scope) {
    if (name == target_) continue;
    for (auto& diag : validate(other, scope)) report.push_back(std::move(diag));
  }
  if (!report.empty()) throw InvalidDefinition(std::move(report));

  std::map<std::string, cond::TransitionInfo, std::less<>> info;
  for (const auto& t : d.def.transitions) {
    auto it = e.ctx.info.find(t.id);
    info[t.id] = it != e.ctx.info.end() ? it->second : cond::TransitionInfo{};
  }
  e.def = std::move(d.def);
  e.bindings = std::move(d.bindings);
  e.ctx.info = std::move(info);
  for (const auto& h : d.bumped) rt_.repo_.touch(h);
  for (const auto& [element, description] : d.events) {
    rt_.emit(TraceKind::Adaptation, target_, element, description);
  }
}

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(std::unique_ptr<Clock> clock) : clock_(std::move(clock)) {}

Runtime::Entry& Runtime::entry(std::string_view megamodel) {
  return const_cast<Entry&>(std::as_const(*this).entry(megamodel));
}

const Runtime::Entry& Runtime::entry(std::string_view megamodel) const {
  auto it = megamodels_.find(megamodel);
  if (it == megamodels_.end()) {
    throw Error("ERR_UNKNOWN_MEGAMODEL", "megamodel '" + std::string(megamodel) + "' is not registered");
  }
  return it->second;
}

bool Runtime::contains(std::string_view megamodel) const { return megamodels_.find(megamodel) != megamodels_.end(); }
const MegamodelDef& Runtime::definition(std::string_view megamodel) const { return entry(megamodel).def; }
const ExecutionContext& Runtime::context(std::string_view megamodel) const { return entry(megamodel).ctx; }

std::string Runtime::binding(std::string_view megamodel, std::string_view model_id) const {
  const Entry& e = entry(megamodel);
  auto it = e.bindings.find(model_id);
  if (it == e.bindings.end()) {
    throw Error("ERR_UNKNOWN_ELEMENT", std::string(megamodel) + " has no model '" + std::string(model_id) + "'");
  }
  return it->second;
}

Catalog Runtime::catalog() const {
  Catalog out;
  for (const auto& [name, e] : megamodels_) out.emplace(name, e.def);
  return out;
}

std::vector<std::string> Runtime::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : megamodels_) out.push_back(name);
  return out;
}

Runtime::Entry Runtime::make_entry(MegamodelDef def) {
  Entry e;
  for (const auto& m : def.models) {
    if (m.payload_kind == PayloadKind::Megamodel) {
      e.bindings[m.id] = *m.megamodel_ref;
    } else {
      e.bindings[m.id] = m.id;
      repo_.ensure(m.id);
    }
  }
  e.ctx.megamodel = def.name;
  for (const auto& t : def.transitions) e.ctx.info[t.id] = {};
  e.def = std::move(def);
  return e;
}

void Runtime::register_megamodel(MegamodelDef def) {
  std::vector<MegamodelDef> one;
  one.push_back(std::move(def));
  register_all(std::move(one));
}

void Runtime::register_all(std::vector<MegamodelDef> defs) {
  std::set<std::string> batch;
  for (const auto& d : defs) {
    if (contains(d.name) || !batch.insert(d.name).second) {
      throw Error("ERR_DUPLICATE_NAME", "megamodel '" + d.name + "' is already registered");
    }
  }
  Catalog scope = catalog();
  for (const auto& d : defs) scope.emplace(d.name, d);
  ValidationReport report;
  for (const auto& d : defs) {
    for (auto& diag : validate(d, scope)) report.push_back(std::move(diag));
  }
  if (!report.empty()) throw InvalidDefinition(std::move(report));
  for (auto& d : defs) {
    std::string name = d.name;
    megamodels_.emplace(std::move(name), make_entry(std::move(d)));
  }
}

void Runtime::bind_behavior(std::string key, Behavior behavior) { behaviors_[std::move(key)] = std::move(behavior); }

void Runtime::adapt_replace_model(std::string_view megamodel, std::string_view model_id, std::string_view handle) {
  adapt(megamodel).replace_model(std::string(model_id), std::string(handle)).commit();
}

void Runtime::adapt_set_condition(std::string_view megamodel, std::string_view transition_id, const cond::Expr& expr) {
  adapt(megamodel).set_condition(std::string(transition_id), expr).commit();
}

void Runtime::adapt_rewire(std::string_view megamodel, std::string_view transition_id, std::string_view new_target) {
  adapt(megamodel).rewire(std::string(transition_id), std::string(new_target)).commit();
}

void Runtime::adapt_add_operation(std::string_view megamodel, Operation op, std::vector<Transition> transitions) {
  Adaptation a = adapt(megamodel);
  a.add_operation(std::move(op));
  for (auto& t : transitions) a.add_transition(std::move(t));
  a.commit();
}

void Runtime::adapt_remove_operation(std::string_view megamodel, std::string_view op_id) {
  adapt(megamodel).remove_operation(std::string(op_id)).commit();
}

Adaptation Runtime::adapt(std::string_view megamodel) {
  entry(megamodel);
  return Adaptation(*this, std::string(megamodel));
}

void Runtime::emit(TraceKind kind, const std::string& megamodel, std::optional<std::string> op,
                   std::optional<std::string> status) {
  TraceEvent ev;
  ev.kind = kind;
  ev.megamodel = megamodel;
  ev.op = std::move(op);
  ev.status = std::move(status);
  ev.clock = clock_->now();
  clock_->on_event();
  if (trace_ != nullptr) {
    ev.seq = seq_++;
    trace_->push_back(ev);
  } else {
    ev.seq = idle_seq_++;
    idle_events_.push_back(ev);
  }
  if (observer_) observer_(ev);
}

RunResult Runtime::run(std::string_view megamodel, std::string_view entry_op, const RunOptions& options) {
  if (running_) throw Error("ERR_REENTRANT", "a run is already in progress");
  const Entry& e = entry(megamodel);
  const Operation* start = e.def.find_operation(entry_op);
  if (start == nullptr || !start->is_initial()) {
    throw Error("ERR_UNKNOWN_ENTRY", "'" + std::string(entry_op) + "' is not an initial operation of " + e.def.name);
  }
  if (e.ctx.active) throw Error("ERR_REENTRANT", "megamodel '" + e.def.name + "' is already active");

  RunResult result;
  running_ = true;
  trace_ = &result.trace;
  seq_ = 0;
  std::uint64_t steps = 0;
  try {
    result.final_op = execute(e.def.name, std::string(entry_op), steps, options);
  } catch (const Fault& f) {
    result.fault = f.code;
    result.fault_message = f.message;
    emit(TraceKind::Fault, f.megamodel, f.op, f.code);
    for (auto& [name, other] : megamodels_) {
      other.ctx.active = false;
      other.ctx.current.reset();
    }
  }
  trace_ = nullptr;
  running_ = false;
  return result;
}

std::string Runtime::execute(const std::string& name, const std::string& entry_op, std::uint64_t& steps,
                             const RunOptions& options) {
  Entry& e = entry(name);
  auto fault = [&](std::string code, std::string message) {
    return Fault{std::move(code), std::move(message), name, e.ctx.current};
  };
  if (e.ctx.active) throw Fault{"ERR_REENTRANT", "megamodel '" + name + "' is already active", name, std::nullopt};
  e.ctx.active = true;
  e.ctx.current = entry_op;
  emit(TraceKind::RunStart, name);

  for (;;) {
    if (++steps > options.max_steps) throw fault("ERR_STEP_LIMIT", "step limit exceeded");
    const Operation* op = e.def.find_operation(*e.ctx.current);
    if (op == nullptr) throw fault("ERR_UNKNOWN_ELEMENT", "current operation vanished");
    const std::string op_id = op->id;

    if (op->is_final()) {
      emit(TraceKind::RunEnd, name, op_id);
      e.ctx.active = false;
      e.ctx.current.reset();
      return op_id;
    }

    if (op->is_initial()) {
      auto out = e.def.outgoing(op_id);
      if (out.size() != 1) throw fault("ERR_NO_TRANSITION", "initial '" + op_id + "' has no unique transition");
      take(e, *out.front());
      continue;
    }

    if (op->is_decision()) {
      const Transition* chosen = nullptr;
      const Transition* fallback = nullptr;
      for (const Transition* t : e.def.outgoing(op_id)) {
        if (t->is_default) {
          fallback = fallback != nullptr ? fallback : t;
          continue;
        }
        if (!t->condition) continue;
        bool holds = false;
        try {
          holds = evaluate_condition(e, *t->condition);
        } catch (const Error& err) {
          throw fault(err.code(), err.what());
        }
        if (holds) {
          chosen = t;
          break;
        }
      }
      chosen = chosen != nullptr ? chosen : fallback;
      if (chosen == nullptr) throw fault("ERR_NO_TRANSITION", "no branch of '" + op_id + "' applies");
      take(e, *chosen);
      continue;
    }

    std::string status;
    if (const ModelOp* mop = op->model_op()) {
      const ModelOp copy = *mop;
      const Operation op_copy = *op;
      emit(TraceKind::OpEnter, name, op_id);
      status = invoke(e, op_copy, copy);
      emit(TraceKind::OpExit, name, op_id, status);
      const Operation* now_op = e.def.find_operation(op_id);
      const ModelOp* now_mop = now_op != nullptr ? now_op->model_op() : nullptr;
      if (now_mop == nullptr ||
          std::find(now_mop->statuses.begin(), now_mop->statuses.end(), status) == now_mop->statuses.end()) {
        throw fault("ERR_BAD_STATUS", "behavior '" + copy.behavior + "' returned undeclared status '" + status + "'");
      }
    } else if (const MegamodelCall* call = op->call()) {
      const MegamodelCall copy = *call;
      emit(TraceKind::CallEnter, name, op_id);
      std::string fin = execute(copy.callee, copy.entry, steps, options);
      const Operation* now_op = e.def.find_operation(op_id);
      const MegamodelCall* now_call = now_op != nullptr ? now_op->call() : nullptr;
      auto mapped = now_call != nullptr ? now_call->status_for(fin) : std::nullopt;
      if (!mapped) throw fault("ERR_UNMAPPED_FINAL", "final '" + fin + "' of " + copy.callee + " is not mapped");
      status = *mapped;
      emit(TraceKind::CallExit, name, op_id, status);
    }

    const Transition* next = nullptr;
    for (const Transition* t : e.def.outgoing(op_id)) {
      if (t->status == status) {
        next = t;
        break;
      }
    }
    if (next == nullptr) throw fault("ERR_NO_TRANSITION", "no transition for status '" + status + "' of '" + op_id + "'");
    take(e, *next);
  }
}

std::string Runtime::invoke(Entry& e, const Operation& op, const ModelOp& mop) {
  auto fault = [&](std::string code, std::string message) {
    return Fault{std::move(code), std::move(message), e.def.name, op.id};
  };
  auto it = behaviors_.find(mop.behavior);
  if (it == behaviors_.end()) throw fault("ERR_UNBOUND_BEHAVIOR", "no behavior bound to '" + mop.behavior + "'");
  for (const auto& use : mop.uses) {
    auto b = e.bindings.find(use.model);
    if (b == e.bindings.end()) throw fault("ERR_UNKNOWN_ELEMENT", "unbound model '" + use.model + "'");
    const ModelDecl* decl = e.def.find_model(use.model);
    bool mega = decl != nullptr && decl->payload_kind == PayloadKind::Megamodel;
    if (mega ? !contains(b->second) : !repo_.contains(b->second)) {
      throw fault("ERR_MISSING_MODEL", "model '" + use.model + "' resolves to missing '" + b->second + "'");
    }
  }
  OperationContext ctx(*this, e.def.name, op.id, clock_->now());
  try {
    return it->second(ctx);
  } catch (const Error& err) {
    throw fault(err.code(), err.what());
  } catch (const std::exception& ex) {
    throw fault("ERR_BEHAVIOR", ex.what());
  }
}

namespace {

class ContextView final : public cond::InfoView {
 public:
  ContextView(const MegamodelDef& def, const ExecutionContext& ctx) : def_(def), ctx_(ctx) {}

  std::optional<cond::TransitionInfo> lookup(const cond::TransitionRef& ref) const override {
    const Transition* t = def_.resolve(ref);
    if (t == nullptr) return std::nullopt;
    auto it = ctx_.info.find(t->id);
    if (it == ctx_.info.end()) return cond::TransitionInfo{};
    return it->second;
  }

 private:
  const MegamodelDef& def_;
  const ExecutionContext& ctx_;
};

}  // namespace

bool Runtime::evaluate_condition(const Entry& e, const cond::Expr& expr) {
  return cond::evaluate(expr, ContextView(e.def, e.ctx), clock_->now());
}

void Runtime::take(Entry& e, const Transition& t) {
  const std::string id = t.id;
  const std::string target = t.target;
  const std::int64_t now = clock_->now();
  for (const Transition* s : e.def.outgoing(t.source)) {
    auto& info = e.ctx.info[s->id];
    if (s->id == id) {
      info.count = 0;
      info.taken = true;
      info.time = now;
    } else {
      ++info.count;
    }
  }
  e.ctx.current = target;
  emit(TraceKind::TransitionTaken, e.def.name, id);
}

}  // namespace mmrt
