#include "mmrt/metamodel.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mmrt {

std::ostream& operator<<(std::ostream& os, const SourceSpan& span) {
  os << (span.file.empty() ? "<input>" : span.file) << ':' << span.line << ':' << span.column;
  return os;
}

std::optional<std::string> MegamodelCall::status_for(std::string_view final_id) const {
  for (const auto& [fin, status] : final_mapping) {
    if (fin == final_id) return status;
  }
  return std::nullopt;
}

const Operation* MegamodelDef::find_operation(std::string_view id) const {
  for (const auto& op : operations) {
    if (op.id == id) return &op;
  }
  return nullptr;
}

Operation* MegamodelDef::find_operation(std::string_view id) {
  return const_cast<Operation*>(std::as_const(*this).find_operation(id));
}

const Transition* MegamodelDef::find_transition(std::string_view id) const {
  for (const auto& t : transitions) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

Transition* MegamodelDef::find_transition(std::string_view id) {
  return const_cast<Transition*>(std::as_const(*this).find_transition(id));
}

const ModelDecl* MegamodelDef::find_model(std::string_view id) const {
  for (const auto& m : models) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

std::vector<const Transition*> MegamodelDef::outgoing(std::string_view op) const {
  std::vector<const Transition*> out;
  for (const auto& t : transitions) {
    if (t.source == op) out.push_back(&t);
  }
  return out;
}

std::string transition_label(const MegamodelDef& def, const Transition& t) {
  const Operation* src = def.find_operation(t.source);
  if (src != nullptr && src->has_statuses()) return t.status.value_or("");
  return t.target;
}

std::string derived_transition_id(const MegamodelDef& def, const Transition& t) {
  return t.source + "." + transition_label(def, t);
}

const Transition* MegamodelDef::resolve(const cond::TransitionRef& ref) const {
  const Transition* found = nullptr;
  for (const auto& t : transitions) {
    if (t.source != ref.operation || transition_label(*this, t) != ref.label) continue;
    if (found != nullptr) return nullptr;
    found = &t;
  }
  return found;
}

std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::Monitor: return "Monitor";
    case StepKind::Analyze: return "Analyze";
    case StepKind::Plan: return "Plan";
    case StepKind::Execute: return "Execute";
    case StepKind::Other: return "Other";
  }
  return "Other";
}

std::string_view to_string(UseMode m) {
  switch (m) {
    case UseMode::Read: return "reads";
    case UseMode::Write: return "writes";
    case UseMode::Annotate: return "annotates";
  }
  return "reads";
}

std::optional<StepKind> step_kind_from(std::string_view s) {
  for (StepKind k : {StepKind::Monitor, StepKind::Analyze, StepKind::Plan, StepKind::Execute, StepKind::Other}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation

const std::vector<std::string>& diagnostic_codes() {
  static const std::vector<std::string> codes = {
      "E_EMPTY_ID",           "E_DUP_ID",          "E_PAYLOAD_KIND",        "E_DANGLING_REF",
      "E_NO_INITIAL",         "E_NO_FINAL",        "E_NO_STATUSES",         "E_DUP_STATUS",
      "E_BAD_ENTRY",          "E_DUP_MAPPING",     "E_UNMAPPED_FINAL",      "E_FINAL_OUTGOING",
      "E_INITIAL_INCOMING",   "E_INITIAL_OUTGOING", "E_STATUS_NOT_ALLOWED", "E_CONDITION_NOT_ALLOWED",
      "E_DEFAULT_NOT_ALLOWED", "E_MISSING_CONDITION", "E_DEFAULT_CONDITION", "E_NO_DEFAULT",
      "E_MULTI_DEFAULT",      "E_DUP_EDGE",        "E_STATUS_MISMATCH",     "E_COND_REF",
      "E_COND_TYPE",          "E_UNREACHABLE",
  };
  return codes;
}

namespace {

class Validator {
 public:
  Validator(const MegamodelDef& def, const Catalog& catalog) : def_(def), catalog_(catalog) {}

  ValidationReport run() {
    check_ids();
    check_models();
    check_operations();
    check_transitions();
    check_sources();
    check_reachability();
    return std::move(report_);
  }

 private:
  void emit(std::string code, const std::string& element, std::string message, const SourceSpan& span) {
    report_.push_back({std::move(code), element, std::move(message), span});
  }

  const MegamodelDef* lookup(std::string_view name) const {
    if (name == def_.name) return &def_;
    auto it = catalog_.find(name);
    return it == catalog_.end() ? nullptr : &it->second;
  }

  void check_ids() {
    if (def_.name.empty()) emit("E_EMPTY_ID", "", "megamodel has an empty name", def_.span);
    std::set<std::string, std::less<>> seen;
    auto visit = [&](const std::string& id, const SourceSpan& span, const char* what) {
      if (id.empty()) {
        emit("E_EMPTY_ID", id, std::string(what) + " has an empty id", span);
        return;
      }
      if (!seen.insert(id).second) emit("E_DUP_ID", id, "duplicate element id '" + id + "'", span);
    };
    for (const auto& m : def_.models) visit(m.id, m.span, "model");
    for (const auto& op : def_.operations) visit(op.id, op.span, "operation");
    for (const auto& t : def_.transitions) visit(t.id, t.span, "transition");
  }

  void check_models() {
    for (const auto& m : def_.models) {
      bool is_mega = m.payload_kind == PayloadKind::Megamodel;
      if (is_mega != m.megamodel_ref.has_value()) {
        emit("E_PAYLOAD_KIND", m.id, "megamodel payload kind and megamodel reference disagree", m.span);
        continue;
      }
      if (is_mega && lookup(*m.megamodel_ref) == nullptr) {
        emit("E_DANGLING_REF", m.id, "unknown megamodel '" + *m.megamodel_ref + "'", m.span);
      }
    }
  }

  void check_operations() {
    std::size_t initials = 0;
    std::size_t finals = 0;
    for (const auto& op : def_.operations) {
      if (op.is_initial()) ++initials;
      if (op.is_final()) ++finals;
      if (const ModelOp* mop = op.model_op()) check_model_op(op, *mop);
      if (const MegamodelCall* call = op.call()) check_call(op, *call);
    }
    if (initials == 0) emit("E_NO_INITIAL", def_.name, "megamodel has no initial operation", def_.span);
    if (finals == 0) emit("E_NO_FINAL", def_.name, "megamodel has no final operation", def_.span);
  }

  void check_model_op(const Operation& op, const ModelOp& mop) {
    if (mop.statuses.empty()) emit("E_NO_STATUSES", op.id, "model operation declares no status", op.span);
    std::set<std::string> seen;
    for (const auto& s : mop.statuses) {
      if (!seen.insert(s).second) emit("E_DUP_STATUS", op.id, "status '" + s + "' declared twice", op.span);
    }
    for (const auto& use : mop.uses) {
      if (def_.find_model(use.model) == nullptr) {
        emit("E_DANGLING_REF", op.id, "operation uses unknown model '" + use.model + "'", op.span);
      }
    }
  }

  void check_call(const Operation& op, const MegamodelCall& call) {
    std::set<std::string> keys;
    std::set<std::string> values;
    for (const auto& [fin, status] : call.final_mapping) {
      if (!keys.insert(fin).second) emit("E_DUP_MAPPING", op.id, "final '" + fin + "' mapped twice", op.span);
      if (!values.insert(status).second) {
        emit("E_DUP_MAPPING", op.id, "status '" + status + "' used by two mapped finals", op.span);
      }
    }
    const MegamodelDef* callee = lookup(call.callee);
    if (callee == nullptr) {
      emit("E_DANGLING_REF", op.id, "call to unknown megamodel '" + call.callee + "'", op.span);
      return;
    }
    const Operation* entry = callee->find_operation(call.entry);
    if (entry == nullptr || !entry->is_initial()) {
      emit("E_BAD_ENTRY", op.id, "'" + call.entry + "' is not an initial operation of " + call.callee, op.span);
    }
    for (const auto& fin : keys) {
      const Operation* f = callee->find_operation(fin);
      if (f == nullptr || !f->is_final()) {
        emit("E_UNMAPPED_FINAL", op.id, "'" + fin + "' is not a final operation of " + call.callee, op.span);
      }
    }
    for (const auto& cop : callee->operations) {
      if (cop.is_final() && keys.count(cop.id) == 0) {
        emit("E_UNMAPPED_FINAL", op.id, "final '" + cop.id + "' of " + call.callee + " has no mapping", op.span);
      }
    }
  }

  void check_transitions() {
    for (const auto& t : def_.transitions) {
      const Operation* src = def_.find_operation(t.source);
      const Operation* dst = def_.find_operation(t.target);
      if (src == nullptr) emit("E_DANGLING_REF", t.id, "unknown source operation '" + t.source + "'", t.span);
      if (dst == nullptr) emit("E_DANGLING_REF", t.id, "unknown target operation '" + t.target + "'", t.span);
      if (src == nullptr || dst == nullptr) continue;

      if (src->is_final()) emit("E_FINAL_OUTGOING", t.id, "final operation '" + src->id + "' has an outgoing transition", t.span);
      if (dst->is_initial()) {
        emit("E_INITIAL_INCOMING", t.id, "initial operation '" + dst->id + "' has an incoming transition", t.span);
      }
      if (!src->has_statuses() && t.status) {
        emit("E_STATUS_NOT_ALLOWED", t.id, "only model operations and calls have exit statuses", t.span);
      }
      if (!src->is_decision()) {
        if (t.condition) emit("E_CONDITION_NOT_ALLOWED", t.id, "conditions are only allowed after decisions", t.span);
        if (t.is_default) emit("E_DEFAULT_NOT_ALLOWED", t.id, "else branches are only allowed after decisions", t.span);
      } else {
        if (!t.condition && !t.is_default) emit("E_MISSING_CONDITION", t.id, "decision branch needs a condition or else", t.span);
        if (t.condition && t.is_default) emit("E_DEFAULT_CONDITION", t.id, "else branch cannot carry a condition", t.span);
      }
      if (t.condition) check_condition(t);
    }
  }

  void check_condition(const Transition& t) {
    try {
      cond::check_condition(*t.condition);
    } catch (const Error& e) {
      emit("E_COND_TYPE", t.id, e.what(), t.span);
    }
    for (const auto& ref : cond::references(*t.condition)) {
      if (def_.resolve(ref) == nullptr) {
        emit("E_COND_REF", t.id, "condition refers to unknown transition " + ref.str(), t.span);
      }
    }
  }

  void check_sources() {
    for (const auto& op : def_.operations) {
      auto out = def_.outgoing(op.id);
      if (op.is_initial()) {
        if (out.size() != 1) {
          emit("E_INITIAL_OUTGOING", op.id, "initial operation needs exactly one outgoing transition", op.span);
        }
      } else if (op.has_statuses()) {
        check_status_cover(op, out);
      } else if (op.is_decision()) {
        std::size_t defaults = 0;
        std::set<std::string> targets;
        for (const Transition* t : out) {
          if (t->is_default) ++defaults;
          if (!targets.insert(t->target).second) {
            emit("E_DUP_EDGE", op.id, "two branches lead to '" + t->target + "'", t->span);
          }
        }
        if (defaults == 0) emit("E_NO_DEFAULT", op.id, "decision has no else branch", op.span);
        if (defaults > 1) emit("E_MULTI_DEFAULT", op.id, "decision has more than one else branch", op.span);
      }
    }
  }

  void check_status_cover(const Operation& op, const std::vector<const Transition*>& out) {
    std::vector<std::string> declared;
    if (const ModelOp* mop = op.model_op()) {
      declared = mop->statuses;
    } else {
      for (const auto& [fin, status] : op.call()->final_mapping) declared.push_back(status);
    }
    std::set<std::string> declared_set(declared.begin(), declared.end());
    std::set<std::string> seen;
    for (const Transition* t : out) {
      if (!t->status) {
        emit("E_STATUS_MISMATCH", t->id, "transition leaving '" + op.id + "' has no status", t->span);
        continue;
      }
      if (!seen.insert(*t->status).second) {
        emit("E_DUP_EDGE", op.id, "status '" + *t->status + "' leaves '" + op.id + "' twice", t->span);
      }
      if (declared_set.count(*t->status) == 0) {
        emit("E_STATUS_MISMATCH", t->id, "'" + *t->status + "' is not a status of '" + op.id + "'", t->span);
      }
    }
    for (const auto& s : declared_set) {
      if (seen.count(s) == 0) {
        emit("E_STATUS_MISMATCH", op.id, "status '" + s + "' of '" + op.id + "' has no transition", op.span);
      }
    }
  }

  void check_reachability() {
    std::set<std::string> reached;
    std::vector<std::string> work;
    for (const auto& op : def_.operations) {
      if (op.is_initial() && reached.insert(op.id).second) work.push_back(op.id);
    }
    if (work.empty()) return;
    while (!work.empty()) {
      std::string cur = std::move(work.back());
      work.pop_back();
      for (const auto& t : def_.transitions) {
        if (t.source == cur && def_.find_operation(t.target) != nullptr && reached.insert(t.target).second) {
          work.push_back(t.target);
        }
      }
    }
    for (const auto& op : def_.operations) {
      if (!op.is_initial() && reached.count(op.id) == 0) {
        emit("E_UNREACHABLE", op.id, "operation '" + op.id + "' is unreachable from every initial", op.span);
      }
    }
  }

  const MegamodelDef& def_;
  const Catalog& catalog_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const MegamodelDef& def, const Catalog& catalog) { return Validator(def, catalog).run(); }

// ---------------------------------------------------------------------------
// Structural equality

namespace {

// Length-prefixed so that the encoding is injective.
void put(std::ostream& os, std::string_view s) { os << s.size() << ':' << s << ';'; }

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<std::string> canonical_elements(const MegamodelDef& def) {
  std::vector<std::string> out;
  for (const auto& m : def.models) {
    std::ostringstream os;
    os << "M";
    put(os, m.id);
    put(os, m.name);
    for (const auto& s : sorted(m.stereotypes)) put(os, s);
    os << '|' << (m.payload_kind == PayloadKind::Megamodel ? 'G' : 'O');
    if (m.megamodel_ref) put(os, *m.megamodel_ref);
    out.push_back(os.str());
  }
  for (const auto& op : def.operations) {
    std::ostringstream os;
    os << "O";
    put(os, op.id);
    put(os, op.name);
    os << op.kind.index();
    if (const ModelOp* mop = op.model_op()) {
      put(os, mop->behavior);
      put(os, to_string(mop->step));
      std::vector<std::string> uses;
      for (const auto& u : mop->uses) uses.push_back(std::string(to_string(u.mode)) + " " + u.model);
      for (const auto& u : sorted(uses)) put(os, u);
      os << '|';
      for (const auto& s : sorted(mop->statuses)) put(os, s);
    }
    if (const MegamodelCall* call = op.call()) {
      put(os, call->callee);
      put(os, call->entry);
      std::vector<std::string> mapping;
      for (const auto& [fin, status] : call->final_mapping) mapping.push_back(fin + "\x1f" + status);
      for (const auto& m : sorted(mapping)) put(os, m);
    }
    out.push_back(os.str());
  }
  for (const auto& t : def.transitions) {
    std::ostringstream os;
    os << "T";
    put(os, t.id);
    put(os, t.source);
    put(os, t.target);
    os << (t.status ? 'S' : '-');
    if (t.status) put(os, *t.status);
    os << (t.condition ? 'C' : '-');
    if (t.condition) put(os, cond::print(*t.condition));
    os << (t.is_default ? 'D' : '-');
    out.push_back(os.str());
  }
  return sorted(std::move(out));
}

}  // namespace

bool structural_equals(const MegamodelDef& a, const MegamodelDef& b) {
  if (a.name != b.name) return false;
  if (a.models.size() != b.models.size() || a.operations.size() != b.operations.size() ||
      a.transitions.size() != b.transitions.size()) {
    return false;
  }
  return canonical_elements(a) == canonical_elements(b);
}

// ---------------------------------------------------------------------------
// Inlining

namespace {

class Inliner {
 public:
  explicit Inliner(const Catalog& catalog) : catalog_(catalog) {}

  MegamodelDef expand(const MegamodelDef& def) {
    if (std::find(stack_.begin(), stack_.end(), def.name) != stack_.end()) {
      std::string chain;
      for (const auto& n : stack_) chain += n + " -> ";
      throw Error("ERR_RECURSIVE_CALL", "recursive megamodel call chain " + chain + def.name);
    }
    stack_.push_back(def.name);
    root_ = root_ ? root_ : &def;
    MegamodelDef out = def;
    for (;;) {
      auto it = std::find_if(out.operations.begin(), out.operations.end(),
                             [](const Operation& op) { return op.call() != nullptr; });
      if (it == out.operations.end()) break;
      const MegamodelCall call = *it->call();
      const MegamodelDef* callee = lookup(call.callee);
      if (callee == nullptr) throw Error("ERR_UNKNOWN_MEGAMODEL", "unknown megamodel '" + call.callee + "'");
      MegamodelDef flat = expand(*callee);
      splice(out, it->id, call, flat);
    }
    stack_.pop_back();
    return out;
  }

 private:
  const MegamodelDef* lookup(std::string_view name) const {
    if (root_ != nullptr && name == root_->name) return root_;
    auto it = catalog_.find(name);
    return it == catalog_.end() ? nullptr : &it->second;
  }

  static std::set<std::string> all_ids(const MegamodelDef& d) {
    std::set<std::string> ids;
    for (const auto& m : d.models) ids.insert(m.id);
    for (const auto& op : d.operations) ids.insert(op.id);
    for (const auto& t : d.transitions) ids.insert(t.id);
    return ids;
  }

  static std::string fresh(std::set<std::string>& used, const std::string& prefix, const std::string& id) {
    std::string candidate = id;
    if (used.count(candidate) != 0) candidate = prefix + "__" + id;
    for (int n = 2; used.count(candidate) != 0; ++n) candidate = prefix + "__" + id + "_" + std::to_string(n);
    used.insert(candidate);
    return candidate;
  }

  // Transition identity used while rewriting condition references.
  struct Key {
    bool from_callee;
    std::string id;
    auto operator<=>(const Key&) const = default;
  };

  void splice(MegamodelDef& out, const std::string& call_id, const MegamodelCall& call, const MegamodelDef& callee) {
    const MegamodelDef before = out;
    const Operation* entry = callee.find_operation(call.entry);
    auto entry_out = callee.outgoing(call.entry);
    if (entry == nullptr || !entry->is_initial() || entry_out.size() != 1) {
      throw Error("ERR_INLINE_UNSUPPORTED", "call '" + call_id + "' has no usable entry '" + call.entry + "'");
    }

    // Callee operations reachable from the entry (initials and finals dropped).
    std::set<std::string> keep;
    {
      std::vector<std::string> work{entry_out.front()->target};
      while (!work.empty()) {
        std::string cur = work.back();
        work.pop_back();
        const Operation* op = callee.find_operation(cur);
        if (op == nullptr || op->is_final() || op->is_initial() || !keep.insert(cur).second) continue;
        for (const Transition* t : callee.outgoing(cur)) work.push_back(t->target);
      }
    }

    std::set<std::string> used = all_ids(out);
    std::map<std::string, std::string> op_rename;
    for (const auto& op : callee.operations) {
      if (keep.count(op.id) != 0) op_rename[op.id] = fresh(used, call_id, op.id);
    }

    // Where control goes when the callee would reach `target`.
    auto exit_target = [&](const std::string& callee_final) -> std::string {
      auto status = call.status_for(callee_final);
      if (!status) throw Error("ERR_INLINE_UNSUPPORTED", "final '" + callee_final + "' is not mapped by '" + call_id + "'");
      for (const auto& t : before.transitions) {
        if (t.source == call_id && t.status == status) return t.target;
      }
      throw Error("ERR_INLINE_UNSUPPORTED", "call '" + call_id + "' has no transition for status '" + *status + "'");
    };
    auto resolve_target = [&](const std::string& callee_target) -> std::string {
      const Operation* op = callee.find_operation(callee_target);
      if (op != nullptr && op->is_final()) {
        std::string t = exit_target(op->id);
        if (t == call_id) throw Error("ERR_INLINE_UNSUPPORTED", "call '" + call_id + "' loops on itself without work");
        return t;
      }
      return op_rename.at(callee_target);
    };
    const std::string entry_target = resolve_target(entry_out.front()->target);
    // A callee exit that re-enters the call goes back to the entry successor.
    auto caller_target = [&](const std::string& t) { return t == call_id ? entry_target : t; };

    std::map<Key, std::string> new_id;
    MegamodelDef next;
    next.name = out.name;
    next.span = out.span;
    next.models = out.models;
    for (const auto& m : callee.models) {
      if (next.find_model(m.id) == nullptr) next.models.push_back(m);
    }
    for (const auto& op : out.operations) {
      if (op.id == call_id) {
        for (const auto& cop : callee.operations) {
          if (keep.count(cop.id) == 0) continue;
          Operation copy = cop;
          copy.id = op_rename.at(cop.id);
          next.operations.push_back(std::move(copy));
        }
      } else {
        next.operations.push_back(op);
      }
    }

    // Caller transitions: drop the call's exits, retarget its entries.
    for (const auto& t : out.transitions) {
      if (t.source == call_id) continue;
      Transition copy = t;
      bool derived = t.id == derived_transition_id(before, t);
      copy.target = caller_target(t.target);
      if (derived) {
        used.erase(t.id);
        copy.id = fresh(used, call_id, derived_transition_id(next, copy));
      }
      new_id[{false, t.id}] = copy.id;
      next.transitions.push_back(std::move(copy));
    }
    for (const auto& t : callee.transitions) {
      if (keep.count(t.source) == 0) continue;
      Transition copy = t;
      copy.source = op_rename.at(t.source);
      copy.target = caller_target(resolve_target(t.target));
      bool derived = t.id == derived_transition_id(callee, t);
      copy.id = fresh(used, call_id, derived ? derived_transition_id(next, copy) : t.id);
      new_id[{true, t.id}] = copy.id;
      next.transitions.push_back(std::move(copy));
    }

    // Condition references, rewritten to the transitions they meant before.
    auto rewrite = [&](const cond::TransitionRef& ref, bool from_callee) -> cond::TransitionRef {
      const MegamodelDef& scope = from_callee ? callee : before;
      const Transition* old = scope.resolve(ref);
      if (old == nullptr) throw Error("ERR_INLINE_UNSUPPORTED", "unresolved condition reference " + ref.str());
      Key key{from_callee, old->id};
      if (!from_callee && old->source == call_id) {
        // A call exit corresponds to the single callee transition entering
        // the final mapped to that status.
        std::vector<const Transition*> entering;
        for (const auto& ct : callee.transitions) {
          const Operation* tgt = callee.find_operation(ct.target);
          if (keep.count(ct.source) != 0 && tgt != nullptr && tgt->is_final() &&
              call.status_for(tgt->id) == old->status) {
            entering.push_back(&ct);
          }
        }
        if (entering.size() != 1) {
          throw Error("ERR_INLINE_UNSUPPORTED", "condition reference " + ref.str() + " has no unique inlined counterpart");
        }
        key = {true, entering.front()->id};
      }
      const Transition* moved = next.find_transition(new_id.at(key));
      return {moved->source, transition_label(next, *moved)};
    };
    std::set<std::string> copied;
    for (const auto& [k, v] : new_id) {
      if (k.from_callee) copied.insert(v);
    }
    for (auto& t : next.transitions) {
      if (!t.condition) continue;
      bool from_callee = copied.count(t.id) != 0;
      t.condition = rewrite_refs(*t.condition, [&](const cond::TransitionRef& r) { return rewrite(r, from_callee); });
    }
    out = std::move(next);
  }

  template <class F>
  static cond::Expr rewrite_refs(const cond::Expr& e, const F& f) {
    using namespace cond;
    return std::visit(
        [&](const auto& n) -> Expr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Count>) return count(f(n.ref));
          else if constexpr (std::is_same_v<T, Time>) return time(f(n.ref));
          else if constexpr (std::is_same_v<T, Taken>) return taken(f(n.ref));
          else if constexpr (std::is_same_v<T, Arith>) return arith(n.op, rewrite_refs(*n.lhs, f), rewrite_refs(*n.rhs, f));
          else if constexpr (std::is_same_v<T, Compare>) return compare(n.op, rewrite_refs(*n.lhs, f), rewrite_refs(*n.rhs, f));
          else if constexpr (std::is_same_v<T, Logic>) return logic(n.op, rewrite_refs(*n.lhs, f), rewrite_refs(*n.rhs, f));
          else if constexpr (std::is_same_v<T, Not>) return negate(rewrite_refs(*n.operand, f));
          else return e;
        },
        e.node);
  }

  const Catalog& catalog_;
  const MegamodelDef* root_ = nullptr;
  std::vector<std::string> stack_;
};

}  // namespace

MegamodelDef inline_calls(const MegamodelDef& def, const Catalog& catalog) {
  MegamodelDef flat = Inliner(catalog).expand(def);
  Catalog scope = catalog;
  scope.erase(def.name);
  auto report = validate(flat, scope);
  if (!report.empty()) {
    throw Error("ERR_INLINE_UNSUPPORTED", "inlined megamodel is invalid: " + report.front().code + " " + report.front().message);
  }
  return flat;
}

}  // namespace mmrt
