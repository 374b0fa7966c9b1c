#pragma once

// Test helpers shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmrt/harness.hpp"
#include "mmrt/metamodel.hpp"
#include "mmrt/runtime.hpp"
#include "mmrt/text_format.hpp"

namespace mmrt::testing {

inline std::string source_path(const std::string& rel) { return std::string(MMRT_SOURCE_DIR) + "/" + rel; }
inline std::string scenario(const std::string& file) { return source_path("scenarios/" + file); }

/// The ERR_* code thrown by `f`, or "" if it returns normally.
template <class F>
std::string error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::vector<MegamodelDef> load(std::initializer_list<std::string> scenario_files) {
  std::vector<MegamodelDef> out;
  for (const auto& f : scenario_files) {
    for (auto& d : load_megamodel_file(scenario(f))) out.push_back(std::move(d));
  }
  return out;
}

inline Catalog catalog_of(const std::vector<MegamodelDef>& defs) {
  Catalog c;
  for (const auto& d : defs) c.emplace(d.name, d);
  return c;
}

inline std::set<std::string> codes_of(const ValidationReport& r) {
  std::set<std::string> out;
  for (const auto& d : r) out.insert(d.code);
  return out;
}

/// A runtime with a logical clock, the stock harness and the given files.
struct Scenario {
  Runtime rt{std::make_unique<LogicalClock>()};
  Harness harness;

  Scenario(std::vector<MegamodelDef> defs, HarnessConfig config = {}, std::vector<ScriptEvent> script = {})
      : harness(std::move(config), std::move(script)) {
    harness.install(rt);
    rt.register_all(std::move(defs));
  }

  RunResult run(std::uint64_t i, const std::string& megamodel, const std::string& entry) {
    harness.begin_run(i);
    return rt.run(megamodel, entry);
  }
};

inline ScriptEvent fail_event(std::uint64_t at, std::string component, std::string kind, std::string cure) {
  ScriptEvent e;
  e.at_run = at;
  e.type = ScriptEvent::Type::FailComponent;
  e.component = std::move(component);
  e.failure_kind = std::move(kind);
  e.cure = std::move(cure);
  return e;
}

inline ScriptEvent load_event(std::uint64_t at, std::string component, std::int64_t value) {
  ScriptEvent e;
  e.at_run = at;
  e.type = ScriptEvent::Type::SetLoad;
  e.component = std::move(component);
  e.value = value;
  return e;
}

// ---------------------------------------------------------------------------
// Random megamodels

/// Callee used by generated MegamodelCalls: finals X and Y.
inline MegamodelDef library_megamodel() {
  return parse_megamodels(R"(
megamodel Lib {
  initial S;
  final X;
  final Y;
  decision Pick;
  op Work : Other behavior "pick" {
    status a, b;
  }
  S -> Work;
  Work.a -> Pick;
  Work.b -> Y;
  Pick -> [count(Work.b) > 1] X;
  Pick -> else Y;
}
)")
      .front();
}

struct GenOptions {
  int max_ops = 8;
  bool calls = true;
  bool decorations = true;  // names, stereotypes, models, uses
  bool division = true;
  /// Off for inline-equivalence checks: inlining drops call events, which
  /// shifts the logical clock, and call exits have no exact counterpart.
  bool clock_refs = true;
  bool call_exit_refs = true;
  int max_calls = 8;
};

class MegamodelGenerator {
 public:
  explicit MegamodelGenerator(std::uint64_t seed, GenOptions opts = {}) : rng_(seed), opts_(opts) {}

  /// A megamodel that validates against {Lib}.
  MegamodelDef next(const std::string& name) {
    Catalog cat;
    cat.emplace("Lib", library_megamodel());
    for (;;) {
      MegamodelDef d = attempt(name);
      if (validate(d, cat).empty()) return d;
    }
  }

  cond::Expr condition(const MegamodelDef& d, int depth) { return boolean_expr(d, depth); }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

 private:
  MegamodelDef attempt(const std::string& name) {
    MegamodelDef d;
    d.name = name;
    const int total = uniform(3, opts_.max_ops);
    const int initials = total >= 5 && coin(0.3) ? 2 : 1;
    const int finals = total - initials >= 3 && coin(0.4) ? 2 : 1;
    const int inner = total - initials - finals;

    if (opts_.decorations) {
      for (int i = 0, n = uniform(0, 3); i < n; ++i) {
        ModelDecl m;
        m.id = "M" + std::to_string(i);
        m.name = coin(0.3) ? "Model number " + std::to_string(i) : m.id;
        if (coin(0.5)) m.stereotypes.push_back(coin() ? "ReflectionModel" : "EvaluationModel");
        if (coin(0.2)) m.stereotypes.push_back("ChangeModel");
        if (coin(0.15)) {
          m.payload_kind = PayloadKind::Megamodel;
          m.megamodel_ref = "Lib";
        }
        d.models.push_back(std::move(m));
      }
    }

    std::vector<std::string> initial_ids, inner_ids, final_ids;
    int calls = 0;
    for (int i = 0; i < initials; ++i) {
      initial_ids.push_back("I" + std::to_string(i));
      d.operations.push_back({initial_ids.back(), initial_ids.back(), InitialOp{}, {}});
    }
    for (int i = 0; i < inner; ++i) {
      Operation op;
      op.id = "N" + std::to_string(i);
      op.name = opts_.decorations && coin(0.2) ? "Step " + std::to_string(i) : op.id;
      int kind = uniform(0, 9);
      if (kind < 6) {
        ModelOp mop;
        mop.behavior = "pick";
        mop.step = static_cast<StepKind>(uniform(0, 4));
        for (int s = 0, n = uniform(1, 3); s < n; ++s) mop.statuses.push_back("s" + std::to_string(s));
        for (const auto& m : d.models) {
          if (coin(0.4)) mop.uses.push_back({m.id, static_cast<UseMode>(uniform(0, 2))});
        }
        op.kind = mop;
      } else if (kind < 8 || !opts_.calls || calls >= opts_.max_calls) {
        op.kind = DecisionOp{};
      } else {
        MegamodelCall call;
        call.callee = "Lib";
        call.entry = "S";
        call.final_mapping = {{"X", "x"}, {"Y", "y"}};
        if (coin()) std::swap(call.final_mapping[0], call.final_mapping[1]);
        op.kind = call;
        ++calls;
      }
      inner_ids.push_back(op.id);
      d.operations.push_back(std::move(op));
    }
    for (int i = 0; i < finals; ++i) {
      final_ids.push_back("F" + std::to_string(i));
      d.operations.push_back({final_ids.back(), final_ids.back(), FinalOp{}, {}});
    }
    if (coin(0.5)) std::shuffle(d.operations.begin(), d.operations.end(), rng_);

    std::vector<std::string> targets = inner_ids;
    targets.insert(targets.end(), final_ids.begin(), final_ids.end());
    auto pick_target = [&]() { return targets[uniform(0, static_cast<int>(targets.size()) - 1)]; };

    for (const auto& i : initial_ids) add(d, i, pick_target(), std::nullopt);
    for (const auto& id : inner_ids) {
      const Operation& op = *d.find_operation(id);
      if (const ModelOp* mop = op.model_op()) {
        for (const auto& s : mop->statuses) add(d, id, pick_target(), s);
      } else if (const MegamodelCall* call = op.call()) {
        for (const auto& [fin, s] : call->final_mapping) add(d, id, pick_target(), s);
      } else {
        std::vector<std::string> pool = targets;
        std::shuffle(pool.begin(), pool.end(), rng_);
        int branches = std::min<int>(uniform(1, 3), static_cast<int>(pool.size()));
        for (int b = 0; b < branches; ++b) {
          Transition& t = add(d, id, pool[b], std::nullopt);
          t.is_default = b == branches - 1;
        }
      }
    }
    // Conditions need the finished transition set to pick references from.
    for (auto& t : d.transitions) {
      if (d.find_operation(t.source)->is_decision() && !t.is_default) t.condition = boolean_expr(d, 3);
    }
    if (coin(0.3) && !d.transitions.empty()) {
      auto& t = d.transitions[uniform(0, static_cast<int>(d.transitions.size()) - 1)];
      t.id = "T" + std::to_string(uniform(0, 999));
    }
    if (coin(0.3)) std::shuffle(d.transitions.begin(), d.transitions.end(), rng_);
    return d;
  }

  Transition& add(MegamodelDef& d, const std::string& src, const std::string& dst, std::optional<std::string> status) {
    Transition t;
    t.source = src;
    t.target = dst;
    t.status = std::move(status);
    d.transitions.push_back(std::move(t));
    Transition& ref = d.transitions.back();
    ref.id = derived_transition_id(d, ref);
    return ref;
  }

  cond::TransitionRef random_ref(const MegamodelDef& d) {
    std::vector<const Transition*> pool;
    for (const auto& t : d.transitions) {
      if (opts_.call_exit_refs || d.find_operation(t.source)->call() == nullptr) pool.push_back(&t);
    }
    if (pool.empty()) pool.push_back(&d.transitions.front());
    const Transition& t = *pool[uniform(0, static_cast<int>(pool.size()) - 1)];
    return {t.source, transition_label(d, t)};
  }

  cond::Expr int_expr(const MegamodelDef& d, int depth) {
    using namespace cond;
    int pick = uniform(0, depth > 0 ? 6 : 3);
    switch (pick) {
      case 0: return lit(uniform(-20, 20));
      case 1: return count(random_ref(d));
      case 2: return opts_.clock_refs ? time(random_ref(d)) : count(random_ref(d));
      case 3: return opts_.clock_refs && coin(0.3) ? now() : lit(uniform(0, 9));
      default: {
        auto op = static_cast<ArithOp>(uniform(0, opts_.division ? 3 : 2));
        Expr rhs = op == ArithOp::Div ? lit(uniform(1, 5)) : int_expr(d, depth - 1);
        return arith(op, int_expr(d, depth - 1), rhs);
      }
    }
  }

  cond::Expr boolean_expr(const MegamodelDef& d, int depth) {
    using namespace cond;
    int pick = uniform(0, depth > 0 ? 6 : 2);
    switch (pick) {
      case 0: return compare(static_cast<CmpOp>(uniform(0, 5)), int_expr(d, depth), int_expr(d, depth));
      case 1: return coin(0.5) ? taken(random_ref(d)) : boolean(coin());
      case 2: return compare(static_cast<CmpOp>(uniform(0, 5)), count(random_ref(d)), lit(uniform(0, 6)));
      case 3: return negate(boolean_expr(d, depth - 1));
      default:
        return logic(coin() ? LogicOp::And : LogicOp::Or, boolean_expr(d, depth - 1), boolean_expr(d, depth - 1));
    }
  }

  std::mt19937_64 rng_;
  GenOptions opts_;
};

/// Behavior that returns a pseudo-random declared status of the running op.
inline Behavior random_status_behavior(Runtime& rt, std::shared_ptr<std::mt19937_64> rng) {
  return [&rt, rng](OperationContext& ctx) {
    const ModelOp* mop = rt.definition(ctx.megamodel()).find_operation(ctx.operation())->model_op();
    std::uniform_int_distribution<std::size_t> pick(0, mop->statuses.size() - 1);
    return mop->statuses[pick(*rng)];
  };
}

}  // namespace mmrt::testing
